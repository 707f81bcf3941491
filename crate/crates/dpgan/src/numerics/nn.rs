//! Small building blocks shared by the generator and discriminators.

use crate::error::Result;
use crate::numerics::tape::{NodeId, Tape};
use crate::numerics::tensor::Tensor;
use rand::Rng;

/// Weight-init range used for every parameter tensor.
pub const INIT_SCALE: f64 = 0.08;

/// Parameters of a single gated recurrent (LSTM-style) cell.
/// Gate order in the fused matrices: input, forget, output, candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmCell {
    pub wx: Tensor, // [input_dim, 4H]
    pub wh: Tensor, // [H, 4H]
    pub b: Tensor,  // [4H]
    pub hidden: usize,
}

impl LstmCell {
    pub fn init(input_dim: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        LstmCell {
            wx: Tensor::uniform(vec![input_dim, 4 * hidden], INIT_SCALE, rng),
            wh: Tensor::uniform(vec![hidden, 4 * hidden], INIT_SCALE, rng),
            b: Tensor::zeros(vec![4 * hidden]),
            hidden,
        }
    }

    pub fn params(&self) -> Vec<&Tensor> {
        vec![&self.wx, &self.wh, &self.b]
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.wx, &mut self.wh, &mut self.b]
    }
}

/// An [`LstmCell`] bound onto a tape for one forward pass.
#[derive(Debug, Clone, Copy)]
pub struct BoundLstm {
    pub wx: NodeId,
    pub wh: NodeId,
    pub b: NodeId,
    pub hidden: usize,
}

impl BoundLstm {
    pub fn bind(tape: &mut Tape, cell: &LstmCell) -> Self {
        BoundLstm {
            wx: tape.leaf(cell.wx.clone()),
            wh: tape.leaf(cell.wh.clone()),
            b: tape.leaf(cell.b.clone()),
            hidden: cell.hidden,
        }
    }

    /// Leaf ids in the same order as [`LstmCell::params`].
    pub fn param_ids(&self) -> Vec<NodeId> {
        vec![self.wx, self.wh, self.b]
    }

    /// One recurrence step: `x` is `[1, input_dim]`, `h`/`c` are `[1, H]`.
    pub fn step(
        &self,
        tape: &mut Tape,
        x: NodeId,
        h: NodeId,
        c: NodeId,
    ) -> Result<(NodeId, NodeId)> {
        let hs = self.hidden;
        let xz = tape.matmul(x, self.wx)?;
        let hz = tape.matmul(h, self.wh)?;
        let z = tape.add(xz, hz)?;
        let gates = tape.add_row(z, self.b)?;
        let i_raw = tape.slice_cols(gates, 0, hs)?;
        let f_raw = tape.slice_cols(gates, hs, 2 * hs)?;
        let o_raw = tape.slice_cols(gates, 2 * hs, 3 * hs)?;
        let g_raw = tape.slice_cols(gates, 3 * hs, 4 * hs)?;
        let i = tape.sigmoid(i_raw)?;
        let f = tape.sigmoid(f_raw)?;
        let o = tape.sigmoid(o_raw)?;
        let g = tape.tanh(g_raw)?;
        let fc = tape.mul(f, c)?;
        let ig = tape.mul(i, g)?;
        let c_new = tape.add(fc, ig)?;
        let ct = tape.tanh(c_new)?;
        let h_new = tape.mul(o, ct)?;
        Ok((h_new, c_new))
    }

    pub fn zero_state(&self, tape: &mut Tape) -> (NodeId, NodeId) {
        let h = tape.leaf(Tensor::zeros(vec![1, self.hidden]));
        let c = tape.leaf(Tensor::zeros(vec![1, self.hidden]));
        (h, c)
    }
}

/// Bilinear (general) attention: scores `h W e_j^T` over encoder rows,
/// softmax, and the weighted context vector.
pub fn attention_context(
    tape: &mut Tape,
    h: NodeId,          // [1, H]
    attn_w: NodeId,     // [H, H]
    enc_states: NodeId, // [m, H]
) -> Result<NodeId> {
    let proj = tape.matmul(h, attn_w)?;
    let enc_t = tape.transpose(enc_states)?;
    let scores = tape.matmul(proj, enc_t)?; // [1, m]
    let weights = tape.softmax(scores)?;
    tape.matmul(weights, enc_states) // [1, H]
}
