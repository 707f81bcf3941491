use crate::error::{Error, Result};
use crate::numerics::tensor::Tensor;

/// Adagrad accumulator state for one model's parameter list.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub learning_rate: f64,
    pub epsilon: f64,
    pub accumulators: Vec<Tensor>,
}

impl OptimizerState {
    pub fn new(learning_rate: f64, epsilon: f64, param_shapes: &[Vec<usize>]) -> Self {
        OptimizerState {
            learning_rate,
            epsilon,
            accumulators: param_shapes
                .iter()
                .map(|s| Tensor::zeros(s.clone()))
                .collect(),
        }
    }

    pub fn for_params(learning_rate: f64, epsilon: f64, params: &[&Tensor]) -> Self {
        let shapes: Vec<Vec<usize>> = params.iter().map(|p| p.shape().to_vec()).collect();
        OptimizerState::new(learning_rate, epsilon, &shapes)
    }

    /// One Adagrad update: `acc += g^2; p -= lr * g / (sqrt(acc) + eps)`.
    pub fn step(&mut self, params: &mut [&mut Tensor], grads: &[Tensor]) -> Result<()> {
        if params.len() != grads.len() || params.len() != self.accumulators.len() {
            return Err(Error::contract(format!(
                "adagrad_step: {} params, {} grads, {} accumulators",
                params.len(),
                grads.len(),
                self.accumulators.len()
            )));
        }
        for ((p, g), acc) in params.iter_mut().zip(grads).zip(&mut self.accumulators) {
            if p.shape() != g.shape() {
                return Err(Error::contract(format!(
                    "adagrad_step: param shape {:?} vs grad shape {:?}",
                    p.shape(),
                    g.shape()
                )));
            }
            let lr = self.learning_rate;
            let eps = self.epsilon;
            for ((pv, &gv), av) in p
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(acc.data_mut())
            {
                *av += gv * gv;
                *pv -= lr * gv / (av.sqrt() + eps);
            }
        }
        Ok(())
    }
}

/// Global-norm gradient clipping; returns the pre-clip norm.
pub fn clip_gradients(grads: &mut [Tensor], max_norm: f64) -> f64 {
    let norm = grads
        .iter()
        .map(|g| g.squared_norm())
        .sum::<f64>()
        .sqrt();
    if norm > max_norm && norm > 0.0 {
        let s = max_norm / norm;
        for g in grads {
            for v in g.data_mut() {
                *v *= s;
            }
        }
    }
    norm
}
