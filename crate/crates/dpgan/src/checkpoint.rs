//! Binary model checkpoints: magic "DPGN", a format version, a model
//! kind tag, architecture dimensions, parameter tensors, Adagrad
//! accumulators, and the training step counter. Round trips are
//! bit-exact.

use std::path::Path;

use crate::discriminators::{ClassifierDiscriminator, LMDiscriminator};
use crate::error::{Error, Result};
use crate::generator::{GenDims, GeneratorModel};
use crate::numerics::{OptimizerState, Tensor};

const MAGIC: &[u8; 4] = b"DPGN";
const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckpointKind {
    Generator,
    LmDiscriminator,
    Classifier,
}

impl CheckpointKind {
    pub fn tag(self) -> &'static str {
        match self {
            CheckpointKind::Generator => "generator",
            CheckpointKind::LmDiscriminator => "lm_discriminator",
            CheckpointKind::Classifier => "classifier",
        }
    }

    fn code(self) -> u8 {
        match self {
            CheckpointKind::Generator => 0,
            CheckpointKind::LmDiscriminator => 1,
            CheckpointKind::Classifier => 2,
        }
    }

    fn from_code(c: u8) -> Result<Self> {
        match c {
            0 => Ok(CheckpointKind::Generator),
            1 => Ok(CheckpointKind::LmDiscriminator),
            2 => Ok(CheckpointKind::Classifier),
            _ => Err(Error::Checkpoint(format!("unknown model kind code {c}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub kind: CheckpointKind,
    pub dims: GenDims,
    pub params: Vec<Tensor>,
    pub optimizer: OptimizerState,
    pub step: u64,
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Checkpoint(format!(
                "truncated checkpoint: wanted {n} bytes at offset {}, file has {}",
                self.pos,
                self.bytes.len()
            )));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn tensor(&mut self) -> Result<Tensor> {
        let rank = self.u32()? as usize;
        if rank > 4 {
            return Err(Error::Checkpoint(format!("implausible tensor rank {rank}")));
        }
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(self.u64()? as usize);
        }
        let len: usize = shape.iter().product();
        let mut data = Vec::with_capacity(len);
        for _ in 0..len {
            data.push(self.f64()?);
        }
        Tensor::new(shape, data)
    }

    fn done(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::Checkpoint(format!(
                "{} trailing bytes after checkpoint payload",
                self.bytes.len() - self.pos
            )));
        }
        Ok(())
    }
}

fn put_tensor(out: &mut Vec<u8>, t: &Tensor) {
    out.extend((t.shape().len() as u32).to_le_bytes());
    for &d in t.shape() {
        out.extend((d as u64).to_le_bytes());
    }
    for &v in t.data() {
        out.extend(v.to_le_bytes());
    }
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend(MAGIC);
        out.extend(VERSION.to_le_bytes());
        out.push(self.kind.code());
        for d in [self.dims.vocab, self.dims.embed, self.dims.hidden] {
            out.extend((d as u64).to_le_bytes());
        }
        out.extend(self.step.to_le_bytes());
        out.extend(self.optimizer.learning_rate.to_le_bytes());
        out.extend(self.optimizer.epsilon.to_le_bytes());
        out.extend((self.params.len() as u32).to_le_bytes());
        for t in &self.params {
            put_tensor(&mut out, t);
        }
        for t in &self.optimizer.accumulators {
            put_tensor(&mut out, t);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::Checkpoint("bad magic bytes, not a checkpoint".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported checkpoint version {version}, expected {VERSION}"
            )));
        }
        let kind = CheckpointKind::from_code(r.u8()?)?;
        let dims = GenDims {
            vocab: r.u64()? as usize,
            embed: r.u64()? as usize,
            hidden: r.u64()? as usize,
        };
        let step = r.u64()?;
        let learning_rate = r.f64()?;
        let epsilon = r.f64()?;
        let n = r.u32()? as usize;
        let params: Vec<Tensor> = (0..n).map(|_| r.tensor()).collect::<Result<_>>()?;
        let accumulators: Vec<Tensor> = (0..n).map(|_| r.tensor()).collect::<Result<_>>()?;
        for (p, a) in params.iter().zip(&accumulators) {
            if p.shape() != a.shape() {
                return Err(Error::Checkpoint(
                    "parameter and accumulator shapes disagree".into(),
                ));
            }
        }
        r.done()?;
        Ok(Checkpoint {
            kind,
            dims,
            params,
            optimizer: OptimizerState {
                learning_rate,
                epsilon,
                accumulators,
            },
            step,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::atomic_write(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Checkpoint::from_bytes(&std::fs::read(path)?)
    }

    pub fn expect_kind(&self, expected: CheckpointKind) -> Result<()> {
        if self.kind != expected {
            return Err(Error::Checkpoint(format!(
                "checkpoint holds a {} model, expected {}",
                self.kind.tag(),
                expected.tag()
            )));
        }
        Ok(())
    }
}

fn snapshot(kind: CheckpointKind, dims: GenDims, params: Vec<&Tensor>, opt: &OptimizerState, step: u64) -> Checkpoint {
    Checkpoint {
        kind,
        dims,
        params: params.into_iter().cloned().collect(),
        optimizer: opt.clone(),
        step,
    }
}

fn restore_into(mut params: Vec<&mut Tensor>, saved: &[Tensor]) -> Result<()> {
    if params.len() != saved.len() {
        return Err(Error::Checkpoint(format!(
            "checkpoint has {} tensors, model expects {}",
            saved.len(),
            params.len()
        )));
    }
    for (p, s) in params.iter_mut().zip(saved) {
        if p.shape() != s.shape() {
            return Err(Error::Checkpoint(format!(
                "tensor shape {:?} in checkpoint, model expects {:?}",
                s.shape(),
                p.shape()
            )));
        }
        p.data_mut().copy_from_slice(s.data());
    }
    Ok(())
}

pub fn save_generator(g: &GeneratorModel, opt: &OptimizerState, step: u64) -> Checkpoint {
    snapshot(CheckpointKind::Generator, g.dims, g.params(), opt, step)
}

pub fn load_generator(ckpt: &Checkpoint) -> Result<(GeneratorModel, OptimizerState, u64)> {
    ckpt.expect_kind(CheckpointKind::Generator)?;
    let mut g = GeneratorModel::init(ckpt.dims, 0);
    restore_into(g.params_mut(), &ckpt.params)?;
    Ok((g, ckpt.optimizer.clone(), ckpt.step))
}

pub fn save_lm_discriminator(d: &LMDiscriminator, opt: &OptimizerState, step: u64) -> Checkpoint {
    snapshot(CheckpointKind::LmDiscriminator, d.dims, d.params(), opt, step)
}

pub fn load_lm_discriminator(
    ckpt: &Checkpoint,
) -> Result<(LMDiscriminator, OptimizerState, u64)> {
    ckpt.expect_kind(CheckpointKind::LmDiscriminator)?;
    let mut d = LMDiscriminator::init(ckpt.dims, 0);
    restore_into(d.params_mut(), &ckpt.params)?;
    Ok((d, ckpt.optimizer.clone(), ckpt.step))
}

pub fn save_classifier(c: &ClassifierDiscriminator, opt: &OptimizerState, step: u64) -> Checkpoint {
    snapshot(CheckpointKind::Classifier, c.dims, c.params(), opt, step)
}

pub fn load_classifier(
    ckpt: &Checkpoint,
) -> Result<(ClassifierDiscriminator, OptimizerState, u64)> {
    ckpt.expect_kind(CheckpointKind::Classifier)?;
    let mut c = ClassifierDiscriminator::init(ckpt.dims, 0);
    restore_into(c.params_mut(), &ckpt.params)?;
    Ok((c, ckpt.optimizer.clone(), ckpt.step))
}
