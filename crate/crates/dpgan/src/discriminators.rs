//! The language-model discriminator (cross-entropy reward) and the
//! binary-classifier discriminator used by the SeqGAN baseline.

use crate::corpus::{TokenId, BOS};
use crate::error::{Error, Result};
use crate::generator::GenDims;
use crate::numerics::nn::{BoundLstm, LstmCell, INIT_SCALE};
use crate::numerics::tape::log_softmax_pick;
use crate::numerics::{clip_gradients, sigmoid, NodeId, OptimizerState, Tape, Tensor};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// A text to be scored: marked sentences of token ids.
pub type Text = Vec<Vec<TokenId>>;

/// Unidirectional LSTM language model over target text; the negative
/// log-probability it assigns a word is that word's reward.
#[derive(Debug, Clone, PartialEq)]
pub struct LMDiscriminator {
    pub dims: GenDims,
    pub embedding: Tensor, // [V, E]
    pub cell: LstmCell,
    pub out_w: Tensor, // [H, V]
    pub out_b: Tensor, // [V]
}

impl LMDiscriminator {
    pub fn init(dims: GenDims, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (v, e, h) = (dims.vocab, dims.embed, dims.hidden);
        LMDiscriminator {
            dims,
            embedding: Tensor::uniform(vec![v, e], INIT_SCALE, &mut rng),
            cell: LstmCell::init(e, h, &mut rng),
            out_w: Tensor::uniform(vec![h, v], INIT_SCALE, &mut rng),
            out_b: Tensor::zeros(vec![v]),
        }
    }

    pub fn force_uniform_output(&mut self) {
        self.out_w = Tensor::zeros(self.out_w.shape().to_vec());
        self.out_b = Tensor::zeros(self.out_b.shape().to_vec());
    }

    pub fn params(&self) -> Vec<&Tensor> {
        let mut p = vec![&self.embedding];
        p.extend(self.cell.params());
        p.push(&self.out_w);
        p.push(&self.out_b);
        p
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut p = vec![&mut self.embedding];
        p.extend(self.cell.params_mut());
        p.push(&mut self.out_w);
        p.push(&mut self.out_b);
        p
    }

    fn check_ids(&self, ids: &[TokenId]) -> Result<()> {
        match ids.iter().find(|&&i| (i as usize) >= self.dims.vocab) {
            Some(&bad) => Err(Error::contract(format!(
                "token id {bad} outside discriminator vocabulary of {}",
                self.dims.vocab
            ))),
            None => Ok(()),
        }
    }
}

struct BoundLm {
    embedding: NodeId,
    cell: BoundLstm,
    out_w: NodeId,
    out_b: NodeId,
}

impl BoundLm {
    fn bind(tape: &mut Tape, d: &LMDiscriminator) -> Self {
        BoundLm {
            embedding: tape.leaf(d.embedding.clone()),
            cell: BoundLstm::bind(tape, &d.cell),
            out_w: tape.leaf(d.out_w.clone()),
            out_b: tape.leaf(d.out_b.clone()),
        }
    }

    fn param_ids(&self) -> Vec<NodeId> {
        let mut ids = vec![self.embedding];
        ids.extend(self.cell.param_ids());
        ids.push(self.out_w);
        ids.push(self.out_b);
        ids
    }

    /// Per-word logits for a sentence starting from BOS.
    fn sentence_logits(&self, tape: &mut Tape, sentence: &[TokenId]) -> Result<Vec<NodeId>> {
        let (mut h, mut c) = self.cell.zero_state(tape);
        let mut prev = BOS;
        let mut rows = Vec::with_capacity(sentence.len());
        for &tok in sentence {
            let x = tape.embedding(self.embedding, &[prev as usize])?;
            let (h2, c2) = self.cell.step(tape, x, h, c)?;
            h = h2;
            c = c2;
            let proj = tape.matmul(h, self.out_w)?;
            rows.push(tape.add_row(proj, self.out_b)?);
            prev = tok;
        }
        Ok(rows)
    }
}

/// `R(y_{t,k}) = -log D(y_{t,k} | y_{t,<k})` for each word of one
/// sentence. Reward k depends only on the model and words before k.
pub fn lm_word_rewards(d: &LMDiscriminator, sentence: &[TokenId]) -> Result<Vec<f64>> {
    if sentence.is_empty() {
        return Err(Error::contract("lm_word_rewards: empty sentence"));
    }
    d.check_ids(sentence)?;
    let mut tape = Tape::new();
    let bound = BoundLm::bind(&mut tape, d);
    let rows = bound.sentence_logits(&mut tape, sentence)?;
    Ok(rows
        .iter()
        .zip(sentence)
        .map(|(&r, &tok)| -log_softmax_pick(tape.value(r).row_slice(0), tok as usize))
        .collect())
}

/// Averaged reward over every word of every sentence of a text.
pub fn lm_text_reward(d: &LMDiscriminator, text: &Text) -> Result<f64> {
    if text.is_empty() || text.iter().all(Vec::is_empty) {
        return Err(Error::contract("lm_text_reward: empty text"));
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for sentence in text {
        let rewards = lm_word_rewards(d, sentence)?;
        total += rewards.iter().sum::<f64>();
        count += rewards.len();
    }
    Ok(total / count as f64)
}

/// Discriminator objective `J = -(mean_real R(Y) - mean_gen R(Y))`,
/// differentiable in the discriminator parameters.
pub fn lm_discriminator_loss(
    d: &LMDiscriminator,
    real_batch: &[Text],
    gen_batch: &[Text],
) -> Result<(f64, Vec<Tensor>)> {
    if real_batch.is_empty() || gen_batch.is_empty() {
        return Err(Error::contract("lm_discriminator_loss: empty batch"));
    }
    let mut tape = Tape::new();
    let bound = BoundLm::bind(&mut tape, d);
    let mut partials = Vec::new();
    // maximizing real reward = negative weight on its NLL; minimizing
    // generated reward = positive weight
    for (batch, sign) in [(real_batch, -1.0), (gen_batch, 1.0)] {
        let scale = sign / batch.len() as f64;
        for text in batch {
            let words: usize = text.iter().map(Vec::len).sum();
            if words == 0 {
                return Err(Error::contract("lm_discriminator_loss: empty text"));
            }
            let w = scale / words as f64;
            for sentence in text {
                d.check_ids(sentence)?;
                let rows = bound.sentence_logits(&mut tape, sentence)?;
                let logits = tape.concat_rows(&rows)?;
                let targets: Vec<usize> = sentence.iter().map(|&t| t as usize).collect();
                let weights = vec![w; targets.len()];
                partials.push(tape.pick_nll(logits, &targets, &weights)?);
            }
        }
    }
    let mut loss = partials[0];
    for &p in &partials[1..] {
        loss = tape.add(loss, p)?;
    }
    let mut grads = tape.backward(loss)?;
    let out = bound
        .param_ids()
        .iter()
        .zip(d.params())
        .map(|(&id, p)| grads.take_or_zeros(id, p.shape()))
        .collect();
    Ok((tape.value(loss).scalar_value(), out))
}

/// `steps` clipped Adagrad updates on the Eq.-(1)-style objective, with
/// fresh seeded batches from the two pools each step. Returns the loss
/// trace (one entry per step).
#[allow(clippy::too_many_arguments)]
pub fn train_lm_discriminator(
    d: &mut LMDiscriminator,
    real_pool: &[Text],
    gen_pool: &[Text],
    steps: usize,
    optimizer: &mut OptimizerState,
    batch_size: usize,
    clip: f64,
    seed: u64,
) -> Result<Vec<f64>> {
    let mut trace = Vec::with_capacity(steps);
    for step in 0..steps {
        let mut rng = ChaCha8Rng::seed_from_u64(crate::stream_seed(seed, step as u64));
        let real = sample_pool(real_pool, batch_size, &mut rng);
        let gen = sample_pool(gen_pool, batch_size, &mut rng);
        let (loss, mut grads) = lm_discriminator_loss(d, &real, &gen)?;
        clip_gradients(&mut grads, clip);
        optimizer.step(&mut d.params_mut(), &grads)?;
        trace.push(loss);
    }
    Ok(trace)
}

fn sample_pool<T: Clone>(pool: &[T], n: usize, rng: &mut impl rand::Rng) -> Vec<T> {
    if pool.len() <= n {
        return pool.to_vec();
    }
    pool.choose_multiple(rng, n).cloned().collect()
}

/// Recurrent encoder with a sigmoid head: `D(true | y_t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierDiscriminator {
    pub dims: GenDims,
    pub embedding: Tensor,
    pub cell: LstmCell,
    pub out_w: Tensor, // [H, 1]
    pub out_b: Tensor, // [1]
}

impl ClassifierDiscriminator {
    pub fn init(dims: GenDims, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (v, e, h) = (dims.vocab, dims.embed, dims.hidden);
        ClassifierDiscriminator {
            dims,
            embedding: Tensor::uniform(vec![v, e], INIT_SCALE, &mut rng),
            cell: LstmCell::init(e, h, &mut rng),
            out_w: Tensor::uniform(vec![h, 1], INIT_SCALE, &mut rng),
            out_b: Tensor::zeros(vec![1]),
        }
    }

    pub fn zero_head(&mut self) {
        self.out_w = Tensor::zeros(self.out_w.shape().to_vec());
        self.out_b = Tensor::zeros(self.out_b.shape().to_vec());
    }

    pub fn params(&self) -> Vec<&Tensor> {
        let mut p = vec![&self.embedding];
        p.extend(self.cell.params());
        p.push(&self.out_w);
        p.push(&self.out_b);
        p
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut p = vec![&mut self.embedding];
        p.extend(self.cell.params_mut());
        p.push(&mut self.out_w);
        p.push(&mut self.out_b);
        p
    }
}

struct BoundClassifier {
    embedding: NodeId,
    cell: BoundLstm,
    out_w: NodeId,
    out_b: NodeId,
}

impl BoundClassifier {
    fn bind(tape: &mut Tape, c: &ClassifierDiscriminator) -> Self {
        BoundClassifier {
            embedding: tape.leaf(c.embedding.clone()),
            cell: BoundLstm::bind(tape, &c.cell),
            out_w: tape.leaf(c.out_w.clone()),
            out_b: tape.leaf(c.out_b.clone()),
        }
    }

    fn param_ids(&self) -> Vec<NodeId> {
        let mut ids = vec![self.embedding];
        ids.extend(self.cell.param_ids());
        ids.push(self.out_w);
        ids.push(self.out_b);
        ids
    }

    fn logit(&self, tape: &mut Tape, sentence: &[TokenId]) -> Result<NodeId> {
        let (mut h, mut c) = self.cell.zero_state(tape);
        for &tok in sentence {
            let x = tape.embedding(self.embedding, &[tok as usize])?;
            let (h2, c2) = self.cell.step(tape, x, h, c)?;
            h = h2;
            c = c2;
        }
        let proj = tape.matmul(h, self.out_w)?;
        tape.add_row(proj, self.out_b)
    }
}

/// `D(true | sentence)`, strictly inside (0, 1).
pub fn classifier_score(c: &ClassifierDiscriminator, sentence: &[TokenId]) -> Result<f64> {
    if sentence.is_empty() {
        return Err(Error::contract("classifier_score: empty sentence"));
    }
    let mut tape = Tape::new();
    let bound = BoundClassifier::bind(&mut tape, c);
    let logit = bound.logit(&mut tape, sentence)?;
    Ok(sigmoid(tape.value(logit).scalar_value()))
}

/// Mean binary cross-entropy (real = 1, generated = 0) with gradients.
pub fn classifier_loss(
    c: &ClassifierDiscriminator,
    real_batch: &[Vec<TokenId>],
    gen_batch: &[Vec<TokenId>],
) -> Result<(f64, Vec<Tensor>)> {
    if real_batch.is_empty() && gen_batch.is_empty() {
        return Err(Error::contract("classifier_loss: empty batches"));
    }
    let mut tape = Tape::new();
    let bound = BoundClassifier::bind(&mut tape, c);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (batch, label) in [(real_batch, 1.0), (gen_batch, 0.0)] {
        for sentence in batch {
            rows.push(bound.logit(&mut tape, sentence)?);
            labels.push(label);
        }
    }
    let logits = tape.concat_rows(&rows)?;
    let weights = vec![1.0 / labels.len() as f64; labels.len()];
    let loss = tape.bce_with_logits(logits, &labels, &weights)?;
    let mut grads = tape.backward(loss)?;
    let out = bound
        .param_ids()
        .iter()
        .zip(c.params())
        .map(|(&id, p)| grads.take_or_zeros(id, p.shape()))
        .collect();
    Ok((tape.value(loss).scalar_value(), out))
}

/// `steps` clipped Adagrad updates of binary cross-entropy on seeded
/// batches from the pools. Returns the loss trace.
#[allow(clippy::too_many_arguments)]
pub fn train_classifier(
    c: &mut ClassifierDiscriminator,
    real_pool: &[Vec<TokenId>],
    gen_pool: &[Vec<TokenId>],
    steps: usize,
    optimizer: &mut OptimizerState,
    batch_size: usize,
    clip: f64,
    seed: u64,
) -> Result<Vec<f64>> {
    let mut trace = Vec::with_capacity(steps);
    for step in 0..steps {
        let mut rng = ChaCha8Rng::seed_from_u64(crate::stream_seed(seed, step as u64));
        let real = sample_pool(real_pool, batch_size, &mut rng);
        let gen = sample_pool(gen_pool, batch_size, &mut rng);
        let (loss, mut grads) = classifier_loss(c, &real, &gen)?;
        clip_gradients(&mut grads, clip);
        optimizer.step(&mut c.params_mut(), &grads)?;
        trace.push(loss);
    }
    Ok(trace)
}

/// Accuracy at threshold 0.5 over held-out real and generated samples.
pub fn classifier_accuracy(
    c: &ClassifierDiscriminator,
    real: &[Vec<TokenId>],
    gen: &[Vec<TokenId>],
) -> Result<f64> {
    let mut correct = 0usize;
    for s in real {
        if classifier_score(c, s)? > 0.5 {
            correct += 1;
        }
    }
    for s in gen {
        if classifier_score(c, s)? <= 0.5 {
            correct += 1;
        }
    }
    Ok(correct as f64 / (real.len() + gen.len()) as f64)
}
