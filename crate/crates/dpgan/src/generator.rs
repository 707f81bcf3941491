//! Sequence-to-sequence generator: recurrent encoder, hierarchical
//! two-level decoder with bilinear attention, sampling, scoring, and
//! the MLE loss.
//!
//! Decoded text is kept in "marked" form: every sentence may end with
//! the end-of-sentence marker and a terminated text ends with a final
//! one-token `[EOS]` sentence (see [`crate::corpus::mark_target`]).
//! Scoring walks exactly the same step function as sampling, so emitted
//! log-probabilities and recomputed ones agree bit-exactly.

use crate::corpus::{Batch, TokenId, BOS, EOS, EOSENT, PAD};
use crate::error::{Error, Result};
use crate::numerics::nn::{attention_context, BoundLstm, LstmCell, INIT_SCALE};
use crate::numerics::tape::log_softmax_pick;
use crate::numerics::{NodeId, Tape, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GenDims {
    pub vocab: usize,
    pub embed: usize,
    pub hidden: usize,
}

/// All generator parameters plus architecture dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorModel {
    pub dims: GenDims,
    pub embedding: Tensor, // [V, E]
    pub encoder: LstmCell,
    pub sentence_dec: LstmCell,
    pub word_dec: LstmCell,
    pub attn: Tensor,  // [H, H]
    pub out_w: Tensor, // [2H, V]
    pub out_b: Tensor, // [V]
}

impl GeneratorModel {
    pub fn init(dims: GenDims, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (v, e, h) = (dims.vocab, dims.embed, dims.hidden);
        GeneratorModel {
            dims,
            embedding: Tensor::uniform(vec![v, e], INIT_SCALE, &mut rng),
            encoder: LstmCell::init(e, h, &mut rng),
            sentence_dec: LstmCell::init(h, h, &mut rng),
            word_dec: LstmCell::init(e, h, &mut rng),
            attn: Tensor::uniform(vec![h, h], INIT_SCALE, &mut rng),
            out_w: Tensor::uniform(vec![2 * h, v], INIT_SCALE, &mut rng),
            out_b: Tensor::zeros(vec![v]),
        }
    }

    /// Zero the output projection, forcing a uniform distribution at
    /// every step. Used by tests and sanity checks.
    pub fn force_uniform_output(&mut self) {
        self.out_w = Tensor::zeros(self.out_w.shape().to_vec());
        self.out_b = Tensor::zeros(self.out_b.shape().to_vec());
    }

    pub fn params(&self) -> Vec<&Tensor> {
        let mut p = vec![&self.embedding];
        p.extend(self.encoder.params());
        p.extend(self.sentence_dec.params());
        p.extend(self.word_dec.params());
        p.push(&self.attn);
        p.push(&self.out_w);
        p.push(&self.out_b);
        p
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut p = vec![&mut self.embedding];
        p.extend(self.encoder.params_mut());
        p.extend(self.sentence_dec.params_mut());
        p.extend(self.word_dec.params_mut());
        p.push(&mut self.attn);
        p.push(&mut self.out_w);
        p.push(&mut self.out_b);
        p
    }

    fn check_ids(&self, ids: &[TokenId]) -> Result<()> {
        match ids.iter().find(|&&i| (i as usize) >= self.dims.vocab) {
            Some(&bad) => Err(Error::contract(format!(
                "token id {bad} outside generator vocabulary of {}",
                self.dims.vocab
            ))),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecodeMode {
    Greedy,
    Sample,
}

#[derive(Debug, Clone)]
pub struct GenerationConfig {
    pub max_sentences: usize,
    pub max_words: usize,
    pub mode: DecodeMode,
    pub temperature: f64,
    pub seed: u64,
}

impl GenerationConfig {
    pub fn greedy(max_sentences: usize, max_words: usize) -> Self {
        GenerationConfig {
            max_sentences,
            max_words,
            mode: DecodeMode::Greedy,
            temperature: 1.0,
            seed: 0,
        }
    }

    pub fn sampled(max_sentences: usize, max_words: usize, seed: u64) -> Self {
        GenerationConfig {
            mode: DecodeMode::Sample,
            seed,
            ..GenerationConfig::greedy(max_sentences, max_words)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_words < 1 {
            return Err(Error::contract("max_words_per_sentence must be >= 1"));
        }
        if !(self.temperature > 0.0) {
            return Err(Error::contract("temperature must be positive"));
        }
        Ok(())
    }
}

/// A decoded text in marked form plus per-word model log-probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct Generation {
    pub sentences: Vec<Vec<TokenId>>,
    pub log_probs: Vec<Vec<f64>>,
}

impl Generation {
    pub fn content(&self) -> Vec<Vec<TokenId>> {
        crate::corpus::strip_markers(&self.sentences)
    }

    pub fn word_count(&self) -> usize {
        self.sentences.iter().map(Vec::len).sum()
    }
}

/// Generator parameters bound to a tape for one forward pass.
struct Bound {
    embedding: NodeId,
    encoder: BoundLstm,
    sentence_dec: BoundLstm,
    word_dec: BoundLstm,
    attn: NodeId,
    out_w: NodeId,
    out_b: NodeId,
}

impl Bound {
    fn bind(tape: &mut Tape, m: &GeneratorModel) -> Self {
        Bound {
            embedding: tape.leaf(m.embedding.clone()),
            encoder: BoundLstm::bind(tape, &m.encoder),
            sentence_dec: BoundLstm::bind(tape, &m.sentence_dec),
            word_dec: BoundLstm::bind(tape, &m.word_dec),
            attn: tape.leaf(m.attn.clone()),
            out_w: tape.leaf(m.out_w.clone()),
            out_b: tape.leaf(m.out_b.clone()),
        }
    }

    /// Leaf ids in [`GeneratorModel::params`] order.
    fn param_ids(&self) -> Vec<NodeId> {
        let mut ids = vec![self.embedding];
        ids.extend(self.encoder.param_ids());
        ids.extend(self.sentence_dec.param_ids());
        ids.extend(self.word_dec.param_ids());
        ids.push(self.attn);
        ids.push(self.out_w);
        ids.push(self.out_b);
        ids
    }

    fn encode(&self, tape: &mut Tape, source: &[TokenId]) -> Result<Encoded> {
        if source.is_empty() {
            return Err(Error::contract("encode: empty source"));
        }
        let (mut h, mut c) = self.encoder.zero_state(tape);
        let mut rows = Vec::with_capacity(source.len());
        for &tok in source {
            let x = tape.embedding(self.embedding, &[tok as usize])?;
            let (h2, c2) = self.encoder.step(tape, x, h, c)?;
            h = h2;
            c = c2;
            rows.push(h);
        }
        let states = tape.concat_rows(&rows)?;
        Ok(Encoded { states, h, c })
    }

    /// One word-decoder step: embed the previous token, advance the
    /// cell, attend over encoder states, and project to logits.
    fn word_step(
        &self,
        tape: &mut Tape,
        prev: TokenId,
        h: NodeId,
        c: NodeId,
        enc_states: NodeId,
    ) -> Result<(NodeId, NodeId, NodeId)> {
        let x = tape.embedding(self.embedding, &[prev as usize])?;
        let (h2, c2) = self.word_dec.step(tape, x, h, c)?;
        let ctx = attention_context(tape, h2, self.attn, enc_states)?;
        let joined = tape.concat_cols(h2, ctx)?;
        let proj = tape.matmul(joined, self.out_w)?;
        let logits = tape.add_row(proj, self.out_b)?;
        Ok((logits, h2, c2))
    }
}

struct Encoded {
    states: NodeId,
    h: NodeId,
    c: NodeId,
}

/// Encoder states and the initial decoder state, as plain tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodeResult {
    pub states: Tensor,
    pub hidden: Tensor,
    pub cell: Tensor,
}

pub fn encode(model: &GeneratorModel, source: &[TokenId]) -> Result<EncodeResult> {
    model.check_ids(source)?;
    let mut tape = Tape::new();
    let bound = Bound::bind(&mut tape, model);
    let enc = bound.encode(&mut tape, source)?;
    Ok(EncodeResult {
        states: tape.value(enc.states).clone(),
        hidden: tape.value(enc.h).clone(),
        cell: tape.value(enc.c).clone(),
    })
}

/// Walk the hierarchical decoder over given marked sentences, invoking
/// `visit(logits_node, sentence_idx, word_idx, target)` per word.
fn forced_walk(
    tape: &mut Tape,
    bound: &Bound,
    source: &[TokenId],
    sentences: &[Vec<TokenId>],
    mut visit: impl FnMut(&mut Tape, NodeId, usize, usize, TokenId) -> Result<()>,
) -> Result<()> {
    let enc = bound.encode(tape, source)?;
    let (mut hs, mut cs) = (enc.h, enc.c);
    let mut prev_word_h = tape.leaf(Tensor::zeros(vec![1, bound.sentence_dec.hidden]));
    for (t, sentence) in sentences.iter().enumerate() {
        if sentence.is_empty() {
            return Err(Error::contract("empty sentence in decoder target"));
        }
        let (hs2, cs2) = bound.sentence_dec.step(tape, prev_word_h, hs, cs)?;
        hs = hs2;
        cs = cs2;
        let (mut h, mut c) = (hs, cs);
        let mut prev = BOS;
        for (k, &tok) in sentence.iter().enumerate() {
            let (logits, h2, c2) = bound.word_step(tape, prev, h, c, enc.states)?;
            visit(tape, logits, t, k, tok)?;
            h = h2;
            c = c2;
            prev = tok;
        }
        prev_word_h = h;
    }
    Ok(())
}

/// Per-word `log G(y_{t,k} | y_{t,<k}, y_{<t}, x)` for a marked text.
pub fn log_prob_of(
    model: &GeneratorModel,
    source: &[TokenId],
    sentences: &[Vec<TokenId>],
) -> Result<Vec<Vec<f64>>> {
    model.check_ids(source)?;
    for s in sentences {
        model.check_ids(s)?;
    }
    let mut tape = Tape::new();
    let bound = Bound::bind(&mut tape, model);
    let mut out: Vec<Vec<f64>> = sentences.iter().map(|s| vec![0.0; s.len()]).collect();
    forced_walk(&mut tape, &bound, source, sentences, |tape, logits, t, k, tok| {
        out[t][k] = log_softmax_pick(tape.value(logits).row_slice(0), tok as usize);
        Ok(())
    })?;
    Ok(out)
}

fn masked_argmax(row: &[f64], banned: &[bool]) -> usize {
    let mut best = usize::MAX;
    let mut best_v = f64::NEG_INFINITY;
    for (j, &v) in row.iter().enumerate() {
        if !banned[j] && v > best_v {
            best_v = v;
            best = j;
        }
    }
    best
}

fn masked_sample(row: &[f64], banned: &[bool], temperature: f64, rng: &mut impl Rng) -> usize {
    let max = row
        .iter()
        .zip(banned)
        .filter(|(_, &b)| !b)
        .map(|(&v, _)| v)
        .fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = row
        .iter()
        .zip(banned)
        .map(|(&v, &b)| if b { 0.0 } else { ((v - max) / temperature).exp() })
        .collect();
    let total: f64 = weights.iter().sum();
    let mut u: f64 = rng.gen::<f64>() * total;
    for (j, &w) in weights.iter().enumerate() {
        u -= w;
        if u <= 0.0 && w > 0.0 {
            return j;
        }
    }
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

/// Decode up to `max_sentences` sentences of up to `max_words` content
/// words each. PAD and BOS are never emitted; EOS is only available as
/// the first word of a sentence and terminates the text.
pub fn generate(
    model: &GeneratorModel,
    source: &[TokenId],
    config: &GenerationConfig,
) -> Result<Generation> {
    config.validate()?;
    model.check_ids(source)?;
    let mut gen = Generation {
        sentences: Vec::new(),
        log_probs: Vec::new(),
    };
    if config.max_sentences == 0 {
        return Ok(gen);
    }

    let mut tape = Tape::new();
    let bound = Bound::bind(&mut tape, model);
    let enc = bound.encode(&mut tape, source)?;
    let (mut hs, mut cs) = (enc.h, enc.c);
    let mut prev_word_h = tape.leaf(Tensor::zeros(vec![1, bound.sentence_dec.hidden]));
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let v = model.dims.vocab;

    'text: for _ in 0..config.max_sentences {
        let (hs2, cs2) = bound.sentence_dec.step(&mut tape, prev_word_h, hs, cs)?;
        hs = hs2;
        cs = cs2;
        let (mut h, mut c) = (hs, cs);
        let mut prev = BOS;
        let mut sentence = Vec::new();
        let mut log_probs = Vec::new();
        // max_words content words plus room for the sentence marker
        for k in 0..=config.max_words {
            let (logits, h2, c2) = bound.word_step(&mut tape, prev, h, c, enc.states)?;
            h = h2;
            c = c2;
            let row = tape.value(logits).row_slice(0).to_vec();
            let mut banned = vec![false; v];
            banned[PAD as usize] = true;
            banned[BOS as usize] = true;
            if k > 0 {
                banned[EOS as usize] = true;
            }
            if k == config.max_words {
                // sentence is full: only the marker may close it
                banned.iter_mut().enumerate().for_each(|(j, b)| {
                    *b = j != EOSENT as usize;
                });
            }
            let tok = match config.mode {
                DecodeMode::Greedy => masked_argmax(&row, &banned),
                DecodeMode::Sample => masked_sample(&row, &banned, config.temperature, &mut rng),
            } as TokenId;
            sentence.push(tok);
            log_probs.push(log_softmax_pick(&row, tok as usize));
            if tok == EOS {
                gen.sentences.push(sentence);
                gen.log_probs.push(log_probs);
                break 'text;
            }
            if tok == EOSENT {
                break;
            }
            prev = tok;
        }
        prev_word_h = h;
        gen.sentences.push(sentence);
        gen.log_probs.push(log_probs);
    }
    Ok(gen)
}

/// Resume decoding inside one sentence: teacher-force `prev_sentences`
/// and the in-sentence `prefix`, then sample the rest of the sentence
/// (up to `max_words` content words) from the model. Used by Monte
/// Carlo rollouts. Returns the full sentence, marker included when
/// sampled.
pub fn complete_sentence(
    model: &GeneratorModel,
    source: &[TokenId],
    prev_sentences: &[Vec<TokenId>],
    prefix: &[TokenId],
    max_words: usize,
    seed: u64,
) -> Result<Vec<TokenId>> {
    model.check_ids(source)?;
    model.check_ids(prefix)?;
    if prefix.last() == Some(&EOSENT) || prefix.last() == Some(&EOS) {
        return Ok(prefix.to_vec());
    }
    let mut tape = Tape::new();
    let bound = Bound::bind(&mut tape, model);
    let enc = bound.encode(&mut tape, source)?;
    let (mut hs, mut cs) = (enc.h, enc.c);
    let mut prev_word_h = tape.leaf(Tensor::zeros(vec![1, bound.sentence_dec.hidden]));
    for sentence in prev_sentences {
        model.check_ids(sentence)?;
        let (hs2, cs2) = bound.sentence_dec.step(&mut tape, prev_word_h, hs, cs)?;
        hs = hs2;
        cs = cs2;
        let (mut h, mut c) = (hs, cs);
        let mut prev = BOS;
        for &tok in sentence {
            let (_, h2, c2) = bound.word_step(&mut tape, prev, h, c, enc.states)?;
            h = h2;
            c = c2;
            prev = tok;
        }
        prev_word_h = h;
    }
    let (hs2, cs2) = bound.sentence_dec.step(&mut tape, prev_word_h, hs, cs)?;
    let (mut h, mut c) = (hs2, cs2);
    let mut prev = BOS;
    let mut sentence = prefix.to_vec();
    for &tok in prefix {
        let (_, h2, c2) = bound.word_step(&mut tape, prev, h, c, enc.states)?;
        h = h2;
        c = c2;
        prev = tok;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = model.dims.vocab;
    let mut content = prefix.iter().filter(|&&t| t != EOSENT && t != EOS).count();
    loop {
        let k = sentence.len();
        let (logits, h2, c2) = bound.word_step(&mut tape, prev, h, c, enc.states)?;
        h = h2;
        c = c2;
        let row = tape.value(logits).row_slice(0).to_vec();
        let mut banned = vec![false; v];
        banned[PAD as usize] = true;
        banned[BOS as usize] = true;
        if k > 0 {
            banned[EOS as usize] = true;
        }
        if content >= max_words {
            banned.iter_mut().enumerate().for_each(|(j, b)| {
                *b = j != EOSENT as usize;
            });
        }
        let tok = masked_sample(&row, &banned, 1.0, &mut rng) as TokenId;
        sentence.push(tok);
        if tok == EOSENT || tok == EOS {
            break;
        }
        content += 1;
        if content > max_words {
            break;
        }
        prev = tok;
    }
    Ok(sentence)
}

/// Differentiable weighted negative log-likelihood over a set of
/// (source, marked sentences, per-word weights) items. Returns the
/// scalar loss and one gradient per model parameter.
///
/// Both the MLE loss (weights = mask / token count) and the
/// policy-gradient surrogate (weights = discounted returns) route here.
pub fn weighted_nll(
    model: &GeneratorModel,
    items: &[(&[TokenId], &[Vec<TokenId>], &[Vec<f64>])],
) -> Result<(f64, Vec<Tensor>)> {
    if items.is_empty() {
        return Err(Error::contract("weighted_nll: empty item set"));
    }
    let mut tape = Tape::new();
    let bound = Bound::bind(&mut tape, model);
    let mut partials = Vec::new();
    for &(source, sentences, weights) in items {
        model.check_ids(source)?;
        if sentences.len() != weights.len()
            || sentences
                .iter()
                .zip(weights)
                .any(|(s, w)| s.len() != w.len())
        {
            return Err(Error::contract(
                "weighted_nll: weight shape does not match sentences",
            ));
        }
        for s in sentences.iter() {
            model.check_ids(s)?;
        }
        let mut rows = Vec::new();
        let mut targets = Vec::new();
        let mut flat_weights = Vec::new();
        forced_walk(&mut tape, &bound, source, sentences, |_, logits, t, k, tok| {
            rows.push(logits);
            targets.push(tok as usize);
            flat_weights.push(weights[t][k]);
            Ok(())
        })?;
        let logits = tape.concat_rows(&rows)?;
        let partial = tape.pick_nll(logits, &targets, &flat_weights)?;
        partials.push(partial);
    }
    let mut loss = partials[0];
    for &p in &partials[1..] {
        loss = tape.add(loss, p)?;
    }
    let mut grads = tape.backward(loss)?;
    let out = bound
        .param_ids()
        .iter()
        .zip(model.params())
        .map(|(&id, p)| grads.take_or_zeros(id, p.shape()))
        .collect();
    Ok((tape.value(loss).scalar_value(), out))
}

/// Mean negative log-likelihood over all real target tokens of a batch,
/// with gradients. Targets are scored in marked form.
pub fn mle_loss(model: &GeneratorModel, batch: &Batch) -> Result<(f64, Vec<Tensor>)> {
    let marked: Vec<(Vec<TokenId>, Vec<Vec<TokenId>>)> = batch
        .items
        .iter()
        .map(|p| (p.source.clone(), crate::corpus::mark_target(&p.target)))
        .collect();
    let total_tokens: usize = marked
        .iter()
        .map(|(_, s)| s.iter().map(Vec::len).sum::<usize>())
        .sum();
    if total_tokens == 0 {
        return Err(Error::contract("mle_loss: batch has zero real tokens"));
    }
    let w = 1.0 / total_tokens as f64;
    let weights: Vec<Vec<Vec<f64>>> = marked
        .iter()
        .map(|(_, s)| s.iter().map(|sent| vec![w; sent.len()]).collect())
        .collect();
    let items: Vec<(&[TokenId], &[Vec<TokenId>], &[Vec<f64>])> = marked
        .iter()
        .zip(&weights)
        .map(|((src, sents), w)| (src.as_slice(), sents.as_slice(), w.as_slice()))
        .collect();
    weighted_nll(model, &items)
}

/// Forward-only mean NLL (validation scoring).
pub fn nll_value(model: &GeneratorModel, batch: &Batch) -> Result<f64> {
    let mut total = 0.0;
    let mut count = 0usize;
    for pair in &batch.items {
        let marked = crate::corpus::mark_target(&pair.target);
        let lp = log_prob_of(model, &pair.source, &marked)?;
        total -= lp.iter().flatten().sum::<f64>();
        count += lp.iter().map(Vec::len).sum::<usize>();
    }
    if count == 0 {
        return Err(Error::contract("nll_value: batch has zero real tokens"));
    }
    Ok(total / count as f64)
}
