//! Synthetic corpora: mixtures of first-order Markov chains over a
//! small vocabulary, deterministic under seed. Test scaffolding for the
//! desk-scale experiments.

use crate::corpus::{Dataset, Split, TextPair, Vocabulary};
use crate::error::{Error, Result};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct MarkovMode {
    pub name: String,
    pub weight: f64,
    /// Initial distribution over the synthetic vocabulary.
    pub init: Vec<f64>,
    /// Row-stochastic transition matrix.
    pub trans: Vec<Vec<f64>>,
    /// Inclusive range of words per target sentence.
    pub sentence_len: (usize, usize),
    /// Inclusive range of target sentences per pair.
    pub sentences: (usize, usize),
}

#[derive(Debug, Clone)]
pub struct SynthSpec {
    /// Word surface forms; ids follow vocabulary construction order.
    pub vocab: Vec<String>,
    pub modes: Vec<MarkovMode>,
    /// Inclusive range of words in the source sentence.
    pub source_len: (usize, usize),
}

fn check_distribution(name: &str, row: &[f64], n: usize) -> Result<()> {
    if row.len() != n {
        return Err(Error::validation(format!(
            "{name}: row length {} vs vocabulary size {n}",
            row.len()
        )));
    }
    if row.iter().any(|&p| p < 0.0) {
        return Err(Error::validation(format!("{name}: negative probability")));
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::validation(format!(
            "{name}: probabilities sum to {sum}, expected 1"
        )));
    }
    Ok(())
}

fn sample_index(dist: &[f64], rng: &mut impl Rng) -> usize {
    let mut u: f64 = rng.gen();
    for (i, &p) in dist.iter().enumerate() {
        u -= p;
        if u <= 0.0 {
            return i;
        }
    }
    dist.len() - 1
}

fn sample_range(range: (usize, usize), rng: &mut impl Rng) -> usize {
    if range.0 >= range.1 {
        range.0
    } else {
        rng.gen_range(range.0..=range.1)
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.vocab.is_empty() {
            return Err(Error::validation("synthetic vocabulary is empty"));
        }
        if self.modes.is_empty() {
            return Err(Error::validation("at least one mode is required"));
        }
        let n = self.vocab.len();
        for mode in &self.modes {
            if mode.weight < 0.0 {
                return Err(Error::validation(format!(
                    "mode {}: negative weight",
                    mode.name
                )));
            }
            check_distribution(&format!("mode {} init", mode.name), &mode.init, n)?;
            if mode.trans.len() != n {
                return Err(Error::validation(format!(
                    "mode {}: {} transition rows, expected {n}",
                    mode.name,
                    mode.trans.len()
                )));
            }
            for (i, row) in mode.trans.iter().enumerate() {
                check_distribution(&format!("mode {} trans[{i}]", mode.name), row, n)?;
            }
        }
        if self.modes.iter().map(|m| m.weight).sum::<f64>() <= 0.0 {
            return Err(Error::validation("mode weights sum to zero"));
        }
        Ok(())
    }

    fn sample_sentence(&self, mode: &MarkovMode, len: usize, rng: &mut impl Rng) -> Vec<u32> {
        let mut out = Vec::with_capacity(len);
        let mut state = sample_index(&mode.init, rng);
        out.push(self.word_id(state));
        for _ in 1..len {
            state = sample_index(&mode.trans[state], rng);
            out.push(self.word_id(state));
        }
        out
    }

    fn word_id(&self, state: usize) -> u32 {
        (crate::corpus::RESERVED.len() + state) as u32
    }

    pub fn vocabulary(&self) -> Vocabulary {
        Vocabulary::from_tokens(self.vocab.iter().map(String::as_str))
    }
}

/// Sample `n_pairs` source/target pairs from the mode mixture.
pub fn synth_corpus(spec: &SynthSpec, n_pairs: usize, seed: u64) -> Result<(Vocabulary, Dataset)> {
    spec.validate()?;
    let vocab = spec.vocabulary();
    let total_weight: f64 = spec.modes.iter().map(|m| m.weight).sum();
    let mode_dist: Vec<f64> = spec.modes.iter().map(|m| m.weight / total_weight).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = Vec::with_capacity(n_pairs);
    for _ in 0..n_pairs {
        let mi = sample_index(&mode_dist, &mut rng);
        let mode = &spec.modes[mi];
        let src_len = sample_range(spec.source_len, &mut rng);
        let source = spec.sample_sentence(mode, src_len.max(1), &mut rng);
        let n_sents = sample_range(mode.sentences, &mut rng).max(1);
        let target = (0..n_sents)
            .map(|_| {
                let len = sample_range(mode.sentence_len, &mut rng).max(1);
                spec.sample_sentence(mode, len, &mut rng)
            })
            .collect();
        pairs.push(TextPair {
            source,
            target,
            mode: mode.name.clone(),
        });
    }
    Ok((vocab, Dataset::new(pairs, Split::Train)))
}
