//! Sentence-level and word-level reward computation and discounted
//! return assembly for the three reward variants, plus Monte Carlo
//! rollout estimation for the classifier baseline.

use crate::corpus::TokenId;
use crate::discriminators::{
    classifier_score, lm_word_rewards, ClassifierDiscriminator, LMDiscriminator, Text,
};
use crate::error::{Error, Result};
use crate::generator::{complete_sentence, GeneratorModel};

/// Which factors enter the return: sentence-level only, word-level
/// only, or both combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RewardMode {
    S,
    W,
    SW,
}

impl RewardMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "s" => Ok(RewardMode::S),
            "w" => Ok(RewardMode::W),
            "sw" => Ok(RewardMode::SW),
            _ => Err(Error::Config(format!(
                "unknown reward mode {s:?} (expected s, w, or sw)"
            ))),
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            RewardMode::S => "s",
            RewardMode::W => "w",
            RewardMode::SW => "sw",
        }
    }
}

/// Per-word rewards, per-sentence rewards, and discounted returns for
/// one text.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardBundle {
    pub word_rewards: Vec<Vec<f64>>,
    pub sentence_rewards: Vec<f64>,
    pub returns: Vec<Vec<f64>>,
    pub gamma: f64,
    pub mode: RewardMode,
}

impl RewardBundle {
    pub fn mean_word_reward(&self) -> f64 {
        let n: usize = self.word_rewards.iter().map(Vec::len).sum();
        if n == 0 {
            return 0.0;
        }
        self.word_rewards.iter().flatten().sum::<f64>() / n as f64
    }
}

/// Eq.-(2)-style sentence reward: the arithmetic mean of word rewards.
pub fn sentence_reward(word_rewards: &[f64]) -> Result<f64> {
    if word_rewards.is_empty() {
        return Err(Error::contract("sentence_reward: empty sentence"));
    }
    Ok(word_rewards.iter().sum::<f64>() / word_rewards.len() as f64)
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::validation(format!(
            "discount gamma must lie in (0, 1], got {gamma}"
        )));
    }
    Ok(())
}

/// Discounted returns `R_{t,k} = sum_{i=k..K} gamma^{i-1} S R(y_{t,i})`
/// where mode S sets the word factor to 1 and mode W the sentence
/// factor to 1. Computed by the suffix recurrence
/// `R_{t,k} = gamma^{k-1} S_t W_{t,k} + R_{t,k+1}`.
pub fn assemble_returns(
    word_rewards: &[Vec<f64>],
    sentence_rewards: &[f64],
    gamma: f64,
    mode: RewardMode,
) -> Result<Vec<Vec<f64>>> {
    check_gamma(gamma)?;
    if word_rewards.len() != sentence_rewards.len() {
        return Err(Error::contract(format!(
            "assemble_returns: {} sentences of word rewards vs {} sentence rewards",
            word_rewards.len(),
            sentence_rewards.len()
        )));
    }
    let mut returns = Vec::with_capacity(word_rewards.len());
    for (words, &sent) in word_rewards.iter().zip(sentence_rewards) {
        let sentence_factor = match mode {
            RewardMode::W => 1.0,
            _ => sent,
        };
        let mut row = vec![0.0; words.len()];
        let mut suffix = 0.0;
        for k in (0..words.len()).rev() {
            let word_factor = match mode {
                RewardMode::S => 1.0,
                _ => words[k],
            };
            suffix += gamma.powi(k as i32) * sentence_factor * word_factor;
            row[k] = suffix;
        }
        returns.push(row);
    }
    Ok(returns)
}

/// Word rewards, sentence rewards, and returns for a marked text under
/// a frozen language-model discriminator.
pub fn lm_reward_bundle(
    d: &LMDiscriminator,
    text: &Text,
    gamma: f64,
    mode: RewardMode,
) -> Result<RewardBundle> {
    let word_rewards: Vec<Vec<f64>> = text
        .iter()
        .map(|s| lm_word_rewards(d, s))
        .collect::<Result<_>>()?;
    let sentence_rewards: Vec<f64> = word_rewards
        .iter()
        .map(|w| sentence_reward(w))
        .collect::<Result<_>>()?;
    let returns = assemble_returns(&word_rewards, &sentence_rewards, gamma, mode)?;
    Ok(RewardBundle {
        word_rewards,
        sentence_rewards,
        returns,
        gamma,
        mode,
    })
}

/// Is this sentence prefix already a finished sentence?
pub fn is_complete_sentence(prefix: &[TokenId], max_words: usize) -> bool {
    matches!(prefix.last(), Some(&t) if t == crate::corpus::EOSENT || t == crate::corpus::EOS)
        || prefix.len() >= max_words
}

/// Monte Carlo Search estimate of the classifier reward for a word
/// prefix: mean classifier score over `n_rollouts` generator
/// completions. A complete sentence is scored directly, no sampling.
#[allow(clippy::too_many_arguments)]
pub fn mcs_rollout_returns(
    generator: &GeneratorModel,
    classifier: &ClassifierDiscriminator,
    source: &[TokenId],
    prev_sentences: &[Vec<TokenId>],
    prefix: &[TokenId],
    max_words: usize,
    n_rollouts: usize,
    seed: u64,
) -> Result<f64> {
    if prefix.is_empty() {
        return Err(Error::contract("mcs_rollout_returns: empty prefix"));
    }
    if is_complete_sentence(prefix, max_words) {
        return classifier_score(classifier, prefix);
    }
    if n_rollouts == 0 {
        return Err(Error::contract("mcs_rollout_returns: n_rollouts must be >= 1"));
    }
    let mut total = 0.0;
    for r in 0..n_rollouts {
        let completion = complete_sentence(
            generator,
            source,
            prev_sentences,
            prefix,
            max_words,
            crate::stream_seed(seed, r as u64),
        )?;
        total += classifier_score(classifier, &completion)?;
    }
    Ok(total / n_rollouts as f64)
}
