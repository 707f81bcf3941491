//! Diversity metrics, word-frequency cosine analysis, reward
//! distribution histograms, and smoothed sentence BLEU.

use std::collections::{HashMap, HashSet};

use crate::corpus::TokenId;
use crate::discriminators::{
    classifier_score, lm_text_reward, ClassifierDiscriminator, LMDiscriminator, Text,
};
use crate::error::{Error, Result};

/// Pooled diversity counts over a set of generated sentences.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DiversityReport {
    pub token_count: usize,
    pub distinct_unigrams: usize,
    pub distinct_bigrams: usize,
    pub distinct_trigrams: usize,
    pub distinct_sentences: usize,
}

fn distinct_ngrams(sentences: &[Vec<TokenId>], n: usize) -> usize {
    let mut seen: HashSet<&[TokenId]> = HashSet::new();
    for s in sentences {
        for w in s.windows(n) {
            seen.insert(w);
        }
    }
    seen.len()
}

/// Token = total words; Dist-n = distinct n-grams pooled over the set
/// (n-grams do not cross sentence boundaries); Dist-S = distinct whole
/// sentences by exact token-sequence match.
pub fn diversity_report(sentences: &[Vec<TokenId>]) -> DiversityReport {
    let token_count = sentences.iter().map(Vec::len).sum();
    let distinct_sentences = sentences.iter().collect::<HashSet<_>>().len();
    DiversityReport {
        token_count,
        distinct_unigrams: distinct_ngrams(sentences, 1),
        distinct_bigrams: distinct_ngrams(sentences, 2),
        distinct_trigrams: distinct_ngrams(sentences, 3),
        distinct_sentences,
    }
}

/// Per-rank-bin cosine similarity between reference and generated word
/// frequency vectors, words indexed by their frequency rank in the
/// reference corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyProfile {
    /// Half-open 0-based rank ranges `[start, end)`.
    pub bins: Vec<(usize, usize)>,
    pub cosines: Vec<f64>,
}

/// Default rank bins: 1-500, 501-1000, 1001-1500, 1501-2000.
pub fn default_rank_bins() -> Vec<(usize, usize)> {
    (0..4).map(|i| (i * 500, (i + 1) * 500)).collect()
}

fn word_counts(sentences: &[Vec<TokenId>]) -> HashMap<TokenId, u64> {
    let mut counts = HashMap::new();
    for s in sentences {
        for &t in s {
            *counts.entry(t).or_insert(0) += 1;
        }
    }
    counts
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

pub fn frequency_cosine(
    reference: &[Vec<TokenId>],
    generated: &[Vec<TokenId>],
    bins: &[(usize, usize)],
) -> Result<FrequencyProfile> {
    if reference.iter().all(|s| s.is_empty()) {
        return Err(Error::contract("frequency_cosine: empty reference corpus"));
    }
    let mut prev_end = 0;
    for &(start, end) in bins {
        if start >= end || start < prev_end {
            return Err(Error::validation(format!(
                "rank bins must be ordered and disjoint, got [{start}, {end}) after {prev_end}"
            )));
        }
        prev_end = end;
    }
    let ref_counts = word_counts(reference);
    let gen_counts = word_counts(generated);
    // rank by reference frequency, descending; ties broken by token id
    let mut ranked: Vec<(TokenId, u64)> = ref_counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    let cosines = bins
        .iter()
        .map(|&(start, end)| {
            let slice = &ranked[start.min(ranked.len())..end.min(ranked.len())];
            let ref_vec: Vec<f64> = slice.iter().map(|&(_, c)| c as f64).collect();
            let gen_vec: Vec<f64> = slice
                .iter()
                .map(|&(t, _)| gen_counts.get(&t).copied().unwrap_or(0) as f64)
                .collect();
            cosine(&ref_vec, &gen_vec)
        })
        .collect();
    Ok(FrequencyProfile {
        bins: bins.to_vec(),
        cosines,
    })
}

/// Fixed-width histogram over the observed value range.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub min: f64,
    pub max: f64,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn build(values: &[f64], n_bins: usize) -> Result<Self> {
        if values.is_empty() || n_bins == 0 {
            return Err(Error::contract("Histogram::build: empty values or zero bins"));
        }
        let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut counts = vec![0usize; n_bins];
        let width = (max - min) / n_bins as f64;
        for &v in values {
            let idx = if width == 0.0 {
                0
            } else {
                (((v - min) / width) as usize).min(n_bins - 1)
            };
            counts[idx] += 1;
        }
        Ok(Histogram { min, max, counts })
    }
}

/// Mean, population standard deviation, and coefficient of variation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SummaryStats {
    pub mean: f64,
    pub std: f64,
    pub cv: f64,
}

pub fn summary_stats(values: &[f64]) -> Result<SummaryStats> {
    if values.is_empty() {
        return Err(Error::contract("summary_stats: empty values"));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    let cv = if mean == 0.0 { f64::NAN } else { std / mean.abs() };
    Ok(SummaryStats { mean, std, cv })
}

/// One (discriminator × source) cell of the reward-distribution report.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardCell {
    pub discriminator: &'static str,
    pub source: &'static str,
    pub values: Vec<f64>,
    pub histogram: Histogram,
    pub stats: SummaryStats,
}

fn lm_text_rewards(d: &LMDiscriminator, samples: &[Text]) -> Result<Vec<f64>> {
    samples.iter().map(|t| lm_text_reward(d, t)).collect()
}

fn classifier_text_scores(c: &ClassifierDiscriminator, samples: &[Text]) -> Result<Vec<f64>> {
    samples
        .iter()
        .map(|t| {
            if t.is_empty() {
                return Err(Error::contract("classifier score of empty text"));
            }
            let total: f64 = t
                .iter()
                .map(|s| classifier_score(c, s))
                .sum::<Result<f64>>()?;
            Ok(total / t.len() as f64)
        })
        .collect()
}

/// Paired reward distributions: LM rewards and classifier scores for
/// real and generated samples, each with a histogram and summary stats.
pub fn reward_histogram(
    real_samples: &[Text],
    gen_samples: &[Text],
    lm_d: &LMDiscriminator,
    classifier_d: &ClassifierDiscriminator,
    n_bins: usize,
) -> Result<Vec<RewardCell>> {
    if real_samples.is_empty() || gen_samples.is_empty() {
        return Err(Error::contract("reward_histogram: empty sample set"));
    }
    let mut cells = Vec::with_capacity(4);
    for (disc, source, values) in [
        ("lm", "real", lm_text_rewards(lm_d, real_samples)?),
        ("lm", "generated", lm_text_rewards(lm_d, gen_samples)?),
        (
            "classifier",
            "real",
            classifier_text_scores(classifier_d, real_samples)?,
        ),
        (
            "classifier",
            "generated",
            classifier_text_scores(classifier_d, gen_samples)?,
        ),
    ] {
        let histogram = Histogram::build(&values, n_bins)?;
        let stats = summary_stats(&values)?;
        cells.push(RewardCell {
            discriminator: disc,
            source,
            values,
            histogram,
            stats,
        });
    }
    Ok(cells)
}

fn ngram_counts(tokens: &[TokenId], n: usize) -> HashMap<&[TokenId], u64> {
    let mut counts = HashMap::new();
    for w in tokens.windows(n) {
        *counts.entry(w).or_insert(0) += 1;
    }
    counts
}

/// Smoothed sentence BLEU: geometric mean of clipped n-gram precisions
/// (zero match counts floored at `smoothing_eps`) times the brevity
/// penalty against the closest reference length.
pub fn bleu(
    candidate: &[TokenId],
    references: &[Vec<TokenId>],
    max_n: usize,
    smoothing_eps: f64,
) -> Result<f64> {
    if max_n == 0 {
        return Err(Error::contract("bleu: max_n must be >= 1"));
    }
    if references.is_empty() || references.iter().any(|r| r.is_empty()) {
        return Err(Error::contract("bleu: references must be non-empty"));
    }
    if candidate.is_empty() {
        return Ok(0.0);
    }
    let mut log_prec_sum = 0.0;
    let mut used = 0usize;
    for n in 1..=max_n {
        let total = candidate.len().saturating_sub(n - 1);
        if total == 0 {
            continue;
        }
        let cand = ngram_counts(candidate, n);
        let mut max_ref: HashMap<&[TokenId], u64> = HashMap::new();
        for r in references {
            for (g, c) in ngram_counts(r, n) {
                let e = max_ref.entry(g).or_insert(0);
                *e = (*e).max(c);
            }
        }
        let matched: u64 = cand
            .iter()
            .map(|(g, &c)| c.min(max_ref.get(g).copied().unwrap_or(0)))
            .sum();
        let p = (matched as f64).max(smoothing_eps) / total as f64;
        log_prec_sum += p.ln();
        used += 1;
    }
    let geo = (log_prec_sum / used as f64).exp();
    // brevity penalty against the closest reference length (ties: shorter)
    let c = candidate.len() as f64;
    let r = references
        .iter()
        .map(|r| r.len())
        .min_by_key(|&l| ((l as i64 - candidate.len() as i64).abs(), l))
        .unwrap() as f64;
    let bp = if c < r { (1.0 - r / c).exp() } else { 1.0 };
    Ok((geo * bp).min(1.0))
}
