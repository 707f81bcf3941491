//! Tokenization, vocabulary, review/dialogue pair splitting, batching,
//! and synthetic corpora for reproducible experiments.

pub mod batch;
pub mod synth;
pub mod tokenize;
pub mod vocab;

pub use batch::{batch_iter, Batch};
pub use synth::{synth_corpus, MarkovMode, SynthSpec};
pub use tokenize::{detokenize, tokenize};
pub use vocab::{TokenId, Vocabulary, BOS, EOS, EOSENT, PAD, RESERVED, UNK};

use crate::error::{Error, Result};

/// One source sentence paired with a multi-sentence target, as token ids.
#[derive(Debug, Clone, PartialEq)]
pub struct TextPair {
    pub source: Vec<TokenId>,
    pub target: Vec<Vec<TokenId>>,
    /// Originating mode for synthetic corpora, empty otherwise.
    pub mode: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub fn tag(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub pairs: Vec<TextPair>,
    pub split: Split,
}

impl Dataset {
    pub fn new(pairs: Vec<TextPair>, split: Split) -> Self {
        Dataset { pairs, split }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Review mode: first sentence becomes the source, the rest the target.
/// Documents with fewer than two sentences are skipped.
pub fn split_review(sentences: &[Vec<String>]) -> Option<(Vec<String>, Vec<Vec<String>>)> {
    if sentences.len() < 2 {
        return None;
    }
    let source = sentences[0].clone();
    let target = sentences[1..].to_vec();
    if source.is_empty() || target.iter().any(Vec::is_empty) {
        return None;
    }
    Some((source, target))
}

/// Dialogue mode: context column becomes the source (flattened), the
/// response column the target. With `min_response_words > 0`, short
/// responses are removed.
pub fn split_dialogue(
    context: &str,
    response: &str,
    min_response_words: usize,
) -> Option<(Vec<String>, Vec<Vec<String>>)> {
    let source: Vec<String> = tokenize(context).into_iter().flatten().collect();
    let target = tokenize(response);
    if source.is_empty() || target.is_empty() {
        return None;
    }
    let words: usize = target.iter().map(Vec::len).sum();
    if words < min_response_words {
        return None;
    }
    Some((source, target))
}

/// Append the end-of-sentence marker to every sentence and a final
/// end-of-text sentence. This marked form is what the decoders score.
pub fn mark_target(target: &[Vec<TokenId>]) -> Vec<Vec<TokenId>> {
    let mut out: Vec<Vec<TokenId>> = target
        .iter()
        .map(|s| {
            let mut s = s.clone();
            s.push(EOSENT);
            s
        })
        .collect();
    out.push(vec![EOS]);
    out
}

/// Drop marker tokens, keeping only content sentences.
pub fn strip_markers(marked: &[Vec<TokenId>]) -> Vec<Vec<TokenId>> {
    marked
        .iter()
        .filter_map(|s| {
            let content: Vec<TokenId> = s
                .iter()
                .copied()
                .filter(|&t| t != EOSENT && t != EOS && t != BOS && t != PAD)
                .collect();
            if content.is_empty() {
                None
            } else {
                Some(content)
            }
        })
        .collect()
}

/// Validate that every id in a pair exists in the vocabulary.
pub fn validate_pair(pair: &TextPair, vocab: &Vocabulary) -> Result<()> {
    let check = |ids: &[TokenId]| -> Result<()> {
        match ids.iter().find(|&&i| !vocab.is_valid(i)) {
            Some(&bad) => Err(Error::contract(format!(
                "token id {bad} outside vocabulary of size {}",
                vocab.len()
            ))),
            None => Ok(()),
        }
    };
    check(&pair.source)?;
    if pair.target.iter().any(Vec::is_empty) {
        return Err(Error::contract("empty target sentence in pair"));
    }
    for s in &pair.target {
        check(s)?;
    }
    Ok(())
}
