use crate::error::{Error, Result};
use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::path::Path;

pub type TokenId = u32;

pub const PAD: TokenId = 0;
pub const UNK: TokenId = 1;
pub const BOS: TokenId = 2;
pub const EOS: TokenId = 3;
pub const EOSENT: TokenId = 4;

/// Reserved block, in fixed file order.
pub const RESERVED: [&str; 5] = ["<pad>", "<unk>", "<bos>", "<eos>", "<eosent>"];

/// Bidirectional token/id table with a fixed reserved block.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    token_to_id: HashMap<String, TokenId>,
    id_to_token: Vec<String>,
}

impl Vocabulary {
    fn with_reserved() -> Self {
        let id_to_token: Vec<String> = RESERVED.iter().map(|s| s.to_string()).collect();
        let token_to_id = id_to_token
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as TokenId))
            .collect();
        Vocabulary {
            token_to_id,
            id_to_token,
        }
    }

    /// Build from token frequency: keep the `max_size - RESERVED.len()`
    /// most frequent tokens, ties broken by first occurrence.
    pub fn build<'a, I>(tokens: I, max_size: usize) -> Result<Self>
    where
        I: IntoIterator<Item = &'a str>,
    {
        if max_size < RESERVED.len() {
            return Err(Error::contract(format!(
                "vocabulary max_size {max_size} is below the {} reserved tokens",
                RESERVED.len()
            )));
        }
        let mut counts: HashMap<&str, (usize, usize)> = HashMap::new(); // (freq, first_seen)
        let mut order = 0usize;
        for tok in tokens {
            let entry = counts.entry(tok).or_insert_with(|| {
                order += 1;
                (0, order)
            });
            entry.0 += 1;
        }
        let mut ranked: Vec<(&str, (usize, usize))> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1 .0.cmp(&a.1 .0).then(a.1 .1.cmp(&b.1 .1)));

        let mut vocab = Vocabulary::with_reserved();
        for (tok, _) in ranked.into_iter().take(max_size - RESERVED.len()) {
            vocab.push(tok);
        }
        Ok(vocab)
    }

    /// Build with every distinct token kept, in the order given.
    pub fn from_tokens<'a, I: IntoIterator<Item = &'a str>>(tokens: I) -> Self {
        let mut vocab = Vocabulary::with_reserved();
        for tok in tokens {
            if !vocab.token_to_id.contains_key(tok) {
                vocab.push(tok);
            }
        }
        vocab
    }

    fn push(&mut self, token: &str) {
        let id = self.id_to_token.len() as TokenId;
        self.id_to_token.push(token.to_string());
        self.token_to_id.insert(token.to_string(), id);
    }

    pub fn len(&self) -> usize {
        self.id_to_token.len()
    }

    pub fn is_empty(&self) -> bool {
        false // the reserved block always exists
    }

    pub fn id(&self, token: &str) -> TokenId {
        self.token_to_id.get(token).copied().unwrap_or(UNK)
    }

    pub fn token(&self, id: TokenId) -> &str {
        self.id_to_token
            .get(id as usize)
            .map(String::as_str)
            .unwrap_or(RESERVED[UNK as usize])
    }

    pub fn contains(&self, token: &str) -> bool {
        self.token_to_id.contains_key(token)
    }

    pub fn is_valid(&self, id: TokenId) -> bool {
        (id as usize) < self.id_to_token.len()
    }

    pub fn encode(&self, tokens: &[String]) -> Vec<TokenId> {
        tokens.iter().map(|t| self.id(t)).collect()
    }

    pub fn encode_sentences(&self, sentences: &[Vec<String>]) -> Vec<Vec<TokenId>> {
        sentences.iter().map(|s| self.encode(s)).collect()
    }

    pub fn decode(&self, ids: &[TokenId]) -> Vec<String> {
        ids.iter().map(|&i| self.token(i).to_string()).collect()
    }

    /// One non-reserved token per line; id = line number + reserved size.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = Vec::new();
        for tok in &self.id_to_token[RESERVED.len()..] {
            writeln!(out, "{tok}")?;
        }
        crate::atomic_write(path, &out)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        let mut vocab = Vocabulary::with_reserved();
        for line in std::io::BufReader::new(file).lines() {
            let line = line?;
            let tok = line.trim();
            if tok.is_empty() {
                continue;
            }
            if vocab.token_to_id.contains_key(tok) {
                return Err(Error::validation(format!(
                    "duplicate token {tok:?} in vocabulary file"
                )));
            }
            vocab.push(tok);
        }
        Ok(vocab)
    }
}
