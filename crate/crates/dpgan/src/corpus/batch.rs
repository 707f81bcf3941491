use crate::corpus::{mark_target, Dataset, TextPair, TokenId, PAD};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// A shuffled slice of the dataset with padded id matrices and masks.
/// Model code consumes `items`; the padded views serve fixed-shape
/// consumers and the mask contracts.
#[derive(Debug, Clone)]
pub struct Batch<'a> {
    pub items: Vec<&'a TextPair>,
    pub padded_sources: Vec<Vec<TokenId>>,
    pub source_mask: Vec<Vec<f64>>,
    /// Flattened marked targets (sentence markers included), padded.
    pub padded_targets: Vec<Vec<TokenId>>,
    pub target_mask: Vec<Vec<f64>>,
}

fn pad_rows(rows: Vec<Vec<TokenId>>) -> (Vec<Vec<TokenId>>, Vec<Vec<f64>>) {
    let width = rows.iter().map(Vec::len).max().unwrap_or(0);
    let mut padded = Vec::with_capacity(rows.len());
    let mut masks = Vec::with_capacity(rows.len());
    for mut row in rows {
        let real = row.len();
        row.resize(width, PAD);
        let mut mask = vec![1.0; real];
        mask.resize(width, 0.0);
        padded.push(row);
        masks.push(mask);
    }
    (padded, masks)
}

impl<'a> Batch<'a> {
    fn build(items: Vec<&'a TextPair>) -> Self {
        let sources = items.iter().map(|p| p.source.clone()).collect();
        let targets = items
            .iter()
            .map(|p| mark_target(&p.target).into_iter().flatten().collect())
            .collect();
        let (padded_sources, source_mask) = pad_rows(sources);
        let (padded_targets, target_mask) = pad_rows(targets);
        Batch {
            items,
            padded_sources,
            source_mask,
            padded_targets,
            target_mask,
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

/// Iterate one epoch of batches, shuffled under `(seed, epoch)`.
pub fn batch_iter(
    dataset: &Dataset,
    batch_size: usize,
    seed: u64,
    epoch: u64,
) -> impl Iterator<Item = Batch<'_>> {
    let mut order: Vec<usize> = (0..dataset.pairs.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(crate::stream_seed(seed, epoch));
    order.shuffle(&mut rng);
    let batch_size = batch_size.max(1);
    let pairs = &dataset.pairs;
    (0..order.len())
        .step_by(batch_size)
        .map(move |start| {
            let idx = &order[start..(start + batch_size).min(order.len())];
            Batch::build(idx.iter().map(|&i| &pairs[i]).collect())
        })
        .collect::<Vec<_>>()
        .into_iter()
}
