//! DP-GAN: diversity-promoting adversarial training for text
//! generation. A sequence-to-sequence generator is trained by policy
//! gradient against a language-model discriminator whose cross-entropy
//! is the reward, alongside MLE, PG-BLEU, and classifier-GAN baselines,
//! diversity metrics, and reward-distribution analysis.

pub mod checkpoint;
pub mod config;
pub mod corpus;
pub mod discriminators;
pub mod generator;
pub mod error;
pub mod evaluation;
pub mod numerics;
pub mod rewards;
pub mod training;

pub use error::{Error, Result};

use std::io::Write;
use std::path::Path;

/// Derive an independent RNG stream seed from a run seed and a salt
/// (step counter, epoch, ...). SplitMix64 finalizer.
pub fn stream_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Write a file atomically: temp file in the same directory, then rename.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    std::fs::create_dir_all(dir)?;
    let tmp = dir.join(format!(
        ".{}.tmp",
        path.file_name().and_then(|n| n.to_str()).unwrap_or("out")
    ));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}
