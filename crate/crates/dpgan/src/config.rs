//! Flat dotted key-value run configuration. Every key is optional and
//! falls back to the desk-scale default; unknown keys or bad values are
//! all reported at once.

use std::path::Path;

use crate::error::{Error, Result};
use crate::rewards::RewardMode;
use crate::training::{BaselineKind, TrainConfig};

/// Full run configuration: model size, corpus limits, and the training
/// loop settings.
#[derive(Debug, Clone)]
pub struct Config {
    pub embed: usize,
    pub hidden: usize,
    /// Vocabulary cap for `prepare`, reserved tokens included.
    pub max_vocab: usize,
    pub train: TrainConfig,
}

impl Config {
    pub fn desk(seed: u64) -> Self {
        Config {
            embed: 16,
            hidden: 24,
            max_vocab: 300,
            train: TrainConfig::desk(seed),
        }
    }

    /// Published-scale settings: hidden 256, embedding 128, vocabulary
    /// 50K, batch 64, learning rate 0.1, 1K generator / 5K discriminator
    /// steps, 10 pretraining epochs, up to 6 sentences of 40 words.
    pub fn paper(seed: u64) -> Self {
        let mut c = Config::desk(seed);
        c.embed = 128;
        c.hidden = 256;
        c.max_vocab = 50_000;
        c.train.n_iterations = 1;
        c.train.m_generator = 1_000;
        c.train.k_discriminator = 5_000;
        c.train.learning_rate = 0.1;
        c.train.batch_size = 64;
        c.train.pretrain_g_epochs = 10;
        c.train.pretrain_d_steps = 5_000;
        c.train.max_sentences = 6;
        c.train.max_words = 40;
        c
    }

    pub fn parse(text: &str) -> Result<Config> {
        let mut cfg = Config::desk(0);
        let mut errors = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                errors.push(format!("line {}: no '=' in {line:?}", lineno + 1));
                continue;
            };
            let key = key.trim();
            let value = value.trim();
            if let Err(e) = cfg.apply(key, value) {
                errors.push(format!("line {}: {e}", lineno + 1));
            }
        }
        if let Err(e) = cfg.validate() {
            errors.push(e.to_string());
        }
        if errors.is_empty() {
            Ok(cfg)
        } else {
            Err(Error::Config(errors.join("; ")))
        }
    }

    pub fn load(path: &Path) -> Result<Config> {
        Config::parse(&std::fs::read_to_string(path)?)
    }

    fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::Config(format!("key {key}: bad value {value:?}")))
        }
        fn flag(key: &str, value: &str) -> Result<bool> {
            match value {
                "true" | "on" | "1" => Ok(true),
                "false" | "off" | "0" => Ok(false),
                _ => Err(Error::Config(format!("key {key}: bad boolean {value:?}"))),
            }
        }
        match key {
            "model.embed" => self.embed = num(key, value)?,
            "model.hidden" => self.hidden = num(key, value)?,
            "data.max_vocab" => self.max_vocab = num(key, value)?,
            "train.baseline" => self.train.baseline = BaselineKind::parse(value)?,
            "train.iterations" => self.train.n_iterations = num(key, value)?,
            "train.generator_steps" => self.train.m_generator = num(key, value)?,
            "train.discriminator_steps" => self.train.k_discriminator = num(key, value)?,
            "train.gamma" => self.train.gamma = num(key, value)?,
            "train.reward_mode" => self.train.reward_mode = RewardMode::parse(value)?,
            "train.mean_baseline" => self.train.mean_baseline = flag(key, value)?,
            "train.learning_rate" => self.train.learning_rate = num(key, value)?,
            "train.clip" => self.train.clip = num(key, value)?,
            "train.batch_size" => self.train.batch_size = num(key, value)?,
            "train.pretrain_generator_epochs" => self.train.pretrain_g_epochs = num(key, value)?,
            "train.pretrain_discriminator_steps" => self.train.pretrain_d_steps = num(key, value)?,
            "train.rollouts" => self.train.n_rollouts = num(key, value)?,
            "train.teacher_forcing" => self.train.seqgan_teacher_forcing = flag(key, value)?,
            "train.seed" => self.train.seed = num(key, value)?,
            "generate.max_sentences" => self.train.max_sentences = num(key, value)?,
            "generate.max_words" => self.train.max_words = num(key, value)?,
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.embed == 0 || self.hidden == 0 {
            return Err(Error::Config(
                "model.embed and model.hidden must be >= 1".into(),
            ));
        }
        if self.max_vocab <= crate::corpus::RESERVED.len() {
            return Err(Error::Config(format!(
                "data.max_vocab must exceed the {} reserved tokens",
                crate::corpus::RESERVED.len()
            )));
        }
        self.train.validate()
    }

    /// The config in its own file format, every key explicit.
    pub fn to_text(&self) -> String {
        let t = &self.train;
        format!(
            "model.embed = {}\n\
             model.hidden = {}\n\
             data.max_vocab = {}\n\
             train.baseline = {}\n\
             train.iterations = {}\n\
             train.generator_steps = {}\n\
             train.discriminator_steps = {}\n\
             train.gamma = {}\n\
             train.reward_mode = {}\n\
             train.mean_baseline = {}\n\
             train.learning_rate = {}\n\
             train.clip = {}\n\
             train.batch_size = {}\n\
             train.pretrain_generator_epochs = {}\n\
             train.pretrain_discriminator_steps = {}\n\
             train.rollouts = {}\n\
             train.teacher_forcing = {}\n\
             train.seed = {}\n\
             generate.max_sentences = {}\n\
             generate.max_words = {}\n",
            self.embed,
            self.hidden,
            self.max_vocab,
            t.baseline.tag(),
            t.n_iterations,
            t.m_generator,
            t.k_discriminator,
            t.gamma,
            t.reward_mode.tag(),
            t.mean_baseline,
            t.learning_rate,
            t.clip,
            t.batch_size,
            t.pretrain_g_epochs,
            t.pretrain_d_steps,
            t.n_rollouts,
            t.seqgan_teacher_forcing,
            t.seed,
            t.max_sentences,
            t.max_words,
        )
    }
}
