//! Command-line entry points: corpus preparation, pretraining, the
//! adversarial loop, generation, and analysis reports.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use sha2::{Digest, Sha256};

use dpgan::checkpoint::{
    load_classifier, load_generator, load_lm_discriminator, save_classifier, save_generator,
    save_lm_discriminator, Checkpoint,
};
use dpgan::config::Config;
use dpgan::corpus::{
    split_dialogue, split_review, tokenize, Dataset, Split, TextPair, TokenId, Vocabulary,
};
use dpgan::discriminators::{
    train_classifier, train_lm_discriminator, ClassifierDiscriminator, LMDiscriminator,
};
use dpgan::error::{Error, Result};
use dpgan::evaluation::{
    bleu, default_rank_bins, diversity_report, frequency_cosine, reward_histogram,
};
use dpgan::generator::{generate, GenDims, GenerationConfig, GeneratorModel};
use dpgan::numerics::{OptimizerState, ADAGRAD_EPSILON};
use dpgan::training::{
    adversarial_train, pg_bleu_train, pretrain_generator, seqgan_train, BaselineKind, RunLog,
};
use dpgan::{atomic_write, stream_seed};

#[derive(Parser)]
#[command(name = "dpgan", version, about = "Diversity-promoting adversarial text generation")]
struct Cli {
    /// Run configuration file (flat dotted key = value lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for artifacts.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    /// Overwrite an existing manifest.
    #[arg(long, global = true)]
    force: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Tokenize a raw corpus, build the vocabulary, and write splits.
    Prepare {
        /// Raw corpus: one document per line (review mode) or
        /// context<TAB>response (dialogue mode).
        corpus: PathBuf,
        #[arg(long, default_value = "review")]
        mode: String,
        /// Drop dialogue responses shorter than this many words.
        #[arg(long, default_value_t = 0)]
        min_response_words: usize,
    },
    /// MLE-pretrain the generator and pretrain the discriminator.
    Pretrain {
        /// Directory produced by `prepare`.
        data_dir: PathBuf,
    },
    /// Full training per the configured baseline (pretrains first when
    /// no checkpoints exist; resumes when they do).
    Train {
        data_dir: PathBuf,
    },
    /// Decode one output per input line from a generator checkpoint.
    Generate {
        checkpoint: PathBuf,
        /// Vocabulary file written by `prepare`.
        vocab: PathBuf,
        /// One source text per line.
        input: PathBuf,
        #[arg(long)]
        greedy: bool,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Diversity and frequency metrics of a generated file against a
    /// reference corpus.
    Evaluate {
        generated: PathBuf,
        reference: PathBuf,
        /// Also report mean line-wise BLEU against the reference.
        #[arg(long)]
        bleu: bool,
    },
    /// Reward distributions of both discriminators on real and
    /// generated samples.
    AnalyzeRewards {
        generator: PathBuf,
        lm_discriminator: PathBuf,
        classifier: PathBuf,
        data_dir: PathBuf,
        #[arg(long, default_value_t = 50)]
        bins: usize,
        /// Cap on the number of test pairs scored.
        #[arg(long, default_value_t = 200)]
        limit: usize,
    },
    /// Per-rank-bin cosine similarity of word frequencies.
    AnalyzeFrequency {
        reference: PathBuf,
        generated: PathBuf,
    },
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::desk(0),
    };
    if let Some(seed) = cli.seed {
        cfg.train.seed = seed;
    }
    std::fs::create_dir_all(&cli.out_dir)?;
    match &cli.cmd {
        Cmd::Prepare {
            corpus,
            mode,
            min_response_words,
        } => cmd_prepare(&cli, &cfg, corpus, mode, *min_response_words),
        Cmd::Pretrain { data_dir } => {
            cmd_train(&cli, &cfg, data_dir, true)
        }
        Cmd::Train { data_dir } => cmd_train(&cli, &cfg, data_dir, false),
        Cmd::Generate {
            checkpoint,
            vocab,
            input,
            greedy,
            output,
        } => cmd_generate(&cli, &cfg, checkpoint, vocab, input, *greedy, output.as_deref()),
        Cmd::Evaluate {
            generated,
            reference,
            bleu,
        } => cmd_evaluate(&cli, generated, reference, *bleu),
        Cmd::AnalyzeRewards {
            generator,
            lm_discriminator,
            classifier,
            data_dir,
            bins,
            limit,
        } => cmd_analyze_rewards(
            &cli,
            &cfg,
            generator,
            lm_discriminator,
            classifier,
            data_dir,
            *bins,
            *limit,
        ),
        Cmd::AnalyzeFrequency {
            reference,
            generated,
        } => cmd_analyze_frequency(&cli, reference, generated),
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    format!("{:x}", h.finalize())
}

/// Refuse to overwrite an existing manifest unless --force is given.
fn write_manifest(cli: &Cli, name: &str, body: &str) -> Result<()> {
    let path = cli.out_dir.join(name);
    if path.exists() && !cli.force {
        return Err(Error::Config(format!(
            "{} already exists; pass --force to overwrite",
            path.display()
        )));
    }
    atomic_write(&path, body.as_bytes())
}

// ---------------------------------------------------------------- prepare

/// Pairs serialized as text: `source tokens<TAB>sent | sent | ...`.
fn pairs_to_text(pairs: &[(Vec<String>, Vec<Vec<String>>)]) -> String {
    let mut out = String::new();
    for (src, tgt) in pairs {
        let sentences: Vec<String> = tgt.iter().map(|s| s.join(" ")).collect();
        let _ = writeln!(out, "{}\t{}", src.join(" "), sentences.join(" | "));
    }
    out
}

fn read_pair_file(path: &Path, vocab: &Vocabulary) -> Result<Vec<TextPair>> {
    let text = std::fs::read_to_string(path)?;
    let mut pairs = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (src, tgt) = line.split_once('\t').ok_or_else(|| {
            Error::validation(format!("{}:{}: missing tab", path.display(), lineno + 1))
        })?;
        let source: Vec<String> = src.split_whitespace().map(String::from).collect();
        let target: Vec<Vec<String>> = tgt
            .split('|')
            .map(|s| s.split_whitespace().map(String::from).collect::<Vec<_>>())
            .filter(|s: &Vec<String>| !s.is_empty())
            .collect();
        if source.is_empty() || target.is_empty() {
            return Err(Error::validation(format!(
                "{}:{}: empty source or target",
                path.display(),
                lineno + 1
            )));
        }
        pairs.push(TextPair {
            source: vocab.encode(&source),
            target: target.iter().map(|s| vocab.encode(s)).collect(),
            mode: String::new(),
        });
    }
    Ok(pairs)
}

fn cmd_prepare(
    cli: &Cli,
    cfg: &Config,
    corpus: &Path,
    mode: &str,
    min_response_words: usize,
) -> Result<()> {
    let raw = std::fs::read(corpus)?;
    let text = String::from_utf8_lossy(&raw);
    let mut docs: Vec<(Vec<String>, Vec<Vec<String>>)> = Vec::new();
    let mut skipped = 0usize;
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let pair = match mode {
            "review" => split_review(&tokenize(line)),
            "dialogue" => {
                let (ctx, resp) = line.split_once('\t').ok_or_else(|| {
                    Error::validation(format!(
                        "{}:{}: dialogue mode needs context<TAB>response",
                        corpus.display(),
                        lineno + 1
                    ))
                })?;
                split_dialogue(ctx, resp, min_response_words)
            }
            _ => {
                return Err(Error::Config(format!(
                    "unknown prepare mode {mode:?} (expected review or dialogue)"
                )))
            }
        };
        match pair {
            Some(p) => docs.push(p),
            None => skipped += 1,
        }
    }
    if docs.is_empty() {
        return Err(Error::validation(format!(
            "{}: no usable documents",
            corpus.display()
        )));
    }

    // deterministic shuffle, then 80/10/10
    let seed = cfg.train.seed;
    let mut order: Vec<usize> = (0..docs.len()).collect();
    {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(stream_seed(seed, 0x5117));
        order.shuffle(&mut rng);
    }
    let n = order.len();
    let n_valid = (n / 10).max(if n >= 3 { 1 } else { 0 });
    let n_test = n_valid;
    let n_train = n - n_valid - n_test;
    let take = |range: std::ops::Range<usize>| -> Vec<(Vec<String>, Vec<Vec<String>>)> {
        order[range].iter().map(|&i| docs[i].clone()).collect()
    };
    let train = take(0..n_train);
    let valid = take(n_train..n_train + n_valid);
    let test = take(n_train + n_valid..n);

    let train_tokens: Vec<&str> = train
        .iter()
        .flat_map(|(s, t)| {
            s.iter()
                .map(String::as_str)
                .chain(t.iter().flatten().map(String::as_str))
        })
        .collect();
    let vocab = Vocabulary::build(train_tokens, cfg.max_vocab)?;
    vocab.save(&cli.out_dir.join("vocab.txt"))?;
    for (name, split) in [("train", &train), ("valid", &valid), ("test", &test)] {
        atomic_write(
            &cli.out_dir.join(format!("{name}.txt")),
            pairs_to_text(split).as_bytes(),
        )?;
    }

    let manifest = format!(
        "command = prepare\nmode = {mode}\nseed = {seed}\ncorpus = {}\ncorpus_sha256 = {}\n\
         documents = {}\nskipped = {skipped}\ntrain = {}\nvalid = {}\ntest = {}\nvocab = {}\n{}",
        corpus.display(),
        sha256_hex(&raw),
        docs.len(),
        train.len(),
        valid.len(),
        test.len(),
        vocab.len(),
        prefixed_config(cfg),
    );
    write_manifest(cli, "manifest.txt", &manifest)?;
    println!(
        "prepared {} documents ({} skipped): {} train, {} valid, {} test, vocabulary {}",
        docs.len(),
        skipped,
        train.len(),
        valid.len(),
        test.len(),
        vocab.len()
    );
    Ok(())
}

fn prefixed_config(cfg: &Config) -> String {
    cfg.to_text()
        .lines()
        .map(|l| format!("config.{l}\n"))
        .collect()
}

// ------------------------------------------------------------------ train

struct DataDir {
    vocab: Vocabulary,
    train: Dataset,
    valid: Dataset,
    test: Dataset,
}

fn load_data(dir: &Path) -> Result<DataDir> {
    let vocab = Vocabulary::load(&dir.join("vocab.txt"))?;
    let read = |name: &str, split: Split| -> Result<Dataset> {
        Ok(Dataset::new(
            read_pair_file(&dir.join(format!("{name}.txt")), &vocab)?,
            split,
        ))
    };
    Ok(DataDir {
        train: read("train", Split::Train)?,
        valid: read("valid", Split::Valid)?,
        test: read("test", Split::Test)?,
        vocab,
    })
}

fn sources_of(data: &Dataset) -> Vec<&[TokenId]> {
    data.pairs.iter().map(|p| p.source.as_slice()).collect()
}

fn real_texts(data: &Dataset) -> Vec<Vec<Vec<TokenId>>> {
    data.pairs
        .iter()
        .map(|p| dpgan::corpus::mark_target(&p.target))
        .collect()
}

fn opt_for(lr: f64, params: &[&dpgan::numerics::Tensor]) -> OptimizerState {
    OptimizerState::for_params(lr, ADAGRAD_EPSILON, params)
}

fn cmd_train(cli: &Cli, cfg: &Config, data_dir: &Path, pretrain_only: bool) -> Result<()> {
    cfg.validate()?;
    let data = load_data(data_dir)?;
    let dims = GenDims {
        vocab: data.vocab.len(),
        embed: cfg.embed,
        hidden: cfg.hidden,
    };
    let t = &cfg.train;
    let mut log = RunLog::new();
    let g_path = cli.out_dir.join("generator.ckpt");
    let lm_path = cli.out_dir.join("lm_discriminator.ckpt");
    let cls_path = cli.out_dir.join("classifier.ckpt");

    // generator: load for resume, otherwise MLE-pretrain from scratch
    let (mut g, mut g_opt, mut done_iterations) = if g_path.exists() {
        let (g, opt, step) = load_generator(&Checkpoint::load(&g_path)?)?;
        if g.dims != dims {
            return Err(Error::Config(format!(
                "checkpoint dims {:?} do not match configured dims {:?}",
                g.dims, dims
            )));
        }
        (g, opt, step as usize)
    } else {
        let mut g = GeneratorModel::init(dims, stream_seed(t.seed, 1));
        let mut opt = opt_for(t.learning_rate, &g.params());
        pretrain_generator(
            &mut g,
            &data.train,
            Some(&data.valid),
            t.pretrain_g_epochs,
            &mut opt,
            t,
            &mut log,
        )?;
        (g, opt, 0)
    };

    let needs_lm = matches!(t.baseline, BaselineKind::None);
    let needs_cls = matches!(t.baseline, BaselineKind::Seqgan);

    let mut lm = None;
    if needs_lm {
        lm = Some(if lm_path.exists() {
            let (d, opt, _) = load_lm_discriminator(&Checkpoint::load(&lm_path)?)?;
            (d, opt)
        } else {
            let mut d = LMDiscriminator::init(dims, stream_seed(t.seed, 2));
            let mut opt = opt_for(t.learning_rate, &d.params());
            let sources = sources_of(&data.train);
            let gen_pool = dpgan::training::generate_pool(&g, &sources, t, stream_seed(t.seed, 3))?;
            train_lm_discriminator(
                &mut d,
                &real_texts(&data.train),
                &gen_pool,
                t.pretrain_d_steps,
                &mut opt,
                t.batch_size,
                t.clip,
                stream_seed(t.seed, 4),
            )?;
            (d, opt)
        });
    }
    let mut cls = None;
    if needs_cls {
        cls = Some(if cls_path.exists() {
            let (c, opt, _) = load_classifier(&Checkpoint::load(&cls_path)?)?;
            (c, opt)
        } else {
            let mut c = ClassifierDiscriminator::init(dims, stream_seed(t.seed, 5));
            let mut opt = opt_for(t.learning_rate, &c.params());
            let sources = sources_of(&data.train);
            let gen_pool = dpgan::training::generate_pool(&g, &sources, t, stream_seed(t.seed, 6))?;
            let real: Vec<Vec<TokenId>> = real_texts(&data.train).into_iter().flatten().collect();
            let gen: Vec<Vec<TokenId>> = gen_pool.into_iter().flatten().collect();
            train_classifier(
                &mut c,
                &real,
                &gen,
                t.pretrain_d_steps,
                &mut opt,
                t.batch_size,
                t.clip,
                stream_seed(t.seed, 7),
            )?;
            (c, opt)
        });
    }

    let manifest = format!(
        "command = {}\nseed = {}\nbaseline = {}\ndata_dir = {}\nvocab = {}\n{}",
        if pretrain_only { "pretrain" } else { "train" },
        t.seed,
        t.baseline.tag(),
        data_dir.display(),
        data.vocab.len(),
        prefixed_config(cfg),
    );
    write_manifest(cli, "run_manifest.txt", &manifest)?;

    if !pretrain_only {
        // one outer iteration at a time so checkpoints are periodic;
        // seeds depend only on the global position, so this matches an
        // uninterrupted run exactly
        while done_iterations < t.n_iterations {
            let mut cfg_step = t.clone();
            cfg_step.n_iterations = done_iterations + 1;
            match t.baseline {
                BaselineKind::None => {
                    let (d, d_opt) = lm.as_mut().unwrap();
                    adversarial_train(
                        &mut g,
                        d,
                        &data.train,
                        &cfg_step,
                        &mut g_opt,
                        d_opt,
                        &mut log,
                        done_iterations,
                    )?;
                }
                BaselineKind::Seqgan => {
                    let (c, c_opt) = cls.as_mut().unwrap();
                    seqgan_train(
                        &mut g,
                        c,
                        &data.train,
                        &cfg_step,
                        &mut g_opt,
                        c_opt,
                        &mut log,
                        done_iterations,
                    )?;
                }
                BaselineKind::PgBleu => {
                    pg_bleu_train(
                        &mut g,
                        &data.train,
                        &cfg_step,
                        &mut g_opt,
                        &mut log,
                        done_iterations,
                    )?;
                }
                BaselineKind::Mle => break,
            }
            done_iterations += 1;
            save_generator(&g, &g_opt, done_iterations as u64).save(&g_path)?;
            if let Some((d, d_opt)) = &lm {
                save_lm_discriminator(d, d_opt, done_iterations as u64).save(&lm_path)?;
            }
            if let Some((c, c_opt)) = &cls {
                save_classifier(c, c_opt, done_iterations as u64).save(&cls_path)?;
            }
        }
    }

    save_generator(&g, &g_opt, done_iterations as u64).save(&g_path)?;
    if let Some((d, d_opt)) = &lm {
        save_lm_discriminator(d, d_opt, done_iterations as u64).save(&lm_path)?;
    }
    if let Some((c, c_opt)) = &cls {
        save_classifier(c, c_opt, done_iterations as u64).save(&cls_path)?;
    }
    let log_path = cli.out_dir.join("runlog.tsv");
    let mut tsv = if log_path.exists() && done_iterations > 0 {
        // append to an interrupted run's log, keeping one header
        let existing = std::fs::read_to_string(&log_path)?;
        existing + log.to_tsv().lines().skip(1).collect::<Vec<_>>().join("\n").as_str() + "\n"
    } else {
        log.to_tsv()
    };
    if !tsv.ends_with('\n') {
        tsv.push('\n');
    }
    atomic_write(&log_path, tsv.as_bytes())?;
    println!(
        "{} complete: {} iterations done, {} log records",
        if pretrain_only { "pretraining" } else { "training" },
        done_iterations,
        log.records.len()
    );
    Ok(())
}

// --------------------------------------------------------------- generate

fn cmd_generate(
    cli: &Cli,
    cfg: &Config,
    checkpoint: &Path,
    vocab_path: &Path,
    input: &Path,
    greedy: bool,
    output: Option<&Path>,
) -> Result<()> {
    let (g, _, _) = load_generator(&Checkpoint::load(checkpoint)?)?;
    let vocab = Vocabulary::load(vocab_path)?;
    if g.dims.vocab != vocab.len() {
        return Err(Error::Config(format!(
            "checkpoint vocabulary {} does not match vocabulary file {}",
            g.dims.vocab,
            vocab.len()
        )));
    }
    let text = std::fs::read_to_string(input)?;
    let t = &cfg.train;
    let mut out = String::new();
    for (i, line) in text.lines().enumerate() {
        let words: Vec<String> = tokenize(line).into_iter().flatten().collect();
        let source = vocab.encode(&words);
        let gen_cfg = if greedy {
            GenerationConfig::greedy(t.max_sentences, t.max_words)
        } else {
            GenerationConfig::sampled(t.max_sentences, t.max_words, stream_seed(t.seed, i as u64))
        };
        let gen = generate(&g, &source, &gen_cfg)?;
        let sentences: Vec<String> = gen
            .content()
            .iter()
            .map(|s| {
                let mut line = vocab.decode(s).join(" ");
                if !line.ends_with(['.', '!', '?']) {
                    line.push_str(" .");
                }
                line
            })
            .collect();
        let _ = writeln!(out, "{}", sentences.join(" "));
    }
    let out_path = output
        .map(Path::to_path_buf)
        .unwrap_or_else(|| cli.out_dir.join("generated.txt"));
    atomic_write(&out_path, out.as_bytes())?;
    println!("wrote {}", out_path.display());
    Ok(())
}

// --------------------------------------------------------------- evaluate

/// Tokenized sentences of a text file.
fn tokenize_file(path: &Path) -> Result<Vec<Vec<String>>> {
    let text = std::fs::read_to_string(path)?;
    Ok(text.lines().flat_map(tokenize).collect())
}

/// One interning vocabulary covering every token of the given corpora,
/// so id-based metrics agree across files.
fn intern_vocab(corpora: &[&[Vec<String>]]) -> Vocabulary {
    Vocabulary::from_tokens(
        corpora
            .iter()
            .flat_map(|c| c.iter().flatten().map(String::as_str)),
    )
}

fn diversity_tsv(r: &dpgan::evaluation::DiversityReport) -> String {
    format!(
        "metric\tvalue\ntoken\t{}\ndist1\t{}\ndist2\t{}\ndist3\t{}\ndistS\t{}\n",
        r.token_count,
        r.distinct_unigrams,
        r.distinct_bigrams,
        r.distinct_trigrams,
        r.distinct_sentences
    )
}

fn frequency_tsv(p: &dpgan::evaluation::FrequencyProfile) -> String {
    let mut out = String::from("rank_start\trank_end\tcosine\n");
    for ((start, end), c) in p.bins.iter().zip(&p.cosines) {
        let _ = writeln!(out, "{}\t{}\t{}", start + 1, end, c);
    }
    out
}

fn cmd_evaluate(cli: &Cli, generated: &Path, reference: &Path, with_bleu: bool) -> Result<()> {
    let ref_toks = tokenize_file(reference)?;
    let gen_toks = tokenize_file(generated)?;
    let vocab = intern_vocab(&[&ref_toks, &gen_toks]);
    let ref_sents = vocab.encode_sentences(&ref_toks);
    let gen_sents = vocab.encode_sentences(&gen_toks);

    let report = diversity_report(&gen_sents);
    atomic_write(
        &cli.out_dir.join("diversity.tsv"),
        diversity_tsv(&report).as_bytes(),
    )?;
    let profile = frequency_cosine(&ref_sents, &gen_sents, &default_rank_bins())?;
    atomic_write(
        &cli.out_dir.join("frequency.tsv"),
        frequency_tsv(&profile).as_bytes(),
    )?;
    println!(
        "token {}  dist-1 {}  dist-2 {}  dist-3 {}  dist-s {}",
        report.token_count,
        report.distinct_unigrams,
        report.distinct_bigrams,
        report.distinct_trigrams,
        report.distinct_sentences
    );
    println!(
        "frequency cosine per bin: {}",
        profile
            .cosines
            .iter()
            .map(|c| format!("{c:.4}"))
            .collect::<Vec<_>>()
            .join(" ")
    );
    if with_bleu {
        let gen_lines = line_tokens(generated, &vocab)?;
        let ref_lines = line_tokens(reference, &vocab)?;
        let n = gen_lines.len().min(ref_lines.len());
        if n == 0 {
            return Err(Error::validation("bleu: no paired lines".to_string()));
        }
        let mut total = 0.0;
        for i in 0..n {
            total += bleu(&gen_lines[i], &[ref_lines[i].clone()], 4, 1e-9)?;
        }
        println!("mean line bleu over {n} lines: {:.6}", total / n as f64);
    }
    Ok(())
}

fn line_tokens(path: &Path, vocab: &Vocabulary) -> Result<Vec<Vec<TokenId>>> {
    let text = std::fs::read_to_string(path)?;
    Ok(text
        .lines()
        .map(|line| {
            let words: Vec<String> = tokenize(line).into_iter().flatten().collect();
            vocab.encode(&words)
        })
        .collect())
}

// -------------------------------------------------------- analyze-rewards

#[allow(clippy::too_many_arguments)]
fn cmd_analyze_rewards(
    cli: &Cli,
    cfg: &Config,
    generator: &Path,
    lm_discriminator: &Path,
    classifier: &Path,
    data_dir: &Path,
    bins: usize,
    limit: usize,
) -> Result<()> {
    let (g, _, _) = load_generator(&Checkpoint::load(generator)?)?;
    let (lm, _, _) = load_lm_discriminator(&Checkpoint::load(lm_discriminator)?)?;
    let (cls, _, _) = load_classifier(&Checkpoint::load(classifier)?)?;
    let data = load_data(data_dir)?;
    let pool = if data.test.is_empty() {
        &data.train
    } else {
        &data.test
    };
    let pairs = &pool.pairs[..pool.pairs.len().min(limit)];
    let real: Vec<Vec<Vec<TokenId>>> = pairs
        .iter()
        .map(|p| dpgan::corpus::mark_target(&p.target))
        .collect();
    let t = &cfg.train;
    let gen: Vec<Vec<Vec<TokenId>>> = pairs
        .iter()
        .enumerate()
        .map(|(i, p)| {
            Ok(generate(
                &g,
                &p.source,
                &GenerationConfig::sampled(t.max_sentences, t.max_words, stream_seed(t.seed, i as u64)),
            )?
            .sentences)
        })
        .collect::<Result<_>>()?;
    let cells = reward_histogram(&real, &gen, &lm, &cls, bins)?;

    let mut hist = String::from("discriminator\tsource\tbin_lo\tbin_hi\tcount\n");
    let mut stats = String::from("discriminator\tsource\tmean\tstd\tcv\n");
    for cell in &cells {
        let h = &cell.histogram;
        let width = (h.max - h.min) / h.counts.len() as f64;
        for (b, &count) in h.counts.iter().enumerate() {
            let _ = writeln!(
                hist,
                "{}\t{}\t{}\t{}\t{}",
                cell.discriminator,
                cell.source,
                h.min + b as f64 * width,
                h.min + (b + 1) as f64 * width,
                count
            );
        }
        let _ = writeln!(
            stats,
            "{}\t{}\t{}\t{}\t{}",
            cell.discriminator, cell.source, cell.stats.mean, cell.stats.std, cell.stats.cv
        );
        println!(
            "{:<11} {:<9} mean {:+.4}  std {:.4}  cv {:.4}",
            cell.discriminator, cell.source, cell.stats.mean, cell.stats.std, cell.stats.cv
        );
    }
    atomic_write(&cli.out_dir.join("rewards_histogram.tsv"), hist.as_bytes())?;
    atomic_write(&cli.out_dir.join("rewards_stats.tsv"), stats.as_bytes())?;
    Ok(())
}

fn cmd_analyze_frequency(cli: &Cli, reference: &Path, generated: &Path) -> Result<()> {
    let ref_toks = tokenize_file(reference)?;
    let gen_toks = tokenize_file(generated)?;
    let vocab = intern_vocab(&[&ref_toks, &gen_toks]);
    let ref_sents = vocab.encode_sentences(&ref_toks);
    let gen_sents = vocab.encode_sentences(&gen_toks);
    let profile = frequency_cosine(&ref_sents, &gen_sents, &default_rank_bins())?;
    atomic_write(
        &cli.out_dir.join("frequency.tsv"),
        frequency_tsv(&profile).as_bytes(),
    )?;
    for ((start, end), c) in profile.bins.iter().zip(&profile.cosines) {
        println!("ranks {}-{}: cosine {:.4}", start + 1, end, c);
    }
    Ok(())
}
