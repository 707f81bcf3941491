//! End-to-end tests of the `dpgan` binary: exit codes, artifact
//! determinism, and preset parity.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dpgan"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn dpgan")
}

fn assert_ok(out: &Output, what: &str) {
    assert!(
        out.status.success(),
        "{what} failed:\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    std::fs::read(dir.join(name)).unwrap_or_else(|e| panic!("read {name}: {e}"))
}

/// A small review corpus: every line has at least two sentences.
fn write_corpus(path: &Path) {
    let openers = ["food was good", "service was slow", "place was loud", "staff was kind"];
    let bodies = [
        "i liked the soup. would come back.",
        "the wait was long. still worth it!",
        "prices were fair. portions were big.",
        "music was loud. seats were fine.",
    ];
    let mut text = String::new();
    for i in 0..32 {
        text.push_str(openers[i % openers.len()]);
        text.push_str(". ");
        text.push_str(bodies[(i / 4) % bodies.len()]);
        text.push('\n');
    }
    std::fs::write(path, text).unwrap();
}

fn write_tiny_config(path: &Path) {
    std::fs::write(
        path,
        "model.embed = 4\n\
         model.hidden = 6\n\
         data.max_vocab = 60\n\
         train.baseline = none\n\
         train.iterations = 1\n\
         train.generator_steps = 1\n\
         train.discriminator_steps = 1\n\
         train.gamma = 1\n\
         train.reward_mode = sw\n\
         train.mean_baseline = false\n\
         train.learning_rate = 0.05\n\
         train.clip = 5\n\
         train.batch_size = 4\n\
         train.pretrain_generator_epochs = 1\n\
         train.pretrain_discriminator_steps = 2\n\
         train.rollouts = 2\n\
         train.teacher_forcing = true\n\
         train.seed = 0\n\
         generate.max_sentences = 2\n\
         generate.max_words = 4\n",
    )
    .unwrap();
}

#[test]
fn prepare_writes_identical_artifacts_for_the_same_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = tmp.path().join("corpus.txt");
    write_corpus(&corpus);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    std::fs::create_dir_all(&a).unwrap();
    std::fs::create_dir_all(&b).unwrap();
    for dir in [&a, &b] {
        let out = run(&[
            "prepare",
            corpus.to_str().unwrap(),
            "--out-dir",
            dir.to_str().unwrap(),
            "--seed",
            "7",
        ]);
        assert_ok(&out, "prepare");
    }
    for name in ["vocab.txt", "train.txt", "valid.txt", "test.txt", "manifest.txt"] {
        assert_eq!(read(&a, name), read(&b, name), "{name} differs across runs");
    }
}

#[test]
fn train_and_generate_are_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = tmp.path().join("corpus.txt");
    let config = tmp.path().join("tiny.conf");
    write_corpus(&corpus);
    write_tiny_config(&config);
    let dir = tmp.path().to_str().unwrap();
    let cfg = config.to_str().unwrap();

    let out = run(&["prepare", corpus.to_str().unwrap(), "--out-dir", dir, "--config", cfg]);
    assert_ok(&out, "prepare");
    let out = run(&["train", dir, "--out-dir", dir, "--config", cfg]);
    assert_ok(&out, "train");
    for name in ["generator.ckpt", "lm_discriminator.ckpt", "runlog.tsv", "run_manifest.txt"] {
        assert!(tmp.path().join(name).exists(), "{name} missing after train");
    }

    let input = tmp.path().join("input.txt");
    std::fs::write(&input, "food was good\nservice was slow\n").unwrap();
    let gen = |out_name: &str| {
        let out_path = tmp.path().join(out_name);
        let out = run(&[
            "generate",
            tmp.path().join("generator.ckpt").to_str().unwrap(),
            tmp.path().join("vocab.txt").to_str().unwrap(),
            input.to_str().unwrap(),
            "--output",
            out_path.to_str().unwrap(),
            "--config",
            cfg,
            "--seed",
            "3",
        ]);
        assert_ok(&out, "generate");
        std::fs::read(out_path).unwrap()
    };
    let first = gen("out_a.txt");
    let second = gen("out_b.txt");
    assert!(!first.is_empty());
    assert_eq!(first, second, "same-seed generation differs");
    assert_eq!(
        String::from_utf8(first).unwrap().lines().count(),
        2,
        "one output line per input line"
    );
}

#[test]
fn empty_input_yields_empty_output() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = tmp.path().join("corpus.txt");
    let config = tmp.path().join("tiny.conf");
    write_corpus(&corpus);
    write_tiny_config(&config);
    let dir = tmp.path().to_str().unwrap();
    let cfg = config.to_str().unwrap();
    assert_ok(
        &run(&["prepare", corpus.to_str().unwrap(), "--out-dir", dir, "--config", cfg]),
        "prepare",
    );
    assert_ok(&run(&["pretrain", dir, "--out-dir", dir, "--config", cfg]), "pretrain");

    let input = tmp.path().join("empty.txt");
    std::fs::write(&input, "").unwrap();
    let out_path = tmp.path().join("gen.txt");
    let out = run(&[
        "generate",
        tmp.path().join("generator.ckpt").to_str().unwrap(),
        tmp.path().join("vocab.txt").to_str().unwrap(),
        input.to_str().unwrap(),
        "--output",
        out_path.to_str().unwrap(),
        "--config",
        cfg,
    ]);
    assert_ok(&out, "generate");
    assert_eq!(std::fs::read(out_path).unwrap(), b"");
}

#[test]
fn checkpoint_kind_mismatch_exits_4() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = tmp.path().join("corpus.txt");
    let config = tmp.path().join("tiny.conf");
    write_corpus(&corpus);
    write_tiny_config(&config);
    let dir = tmp.path().to_str().unwrap();
    let cfg = config.to_str().unwrap();
    assert_ok(
        &run(&["prepare", corpus.to_str().unwrap(), "--out-dir", dir, "--config", cfg]),
        "prepare",
    );
    assert_ok(&run(&["pretrain", dir, "--out-dir", dir, "--config", cfg]), "pretrain");

    let input = tmp.path().join("input.txt");
    std::fs::write(&input, "food was good\n").unwrap();
    let out = run(&[
        "generate",
        tmp.path().join("lm_discriminator.ckpt").to_str().unwrap(),
        tmp.path().join("vocab.txt").to_str().unwrap(),
        input.to_str().unwrap(),
        "--config",
        cfg,
    ]);
    assert_eq!(exit_code(&out), 4, "wrong-kind checkpoint should be a contract error");
}

#[test]
fn bad_config_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("bad.conf");
    std::fs::write(&config, "train.gamma = nope\nmystery.key = 1\n").unwrap();
    let corpus = tmp.path().join("corpus.txt");
    write_corpus(&corpus);
    let out = run(&[
        "prepare",
        corpus.to_str().unwrap(),
        "--out-dir",
        tmp.path().to_str().unwrap(),
        "--config",
        config.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 2);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("gamma") && err.contains("mystery.key"), "stderr: {err}");
}

#[test]
fn missing_input_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&[
        "prepare",
        tmp.path().join("no_such_file.txt").to_str().unwrap(),
        "--out-dir",
        tmp.path().to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 3);
}

#[test]
fn existing_manifest_is_refused_without_force() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = tmp.path().join("corpus.txt");
    write_corpus(&corpus);
    let dir = tmp.path().to_str().unwrap();
    assert_ok(&run(&["prepare", corpus.to_str().unwrap(), "--out-dir", dir]), "prepare");
    let again = run(&["prepare", corpus.to_str().unwrap(), "--out-dir", dir]);
    assert_eq!(exit_code(&again), 2);
    let forced = run(&["prepare", corpus.to_str().unwrap(), "--out-dir", dir, "--force"]);
    assert_ok(&forced, "prepare --force");
}

#[test]
fn shipped_presets_match_builtin_defaults() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../..");
    let desk = std::fs::read_to_string(root.join("configs/desk.conf")).unwrap();
    assert_eq!(desk, dpgan::config::Config::desk(0).to_text());
    let paper = std::fs::read_to_string(root.join("configs/paper.conf")).unwrap();
    assert_eq!(paper, dpgan::config::Config::paper(0).to_text());
}

#[test]
fn evaluating_a_corpus_against_itself_gives_unit_cosine() {
    let tmp = tempfile::tempdir().unwrap();
    let text = tmp.path().join("text.txt");
    std::fs::write(&text, "food was good. soup was hot.\nservice was slow. still fine.\n").unwrap();
    let dir = tmp.path().to_str().unwrap();
    let out = run(&["evaluate", text.to_str().unwrap(), text.to_str().unwrap(), "--out-dir", dir, "--bleu"]);
    assert_ok(&out, "evaluate");
    let freq = std::fs::read_to_string(tmp.path().join("frequency.tsv")).unwrap();
    let first = freq.lines().nth(1).unwrap();
    let cosine: f64 = first.split('\t').nth(2).unwrap().parse().unwrap();
    assert!((cosine - 1.0).abs() <= 1e-12, "self-similarity cosine {cosine}");
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("mean line bleu"), "stdout: {stdout}");
    assert!(stdout.contains("1.000000"), "self bleu should be 1: {stdout}");
    assert!(tmp.path().join("diversity.tsv").exists());
}
