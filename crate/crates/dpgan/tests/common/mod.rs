//! Shared scaffolding for the integration suites: central
//! finite-difference oracles and synthetic corpus builders.

#![allow(dead_code)]

use dpgan::corpus::{batch_iter, Dataset, MarkovMode, Split, SynthSpec, TextPair};
use dpgan::generator::{mle_loss, nll_value, GenDims};
use dpgan::numerics::{NodeId, Tape};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use dpgan::discriminators::{ClassifierDiscriminator, LMDiscriminator};
use dpgan::generator::GeneratorModel;
use dpgan::numerics::Tensor;

pub const FD_H: f64 = 1e-5;
pub const FD_REL_TOL: f64 = 1e-4;
pub const FD_ABS_FLOOR: f64 = 1e-7;

/// Central finite differences of `f` with respect to every parameter
/// coordinate of a generator.
pub fn fd_grads_generator(
    model: &GeneratorModel,
    f: &dyn Fn(&GeneratorModel) -> f64,
) -> Vec<Tensor> {
    let mut m = model.clone();
    let shapes: Vec<Vec<usize>> = m.params().iter().map(|p| p.shape().to_vec()).collect();
    let mut grads: Vec<Tensor> = shapes.iter().map(|s| Tensor::zeros(s.clone())).collect();
    for pi in 0..shapes.len() {
        for i in 0..grads[pi].data().len() {
            let orig = m.params()[pi].data()[i];
            m.params_mut()[pi].data_mut()[i] = orig + FD_H;
            let fp = f(&m);
            m.params_mut()[pi].data_mut()[i] = orig - FD_H;
            let fm = f(&m);
            m.params_mut()[pi].data_mut()[i] = orig;
            grads[pi].data_mut()[i] = (fp - fm) / (2.0 * FD_H);
        }
    }
    grads
}

pub fn fd_grads_lm(d: &LMDiscriminator, f: &dyn Fn(&LMDiscriminator) -> f64) -> Vec<Tensor> {
    let mut m = d.clone();
    let shapes: Vec<Vec<usize>> = m.params().iter().map(|p| p.shape().to_vec()).collect();
    let mut grads: Vec<Tensor> = shapes.iter().map(|s| Tensor::zeros(s.clone())).collect();
    for pi in 0..shapes.len() {
        for i in 0..grads[pi].data().len() {
            let orig = m.params()[pi].data()[i];
            m.params_mut()[pi].data_mut()[i] = orig + FD_H;
            let fp = f(&m);
            m.params_mut()[pi].data_mut()[i] = orig - FD_H;
            let fm = f(&m);
            m.params_mut()[pi].data_mut()[i] = orig;
            grads[pi].data_mut()[i] = (fp - fm) / (2.0 * FD_H);
        }
    }
    grads
}

pub fn fd_grads_classifier(
    c: &ClassifierDiscriminator,
    f: &dyn Fn(&ClassifierDiscriminator) -> f64,
) -> Vec<Tensor> {
    let mut m = c.clone();
    let shapes: Vec<Vec<usize>> = m.params().iter().map(|p| p.shape().to_vec()).collect();
    let mut grads: Vec<Tensor> = shapes.iter().map(|s| Tensor::zeros(s.clone())).collect();
    for pi in 0..shapes.len() {
        for i in 0..grads[pi].data().len() {
            let orig = m.params()[pi].data()[i];
            m.params_mut()[pi].data_mut()[i] = orig + FD_H;
            let fp = f(&m);
            m.params_mut()[pi].data_mut()[i] = orig - FD_H;
            let fm = f(&m);
            m.params_mut()[pi].data_mut()[i] = orig;
            grads[pi].data_mut()[i] = (fp - fm) / (2.0 * FD_H);
        }
    }
    grads
}

/// Assert two gradient sets agree within the pinned relative tolerance.
pub fn assert_grads_close(analytic: &[Tensor], numeric: &[Tensor], label: &str) {
    assert_eq!(analytic.len(), numeric.len(), "{label}: tensor counts");
    for (pi, (a, n)) in analytic.iter().zip(numeric).enumerate() {
        for (i, (&x, &y)) in a.data().iter().zip(n.data()).enumerate() {
            let diff = (x - y).abs();
            let rel = diff / x.abs().max(y.abs()).max(1e-8);
            assert!(
                rel <= FD_REL_TOL || diff <= FD_ABS_FLOOR,
                "{label}: param {pi} coord {i}: analytic {x} vs numeric {y} (rel {rel:.2e})"
            );
        }
    }
}

/// A mostly-deterministic chain over `offset..offset+n` with a small
/// escape probability to its successor word.
pub fn chain_mode(name: &str, weight: f64, vocab: usize, offset: usize, n: usize, spread: f64) -> MarkovMode {
    let mut init = vec![0.0; vocab];
    init[offset] = 1.0;
    let mut trans = vec![vec![0.0; vocab]; vocab];
    for (i, row) in trans.iter_mut().enumerate() {
        if (offset..offset + n).contains(&i) {
            let next = offset + (i - offset + 1) % n;
            let skip = offset + (i - offset + 2) % n;
            row[next] = 1.0 - spread;
            row[skip] = spread;
        } else {
            // states this mode never visits; keep the matrix stochastic
            row[offset] = 1.0;
        }
    }
    MarkovMode {
        name: name.into(),
        weight,
        init,
        trans,
        sentence_len: (4, 6),
        sentences: (1, 2),
    }
}

/// Uniform-ish mode over a word range: high-entropy transitions.
pub fn noisy_mode(name: &str, weight: f64, vocab: usize, offset: usize, n: usize) -> MarkovMode {
    let mut init = vec![0.0; vocab];
    for i in offset..offset + n {
        init[i] = 1.0 / n as f64;
    }
    let mut trans = vec![vec![0.0; vocab]; vocab];
    for row in trans.iter_mut() {
        for i in offset..offset + n {
            row[i] = 1.0 / n as f64;
        }
    }
    MarkovMode {
        name: name.into(),
        weight,
        init,
        trans,
        sentence_len: (4, 6),
        sentences: (1, 2),
    }
}

pub fn words(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("w{i:03}")).collect()
}

/// Two disjoint near-deterministic modes sharing one vocabulary; used
/// for the saturation experiment.
pub fn two_mode_spec(vocab: usize) -> SynthSpec {
    let half = vocab / 2;
    SynthSpec {
        vocab: words(vocab),
        modes: vec![
            chain_mode("a", 0.5, vocab, 0, half, 0.1),
            chain_mode("b", 0.5, vocab, half, vocab - half, 0.1),
        ],
        source_len: (3, 4),
    }
}

/// A dull-dominated review-style corpus: one near-deterministic
/// template mode plus a high-entropy diverse mode.
pub fn dull_diverse_spec(vocab: usize, dull_weight: f64) -> SynthSpec {
    SynthSpec {
        vocab: words(vocab),
        modes: vec![
            chain_mode("dull", dull_weight, vocab, 0, 6, 0.0),
            noisy_mode("diverse", 1.0 - dull_weight, vocab, 6, vocab - 6),
        ],
        source_len: (3, 4),
    }
}

/// One dominant template plus `n_rare` rare templates, each a
/// deterministic 6-word chain over its own slice of the vocabulary.
/// Review-style: the response distribution is dominated by one dull
/// template with a long tail of rare structured alternatives.
pub fn template_mixture_spec(n_rare: usize, dull_weight: f64) -> SynthSpec {
    let vocab = 6 * (n_rare + 1);
    let rare_weight = (1.0 - dull_weight) / n_rare as f64;
    let mut modes = vec![chain_mode("dull", dull_weight, vocab, 0, 6, 0.0)];
    for i in 0..n_rare {
        modes.push(chain_mode(&format!("t{i}"), rare_weight, vocab, 6 * (i + 1), 6, 0.0));
    }
    SynthSpec { vocab: words(vocab), modes, source_len: (3, 4) }
}

/// Decouple sources from targets so the response distribution is
/// unconditional: a generator cannot lean on the source to pick the
/// right template, which is what makes the dominant one dull.
pub fn shuffle_sources(pairs: &mut [TextPair], seed: u64) {
    use rand::seq::SliceRandom;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sources: Vec<_> = pairs.iter().map(|p| p.source.clone()).collect();
    sources.shuffle(&mut rng);
    for (p, s) in pairs.iter_mut().zip(sources) {
        p.source = s;
    }
}

pub fn rand_tensor(shape: Vec<usize>, rng: &mut impl Rng, lo: f64, hi: f64) -> Tensor {
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| rng.gen_range(lo..hi)).collect();
    Tensor::new(shape, data).unwrap()
}

/// FD-check one primitive: `build` turns the leaf into a scalar node.
pub fn check_primitive(
    name: &str,
    x: &Tensor,
    build: &dyn Fn(&mut Tape, NodeId) -> NodeId,
) {
    let forward = |t: &Tensor| -> f64 {
        let mut tape = Tape::new();
        let leaf = tape.leaf(t.clone());
        let out = build(&mut tape, leaf);
        tape.value(out).scalar_value()
    };
    let mut tape = Tape::new();
    let leaf = tape.leaf(x.clone());
    let out = build(&mut tape, leaf);
    let mut grads = tape.backward(out).unwrap();
    let analytic = grads.take_or_zeros(leaf, x.shape());

    let mut numeric = Tensor::zeros(x.shape().to_vec());
    let mut t = x.clone();
    for i in 0..x.data().len() {
        let orig = t.data()[i];
        t.data_mut()[i] = orig + FD_H;
        let fp = forward(&t);
        t.data_mut()[i] = orig - FD_H;
        let fm = forward(&t);
        t.data_mut()[i] = orig;
        numeric.data_mut()[i] = (fp - fm) / (2.0 * FD_H);
    }
    assert_grads_close(&[analytic], &[numeric], name);
}

/// Exercised by the acceptance suite as criterion 1's primitive half.
pub fn run_primitive_gradcheck(trials: u64) {
    for seed in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x23 = rand_tensor(vec![2, 3], &mut rng, -1.0, 1.0);
        let c32 = rand_tensor(vec![3, 2], &mut rng, -1.0, 1.0);
        let c23 = rand_tensor(vec![2, 3], &mut rng, -1.0, 1.0);
        let row = rand_tensor(vec![3], &mut rng, -1.0, 1.0);
        let pos = rand_tensor(vec![2, 3], &mut rng, 0.3, 2.0);
        let scale = rng.gen_range(-2.0..2.0);

        check_primitive("matmul", &x23, &{
            let c = c32.clone();
            move |t, x| {
                let c = t.leaf(c.clone());
                let y = t.matmul(x, c).unwrap();
                t.sum(y).unwrap()
            }
        });
        check_primitive("transpose", &x23, &{
            let c = c23.clone();
            move |t, x| {
                let xt = t.transpose(x).unwrap();
                let c = t.leaf(c.clone());
                let ct = t.transpose(c).unwrap();
                let y = t.mul(xt, ct).unwrap();
                t.sum(y).unwrap()
            }
        });
        check_primitive("add", &x23, &{
            let c = c23.clone();
            move |t, x| {
                let c = t.leaf(c.clone());
                let y = t.add(x, c).unwrap();
                let y2 = t.mul(y, y).unwrap();
                t.sum(y2).unwrap()
            }
        });
        check_primitive("sub", &x23, &{
            let c = c23.clone();
            move |t, x| {
                let c = t.leaf(c.clone());
                let y = t.sub(x, c).unwrap();
                let y2 = t.mul(y, y).unwrap();
                t.sum(y2).unwrap()
            }
        });
        check_primitive("mul", &x23, &{
            let c = c23.clone();
            move |t, x| {
                let c = t.leaf(c.clone());
                let y = t.mul(x, c).unwrap();
                t.sum(y).unwrap()
            }
        });
        check_primitive("add_row", &x23, &{
            let r = row.clone();
            move |t, x| {
                let r = t.leaf(r.clone());
                let y = t.add_row(x, r).unwrap();
                let y2 = t.mul(y, y).unwrap();
                t.sum(y2).unwrap()
            }
        });
        // the broadcast row as the differentiated input
        check_primitive("add_row_rhs", &row, &{
            let m = x23.clone();
            move |t, r| {
                let m = t.leaf(m.clone());
                let y = t.add_row(m, r).unwrap();
                let y2 = t.mul(y, y).unwrap();
                t.sum(y2).unwrap()
            }
        });
        check_primitive("scale", &x23, &move |t, x| {
            let y = t.scale(x, scale).unwrap();
            let y2 = t.mul(y, y).unwrap();
            t.sum(y2).unwrap()
        });
        check_primitive("concat_cols", &x23, &{
            let c = c23.clone();
            move |t, x| {
                let c = t.leaf(c.clone());
                let y = t.concat_cols(x, c).unwrap();
                let y2 = t.mul(y, y).unwrap();
                t.sum(y2).unwrap()
            }
        });
        check_primitive("concat_rows", &x23, &{
            let c = c23.clone();
            move |t, x| {
                let c = t.leaf(c.clone());
                let y = t.concat_rows(&[x, c]).unwrap();
                let y2 = t.mul(y, y).unwrap();
                t.sum(y2).unwrap()
            }
        });
        check_primitive("slice_cols", &x23, &move |t, x| {
            let y = t.slice_cols(x, 1, 3).unwrap();
            let y2 = t.mul(y, y).unwrap();
            t.sum(y2).unwrap()
        });
        check_primitive("sigmoid", &x23, &move |t, x| {
            let y = t.sigmoid(x).unwrap();
            let y2 = t.mul(y, y).unwrap();
            t.sum(y2).unwrap()
        });
        check_primitive("tanh", &x23, &move |t, x| {
            let y = t.tanh(x).unwrap();
            let y2 = t.mul(y, y).unwrap();
            t.sum(y2).unwrap()
        });
        check_primitive("log", &pos, &move |t, x| {
            let y = t.log(x).unwrap();
            let y2 = t.mul(y, y).unwrap();
            t.sum(y2).unwrap()
        });
        check_primitive("softmax", &x23, &{
            let c = c23.clone();
            move |t, x| {
                let y = t.softmax(x).unwrap();
                let c = t.leaf(c.clone());
                let y2 = t.mul(y, c).unwrap();
                t.sum(y2).unwrap()
            }
        });
        check_primitive("sum", &x23, &move |t, x| {
            let y = t.mul(x, x).unwrap();
            t.sum(y).unwrap()
        });
        check_primitive("mean", &x23, &move |t, x| {
            let y = t.mul(x, x).unwrap();
            t.mean(y).unwrap()
        });
        check_primitive("embedding", &rand_tensor(vec![4, 3], &mut rng, -1.0, 1.0), &move |t, x| {
            let y = t.embedding(x, &[0, 2, 2, 3]).unwrap();
            let y2 = t.mul(y, y).unwrap();
            t.sum(y2).unwrap()
        });
        check_primitive("pick_nll", &rand_tensor(vec![3, 4], &mut rng, -2.0, 2.0), &{
            let w = [0.7, -0.3, 1.1];
            move |t, x| t.pick_nll(x, &[1, 0, 3], &w).unwrap()
        });
        check_primitive("bce_with_logits", &rand_tensor(vec![3, 1], &mut rng, -2.0, 2.0), &{
            let w = [0.5, 0.25, 0.25];
            move |t, x| t.bce_with_logits(x, &[1.0, 0.0, 1.0], &w).unwrap()
        });
    }
}

pub fn tiny_dims() -> GenDims {
    GenDims {
        vocab: 7,
        embed: 3,
        hidden: 4,
    }
}

pub fn tiny_batch(rng: &mut impl Rng) -> Dataset {
    let word = |r: &mut dyn rand::RngCore| 5 + (r.next_u32() % 2);
    let pair = TextPair {
        source: (0..3).map(|_| word(rng)).collect(),
        target: vec![
            (0..3).map(|_| word(rng)).collect(),
            (0..2).map(|_| word(rng)).collect(),
        ],
        mode: String::new(),
    };
    Dataset::new(vec![pair], Split::Train)
}

/// Full MLE loss vs finite differences; also used by acceptance 1.
pub fn run_mle_gradcheck(trials: u64) {
    for seed in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let model = GeneratorModel::init(tiny_dims(), seed);
        let data = tiny_batch(&mut rng);
        let batch = batch_iter(&data, 1, 0, 0).next().unwrap();
        let (_, analytic) = mle_loss(&model, &batch).unwrap();
        let data2 = data.clone();
        let numeric = fd_grads_generator(&model, &move |m| {
            let batch = batch_iter(&data2, 1, 0, 0).next().unwrap();
            nll_value(m, &batch).unwrap()
        });
        assert_grads_close(&analytic, &numeric, "mle_loss");
    }
}

