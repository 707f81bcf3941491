//! Finite-difference verification of every autodiff primitive and of
//! the full model losses.

mod common;

use common::*;
use dpgan::discriminators::{
    classifier_loss, lm_discriminator_loss, ClassifierDiscriminator, LMDiscriminator,
};
use dpgan::generator::{weighted_nll, GeneratorModel};
use dpgan::corpus::{EOS, EOSENT};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn primitive_gradients_match_finite_differences() {
    run_primitive_gradcheck(25);
}

#[test]
fn mle_loss_matches_finite_differences() {
    run_mle_gradcheck(5);
}

#[test]
fn pg_surrogate_matches_finite_differences() {
    // rewards held fixed: the surrogate is a weighted NLL of a sampled
    // (here hand-picked) marked text
    for seed in 0..5u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(2000 + seed);
        let model = GeneratorModel::init(tiny_dims(), 100 + seed);
        let source = vec![5, 6];
        let sentences = vec![vec![6, 5, EOSENT], vec![EOS]];
        let weights: Vec<Vec<f64>> = sentences
            .iter()
            .map(|s| (0..s.len()).map(|_| rng.gen_range(-2.0..2.0)).collect())
            .collect();
        let items = [(source.as_slice(), sentences.as_slice(), weights.as_slice())];
        let (_, analytic) = weighted_nll(&model, &items).unwrap();
        let source2 = source.clone();
        let sentences2 = sentences.clone();
        let weights2 = weights.clone();
        let numeric = fd_grads_generator(&model, &move |m| {
            let items = [(source2.as_slice(), sentences2.as_slice(), weights2.as_slice())];
            weighted_nll(m, &items).unwrap().0
        });
        assert_grads_close(&analytic, &numeric, "pg_surrogate");
    }
}

#[test]
fn lm_discriminator_loss_matches_finite_differences() {
    for seed in 0..5u64 {
        let d = LMDiscriminator::init(tiny_dims(), 200 + seed);
        let real = vec![vec![vec![5, 6, EOSENT], vec![EOS]]];
        let gen = vec![vec![vec![6, 6, EOSENT]], vec![vec![5, EOSENT]]];
        let (_, analytic) = lm_discriminator_loss(&d, &real, &gen).unwrap();
        let (real2, gen2) = (real.clone(), gen.clone());
        let numeric = fd_grads_lm(&d, &move |m| {
            lm_discriminator_loss(m, &real2, &gen2).unwrap().0
        });
        assert_grads_close(&analytic, &numeric, "lm_discriminator_loss");
    }
}

#[test]
fn classifier_loss_matches_finite_differences() {
    for seed in 0..5u64 {
        let c = ClassifierDiscriminator::init(tiny_dims(), 300 + seed);
        let real = vec![vec![5, 6, EOSENT], vec![6, EOSENT]];
        let gen = vec![vec![5, 5, 5, EOSENT]];
        let (_, analytic) = classifier_loss(&c, &real, &gen).unwrap();
        let (real2, gen2) = (real.clone(), gen.clone());
        let numeric =
            fd_grads_classifier(&c, &move |m| classifier_loss(m, &real2, &gen2).unwrap().0);
        assert_grads_close(&analytic, &numeric, "classifier_loss");
    }
}
