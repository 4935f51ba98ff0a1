mod common;

use common::random_spd;
use proptest::prelude::*;
use psgld_core::diagnostics::{
    kl_gaussian, ksd, ksd_with_score, log_loss, stein_kernel, KsdConfig, ScoreSource,
};
use psgld_core::models::{generate_synthetic, SyntheticKind};
use psgld_core::{seeded_rng, Dataset, Matrix, Result};

fn std_normal_score(theta: &[f64], out: &mut [f64]) -> Result<()> {
    out.iter_mut().zip(theta).for_each(|(o, t)| *o = -t);
    Ok(())
}

#[test]
fn shifted_samples_have_larger_discrepancy() {
    let cfg = KsdConfig::default();
    for seed in 0..10 {
        let mut rng = seeded_rng(seed);
        let xs = common::normal_vec(&mut rng, 500, 1.0);
        let exact = Matrix::from_vec(500, 1, xs.clone()).unwrap();
        let shifted = Matrix::from_vec(500, 1, xs.iter().map(|x| x + 2.0).collect()).unwrap();
        let a = ksd_with_score(&exact, std_normal_score, &cfg).unwrap();
        let b = ksd_with_score(&shifted, std_normal_score, &cfg).unwrap();
        assert!(b.value > a.value, "seed {seed}: {} <= {}", b.value, a.value);
    }
}

#[test]
fn exact_source_is_deterministic_and_order_free() {
    let p = generate_synthetic(SyntheticKind::LogisticBalanced, 300, 3).unwrap();
    let mut rng = seeded_rng(3);
    let rows: Vec<Vec<f64>> = (0..200).map(|_| common::normal_vec(&mut rng, 5, 0.2)).collect();
    let samples = Matrix::from_rows(&rows).unwrap();
    let cfg = KsdConfig::default();
    let a = ksd(&samples, &p.model, &cfg).unwrap();
    let b = ksd(&samples, &p.model, &cfg).unwrap();
    assert_eq!(a.value.to_bits(), b.value.to_bits());
    let reversed: Vec<Vec<f64>> = rows.iter().rev().cloned().collect();
    let c = ksd(&Matrix::from_rows(&reversed).unwrap(), &p.model, &cfg).unwrap();
    assert!((a.value - c.value).abs() <= 1e-10 * a.value);
}

#[test]
fn stochastic_source_is_seed_deterministic() {
    let p = generate_synthetic(SyntheticKind::LogisticBalanced, 300, 3).unwrap();
    let mut rng = seeded_rng(5);
    let rows: Vec<Vec<f64>> = (0..50).map(|_| common::normal_vec(&mut rng, 5, 0.2)).collect();
    let samples = Matrix::from_rows(&rows).unwrap();
    let cfg = KsdConfig { source: ScoreSource::Stochastic(30), seed: 4, ..KsdConfig::default() };
    let a = ksd(&samples, &p.model, &cfg).unwrap();
    let b = ksd(&samples, &p.model, &cfg).unwrap();
    assert_eq!(a, b);
}

#[test]
fn thinning_caps_the_sample_count() {
    let mut rng = seeded_rng(6);
    let samples = Matrix::from_vec(2500, 1, common::normal_vec(&mut rng, 2500, 1.0)).unwrap();
    let cfg = KsdConfig { max_samples: 100, ..KsdConfig::default() };
    let r = ksd_with_score(&samples, std_normal_score, &cfg).unwrap();
    assert_eq!(r.samples_used, 100);
}

#[test]
fn kl_is_nonnegative_and_vanishes_only_on_identical_inputs() {
    let mut rng = seeded_rng(7);
    for _ in 0..200 {
        let d = 1 + (rand::Rng::random_range(&mut rng, 0..4usize));
        let (a, b) = (random_spd(&mut rng, d), random_spd(&mut rng, d));
        let (ma, mb) = (common::normal_vec(&mut rng, d, 1.0), common::normal_vec(&mut rng, d, 1.0));
        assert!(kl_gaussian(&ma, &a, &ma, &a).unwrap() <= 1e-12);
        let kl = kl_gaussian(&ma, &a, &mb, &b).unwrap();
        assert!(kl > 1e-12, "{kl}");
    }
}

#[test]
fn log_loss_decreases_as_a_separating_direction_is_scaled() {
    let x = Matrix::from_rows(&[[1.0, 2.0], [1.0, 0.5], [-1.0, -1.0], [-0.5, -3.0]]).unwrap();
    let data = Dataset::new(x, Some(vec![1.0, 1.0, 0.0, 0.0])).unwrap();
    let mut prev = f64::INFINITY;
    for k in 0..40 {
        let s = 0.25 * k as f64;
        let v = log_loss(&[s, s], &data).unwrap();
        assert!(v < prev || (v == 0.0 && prev == 0.0), "scale {s}: {v} >= {prev}");
        prev = v;
    }
}

proptest! {
    #[test]
    fn stein_kernel_is_symmetric(
        a in prop::collection::vec(-5.0f64..5.0, 3),
        b in prop::collection::vec(-5.0f64..5.0, 3),
        sa in prop::collection::vec(-5.0f64..5.0, 3),
        sb in prop::collection::vec(-5.0f64..5.0, 3),
        c in 0.1f64..3.0,
        beta in -0.99f64..-0.01,
    ) {
        for j in 0..3 {
            let x = stein_kernel(j, &a, &b, &sa, &sb, c, beta);
            let y = stein_kernel(j, &b, &a, &sb, &sa, c, beta);
            prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
        }
    }
}
