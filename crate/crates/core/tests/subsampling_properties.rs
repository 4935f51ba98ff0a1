mod common;

use common::{random_model, KINDS};
use proptest::prelude::*;
use psgld_core::estimators::{pseudo_variance_closed_form, EstimatorKind};
use psgld_core::subsampling::{compute_weights, SubsampleDistribution, WeightScheme};
use psgld_core::{seeded_rng, ChainRng, ModeInfo, ParamVector};
use rand::Rng;

/// Upper 10⁻⁴ quantile of χ² with 15 degrees of freedom.
const CHI2_15_CRIT: f64 = 44.263;

#[test]
fn alias_draws_pass_chi_square_goodness_of_fit() {
    let mut rng = seeded_rng(2);
    let draws = 1_000_000;
    for trial in 0..16 {
        let scores: Vec<f64> = (0..16).map(|_| rng.random::<f64>() + 0.01).collect();
        let dist = SubsampleDistribution::from_scores(&scores).unwrap();
        let mut counts = [0u64; 16];
        let mut draw_rng = seeded_rng(1000 + trial);
        for _ in 0..draws {
            counts[dist.draw(&mut draw_rng)] += 1;
        }
        let stat: f64 = counts
            .iter()
            .zip(dist.probs())
            .map(|(&c, &p)| {
                let e = p * draws as f64;
                (c as f64 - e).powi(2) / e
            })
            .sum();
        assert!(stat < CHI2_15_CRIT, "trial {trial}: χ² = {stat}");
    }
}

fn random_simplex(rng: &mut ChainRng, n: usize) -> Vec<f64> {
    let e: Vec<f64> = (0..n).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// The optimal weights must beat 100 random simplex points on 20 instances.
fn check_optimality(scheme: WeightScheme, kind: EstimatorKind) {
    let mut rng = seeded_rng(31);
    for instance in 0..20 {
        let model = random_model(KINDS[instance % 3], 12, 3, &mut rng);
        let theta = common::normal_vec(&mut rng, 3, 1.0);
        let anchor = ParamVector::new(common::normal_vec(&mut rng, 3, 1.0)).unwrap();
        let mode = ModeInfo::at(&model, anchor, false).unwrap();
        let mode_ref = kind.uses_control_variate().then_some(&mode);
        let best = compute_weights(scheme, &model, Some(&theta), Some(&mode)).unwrap();
        for n in [1, 4] {
            let v_best = pseudo_variance_closed_form(kind, &model, &theta, &best, n, mode_ref).unwrap();
            for _ in 0..100 {
                let other = SubsampleDistribution::from_probs(random_simplex(&mut rng, 12)).unwrap();
                let v = pseudo_variance_closed_form(kind, &model, &theta, &other, n, mode_ref).unwrap();
                assert!(v_best <= v + 1e-12, "instance {instance}: {v_best} > {v}");
            }
        }
    }
}

#[test]
fn exact_preferential_weights_minimise_pseudo_variance() {
    check_optimality(WeightScheme::PsExact, EstimatorKind::Ps);
}

#[test]
fn exact_control_variate_weights_minimise_pseudo_variance() {
    check_optimality(WeightScheme::CvExact, EstimatorKind::CvPs);
}

proptest! {
    #[test]
    fn scores_are_scale_invariant(scores in prop::collection::vec(1e-3f64..1e3, 1..40), scale in 1e-6f64..1e6) {
        let a = SubsampleDistribution::from_scores(&scores).unwrap();
        let scaled: Vec<f64> = scores.iter().map(|s| s * scale).collect();
        let b = SubsampleDistribution::from_scores(&scaled).unwrap();
        for (p, q) in a.probs().iter().zip(b.probs()) {
            prop_assert!((p - q).abs() <= 1e-14 * p.max(1e-300) + 1e-16);
        }
        let total: f64 = a.probs().iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        prop_assert!(a.probs().iter().all(|&p| p > 0.0));
    }

    #[test]
    fn every_scheme_returns_strictly_positive_probabilities(seed in any::<u64>(), k in 0usize..3) {
        let mut rng = seeded_rng(seed);
        let model = random_model(KINDS[k], 15, 3, &mut rng);
        let theta = common::normal_vec(&mut rng, 3, 1.0);
        let mode = ModeInfo::at(&model, ParamVector::new(theta.clone()).unwrap(), true).unwrap();
        for scheme in [WeightScheme::Uniform, WeightScheme::PsExact, WeightScheme::PsApprox, WeightScheme::CvExact, WeightScheme::CvApprox] {
            let dist = compute_weights(scheme, &model, Some(&theta), Some(&mode)).unwrap();
            prop_assert!(dist.probs().iter().all(|&p| p > 0.0 && p.is_finite()));
            let total: f64 = dist.probs().iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn alias_table_reproduces_probabilities(scores in prop::collection::vec(1e-4f64..1.0, 1..64)) {
        let dist = SubsampleDistribution::from_scores(&scores).unwrap();
        for (p, q) in dist.probs().iter().zip(dist.alias_probs()) {
            prop_assert!((p - q).abs() < 1e-12);
        }
    }
}
