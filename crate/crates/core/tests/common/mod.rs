#![allow(dead_code)]

use psgld_core::{ChainRng, Dataset, Matrix, ModelKind, ModelSpec, ParamVector};
use rand::Rng;
use rand_distr::StandardNormal;

pub fn normal(rng: &mut ChainRng) -> f64 {
    rng.sample(StandardNormal)
}

pub fn normal_vec(rng: &mut ChainRng, d: usize, scale: f64) -> Vec<f64> {
    (0..d).map(|_| scale * normal(rng)).collect()
}

/// `A Aᵀ + 0.5 I` for a random `A`, always well conditioned.
pub fn random_spd(rng: &mut ChainRng, d: usize) -> Matrix {
    let a = Matrix::from_vec(d, d, normal_vec(rng, d * d, 1.0)).unwrap();
    let mut m = a.matmul(&a.transpose()).unwrap();
    for i in 0..d {
        m.set(i, i, m.get(i, i) + 0.5);
    }
    m.symmetrize();
    m
}

/// Random instance of `kind` with `n` data points in dimension `d`.
/// Regression designs carry a leading intercept column.
pub fn random_model(kind: ModelKind, n: usize, d: usize, rng: &mut ChainRng) -> ModelSpec {
    let prior_mean = ParamVector::new(normal_vec(rng, d, 0.3)).unwrap();
    let prior_var: Vec<f64> = (0..d).map(|_| 0.5 + rng.random::<f64>() * 5.0).collect();
    let prior_cov = Matrix::from_diag(&prior_var);
    match kind {
        ModelKind::Gaussian => {
            let x = Matrix::from_vec(n, d, normal_vec(rng, n * d, 2.0)).unwrap();
            let obs = random_spd(rng, d);
            ModelSpec::gaussian(Dataset::new(x, None).unwrap(), prior_mean, prior_cov, obs).unwrap()
        }
        ModelKind::Logistic | ModelKind::Linear => {
            let mut rows = Vec::with_capacity(n * d);
            for _ in 0..n {
                rows.push(1.0);
                rows.extend(normal_vec(rng, d - 1, 1.5));
            }
            let x = Matrix::from_vec(n, d, rows).unwrap();
            let y: Vec<f64> = (0..n)
                .map(|_| if kind == ModelKind::Logistic { f64::from(rng.random::<bool>()) } else { 2.0 * normal(rng) })
                .collect();
            let data = Dataset::new(x, Some(y)).unwrap();
            if kind == ModelKind::Logistic {
                ModelSpec::logistic(data, prior_mean, prior_cov).unwrap()
            } else {
                ModelSpec::linear(data, prior_mean, prior_cov).unwrap()
            }
        }
    }
}

pub const KINDS: [ModelKind; 3] = [ModelKind::Gaussian, ModelKind::Logistic, ModelKind::Linear];

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-12)
}
