//! Subsampling distributions over data indices and the index draws made
//! from them.
//!
//! Weighted draws go through a Walker alias table (O(N) build, O(1) per
//! draw). Without-replacement sampling is only offered for the uniform
//! distribution.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::math;
use crate::models::{ModeInfo, ModelSpec};

/// Scores below `SCORE_FLOOR · mean(score)` are raised to that level so that
/// every probability stays strictly positive.
pub const SCORE_FLOOR: f64 = 1e-12;

/// Dimension above which approximate control-variate weights are refused
/// unless explicitly overridden.
pub const CV_APPROX_MAX_DIM: usize = 60;

/// Strictly positive probabilities over `0..N` with an alias table.
#[derive(Clone, Debug, PartialEq)]
pub struct SubsampleDistribution {
    probs: Vec<f64>,
    threshold: Vec<f64>,
    alias: Vec<usize>,
    uniform: bool,
}

impl SubsampleDistribution {
    /// `pᵢ = 1/N`.
    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("distribution over zero indices"));
        }
        Ok(SubsampleDistribution {
            probs: vec![1.0 / n as f64; n],
            threshold: vec![1.0; n],
            alias: (0..n).collect(),
            uniform: true,
        })
    }

    /// Normalises nonnegative scores. Scores are floored at
    /// [`SCORE_FLOOR`] times their mean; all-zero or all-equal scores give
    /// the uniform distribution.
    pub fn from_scores(scores: &[f64]) -> Result<Self> {
        let n = scores.len();
        if n == 0 {
            return Err(Error::invalid("distribution over zero indices"));
        }
        if scores.iter().any(|s| !s.is_finite() || *s < 0.0) {
            return Err(Error::invalid("subsampling scores must be finite and nonnegative"));
        }
        let first = scores[0];
        if scores.iter().all(|&s| s == first) {
            return SubsampleDistribution::uniform(n);
        }
        let mean = scores.iter().sum::<f64>() / n as f64;
        let floor = SCORE_FLOOR * mean;
        let clipped: Vec<f64> = scores.iter().map(|&s| s.max(floor)).collect();
        let total: f64 = clipped.iter().sum();
        let probs: Vec<f64> = clipped.iter().map(|s| s / total).collect();
        Self::from_probs_unchecked(probs)
    }

    /// Uses `probs` as given after validating positivity and normalisation.
    pub fn from_probs(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::invalid("distribution over zero indices"));
        }
        if probs.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
            return Err(Error::invalid("probabilities must be strictly positive"));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::invalid("probabilities must sum to one"));
        }
        Self::from_probs_unchecked(probs)
    }

    fn from_probs_unchecked(probs: Vec<f64>) -> Result<Self> {
        let n = probs.len();
        let mut scaled: Vec<f64> = probs.iter().map(|p| p * n as f64).collect();
        let mut threshold = vec![1.0; n];
        let mut alias: Vec<usize> = (0..n).collect();
        let mut small = Vec::new();
        let mut large = Vec::new();
        for (i, &q) in scaled.iter().enumerate() {
            if q < 1.0 {
                small.push(i);
            } else {
                large.push(i);
            }
        }
        while let (Some(&s), Some(&l)) = (small.last(), large.last()) {
            small.pop();
            large.pop();
            threshold[s] = scaled[s];
            alias[s] = l;
            scaled[l] = (scaled[l] + scaled[s]) - 1.0;
            if scaled[l] < 1.0 {
                small.push(l);
            } else {
                large.push(l);
            }
        }
        // Leftovers differ from 1 only by rounding.
        for i in small.into_iter().chain(large) {
            threshold[i] = 1.0;
            alias[i] = i;
        }
        Ok(SubsampleDistribution { probs, threshold, alias, uniform: false })
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    #[inline]
    pub fn prob(&self, i: usize) -> f64 {
        self.probs[i]
    }

    /// Whether this is exactly the uniform distribution.
    pub fn is_uniform(&self) -> bool {
        self.uniform
    }

    /// Importance weight `1/(n pᵢ)` of datum `i` in a batch of `n`; exactly
    /// `N/n` for the uniform distribution.
    #[inline]
    pub fn reweight(&self, i: usize, n: usize) -> f64 {
        if self.uniform {
            self.len() as f64 / n as f64
        } else {
            1.0 / (n as f64 * self.probs[i])
        }
    }

    /// `1/pᵢ`; exactly `N` for the uniform distribution.
    #[inline]
    pub fn inverse_prob(&self, i: usize) -> f64 {
        if self.uniform {
            self.len() as f64
        } else {
            1.0 / self.probs[i]
        }
    }

    /// One index drawn with probability `pᵢ`.
    #[inline]
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let i = rng.random_range(0..self.len());
        if self.uniform {
            return i;
        }
        let u: f64 = rng.random();
        if u < self.threshold[i] {
            i
        } else {
            self.alias[i]
        }
    }

    /// Probabilities implied by the alias table.
    pub fn alias_probs(&self) -> Vec<f64> {
        let n = self.len() as f64;
        let mut p: Vec<f64> = self.threshold.iter().map(|t| t / n).collect();
        for (j, &a) in self.alias.iter().enumerate() {
            if a != j {
                p[a] += (1.0 - self.threshold[j]) / n;
            }
        }
        p
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum WeightScheme {
    /// `pᵢ = 1/N`.
    Uniform,
    /// `pᵢ ∝ ‖∇fᵢ(θ)‖` at the current state.
    PsExact,
    /// `pᵢ ∝ ‖∇fᵢ(θ̂)‖` at the mode.
    PsApprox,
    /// `pᵢ ∝ ‖∇fᵢ(θ) − ∇fᵢ(θ̂)‖` at the current state.
    CvExact,
    /// `pᵢ ∝ √tr(∇²fᵢ(θ̂) Σ̂ ∇²fᵢ(θ̂)ᵀ)` with the Laplace covariance Σ̂.
    CvApprox,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct WeightOptions {
    /// Permit [`WeightScheme::CvApprox`] above [`CV_APPROX_MAX_DIM`].
    pub allow_high_dim: bool,
}

pub fn compute_weights(
    scheme: WeightScheme,
    model: &ModelSpec,
    theta: Option<&[f64]>,
    mode: Option<&ModeInfo>,
) -> Result<SubsampleDistribution> {
    compute_weights_with(scheme, model, theta, mode, WeightOptions::default())
}

pub fn compute_weights_with(
    scheme: WeightScheme,
    model: &ModelSpec,
    theta: Option<&[f64]>,
    mode: Option<&ModeInfo>,
    opts: WeightOptions,
) -> Result<SubsampleDistribution> {
    let n = model.n_data();
    let d = model.dim();
    let scores: Vec<f64> = match scheme {
        WeightScheme::Uniform => return SubsampleDistribution::uniform(n),
        WeightScheme::PsExact => {
            let theta = theta.ok_or(Error::MissingArgument("current state θ"))?;
            check_len(d, theta.len())?;
            let mut g = vec![0.0; d];
            (0..n)
                .map(|i| {
                    model.grad_datum_into(theta, i, &mut g);
                    math::sqrt(math::norm_sq(&g))
                })
                .collect()
        }
        WeightScheme::PsApprox => {
            let mode = mode.ok_or(Error::MissingArgument("mode information"))?;
            check_mode(model, mode)?;
            (0..n).map(|i| math::sqrt(math::norm_sq(mode.grads_at_mode().row(i)))).collect()
        }
        WeightScheme::CvExact => {
            let theta = theta.ok_or(Error::MissingArgument("current state θ"))?;
            let mode = mode.ok_or(Error::MissingArgument("mode information"))?;
            check_len(d, theta.len())?;
            check_mode(model, mode)?;
            let mut g = vec![0.0; d];
            (0..n)
                .map(|i| {
                    model.grad_datum_into(theta, i, &mut g);
                    math::sqrt(math::dist_sq(&g, mode.grads_at_mode().row(i)))
                })
                .collect()
        }
        WeightScheme::CvApprox => {
            let mode = mode.ok_or(Error::MissingArgument("mode information"))?;
            check_mode(model, mode)?;
            if d > CV_APPROX_MAX_DIM && !opts.allow_high_dim {
                return Err(Error::DimensionGuard { dim: d, limit: CV_APPROX_MAX_DIM });
            }
            let factor = mode.laplace_factor().ok_or(Error::MissingArgument("Laplace covariance at the mode"))?;
            model.hessian_sandwich_scores(mode.mode(), factor)?
        }
    };
    SubsampleDistribution::from_scores(&scores)
}

fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

fn check_mode(model: &ModelSpec, mode: &ModeInfo) -> Result<()> {
    check_len(model.dim(), mode.mode().len())?;
    check_len(model.n_data(), mode.grads_at_mode().rows())
}

/// Draws `n` indices. With replacement: i.i.d. from `dist`. Without
/// replacement: a uniform simple random sample of distinct indices, which
/// requires `dist` to be uniform and `n ≤ N`.
pub fn sample_indices<R: Rng + ?Sized>(
    dist: &SubsampleDistribution,
    n: usize,
    with_replacement: bool,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let mut out = Vec::with_capacity(n);
    sample_indices_into(dist, n, with_replacement, rng, &mut out)?;
    Ok(out)
}

pub fn sample_indices_into<R: Rng + ?Sized>(
    dist: &SubsampleDistribution,
    n: usize,
    with_replacement: bool,
    rng: &mut R,
    out: &mut Vec<usize>,
) -> Result<()> {
    out.clear();
    if n == 0 {
        return Err(Error::invalid("batch size must be at least 1"));
    }
    if with_replacement {
        out.extend((0..n).map(|_| dist.draw(rng)));
        return Ok(());
    }
    if !dist.is_uniform() {
        return Err(Error::invalid("sampling without replacement requires uniform weights"));
    }
    if n > dist.len() {
        return Err(Error::invalid("without-replacement batch larger than the dataset"));
    }
    out.extend(rand::seq::index::sample(rng, dist.len(), n));
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeded_rng;

    #[test]
    fn uniform_example() {
        let d = SubsampleDistribution::uniform(4).unwrap();
        assert_eq!(d.probs(), &[0.25; 4]);
        assert!(d.is_uniform());
        assert_eq!(d.reweight(2, 2), 2.0);
    }

    #[test]
    fn scores_normalise_and_are_scale_invariant() {
        let d = SubsampleDistribution::from_scores(&[3.0, 1.0]).unwrap();
        assert_eq!(d.probs(), &[0.75, 0.25]);
        let e = SubsampleDistribution::from_scores(&[30.0, 10.0]).unwrap();
        assert_eq!(d.probs(), e.probs());
    }

    #[test]
    fn zero_scores_are_guarded() {
        let all_zero = SubsampleDistribution::from_scores(&[0.0, 0.0, 0.0]).unwrap();
        assert!(all_zero.is_uniform());
        let some_zero = SubsampleDistribution::from_scores(&[0.0, 2.0, 1.0]).unwrap();
        assert!(some_zero.probs().iter().all(|&p| p > 0.0));
        assert!((some_zero.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(SubsampleDistribution::from_scores(&[-1.0, 2.0]).is_err());
        assert!(SubsampleDistribution::from_scores(&[f64::NAN, 2.0]).is_err());
    }

    #[test]
    fn alias_table_reconstructs_probabilities() {
        let scores = [0.1, 5.0, 0.3, 2.2, 0.0001, 7.0, 1.0];
        let d = SubsampleDistribution::from_scores(&scores).unwrap();
        for (a, b) in d.alias_probs().iter().zip(d.probs()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn sampling_is_deterministic_given_seed() {
        let d = SubsampleDistribution::from_scores(&[1.0, 1.0]).unwrap();
        let a = sample_indices(&d, 4, true, &mut seeded_rng(9)).unwrap();
        let b = sample_indices(&d, 4, true, &mut seeded_rng(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn weighted_frequency_matches_probability() {
        let d = SubsampleDistribution::from_scores(&[3.0, 1.0]).unwrap();
        let draws = sample_indices(&d, 100_000, true, &mut seeded_rng(1)).unwrap();
        let freq = draws.iter().filter(|&&i| i == 0).count() as f64 / 1e5;
        assert!((freq - 0.75).abs() < 0.01, "{freq}");
    }

    #[test]
    fn without_replacement_rules() {
        let u = SubsampleDistribution::uniform(5).unwrap();
        let mut s = sample_indices(&u, 5, false, &mut seeded_rng(3)).unwrap();
        s.sort_unstable();
        assert_eq!(s, vec![0, 1, 2, 3, 4]);
        assert!(sample_indices(&u, 6, false, &mut seeded_rng(3)).is_err());
        let w = SubsampleDistribution::from_scores(&[3.0, 1.0]).unwrap();
        assert!(sample_indices(&w, 1, false, &mut seeded_rng(3)).is_err());
        assert!(sample_indices(&u, 0, true, &mut seeded_rng(3)).is_err());
    }
}
