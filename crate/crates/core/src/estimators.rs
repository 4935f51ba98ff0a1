//! Stochastic estimators of `∇f(θ)` and their pseudo-variance
//! `E‖g̃ − ∇f(θ)‖²` (the trace of the estimator covariance).
//!
//! All four estimators share one form, `base + Σ_{i∈S} wᵢ tᵢ`:
//!
//! | kind    | base                              | tᵢ                      | wᵢ          |
//! |---------|-----------------------------------|-------------------------|-------------|
//! | `Naive` | `∇f₀(θ)`                          | `∇fᵢ(θ)`                | `N/n`       |
//! | `Ps`    | `∇f₀(θ)`                          | `∇fᵢ(θ)`                | `1/(n pᵢ)`  |
//! | `Cv`    | `∇f(θ̂) + ∇f₀(θ) − ∇f₀(θ̂)`        | `∇fᵢ(θ) − ∇fᵢ(θ̂)`       | `N/n`       |
//! | `CvPs`  | same as `Cv`                      | same as `Cv`            | `1/(n pᵢ)`  |
//!
//! The uniform distribution reports `1/(n pᵢ)` as exactly `N/n`, so the
//! weighted kinds evaluated with uniform weights reproduce their unweighted
//! counterparts bit for bit.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::math;
use crate::models::{ModeInfo, ModelSpec, ParamVector};
use crate::subsampling::{sample_indices_into, SubsampleDistribution};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EstimatorKind {
    Naive,
    Ps,
    Cv,
    CvPs,
}

impl EstimatorKind {
    pub fn uses_control_variate(self) -> bool {
        matches!(self, EstimatorKind::Cv | EstimatorKind::CvPs)
    }

    pub fn requires_uniform(self) -> bool {
        matches!(self, EstimatorKind::Naive | EstimatorKind::Cv)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradientEstimate {
    pub vector: ParamVector,
    pub indices: Vec<usize>,
    pub kind: EstimatorKind,
    pub batch_size: usize,
}

/// A validated estimator bound to a model, a distribution and (for the
/// control-variate kinds) the cached mode. Holds its own scratch buffer.
#[derive(Clone, Debug)]
pub struct GradientEstimator<'a> {
    kind: EstimatorKind,
    model: &'a ModelSpec,
    dist: &'a SubsampleDistribution,
    mode: Option<&'a ModeInfo>,
    scratch: Vec<f64>,
}

impl<'a> GradientEstimator<'a> {
    pub fn new(
        kind: EstimatorKind,
        model: &'a ModelSpec,
        dist: &'a SubsampleDistribution,
        mode: Option<&'a ModeInfo>,
    ) -> Result<Self> {
        if dist.len() != model.n_data() {
            return Err(Error::DimensionMismatch { expected: model.n_data(), found: dist.len() });
        }
        if kind.requires_uniform() && !dist.is_uniform() {
            return Err(Error::invalid("naive and control-variate estimators need the uniform distribution"));
        }
        let mode = if kind.uses_control_variate() {
            let m = mode.ok_or(Error::MissingArgument("mode information"))?;
            if m.mode().len() != model.dim() || m.grads_at_mode().rows() != model.n_data() {
                return Err(Error::invalid("mode information does not match the model"));
            }
            Some(m)
        } else {
            None
        };
        Ok(GradientEstimator { kind, model, dist, mode, scratch: vec![0.0; model.dim()] })
    }

    pub fn kind(&self) -> EstimatorKind {
        self.kind
    }

    /// Writes the base term into `out`.
    fn base_into(&self, theta: &[f64], out: &mut [f64]) {
        self.model.grad_prior_into(theta, out);
        if let Some(m) = self.mode {
            for ((o, s), p) in out.iter_mut().zip(m.grad_sum().iter()).zip(m.prior_grad().iter()) {
                *o = s + (*o - p);
            }
        }
    }

    /// Writes `tᵢ` into `out`.
    #[inline]
    fn term_into(&self, theta: &[f64], i: usize, out: &mut [f64]) {
        self.model.grad_datum_into(theta, i, out);
        if let Some(m) = self.mode {
            for (o, c) in out.iter_mut().zip(m.grads_at_mode().row(i)) {
                *o -= c;
            }
        }
    }

    /// Estimate from a given subsample; `indices.len()` is the batch size.
    pub fn estimate_into(&mut self, theta: &[f64], indices: &[usize], out: &mut [f64]) {
        let n = indices.len();
        self.base_into(theta, out);
        let mut scratch = core::mem::take(&mut self.scratch);
        for &i in indices {
            self.term_into(theta, i, &mut scratch);
            let w = self.dist.reweight(i, n);
            for (o, t) in out.iter_mut().zip(&scratch) {
                *o += w * t;
            }
        }
        self.scratch = scratch;
    }

    /// All `tᵢ` at `theta` as rows of an N×d matrix, plus the base term.
    fn all_terms(&self, theta: &[f64]) -> (Vec<f64>, Matrix) {
        let d = self.model.dim();
        let mut base = vec![0.0; d];
        self.base_into(theta, &mut base);
        let mut terms = Matrix::zeros(self.model.n_data(), d);
        for i in 0..self.model.n_data() {
            self.term_into(theta, i, terms.row_mut(i));
        }
        (base, terms)
    }
}

fn check_theta(model: &ModelSpec, theta: &[f64]) -> Result<()> {
    if theta.len() != model.dim() {
        return Err(Error::DimensionMismatch { expected: model.dim(), found: theta.len() });
    }
    Ok(())
}

/// Draws a subsample of size `n` from `dist` and evaluates the estimator.
#[allow(clippy::too_many_arguments)]
pub fn estimate_gradient<R: Rng + ?Sized>(
    kind: EstimatorKind,
    model: &ModelSpec,
    theta: &[f64],
    dist: &SubsampleDistribution,
    n: usize,
    with_replacement: bool,
    mode: Option<&ModeInfo>,
    rng: &mut R,
) -> Result<GradientEstimate> {
    check_theta(model, theta)?;
    let mut est = GradientEstimator::new(kind, model, dist, mode)?;
    let mut indices = Vec::with_capacity(n);
    sample_indices_into(dist, n, with_replacement, rng, &mut indices)?;
    let mut out = vec![0.0; model.dim()];
    est.estimate_into(theta, &indices, &mut out);
    let vector = ParamVector::new(out).map_err(|_| Error::NonFinite("gradient estimate"))?;
    Ok(GradientEstimate { vector, indices, kind, batch_size: n })
}

/// Evaluates the estimator on a fixed subsample.
pub fn estimate_from_indices(
    kind: EstimatorKind,
    model: &ModelSpec,
    theta: &[f64],
    dist: &SubsampleDistribution,
    indices: &[usize],
    mode: Option<&ModeInfo>,
) -> Result<ParamVector> {
    check_theta(model, theta)?;
    if indices.is_empty() {
        return Err(Error::invalid("batch size must be at least 1"));
    }
    if let Some(&bad) = indices.iter().find(|&&i| i >= model.n_data()) {
        return Err(Error::IndexOutOfRange { index: bad, len: model.n_data() });
    }
    let mut est = GradientEstimator::new(kind, model, dist, mode)?;
    let mut out = vec![0.0; model.dim()];
    est.estimate_into(theta, indices, &mut out);
    ParamVector::new(out).map_err(|_| Error::NonFinite("gradient estimate"))
}

/// Exact pseudo-variance of a with-replacement estimator:
/// `(1/n)[Σᵢ (1/pᵢ)‖tᵢ‖² − ‖Σᵢ tᵢ‖²]`, clamped at zero.
pub fn pseudo_variance_closed_form(
    kind: EstimatorKind,
    model: &ModelSpec,
    theta: &[f64],
    dist: &SubsampleDistribution,
    n: usize,
    mode: Option<&ModeInfo>,
) -> Result<f64> {
    check_theta(model, theta)?;
    if n == 0 {
        return Err(Error::invalid("batch size must be at least 1"));
    }
    let est = GradientEstimator::new(kind, model, dist, mode)?;
    let d = model.dim();
    let mut t = vec![0.0; d];
    let mut weighted = 0.0;
    let mut total = vec![0.0; d];
    for i in 0..model.n_data() {
        est.term_into(theta, i, &mut t);
        weighted += dist.inverse_prob(i) * math::norm_sq(&t);
        for (s, v) in total.iter_mut().zip(&t) {
            *s += v;
        }
    }
    let value = (weighted - math::norm_sq(&total)) / n as f64;
    Ok(value.max(0.0))
}

/// Monte Carlo pseudo-variance `(1/R) Σ_r ‖g̃_r − ∇f(θ)‖²` over `reps`
/// independent subsamples. Per-datum terms at `theta` are computed once
/// and shared by every replicate.
#[allow(clippy::too_many_arguments)]
pub fn pseudo_variance_empirical<R: Rng + ?Sized>(
    kind: EstimatorKind,
    model: &ModelSpec,
    theta: &[f64],
    dist: &SubsampleDistribution,
    n: usize,
    with_replacement: bool,
    mode: Option<&ModeInfo>,
    reps: usize,
    rng: &mut R,
) -> Result<f64> {
    check_theta(model, theta)?;
    if reps == 0 {
        return Err(Error::invalid("replication count must be at least 1"));
    }
    let est = GradientEstimator::new(kind, model, dist, mode)?;
    let exact = model.full_gradient(theta)?;
    let (base, terms) = est.all_terms(theta);
    let mut indices = Vec::with_capacity(n);
    let mut g = vec![0.0; model.dim()];
    let mut acc = 0.0;
    for _ in 0..reps {
        sample_indices_into(dist, n, with_replacement, rng, &mut indices)?;
        g.copy_from_slice(&base);
        for &i in &indices {
            let w = dist.reweight(i, n);
            for (o, t) in g.iter_mut().zip(terms.row(i)) {
                *o += w * t;
            }
        }
        acc += math::dist_sq(&g, &exact);
    }
    Ok(acc / reps as f64)
}

/// Cached `Σᵢ Lᵢ²/pᵢ` for one distribution, giving the upper bound
/// `V(g̃) ≤ (1/n)‖θ − θ̂‖² Σᵢ Lᵢ²/pᵢ` on the control-variate estimator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LipschitzBound {
    sum_term: f64,
}

impl LipschitzBound {
    pub fn new(model: &ModelSpec, dist: &SubsampleDistribution) -> Result<Self> {
        if dist.len() != model.n_data() {
            return Err(Error::DimensionMismatch { expected: model.n_data(), found: dist.len() });
        }
        let sum_term = (0..model.n_data())
            .map(|i| {
                let l = model.lipschitz_unchecked(i);
                l * l * dist.inverse_prob(i)
            })
            .sum();
        Ok(LipschitzBound { sum_term })
    }

    pub fn from_sum_term(sum_term: f64) -> Self {
        LipschitzBound { sum_term }
    }

    pub fn sum_term(&self) -> f64 {
        self.sum_term
    }

    pub fn pseudo_variance(&self, theta: &[f64], mode: &[f64], n: usize) -> f64 {
        math::dist_sq(theta, mode) * self.sum_term / n as f64
    }
}

pub fn pseudo_variance_bound(
    model: &ModelSpec,
    theta: &[f64],
    mode: &ModeInfo,
    dist: &SubsampleDistribution,
    n: usize,
) -> Result<f64> {
    check_theta(model, theta)?;
    if n == 0 {
        return Err(Error::invalid("batch size must be at least 1"));
    }
    Ok(LipschitzBound::new(model, dist)?.pseudo_variance(theta, mode.mode(), n))
}
