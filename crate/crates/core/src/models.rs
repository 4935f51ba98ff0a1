//! Target posteriors `π(θ) ∝ exp(-f(θ))` with `f = f₀ + Σᵢ fᵢ`, where `f₀` is
//! the negative log prior and `fᵢ` the negative log likelihood of datum `i`.
//!
//! Three models are supported: a bivariate (in general d-variate) Gaussian
//! with known observation covariance, Bayesian logistic regression and
//! Bayesian linear regression with unit noise. All priors are Gaussian.
//! Gradients, Hessians and Lipschitz constants are written out by hand.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::Deref;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{symmetric_eigenvalues, Cholesky, Matrix};
use crate::math;

/// Model parameter vector θ. Entries are always finite.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("parameter vector"));
        }
        Ok(ParamVector(values))
    }

    pub fn zeros(dim: usize) -> Self {
        ParamVector(vec![0.0; dim])
    }

    pub(crate) fn from_raw(values: Vec<f64>) -> Self {
        debug_assert!(values.iter().all(|v| v.is_finite()));
        ParamVector(values)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Squared Euclidean distance to `other`.
    pub fn dist_sq(&self, other: &[f64]) -> f64 {
        math::dist_sq(&self.0, other)
    }

    pub fn norm(&self) -> f64 {
        math::sqrt(math::norm_sq(&self.0))
    }
}

impl Deref for ParamVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Observations. For the regression models `features` holds the design
/// matrix (first column all ones when built by the loaders or generators)
/// and `responses` the targets; for the Gaussian model the feature rows are
/// the observations themselves and there are no responses.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    features: Matrix,
    responses: Option<Vec<f64>>,
}

impl Dataset {
    pub fn new(features: Matrix, responses: Option<Vec<f64>>) -> Result<Self> {
        if features.rows() == 0 {
            return Err(Error::invalid("dataset must contain at least one row"));
        }
        if !features.is_finite() {
            return Err(Error::NonFinite("feature matrix"));
        }
        if let Some(y) = &responses {
            if y.len() != features.rows() {
                return Err(Error::DimensionMismatch { expected: features.rows(), found: y.len() });
            }
            if y.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("responses"));
            }
        }
        Ok(Dataset { features, responses })
    }

    pub fn n_data(&self) -> usize {
        self.features.rows()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        self.features.row(i)
    }

    pub fn responses(&self) -> Option<&[f64]> {
        self.responses.as_deref()
    }

    #[inline]
    fn response(&self, i: usize) -> f64 {
        self.responses.as_ref().map_or(0.0, |y| y[i])
    }

    /// Rows `indices` in the given order.
    pub fn select(&self, indices: &[usize]) -> Result<Dataset> {
        let n = self.n_data();
        let mut data = Vec::with_capacity(indices.len() * self.dim());
        for &i in indices {
            if i >= n {
                return Err(Error::IndexOutOfRange { index: i, len: n });
            }
            data.extend_from_slice(self.row(i));
        }
        let features = Matrix::from_vec(indices.len(), self.dim(), data)?;
        let responses = self.responses.as_ref().map(|y| indices.iter().map(|&i| y[i]).collect());
        Dataset::new(features, responses)
    }

    /// Column means of the feature matrix.
    pub fn feature_means(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.dim()];
        for i in 0..self.n_data() {
            for (m, x) in mean.iter_mut().zip(self.row(i)) {
                *m += x;
            }
        }
        let n = self.n_data() as f64;
        mean.iter_mut().for_each(|m| *m /= n);
        mean
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Gaussian,
    Logistic,
    Linear,
}

/// A target posterior: data, Gaussian prior `N(μ₀, Λ₀)` and (Gaussian
/// kind only) the known observation covariance `Σₓ`.
#[derive(Clone, Debug)]
pub struct ModelSpec {
    kind: ModelKind,
    data: Dataset,
    prior_mean: ParamVector,
    prior_cov: Matrix,
    prior_precision: Matrix,
    obs_cov: Option<Matrix>,
    obs_precision: Option<Matrix>,
    obs_precision_lmax: f64,
}

impl ModelSpec {
    /// `x_i | θ ~ N(θ, Σₓ)` with prior `θ ~ N(μ₀, Λ₀)`.
    pub fn gaussian(data: Dataset, prior_mean: ParamVector, prior_cov: Matrix, obs_cov: Matrix) -> Result<Self> {
        let d = data.dim();
        check_dim(d, obs_cov.rows())?;
        let obs_precision = obs_cov.inverse_spd()?;
        let obs_precision_lmax = *symmetric_eigenvalues(&obs_precision)?.last().unwrap_or(&0.0);
        let mut spec = ModelSpec::base(ModelKind::Gaussian, data, prior_mean, prior_cov)?;
        spec.obs_cov = Some(obs_cov);
        spec.obs_precision = Some(obs_precision);
        spec.obs_precision_lmax = obs_precision_lmax;
        Ok(spec)
    }

    /// Logistic regression; responses must be 0 or 1.
    pub fn logistic(data: Dataset, prior_mean: ParamVector, prior_cov: Matrix) -> Result<Self> {
        match data.responses() {
            None => return Err(Error::MissingArgument("logistic responses")),
            Some(y) if y.iter().any(|&v| v != 0.0 && v != 1.0) => {
                return Err(Error::invalid("logistic responses must be 0 or 1"))
            }
            _ => {}
        }
        ModelSpec::base(ModelKind::Logistic, data, prior_mean, prior_cov)
    }

    /// Linear regression `y = xᵀθ + η`, `η ~ N(0, 1)`.
    pub fn linear(data: Dataset, prior_mean: ParamVector, prior_cov: Matrix) -> Result<Self> {
        if data.responses().is_none() {
            return Err(Error::MissingArgument("linear responses"));
        }
        ModelSpec::base(ModelKind::Linear, data, prior_mean, prior_cov)
    }

    fn base(kind: ModelKind, data: Dataset, prior_mean: ParamVector, prior_cov: Matrix) -> Result<Self> {
        let d = data.dim();
        check_dim(d, prior_mean.len())?;
        check_dim(d, prior_cov.rows())?;
        let prior_precision = prior_cov.inverse_spd()?;
        Ok(ModelSpec {
            kind,
            data,
            prior_mean,
            prior_cov,
            prior_precision,
            obs_cov: None,
            obs_precision: None,
            obs_precision_lmax: 0.0,
        })
    }

    /// Same prior and likelihood family on a different dataset.
    pub fn with_dataset(&self, data: Dataset) -> Result<Self> {
        match self.kind {
            ModelKind::Gaussian => ModelSpec::gaussian(
                data,
                self.prior_mean.clone(),
                self.prior_cov.clone(),
                self.obs_cov.clone().expect("gaussian model has obs_cov"),
            ),
            ModelKind::Logistic => ModelSpec::logistic(data, self.prior_mean.clone(), self.prior_cov.clone()),
            ModelKind::Linear => ModelSpec::linear(data, self.prior_mean.clone(), self.prior_cov.clone()),
        }
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.data.dim()
    }

    pub fn n_data(&self) -> usize {
        self.data.n_data()
    }

    pub fn dataset(&self) -> &Dataset {
        &self.data
    }

    pub fn prior_mean(&self) -> &ParamVector {
        &self.prior_mean
    }

    pub fn prior_cov(&self) -> &Matrix {
        &self.prior_cov
    }

    pub fn prior_precision(&self) -> &Matrix {
        &self.prior_precision
    }

    pub fn obs_cov(&self) -> Option<&Matrix> {
        self.obs_cov.as_ref()
    }

    fn check_theta(&self, theta: &[f64]) -> Result<()> {
        check_dim(self.dim(), theta.len())
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.n_data() {
            return Err(Error::IndexOutOfRange { index: i, len: self.n_data() });
        }
        Ok(())
    }

    /// `∇f₀(θ) = Λ₀⁻¹(θ − μ₀)`.
    pub fn grad_prior(&self, theta: &[f64]) -> Result<ParamVector> {
        self.check_theta(theta)?;
        let mut out = vec![0.0; self.dim()];
        self.grad_prior_into(theta, &mut out);
        Ok(ParamVector::from_raw(out))
    }

    pub(crate) fn grad_prior_into(&self, theta: &[f64], out: &mut [f64]) {
        let d = self.dim();
        for (j, o) in out.iter_mut().enumerate().take(d) {
            let row = self.prior_precision.row(j);
            *o = (0..d).map(|k| row[k] * (theta[k] - self.prior_mean[k])).sum();
        }
    }

    /// `∇fᵢ(θ)`.
    pub fn grad_datum(&self, theta: &[f64], i: usize) -> Result<ParamVector> {
        self.check_theta(theta)?;
        self.check_index(i)?;
        let mut out = vec![0.0; self.dim()];
        self.grad_datum_into(theta, i, &mut out);
        Ok(ParamVector::from_raw(out))
    }

    /// Unchecked form of [`grad_datum`](Self::grad_datum) writing into `out`.
    #[inline]
    pub(crate) fn grad_datum_into(&self, theta: &[f64], i: usize, out: &mut [f64]) {
        let x = self.data.row(i);
        match self.kind {
            ModelKind::Gaussian => {
                let p = self.obs_precision.as_ref().expect("gaussian model has obs precision");
                for (j, o) in out.iter_mut().enumerate() {
                    *o = p.row(j).iter().zip(theta).zip(x).map(|((pj, t), xi)| pj * (t - xi)).sum();
                }
            }
            ModelKind::Logistic => {
                let s = math::sigmoid(math::dot(theta, x)) - self.data.response(i);
                for (o, xv) in out.iter_mut().zip(x) {
                    *o = s * xv;
                }
            }
            ModelKind::Linear => {
                let r = math::dot(x, theta) - self.data.response(i);
                for (o, xv) in out.iter_mut().zip(x) {
                    *o = r * xv;
                }
            }
        }
    }

    /// `∇²fᵢ(θ)`, symmetric positive semidefinite.
    pub fn hessian_datum(&self, theta: &[f64], i: usize) -> Result<Matrix> {
        self.check_theta(theta)?;
        self.check_index(i)?;
        let x = self.data.row(i);
        Ok(match self.kind {
            ModelKind::Gaussian => self.obs_precision.clone().expect("gaussian model has obs precision"),
            ModelKind::Logistic => {
                let s = math::sigmoid(math::dot(theta, x));
                outer(x, s * (1.0 - s))
            }
            ModelKind::Linear => outer(x, 1.0),
        })
    }

    /// Gradient Lipschitz constant `Lᵢ` of `fᵢ`: `¼‖xᵢ‖²` (logistic),
    /// `‖xᵢ‖²` (linear), `λ_max(Σₓ⁻¹)` (Gaussian).
    pub fn lipschitz_constant(&self, i: usize) -> Result<f64> {
        self.check_index(i)?;
        Ok(self.lipschitz_unchecked(i))
    }

    pub(crate) fn lipschitz_unchecked(&self, i: usize) -> f64 {
        match self.kind {
            ModelKind::Gaussian => self.obs_precision_lmax,
            ModelKind::Logistic => 0.25 * math::norm_sq(self.data.row(i)),
            ModelKind::Linear => math::norm_sq(self.data.row(i)),
        }
    }

    /// `f(θ)` up to an additive constant.
    pub fn neg_log_posterior(&self, theta: &[f64]) -> Result<f64> {
        self.check_theta(theta)?;
        let d = self.dim();
        let diff: Vec<f64> = theta.iter().zip(self.prior_mean.iter()).map(|(t, m)| t - m).collect();
        let mut total = 0.5 * math::dot(&diff, &self.prior_precision.mul_vec(&diff)?);
        let mut scratch = vec![0.0; d];
        for i in 0..self.n_data() {
            let x = self.data.row(i);
            total += match self.kind {
                ModelKind::Gaussian => {
                    for (s, (t, xv)) in scratch.iter_mut().zip(theta.iter().zip(x)) {
                        *s = xv - t;
                    }
                    let p = self.obs_precision.as_ref().expect("gaussian model has obs precision");
                    0.5 * math::dot(&scratch, &p.mul_vec(&scratch)?)
                }
                ModelKind::Logistic => {
                    let z = math::dot(theta, x);
                    math::softplus(z) - self.data.response(i) * z
                }
                ModelKind::Linear => {
                    let r = self.data.response(i) - math::dot(x, theta);
                    0.5 * r * r
                }
            };
        }
        Ok(total)
    }

    /// `∇f(θ) = ∇f₀(θ) + Σᵢ ∇fᵢ(θ)`, accumulated in index order.
    pub fn full_gradient(&self, theta: &[f64]) -> Result<ParamVector> {
        self.check_theta(theta)?;
        let mut out = vec![0.0; self.dim()];
        let mut scratch = vec![0.0; self.dim()];
        self.full_gradient_into(theta, &mut out, &mut scratch, None);
        Ok(ParamVector::from_raw(out))
    }

    /// Full gradient; when `per_datum` is given, row `i` receives `∇fᵢ(θ)`.
    pub(crate) fn full_gradient_into(
        &self,
        theta: &[f64],
        out: &mut [f64],
        scratch: &mut [f64],
        mut per_datum: Option<&mut Matrix>,
    ) {
        self.grad_prior_into(theta, out);
        for i in 0..self.n_data() {
            self.grad_datum_into(theta, i, scratch);
            for (o, g) in out.iter_mut().zip(scratch.iter()) {
                *o += g;
            }
            if let Some(m) = per_datum.as_deref_mut() {
                m.row_mut(i).copy_from_slice(scratch);
            }
        }
    }

    /// Negative log-posterior Hessian `Λ₀⁻¹ + Σᵢ ∇²fᵢ(θ)`.
    pub fn information_matrix(&self, theta: &[f64]) -> Result<Matrix> {
        self.check_theta(theta)?;
        let d = self.dim();
        let mut info = self.prior_precision.clone();
        match self.kind {
            ModelKind::Gaussian => {
                let p = self.obs_precision.as_ref().expect("gaussian model has obs precision");
                info = info.add_scaled(self.n_data() as f64, p)?;
            }
            ModelKind::Logistic | ModelKind::Linear => {
                for i in 0..self.n_data() {
                    let x = self.data.row(i);
                    let w = if self.kind == ModelKind::Logistic {
                        let s = math::sigmoid(math::dot(theta, x));
                        s * (1.0 - s)
                    } else {
                        1.0
                    };
                    for a in 0..d {
                        let wa = w * x[a];
                        for b in 0..d {
                            let v = info.get(a, b) + wa * x[b];
                            info.set(a, b, v);
                        }
                    }
                }
            }
        }
        info.symmetrize();
        Ok(info)
    }

    /// Laplace covariance `Σ̂ = (∇²f₀(θ̂) + Σᵢ∇²fᵢ(θ̂))⁻¹` at a stationary point.
    pub fn laplace_covariance(&self, mode: &[f64]) -> Result<Matrix> {
        self.information_matrix(mode)?.inverse_spd()
    }

    /// Analytic posterior `N(μ₁, Λ₁)` of the Gaussian model.
    pub fn conjugate_posterior(&self) -> Result<(ParamVector, Matrix)> {
        if self.kind != ModelKind::Gaussian {
            return Err(Error::UnsupportedModel("conjugate posterior needs the Gaussian model"));
        }
        conjugate_gaussian_posterior(
            &self.prior_mean,
            &self.prior_cov,
            self.obs_cov.as_ref().expect("gaussian model has obs_cov"),
            self.n_data(),
            &self.data.feature_means(),
        )
    }

    /// Square root of `tr(∇²fᵢ(θ) Σ̂ ∇²fᵢ(θ)ᵀ)` for every datum, given the
    /// Cholesky factor `C` of `Σ̂`. Uses `tr(H Σ̂ Hᵀ) = ‖H C‖²_F`; for the
    /// rank-one regression Hessians `w x xᵀ` this is `w‖x‖‖Cᵀx‖`, and the
    /// Gaussian Hessian is the same for every datum.
    pub fn hessian_sandwich_scores(&self, theta: &[f64], sigma_factor: &Cholesky) -> Result<Vec<f64>> {
        self.check_theta(theta)?;
        check_dim(self.dim(), sigma_factor.dim())?;
        let c = sigma_factor.lower();
        let n = self.n_data();
        match self.kind {
            ModelKind::Gaussian => {
                let p = self.obs_precision.as_ref().expect("gaussian model has obs precision");
                let score = math::sqrt(p.matmul(c)?.frobenius_sq());
                Ok(vec![score; n])
            }
            ModelKind::Logistic | ModelKind::Linear => {
                let d = self.dim();
                let mut ctx = vec![0.0; d];
                let mut scores = Vec::with_capacity(n);
                for i in 0..n {
                    let x = self.data.row(i);
                    // (Cᵀx)_k = Σ_{j ≥ k} C_{jk} x_j
                    for (k, v) in ctx.iter_mut().enumerate() {
                        *v = (k..d).map(|j| c.get(j, k) * x[j]).sum();
                    }
                    let w = if self.kind == ModelKind::Logistic {
                        let s = math::sigmoid(math::dot(theta, x));
                        s * (1.0 - s)
                    } else {
                        1.0
                    };
                    scores.push(w * math::sqrt(math::norm_sq(x)) * math::sqrt(math::norm_sq(&ctx)));
                }
                Ok(scores)
            }
        }
    }
}

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

fn outer(x: &[f64], w: f64) -> Matrix {
    let d = x.len();
    let mut m = Matrix::zeros(d, d);
    for a in 0..d {
        for b in a..d {
            let v = w * x[a] * x[b];
            m.set(a, b, v);
            m.set(b, a, v);
        }
    }
    m
}

/// Conjugate update from sufficient statistics (count `n`, sample mean
/// `mean`): `Λ₁⁻¹ = Λ₀⁻¹ + nΣₓ⁻¹`, `μ₁ = Λ₁(Λ₀⁻¹μ₀ + nΣₓ⁻¹x̄)`.
/// With `n = 0` the prior is returned unchanged.
pub fn conjugate_gaussian_posterior(
    prior_mean: &[f64],
    prior_cov: &Matrix,
    obs_cov: &Matrix,
    n: usize,
    mean: &[f64],
) -> Result<(ParamVector, Matrix)> {
    let d = prior_mean.len();
    check_dim(d, prior_cov.rows())?;
    check_dim(d, obs_cov.rows())?;
    check_dim(d, mean.len())?;
    if n == 0 {
        return Ok((ParamVector::new(prior_mean.to_vec())?, prior_cov.clone()));
    }
    let prior_prec = prior_cov.inverse_spd()?;
    let obs_prec = obs_cov.inverse_spd()?;
    let nf = n as f64;
    let post_prec = prior_prec.add_scaled(nf, &obs_prec)?;
    let chol = post_prec.cholesky()?;
    let a = prior_prec.mul_vec(prior_mean)?;
    let b = obs_prec.mul_vec(mean)?;
    let rhs: Vec<f64> = a.iter().zip(&b).map(|(u, v)| u + nf * v).collect();
    let mu = chol.solve(&rhs)?;
    Ok((ParamVector::new(mu)?, chol.inverse()))
}

/// Posterior mode θ̂ together with the quantities cached there: every
/// `∇fᵢ(θ̂)`, `∇f(θ̂)`, `∇f₀(θ̂)` and optionally the Laplace covariance.
#[derive(Clone, Debug)]
pub struct ModeInfo {
    mode: ParamVector,
    grads_at_mode: Matrix,
    grad_sum: ParamVector,
    prior_grad: ParamVector,
    laplace: Option<(Matrix, Cholesky)>,
}

impl ModeInfo {
    /// Caches all per-datum gradients at `mode` in one pass; computes the
    /// Laplace covariance when `with_laplace` is set.
    pub fn at(model: &ModelSpec, mode: ParamVector, with_laplace: bool) -> Result<Self> {
        check_dim(model.dim(), mode.len())?;
        let d = model.dim();
        let mut grads = Matrix::zeros(model.n_data(), d);
        let mut sum = vec![0.0; d];
        let mut scratch = vec![0.0; d];
        model.full_gradient_into(&mode, &mut sum, &mut scratch, Some(&mut grads));
        if sum.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("gradient at mode"));
        }
        let mut prior_grad = vec![0.0; d];
        model.grad_prior_into(&mode, &mut prior_grad);
        let mut info = ModeInfo {
            mode,
            grads_at_mode: grads,
            grad_sum: ParamVector::from_raw(sum),
            prior_grad: ParamVector::from_raw(prior_grad),
            laplace: None,
        };
        if with_laplace {
            info.compute_laplace(model)?;
        }
        Ok(info)
    }

    pub fn compute_laplace(&mut self, model: &ModelSpec) -> Result<()> {
        let cov = model.laplace_covariance(&self.mode)?;
        let chol = cov.cholesky()?;
        self.laplace = Some((cov, chol));
        Ok(())
    }

    pub fn mode(&self) -> &ParamVector {
        &self.mode
    }

    pub fn grads_at_mode(&self) -> &Matrix {
        &self.grads_at_mode
    }

    /// `∇f(θ̂)` including the prior term.
    pub fn grad_sum(&self) -> &ParamVector {
        &self.grad_sum
    }

    pub fn prior_grad(&self) -> &ParamVector {
        &self.prior_grad
    }

    pub fn laplace_cov(&self) -> Option<&Matrix> {
        self.laplace.as_ref().map(|(c, _)| c)
    }

    pub fn laplace_factor(&self) -> Option<&Cholesky> {
        self.laplace.as_ref().map(|(_, l)| l)
    }
}

/// Synthetic problems matching the experiment designs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SyntheticKind {
    /// Bivariate Gaussian, θ* = (0, 1), Σₓ = [[1e5, 6e4], [6e4, 2e5]].
    Gaussian,
    /// Logistic regression, four features plus intercept, 50% positives.
    LogisticBalanced,
    /// Logistic regression, four features plus intercept, 95% positives.
    LogisticImbalanced,
    /// Linear regression, four features plus intercept, unit noise.
    Linear,
}

/// Default prior variance of the Gaussian experiment (weak in both coordinates).
pub const GAUSSIAN_PRIOR_VAR: [f64; 2] = [1.0e3, 1.0e3];
/// Alternative Gaussian prior variance, tighter on the second coordinate.
pub const GAUSSIAN_PRIOR_VAR_ALT: [f64; 2] = [1.0e3, 2.0];
/// Isotropic prior variance of the regression models.
pub const REGRESSION_PRIOR_VAR: f64 = 10.0;

#[derive(Clone, Debug, Default)]
pub struct SyntheticOptions {
    /// Diagonal prior variance; `None` uses the model default.
    pub prior_var: Option<Vec<f64>>,
}


#[derive(Clone, Debug)]
pub struct SyntheticProblem {
    pub model: ModelSpec,
    /// Held-out set of size `N/2` (logistic kinds only).
    pub test: Option<Dataset>,
    pub true_theta: ParamVector,
}

pub fn generate_synthetic(kind: SyntheticKind, n: usize, seed: u64) -> Result<SyntheticProblem> {
    generate_synthetic_with(kind, n, seed, &SyntheticOptions::default())
}

pub fn generate_synthetic_with(
    kind: SyntheticKind,
    n: usize,
    seed: u64,
    opts: &SyntheticOptions,
) -> Result<SyntheticProblem> {
    if n < 2 {
        return Err(Error::invalid("synthetic data needs N >= 2"));
    }
    let mut rng = crate::seeded_rng(seed);
    match kind {
        SyntheticKind::Gaussian => {
            let truth = [0.0, 1.0];
            let obs_cov = Matrix::from_rows(&[[1.0e5, 6.0e4], [6.0e4, 2.0e5]])?;
            let chol = obs_cov.cholesky()?;
            let mut data = Vec::with_capacity(2 * n);
            for _ in 0..n {
                let z = [rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal)];
                let dx = chol.mul_lower(&z);
                data.push(truth[0] + dx[0]);
                data.push(truth[1] + dx[1]);
            }
            let ds = Dataset::new(Matrix::from_vec(n, 2, data)?, None)?;
            let var = opts.prior_var.clone().unwrap_or_else(|| GAUSSIAN_PRIOR_VAR.to_vec());
            check_dim(2, var.len())?;
            let model = ModelSpec::gaussian(ds, ParamVector::zeros(2), Matrix::from_diag(&var), obs_cov)?;
            Ok(SyntheticProblem { model, test: None, true_theta: ParamVector::from_raw(truth.to_vec()) })
        }
        SyntheticKind::LogisticBalanced | SyntheticKind::LogisticImbalanced => {
            let positive = if kind == SyntheticKind::LogisticBalanced { 0.5 } else { 0.95 };
            generate_logistic(n, positive, &mut rng, opts)
        }
        SyntheticKind::Linear => {
            const P: usize = 4;
            let beta: Vec<f64> = (0..=P).map(|_| rng.sample(StandardNormal)).collect();
            let mut x = Vec::with_capacity(n * (P + 1));
            let mut y = Vec::with_capacity(n);
            for _ in 0..n {
                let mut row = [1.0; P + 1];
                for v in row.iter_mut().skip(1) {
                    *v = rng.sample(StandardNormal);
                }
                let noise: f64 = rng.sample(StandardNormal);
                y.push(math::dot(&row, &beta) + noise);
                x.extend_from_slice(&row);
            }
            let ds = Dataset::new(Matrix::from_vec(n, P + 1, x)?, Some(y))?;
            let model = ModelSpec::linear(ds, ParamVector::zeros(P + 1), regression_prior(P + 1, opts)?)?;
            Ok(SyntheticProblem { model, test: None, true_theta: ParamVector::new(beta)? })
        }
    }
}

fn regression_prior(d: usize, opts: &SyntheticOptions) -> Result<Matrix> {
    match &opts.prior_var {
        Some(v) => {
            check_dim(d, v.len())?;
            Ok(Matrix::from_diag(v))
        }
        None => Ok(Matrix::identity(d).scale(REGRESSION_PRIOR_VAR)),
    }
}

/// Standard-normal features, a random coefficient vector and logistic label
/// noise; the intercept is then chosen so that exactly `round(positive·N)`
/// training labels are 1. The test set reuses the same coefficients.
fn generate_logistic(
    n: usize,
    positive: f64,
    rng: &mut crate::ChainRng,
    opts: &SyntheticOptions,
) -> Result<SyntheticProblem> {
    const P: usize = 4;
    let beta: Vec<f64> = (0..P).map(|_| rng.sample(StandardNormal)).collect();
    let n_test = n / 2;
    let draw = |count: usize, rng: &mut crate::ChainRng| {
        let mut feats = Vec::with_capacity(count * P);
        let mut latent = Vec::with_capacity(count);
        for _ in 0..count {
            let row: Vec<f64> = (0..P).map(|_| rng.sample(StandardNormal)).collect();
            let u: f64 = rng.random_range(f64::EPSILON..1.0);
            latent.push(math::dot(&row, &beta) + math::ln(u / (1.0 - u)));
            feats.extend(row);
        }
        (feats, latent)
    };
    let (train_x, train_z) = draw(n, rng);
    let (test_x, test_z) = draw(n_test, rng);

    let k = (math::round(positive * n as f64) as usize).clamp(1, n - 1);
    let mut sorted = train_z.clone();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let intercept = -0.5 * (sorted[k - 1] + sorted[k]);

    let build = |x: &[f64], z: &[f64]| -> Result<Dataset> {
        let rows = z.len();
        let mut data = Vec::with_capacity(rows * (P + 1));
        let mut y = Vec::with_capacity(rows);
        for i in 0..rows {
            data.push(1.0);
            data.extend_from_slice(&x[i * P..(i + 1) * P]);
            y.push(if z[i] + intercept > 0.0 { 1.0 } else { 0.0 });
        }
        Dataset::new(Matrix::from_vec(rows, P + 1, data)?, Some(y))
    };
    let train = build(&train_x, &train_z)?;
    let test = if n_test > 0 { Some(build(&test_x, &test_z)?) } else { None };
    let mut truth = vec![intercept];
    truth.extend(beta);
    let model = ModelSpec::logistic(train, ParamVector::zeros(P + 1), regression_prior(P + 1, opts)?)?;
    Ok(SyntheticProblem { model, test, true_theta: ParamVector::new(truth)? })
}
