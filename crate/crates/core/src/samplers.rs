//! Langevin samplers, ADAM mode finding and noise-threshold calibration.
//!
//! Every sampler applies `θ ← θ − (ε/2) g̃ + ξ`, `ξ ~ N(0, εI)`, and differs
//! only in how `g̃` is formed (see [`SamplerKind`]). Adaptive kinds pick the
//! batch size at each iteration as the smallest `n` with
//! `(1/n)‖θ − θ̂‖² Σᵢ Lᵢ²/pᵢ < V₀`.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::estimators::{EstimatorKind, GradientEstimator, LipschitzBound};
use crate::linalg::Matrix;
use crate::math;
use crate::models::{ModeInfo, ModelKind, ModelSpec, ParamVector};
use crate::subsampling::{sample_indices_into, SubsampleDistribution};
use crate::{seeded_rng, ChainRng};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SamplerKind {
    /// Full-data gradient each step.
    Ula,
    Sgld,
    SgldCv,
    SgldPs,
    SgldCvPs,
    /// Adaptive batch size, control variates, uniform weights.
    AsgldCv,
    /// Adaptive batch size, control variates, preferential weights.
    AsgldCvPs,
}

impl SamplerKind {
    pub const ALL: [SamplerKind; 7] = [
        SamplerKind::Ula,
        SamplerKind::Sgld,
        SamplerKind::SgldCv,
        SamplerKind::SgldPs,
        SamplerKind::SgldCvPs,
        SamplerKind::AsgldCv,
        SamplerKind::AsgldCvPs,
    ];

    /// Estimator used by the kind (`None` for ULA).
    pub fn estimator(self) -> Option<EstimatorKind> {
        match self {
            SamplerKind::Ula => None,
            SamplerKind::Sgld => Some(EstimatorKind::Naive),
            SamplerKind::SgldPs => Some(EstimatorKind::Ps),
            SamplerKind::SgldCv | SamplerKind::AsgldCv => Some(EstimatorKind::Cv),
            SamplerKind::SgldCvPs | SamplerKind::AsgldCvPs => Some(EstimatorKind::CvPs),
        }
    }

    pub fn is_adaptive(self) -> bool {
        matches!(self, SamplerKind::AsgldCv | SamplerKind::AsgldCvPs)
    }

    pub fn needs_mode(self) -> bool {
        self.estimator().is_some_and(EstimatorKind::uses_control_variate)
    }

    /// Kinds that subsample with a caller-supplied weighted distribution.
    pub fn is_preferential(self) -> bool {
        matches!(self, SamplerKind::SgldPs | SamplerKind::SgldCvPs | SamplerKind::AsgldCvPs)
    }

    pub fn name(self) -> &'static str {
        match self {
            SamplerKind::Ula => "ula",
            SamplerKind::Sgld => "sgld",
            SamplerKind::SgldCv => "sgld-cv",
            SamplerKind::SgldPs => "sgld-ps",
            SamplerKind::SgldCvPs => "sgld-cv-ps",
            SamplerKind::AsgldCv => "asgld-cv",
            SamplerKind::AsgldCvPs => "asgld-cv-ps",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        SamplerKind::ALL.into_iter().find(|k| k.name() == name)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdaptiveBatch {
    /// Pseudo-variance threshold `V₀ > 0`.
    pub noise_threshold: f64,
    pub n_min: usize,
    pub n_max: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BatchSize {
    Fixed(usize),
    Adaptive(AdaptiveBatch),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Initialization {
    /// θ̂ for control-variate kinds; otherwise a prior draw for the Gaussian
    /// model and zero for the regressions.
    Default,
    Mode,
    Prior,
    Zero,
    At(ParamVector),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SamplerConfig {
    pub kind: SamplerKind,
    pub step_size: f64,
    pub iterations: usize,
    /// Ignored by ULA, which always uses the full dataset.
    pub batch: BatchSize,
    pub with_replacement: bool,
    pub seed: u64,
    /// Keep every `thin`-th state.
    pub thin: usize,
    pub init: Initialization,
    /// Set to `false` to drop the injected Gaussian noise (testing hook).
    pub noise: bool,
}

impl SamplerConfig {
    pub fn new(kind: SamplerKind, step_size: f64, iterations: usize, batch: BatchSize, seed: u64) -> Self {
        SamplerConfig {
            kind,
            step_size,
            iterations,
            batch,
            with_replacement: true,
            seed,
            thin: 1,
            init: Initialization::Default,
            noise: true,
        }
    }

    fn validate(&self, n_data: usize) -> Result<()> {
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::invalid("step size must be positive"));
        }
        if self.iterations == 0 {
            return Err(Error::invalid("iterations must be at least 1"));
        }
        if self.thin == 0 {
            return Err(Error::invalid("thinning stride must be at least 1"));
        }
        if self.kind == SamplerKind::Ula {
            return Ok(());
        }
        match (self.kind.is_adaptive(), self.batch) {
            (false, BatchSize::Fixed(n)) => {
                if n == 0 || n > n_data {
                    return Err(Error::invalid("fixed batch size must lie in 1..=N"));
                }
            }
            (true, BatchSize::Adaptive(a)) => {
                if !(a.noise_threshold > 0.0) {
                    return Err(Error::invalid("noise threshold must be positive"));
                }
                if a.n_min == 0 || a.n_min > a.n_max || a.n_max > n_data {
                    return Err(Error::invalid("need 1 <= n_min <= n_max <= N"));
                }
            }
            (false, _) => return Err(Error::invalid("fixed-batch sampler given an adaptive batch policy")),
            (true, _) => return Err(Error::invalid("adaptive sampler needs an adaptive batch policy")),
        }
        if !self.with_replacement && (self.kind.is_preferential() || self.kind.is_adaptive()) {
            return Err(Error::invalid("without-replacement sampling is only available for uniform fixed-batch kinds"));
        }
        Ok(())
    }
}

/// Retained states of one chain and its data-usage accounting.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainTrace {
    pub kind: SamplerKind,
    pub seed: u64,
    /// θ⁽¹⁾, the state before the first update.
    pub initial: ParamVector,
    /// One row per retained state (the state after iteration `t`).
    pub samples: Matrix,
    /// 1-based iteration index of each retained row.
    pub sample_iterations: Vec<usize>,
    /// Cumulative data usage at each retained row.
    pub sample_data_usage: Vec<u64>,
    /// Batch size used at every iteration.
    pub batch_sizes: Vec<usize>,
    /// `Σₜ n⁽ᵗ⁾`: number of per-datum gradient terms evaluated.
    pub data_usage: u64,
    /// Filled in by callers that time the run.
    pub wall_time_secs: f64,
}

impl ChainTrace {
    pub fn len(&self) -> usize {
        self.samples.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.rows() == 0
    }

    /// Data usage in units of full passes over `n_data` points.
    pub fn passes(&self, n_data: usize) -> f64 {
        self.data_usage as f64 / n_data as f64
    }

    /// State at which iteration `t` (1-based) was evaluated, when retained
    /// with stride 1.
    pub fn state_before(&self, t: usize) -> Option<&[f64]> {
        match t {
            0 => None,
            1 => Some(&self.initial),
            _ => self.sample_iterations.iter().position(|&it| it == t - 1).map(|k| self.samples.row(k)),
        }
    }
}

/// ADAM step sizes and decay rates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamRates {
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub delta: f64,
}

impl Default for AdamRates {
    fn default() -> Self {
        AdamRates { alpha: 1e-3, beta1: 0.9, beta2: 0.999, delta: 1e-8 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
    pub rates: AdamRates,
}

impl AdamState {
    pub fn new(dim: usize, rates: AdamRates) -> Self {
        AdamState { m: vec![0.0; dim], v: vec![0.0; dim], t: 0, rates }
    }

    /// One bias-corrected ADAM update of `theta` against `grad`.
    pub fn step(&mut self, theta: &mut [f64], grad: &[f64]) {
        let AdamRates { alpha, beta1, beta2, delta } = self.rates;
        self.t += 1;
        let c1 = 1.0 - math::powf(beta1, self.t as f64);
        let c2 = 1.0 - math::powf(beta2, self.t as f64);
        for j in 0..theta.len() {
            let g = grad[j];
            self.m[j] = beta1 * self.m[j] + (1.0 - beta1) * g;
            self.v[j] = beta2 * self.v[j] + (1.0 - beta2) * g * g;
            let m_hat = self.m[j] / c1;
            let v_hat = self.v[j] / c2;
            theta[j] -= alpha * m_hat / (math::sqrt(v_hat) + delta);
        }
    }
}

/// Runs `steps` ADAM updates against an arbitrary gradient oracle.
pub fn adam_minimize<F>(theta0: &[f64], steps: usize, rates: AdamRates, mut grad: F) -> Result<ParamVector>
where
    F: FnMut(&[f64], &mut [f64]) -> Result<()>,
{
    let d = theta0.len();
    let mut theta = theta0.to_vec();
    let mut g = vec![0.0; d];
    let mut state = AdamState::new(d, rates);
    for step in 1..=steps {
        grad(&theta, &mut g)?;
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged { step });
        }
        state.step(&mut theta, &g);
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged { step });
        }
    }
    Ok(ParamVector::from_raw(theta))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModeBatch {
    Full,
    /// Unbiased uniform-subsample gradients of this size.
    Subsample(usize),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModeSearch {
    pub steps: usize,
    pub rates: AdamRates,
    pub batch: ModeBatch,
    pub with_laplace: bool,
}

impl Default for ModeSearch {
    fn default() -> Self {
        ModeSearch { steps: 10_000, rates: AdamRates::default(), batch: ModeBatch::Full, with_laplace: true }
    }
}

/// Finds θ̂ with ADAM and caches the per-datum gradients there.
pub fn find_mode_adam<R: Rng + ?Sized>(
    model: &ModelSpec,
    theta0: &[f64],
    search: &ModeSearch,
    rng: &mut R,
) -> Result<ModeInfo> {
    if theta0.len() != model.dim() {
        return Err(Error::DimensionMismatch { expected: model.dim(), found: theta0.len() });
    }
    if search.steps == 0 {
        return Err(Error::invalid("mode search needs at least one step"));
    }
    let d = model.dim();
    let mode = match search.batch {
        ModeBatch::Full => {
            let mut scratch = vec![0.0; d];
            adam_minimize(theta0, search.steps, search.rates, |theta, out| {
                model.full_gradient_into(theta, out, &mut scratch, None);
                Ok(())
            })?
        }
        ModeBatch::Subsample(n) => {
            let uniform = SubsampleDistribution::uniform(model.n_data())?;
            let mut est = GradientEstimator::new(EstimatorKind::Naive, model, &uniform, None)?;
            let mut idx = Vec::with_capacity(n);
            adam_minimize(theta0, search.steps, search.rates, |theta, out| {
                sample_indices_into(&uniform, n, true, rng, &mut idx)?;
                est.estimate_into(theta, &idx, out);
                Ok(())
            })?
        }
    };
    ModeInfo::at(model, mode, search.with_laplace)
}

/// `θ − (ε/2) g + ξ`, `ξ ~ N(0, εI)`; `noise = false` omits `ξ`.
pub fn sgld_update_step<R: Rng + ?Sized>(
    theta: &[f64],
    grad: &[f64],
    step_size: f64,
    rng: &mut R,
    noise: bool,
) -> Result<ParamVector> {
    if theta.len() != grad.len() {
        return Err(Error::DimensionMismatch { expected: theta.len(), found: grad.len() });
    }
    if !(step_size > 0.0) {
        return Err(Error::invalid("step size must be positive"));
    }
    let mut out = theta.to_vec();
    sgld_update_in_place(&mut out, grad, step_size, rng, noise);
    ParamVector::new(out).map_err(|_| Error::Diverged { step: 1 })
}

#[inline]
fn sgld_update_in_place<R: Rng + ?Sized>(theta: &mut [f64], grad: &[f64], step_size: f64, rng: &mut R, noise: bool) {
    let half = 0.5 * step_size;
    let sd = math::sqrt(step_size);
    for (t, g) in theta.iter_mut().zip(grad) {
        *t -= half * g;
        if noise {
            let eta: f64 = rng.sample(StandardNormal);
            *t += sd * eta;
        }
    }
}

/// Smallest `n` with `(1/n)‖θ − θ̂‖² Σᵢ Lᵢ²/pᵢ < V₀`, i.e.
/// `floor(‖θ − θ̂‖² Σᵢ Lᵢ²/pᵢ / V₀) + 1`, clamped to `[n_min, n_max]`.
pub fn adaptive_batch_size(
    theta: &[f64],
    mode: &[f64],
    bound: &LipschitzBound,
    noise_threshold: f64,
    n_min: usize,
    n_max: usize,
) -> usize {
    let b = math::dist_sq(theta, mode) * bound.sum_term() / noise_threshold;
    let n = if b < n_max as f64 { math::floor(b) as usize + 1 } else { n_max };
    n.clamp(n_min, n_max)
}

fn initial_state(
    model: &ModelSpec,
    config: &SamplerConfig,
    mode: Option<&ModeInfo>,
    rng: &mut ChainRng,
) -> Result<ParamVector> {
    let init = match &config.init {
        Initialization::Default if config.kind.needs_mode() => Initialization::Mode,
        Initialization::Default if model.kind() == ModelKind::Gaussian => Initialization::Prior,
        Initialization::Default => Initialization::Zero,
        other => other.clone(),
    };
    match init {
        Initialization::Mode => Ok(mode.ok_or(Error::MissingArgument("mode information"))?.mode().clone()),
        Initialization::Zero => Ok(ParamVector::zeros(model.dim())),
        Initialization::Prior => {
            let chol = model.prior_cov().cholesky()?;
            let z: Vec<f64> = (0..model.dim()).map(|_| rng.sample(StandardNormal)).collect();
            let dx = chol.mul_lower(&z);
            ParamVector::new(model.prior_mean().iter().zip(dx).map(|(m, v)| m + v).collect())
        }
        Initialization::At(theta) => {
            if theta.len() != model.dim() {
                return Err(Error::DimensionMismatch { expected: model.dim(), found: theta.len() });
            }
            Ok(theta)
        }
        Initialization::Default => unreachable!("resolved above"),
    }
}

/// Runs one chain. Preferential kinds need `dist`; the other kinds use the
/// uniform distribution (a supplied `dist` must then be uniform).
/// Control-variate and adaptive kinds need `mode`.
pub fn run_chain(
    model: &ModelSpec,
    config: &SamplerConfig,
    mode: Option<&ModeInfo>,
    dist: Option<&SubsampleDistribution>,
) -> Result<ChainTrace> {
    let n_data = model.n_data();
    let d = model.dim();
    config.validate(n_data)?;
    let mut rng = seeded_rng(config.seed);

    let uniform;
    let dist = if config.kind.is_preferential() {
        dist.ok_or(Error::MissingArgument("subsampling distribution"))?
    } else {
        match dist {
            Some(dd) if !dd.is_uniform() => {
                return Err(Error::invalid("this sampler kind subsamples uniformly"));
            }
            Some(dd) => dd,
            None => {
                uniform = SubsampleDistribution::uniform(n_data)?;
                &uniform
            }
        }
    };
    if dist.len() != n_data {
        return Err(Error::DimensionMismatch { expected: n_data, found: dist.len() });
    }
    if config.kind.needs_mode() && mode.is_none() {
        return Err(Error::MissingArgument("mode information"));
    }

    let initial = initial_state(model, config, mode, &mut rng)?;
    let mut estimator = match config.kind.estimator() {
        Some(k) => Some(GradientEstimator::new(k, model, dist, mode)?),
        None => None,
    };
    let adaptive = match config.batch {
        BatchSize::Adaptive(a) if config.kind.is_adaptive() => {
            let m = mode.ok_or(Error::MissingArgument("mode information"))?;
            Some((a, LipschitzBound::new(model, dist)?, m.mode().as_slice()))
        }
        _ => None,
    };

    let t_total = config.iterations;
    let kept = t_total / config.thin;
    let mut samples = Vec::with_capacity(kept * d);
    let mut sample_iterations = Vec::with_capacity(kept);
    let mut sample_data_usage = Vec::with_capacity(kept);
    let mut batch_sizes = Vec::with_capacity(t_total);
    let mut usage: u64 = 0;

    let mut theta = initial.as_slice().to_vec();
    let mut grad = vec![0.0; d];
    let mut scratch = vec![0.0; d];
    let mut indices = Vec::new();

    for t in 1..=t_total {
        let n_t = match (&adaptive, config.batch) {
            _ if config.kind == SamplerKind::Ula => n_data,
            (Some((a, bound, mode_pt)), _) => {
                adaptive_batch_size(&theta, mode_pt, bound, a.noise_threshold, a.n_min, a.n_max)
            }
            (None, BatchSize::Fixed(n)) => n,
            (None, BatchSize::Adaptive(_)) => unreachable!("validated"),
        };
        match estimator.as_mut() {
            None => model.full_gradient_into(&theta, &mut grad, &mut scratch, None),
            Some(est) => {
                sample_indices_into(dist, n_t, config.with_replacement, &mut rng, &mut indices)?;
                est.estimate_into(&theta, &indices, &mut grad);
            }
        }
        sgld_update_in_place(&mut theta, &grad, config.step_size, &mut rng, config.noise);
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged { step: t });
        }
        usage += n_t as u64;
        batch_sizes.push(n_t);
        if t % config.thin == 0 {
            samples.extend_from_slice(&theta);
            sample_iterations.push(t);
            sample_data_usage.push(usage);
        }
    }

    Ok(ChainTrace {
        kind: config.kind,
        seed: config.seed,
        initial,
        samples: Matrix::from_vec(sample_iterations.len(), d, samples)?,
        sample_iterations,
        sample_data_usage,
        batch_sizes,
        data_usage: usage,
        wall_time_secs: 0.0,
    })
}

/// Quantile by linear interpolation between order statistics: position
/// `h = (m − 1) q` in the sorted sample.
pub fn percentile_linear(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::invalid("percentile of an empty sample"));
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::invalid("quantile must lie in [0, 1]"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let h = (sorted.len() - 1) as f64 * q;
    let lo = math::floor(h) as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    Ok(sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo]))
}

/// `V₀` proposal from one pilot chain: `(1/n) q Σᵢ Lᵢ²/pᵢ` with `q` the
/// chosen percentile of `‖θ − θ̂‖²`.
pub fn propose_noise_threshold(sq_dists: &[f64], n: usize, sum_term: f64, quantile: f64) -> Result<f64> {
    let q = percentile_linear(sq_dists, quantile)?;
    Ok(q * sum_term / n as f64)
}

/// Pilot-chain design for [`calibrate_noise_threshold`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PilotSpec {
    pub cv_chains: usize,
    pub cv_ps_chains: usize,
    pub iterations: usize,
    pub step_size: f64,
    /// Defaults to `ceil(0.001 N)`.
    pub batch_size: Option<usize>,
    pub quantile: f64,
    /// Returned when every proposal is below it.
    pub floor: f64,
    /// Pilot `k` uses seed `seed + k`.
    pub seed: u64,
    /// Passed through to the pilot chains (testing hook).
    pub noise: bool,
}

impl PilotSpec {
    pub fn new(iterations: usize, step_size: f64, seed: u64) -> Self {
        PilotSpec {
            cv_chains: 5,
            cv_ps_chains: 5,
            iterations,
            step_size,
            batch_size: None,
            quantile: 0.95,
            floor: 1e-12,
            seed,
            noise: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Calibration {
    pub noise_threshold: f64,
    pub proposals: Vec<f64>,
    pub pilot_batch_size: usize,
    /// `Σᵢ Lᵢ²/pᵢ` of the target distribution.
    pub sum_term: f64,
}

/// Runs SGLD-CV and SGLD-CV-PS pilot chains at a fixed batch size and sets
/// `V₀` to the largest per-chain proposal. Proposals use the Lipschitz sum
/// of `dist`, the distribution the adaptive chain will subsample with.
pub fn calibrate_noise_threshold(
    model: &ModelSpec,
    mode: &ModeInfo,
    dist: &SubsampleDistribution,
    pilot: &PilotSpec,
) -> Result<Calibration> {
    if pilot.cv_chains + pilot.cv_ps_chains == 0 {
        return Err(Error::invalid("calibration needs at least one pilot chain"));
    }
    let n_data = model.n_data();
    let n = pilot
        .batch_size
        .unwrap_or_else(|| (math::ceil(0.001 * n_data as f64) as usize).max(1))
        .min(n_data);
    let bound = LipschitzBound::new(model, dist)?;
    let mut proposals = Vec::with_capacity(pilot.cv_chains + pilot.cv_ps_chains);
    let kinds = core::iter::repeat_n(SamplerKind::SgldCv, pilot.cv_chains)
        .chain(core::iter::repeat_n(SamplerKind::SgldCvPs, pilot.cv_ps_chains));
    for (k, kind) in kinds.enumerate() {
        let mut cfg = SamplerConfig::new(kind, pilot.step_size, pilot.iterations, BatchSize::Fixed(n), pilot.seed + k as u64);
        cfg.init = Initialization::Mode;
        cfg.noise = pilot.noise;
        let chain_dist = if kind.is_preferential() { Some(dist) } else { None };
        let trace = run_chain(model, &cfg, Some(mode), chain_dist)?;
        let sq: Vec<f64> = (0..trace.len()).map(|r| mode.mode().dist_sq(trace.samples.row(r))).collect();
        proposals.push(propose_noise_threshold(&sq, n, bound.sum_term(), pilot.quantile)?);
    }
    let best = proposals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(Calibration {
        noise_threshold: best.max(pilot.floor),
        proposals,
        pilot_batch_size: n,
        sum_term: bound.sum_term(),
    })
}
