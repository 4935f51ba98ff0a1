//! Experiment orchestration: problem construction, the variance sweep,
//! fixed-batch sampler comparisons and adaptive batch sizing.

use std::time::Instant;

use psgld_core::diagnostics::{kl_gaussian, ksd, log_loss, KsdConfig, ScoreSource};
use psgld_core::estimators::{pseudo_variance_empirical, EstimatorKind};
use psgld_core::models::{generate_synthetic_with, SyntheticKind, SyntheticOptions, GAUSSIAN_PRIOR_VAR_ALT};
use psgld_core::models::REGRESSION_PRIOR_VAR;
use psgld_core::samplers::{
    calibrate_noise_threshold, find_mode_adam, run_chain, AdamRates, AdaptiveBatch, BatchSize, Calibration,
    ChainTrace, ModeBatch, ModeSearch, PilotSpec, SamplerConfig, SamplerKind,
};
use psgld_core::subsampling::{compute_weights, SubsampleDistribution, WeightScheme};
use psgld_core::{seeded_rng, Dataset, Error as CoreError, Matrix, ModeInfo, ModelKind, ModelSpec, ParamVector};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::config::{scheme_name, DatasetKind, ExperimentConfig, ExperimentKind, FileModel, KsdSource, PriorChoice};
use crate::error::{HarnessError, Result};
use crate::io::{load_dataset, split_train_test, subsample_rows, Labels, LoadOptions};
use crate::output::{Metadata, ResultRow};

/// Offsets added to the master seed so that every random stream is distinct.
pub mod seed_offset {
    /// Calibration pilot `k` uses `seed + PILOT + k`.
    pub const PILOT: u64 = 10_000;
    /// Candidate θ draws of the variance sweep.
    pub const CANDIDATES: u64 = 20_000;
    /// Subsampling stream for candidate `c`, fraction `f`: `seed + SWEEP + 1000c + f`.
    pub const SWEEP: u64 = 30_000;
    /// Stochastic KSD scores.
    pub const KSD: u64 = 40_000;
    /// Mode search (only used with subsampled ADAM gradients).
    pub const MODE: u64 = 50_000;
}

/// A target posterior plus the held-out data used for predictive metrics.
#[derive(Clone, Debug)]
pub struct Problem {
    pub model: ModelSpec,
    pub test: Option<Dataset>,
    pub default_step: f64,
}

impl Problem {
    pub fn step_size(&self, cfg: &ExperimentConfig) -> f64 {
        cfg.step_size.unwrap_or(self.default_step)
    }
}

/// Step size used by the synthetic experiments.
pub const SYNTHETIC_STEP: f64 = 1e-4;

pub fn build_problem(cfg: &ExperimentConfig) -> Result<Problem> {
    let synthetic = match cfg.dataset {
        DatasetKind::SyntheticGaussian => Some(SyntheticKind::Gaussian),
        DatasetKind::SyntheticLogisticBalanced => Some(SyntheticKind::LogisticBalanced),
        DatasetKind::SyntheticLogisticImbalanced => Some(SyntheticKind::LogisticImbalanced),
        DatasetKind::SyntheticLinear => Some(SyntheticKind::Linear),
        DatasetKind::File => None,
    };
    if let Some(kind) = synthetic {
        let prior_var = (kind == SyntheticKind::Gaussian && cfg.prior == PriorChoice::Narrow)
            .then(|| GAUSSIAN_PRIOR_VAR_ALT.to_vec());
        let p = generate_synthetic_with(kind, cfg.n_data, cfg.data_seed, &SyntheticOptions { prior_var })?;
        return Ok(Problem { model: p.model, test: p.test, default_step: SYNTHETIC_STEP });
    }
    let path = cfg.data_path.as_ref().ok_or_else(|| HarnessError::config("dataset = file needs data_path"))?;
    let labels = match cfg.model {
        FileModel::Logistic => Labels::Binary,
        FileModel::Linear => Labels::Real,
    };
    let opts = LoadOptions {
        format: cfg.data_format,
        dim: cfg.feature_dim,
        response_column: Some(cfg.response_column.clone()),
        intercept: true,
        labels,
    };
    let mut data = load_dataset(path, &opts)?;
    if data.n_data() > cfg.max_rows && !cfg.allow_large {
        data = subsample_rows(&data, cfg.max_rows, cfg.data_seed)?;
    }
    let (train, test) = split_train_test(&data, cfg.train_fraction, cfg.data_seed)?;
    let d = train.dim();
    let prior = Matrix::identity(d).scale(REGRESSION_PRIOR_VAR);
    let default_step = 1.0 / train.n_data() as f64;
    let model = match cfg.model {
        FileModel::Logistic => ModelSpec::logistic(train, ParamVector::zeros(d), prior)?,
        FileModel::Linear => ModelSpec::linear(train, ParamVector::zeros(d), prior)?,
    };
    Ok(Problem { model, test: Some(test), default_step })
}

/// ADAM rate used when the configuration leaves it open. The Gaussian
/// posterior sits far from the origin relative to a 10⁻³ step, so that
/// model gets a larger rate.
pub fn default_mode_alpha(model: &ModelSpec) -> f64 {
    if model.kind() == ModelKind::Gaussian {
        1e-2
    } else {
        1e-3
    }
}

/// Full-batch ADAM from the origin, with the Laplace covariance attached.
pub fn find_mode(cfg: &ExperimentConfig, model: &ModelSpec) -> Result<ModeInfo> {
    let search = ModeSearch {
        steps: cfg.mode_steps,
        rates: AdamRates { alpha: cfg.mode_alpha.unwrap_or_else(|| default_mode_alpha(model)), ..AdamRates::default() },
        batch: ModeBatch::Full,
        with_laplace: true,
    };
    let mut rng = seeded_rng(cfg.seed + seed_offset::MODE);
    Ok(find_mode_adam(model, &vec![0.0; model.dim()], &search, &mut rng)?)
}

/// Subsampling distribution a sampler kind runs with (`None` is uniform).
pub fn chain_distribution(
    cfg: &ExperimentConfig,
    kind: SamplerKind,
    model: &ModelSpec,
    mode: &ModeInfo,
) -> Result<Option<SubsampleDistribution>> {
    let scheme = match kind {
        SamplerKind::SgldPs => cfg.ps_weights,
        SamplerKind::SgldCvPs | SamplerKind::AsgldCvPs => cfg.cv_ps_weights,
        _ => return Ok(None),
    };
    if matches!(scheme, WeightScheme::PsExact | WeightScheme::CvExact) {
        return Err(HarnessError::config(format!(
            "{} weights depend on the current state; chains take uniform, ps-approx or cv-approx",
            scheme_name(scheme)
        )));
    }
    Ok(Some(compute_weights(scheme, model, None, Some(mode))?))
}

/// Rows, traces and run record of one experiment.
#[derive(Debug)]
pub struct ExperimentOutput {
    pub rows: Vec<ResultRow>,
    pub traces: Vec<ChainTrace>,
    pub metadata: Metadata,
    /// Set when at least one chain stopped on a non-finite state.
    pub diverged: bool,
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let start = Instant::now();
    let problem = build_problem(cfg)?;
    let mut meta = Metadata::new(&cfg.hash());
    meta.push("experiment", cfg.experiment.name());
    meta.push("seed", cfg.seed);
    meta.push("data_seed", cfg.data_seed);
    meta.push("n_data", problem.model.n_data());
    meta.push("dim", problem.model.dim());
    let mut out = match cfg.experiment {
        ExperimentKind::VarianceSweep => variance_sweep(cfg, &problem, meta)?,
        ExperimentKind::FixedBatch => fixed_batch(cfg, &problem, meta)?,
        ExperimentKind::Adaptive => adaptive(cfg, &problem, meta)?,
    };
    out.metadata.push("wall_time_secs", start.elapsed().as_secs_f64());
    Ok(out)
}

/// One estimator/weighting/sampling combination of the variance sweep.
#[derive(Clone, Copy, Debug)]
struct SweepSeries {
    name: &'static str,
    estimator: EstimatorKind,
    scheme: WeightScheme,
    with_replacement: bool,
}

const SWEEP_SERIES: [SweepSeries; 8] = [
    SweepSeries { name: "sgld-wr", estimator: EstimatorKind::Naive, scheme: WeightScheme::Uniform, with_replacement: true },
    SweepSeries { name: "sgld-wor", estimator: EstimatorKind::Naive, scheme: WeightScheme::Uniform, with_replacement: false },
    SweepSeries { name: "sgld-ps-exact", estimator: EstimatorKind::Ps, scheme: WeightScheme::PsExact, with_replacement: true },
    SweepSeries { name: "sgld-ps-approx", estimator: EstimatorKind::Ps, scheme: WeightScheme::PsApprox, with_replacement: true },
    SweepSeries { name: "sgld-cv-wr", estimator: EstimatorKind::Cv, scheme: WeightScheme::Uniform, with_replacement: true },
    SweepSeries { name: "sgld-cv-wor", estimator: EstimatorKind::Cv, scheme: WeightScheme::Uniform, with_replacement: false },
    SweepSeries { name: "sgld-cv-ps-exact", estimator: EstimatorKind::CvPs, scheme: WeightScheme::CvExact, with_replacement: true },
    SweepSeries { name: "sgld-cv-ps-approx", estimator: EstimatorKind::CvPs, scheme: WeightScheme::CvApprox, with_replacement: true },
];

/// Names of the variance-sweep series, in output order.
pub fn sweep_series_names() -> Vec<&'static str> {
    SWEEP_SERIES.iter().map(|s| s.name).collect()
}

/// Candidate θ draws: the analytic posterior for the Gaussian model and the
/// Laplace approximation at the mode otherwise.
fn candidate_draws(cfg: &ExperimentConfig, model: &ModelSpec, mode: &ModeInfo) -> Result<Vec<Vec<f64>>> {
    let (mean, cov) = match model.kind() {
        ModelKind::Gaussian => {
            let (m, c) = model.conjugate_posterior()?;
            (m.into_inner(), c)
        }
        _ => {
            let c = mode.laplace_cov().ok_or(CoreError::MissingArgument("Laplace covariance"))?.clone();
            (mode.mode().as_slice().to_vec(), c)
        }
    };
    let chol = cov.cholesky()?;
    let mut rng = seeded_rng(cfg.seed + seed_offset::CANDIDATES);
    Ok((0..cfg.candidates)
        .map(|_| {
            let z: Vec<f64> = (0..mean.len()).map(|_| StandardNormal.sample(&mut rng)).collect();
            mean.iter().zip(chol.mul_lower(&z)).map(|(m, dz)| m + dz).collect()
        })
        .collect())
}

/// Batch size for a subsample fraction: `ceil(f · N)`, at least 1.
pub fn fraction_batch(fraction: f64, n_data: usize) -> usize {
    ((fraction * n_data as f64).ceil() as usize).clamp(1, n_data)
}

fn variance_sweep(cfg: &ExperimentConfig, problem: &Problem, mut meta: Metadata) -> Result<ExperimentOutput> {
    let model = &problem.model;
    let n_data = model.n_data();
    let mode = find_mode(cfg, model)?;
    let candidates = candidate_draws(cfg, model, &mode)?;
    let uniform = SubsampleDistribution::uniform(n_data)?;
    let ps_approx = compute_weights(WeightScheme::PsApprox, model, None, Some(&mode))?;
    let cv_approx = compute_weights(WeightScheme::CvApprox, model, None, Some(&mode))?;

    // variances[c][series][fraction]
    let variances: Vec<Vec<Vec<f64>>> = candidates
        .par_iter()
        .enumerate()
        .map(|(c, theta)| -> Result<Vec<Vec<f64>>> {
            let ps_exact = compute_weights(WeightScheme::PsExact, model, Some(theta), Some(&mode))?;
            let cv_exact = compute_weights(WeightScheme::CvExact, model, Some(theta), Some(&mode))?;
            SWEEP_SERIES
                .iter()
                .map(|s| {
                    let dist = match s.scheme {
                        WeightScheme::Uniform => &uniform,
                        WeightScheme::PsExact => &ps_exact,
                        WeightScheme::PsApprox => &ps_approx,
                        WeightScheme::CvExact => &cv_exact,
                        WeightScheme::CvApprox => &cv_approx,
                    };
                    cfg.fractions
                        .iter()
                        .enumerate()
                        .map(|(f, &fraction)| {
                            // Every series sees the same random stream for a
                            // given (candidate, fraction).
                            let mut rng = seeded_rng(cfg.seed + seed_offset::SWEEP + 1000 * c as u64 + f as u64);
                            let n = fraction_batch(fraction, n_data);
                            Ok(pseudo_variance_empirical(
                                s.estimator,
                                model,
                                theta,
                                dist,
                                n,
                                s.with_replacement,
                                Some(&mode),
                                cfg.reps,
                                &mut rng,
                            )?)
                        })
                        .collect()
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let exp = cfg.experiment.name();
    let mut rows = Vec::new();
    for (s, series) in SWEEP_SERIES.iter().enumerate() {
        for (f, &fraction) in cfg.fractions.iter().enumerate() {
            let mean = variances.iter().map(|v| v[s][f]).sum::<f64>() / candidates.len() as f64;
            let n = fraction_batch(fraction, n_data);
            rows.push(
                ResultRow::new(exp, series.name, cfg.seed, "pseudo_variance", mean)
                    .at_fraction(fraction)
                    .with_batch(n)
                    .with_usage((n * cfg.reps) as u64),
            );
        }
    }
    meta.push("candidate_seed", cfg.seed + seed_offset::CANDIDATES);
    meta.push("sweep_seed_base", cfg.seed + seed_offset::SWEEP);
    Ok(ExperimentOutput { rows, traces: Vec::new(), metadata: meta, diverged: false })
}

/// Everything needed to evaluate a finished chain.
struct Evaluator<'a> {
    cfg: &'a ExperimentConfig,
    problem: &'a Problem,
    /// Analytic posterior of the Gaussian model.
    posterior: Option<(ParamVector, Matrix)>,
    ksd: KsdConfig,
    per_iteration_batch: bool,
}

impl<'a> Evaluator<'a> {
    fn new(cfg: &'a ExperimentConfig, problem: &'a Problem, per_iteration_batch: bool) -> Result<Self> {
        let posterior =
            (problem.model.kind() == ModelKind::Gaussian).then(|| problem.model.conjugate_posterior()).transpose()?;
        let ksd = KsdConfig {
            source: match cfg.ksd_source {
                KsdSource::Exact => ScoreSource::ExactFullData,
                KsdSource::Stochastic(n) => ScoreSource::Stochastic(n),
            },
            max_samples: cfg.ksd_max_samples,
            seed: cfg.seed + seed_offset::KSD,
            ..KsdConfig::default()
        };
        Ok(Evaluator { cfg, problem, posterior, ksd, per_iteration_batch })
    }

    fn kl_to_posterior(&self, mean: &[f64], cov: &Matrix) -> Option<f64> {
        let (mu, lambda) = self.posterior.as_ref()?;
        kl_gaussian(mean, cov, mu.as_slice(), lambda).ok()
    }

    fn rows(&self, trace: &ChainTrace) -> Result<Vec<ResultRow>> {
        let exp = self.cfg.experiment.name();
        let name = trace.kind.name();
        let seed = trace.seed;
        let model = &self.problem.model;
        let n_data = model.n_data();
        let mut rows = Vec::new();

        if self.per_iteration_batch {
            let mut usage = 0u64;
            for (t, &n) in trace.batch_sizes.iter().enumerate() {
                usage += n as u64;
                rows.push(
                    ResultRow::new(exp, name, seed, "batch_size", n as f64)
                        .at_iteration(t + 1)
                        .with_batch(n)
                        .with_usage(usage),
                );
            }
        }

        let kept: Vec<usize> = (0..trace.len()).filter(|&r| trace.sample_iterations[r] > self.cfg.burn_in).collect();
        let mut moments = RunningMoments::new(model.dim());
        let logistic_test = self.problem.test.as_ref().filter(|_| model.kind() == ModelKind::Logistic);
        for &r in &kept {
            let t = trace.sample_iterations[r];
            let theta = trace.samples.row(r);
            moments.push(theta);
            if !t.is_multiple_of(self.cfg.eval_every) {
                continue;
            }
            let n_t = trace.batch_sizes[t - 1];
            let usage = trace.sample_data_usage[r];
            let stamp = |metric: &str, v: f64| {
                ResultRow::new(exp, name, seed, metric, v).at_iteration(t).with_batch(n_t).with_usage(usage)
            };
            rows.push(stamp("data_passes", usage as f64 / n_data as f64));
            if let Some(kl) = moments.covariance().and_then(|(m, c)| self.kl_to_posterior(&m, &c)) {
                rows.push(stamp("kl", kl));
            }
            if let Some(test) = logistic_test {
                rows.push(stamp("log_loss", log_loss(theta, test)?));
            }
        }

        let windows = self.cfg.windows.min(kept.len());
        for w in 0..windows {
            let lo = kept.len() * w / windows;
            let hi = kept.len() * (w + 1) / windows;
            let block = &kept[lo..hi];
            let samples = select_rows(&trace.samples, block)?;
            let first = trace.sample_iterations[block[0]];
            let last = trace.sample_iterations[block[block.len() - 1]];
            let usage = trace.sample_data_usage[block[block.len() - 1]];
            let report = ksd(&samples, model, &self.ksd)?;
            rows.push(ResultRow::new(exp, name, seed, "ksd_window", report.value).over_window(first, last).with_usage(usage));
            if report.clamped {
                rows.push(ResultRow::new(exp, name, seed, "ksd_clamped", 1.0).over_window(first, last));
            }
            if let Some(kl) = window_kl(self, &samples) {
                rows.push(ResultRow::new(exp, name, seed, "kl_window", kl).over_window(first, last).with_usage(usage));
            }
        }

        if !kept.is_empty() {
            let samples = select_rows(&trace.samples, &kept)?;
            let first = trace.sample_iterations[kept[0]];
            let last = trace.sample_iterations[kept[kept.len() - 1]];
            let report = ksd(&samples, model, &self.ksd)?;
            rows.push(
                ResultRow::new(exp, name, seed, "ksd", report.value).over_window(first, last).with_usage(trace.data_usage),
            );
            if report.clamped {
                rows.push(ResultRow::new(exp, name, seed, "ksd_clamped", 1.0).over_window(first, last));
            }
        }
        rows.push(
            ResultRow::new(exp, name, seed, "total_data_passes", trace.passes(n_data))
                .at_iteration(trace.batch_sizes.len())
                .with_usage(trace.data_usage),
        );
        Ok(rows)
    }
}

fn window_kl(ev: &Evaluator<'_>, samples: &Matrix) -> Option<f64> {
    let mut m = RunningMoments::new(samples.cols());
    (0..samples.rows()).for_each(|r| m.push(samples.row(r)));
    m.covariance().and_then(|(mean, cov)| ev.kl_to_posterior(&mean, &cov))
}

fn select_rows(samples: &Matrix, rows: &[usize]) -> Result<Matrix> {
    let picked: Vec<&[f64]> = rows.iter().map(|&r| samples.row(r)).collect();
    Ok(Matrix::from_rows(&picked)?)
}

/// Welford accumulator for the sample mean and unbiased covariance.
struct RunningMoments {
    count: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
    delta: Vec<f64>,
}

impl RunningMoments {
    fn new(d: usize) -> Self {
        RunningMoments { count: 0, mean: vec![0.0; d], m2: vec![0.0; d * d], delta: vec![0.0; d] }
    }

    fn push(&mut self, x: &[f64]) {
        let d = self.mean.len();
        self.count += 1;
        for j in 0..d {
            self.delta[j] = x[j] - self.mean[j];
            self.mean[j] += self.delta[j] / self.count as f64;
        }
        for i in 0..d {
            for j in 0..d {
                self.m2[i * d + j] += self.delta[i] * (x[j] - self.mean[j]);
            }
        }
    }

    /// `None` until there are more samples than dimensions.
    fn covariance(&self) -> Option<(Vec<f64>, Matrix)> {
        let d = self.mean.len();
        if self.count <= d {
            return None;
        }
        let scale = 1.0 / (self.count - 1) as f64;
        let mut cov = Matrix::from_vec(d, d, self.m2.iter().map(|v| v * scale).collect()).ok()?;
        cov.symmetrize();
        Some((self.mean.clone(), cov))
    }
}

/// Result of one chain: its trace, or the step at which it diverged.
type ChainOutcome = std::result::Result<ChainTrace, usize>;

fn run_chains(
    cfg: &ExperimentConfig,
    problem: &Problem,
    mode: &ModeInfo,
    kind: SamplerKind,
    batch: BatchSize,
    dist: Option<&SubsampleDistribution>,
) -> Result<Vec<ChainOutcome>> {
    let n_data = problem.model.n_data();
    let iterations = cfg.iterations_for(n_data);
    let step = problem.step_size(cfg);
    (0..cfg.chains)
        .into_par_iter()
        .map(|k| {
            let mut sc = SamplerConfig::new(kind, step, iterations, batch, cfg.seed + k as u64);
            sc.thin = cfg.thin;
            sc.with_replacement = cfg.with_replacement || kind.is_preferential() || kind.is_adaptive();
            let start = Instant::now();
            match run_chain(&problem.model, &sc, Some(mode), dist) {
                Ok(mut trace) => {
                    trace.wall_time_secs = start.elapsed().as_secs_f64();
                    Ok(Ok(trace))
                }
                Err(CoreError::Diverged { step }) => Ok(Err(step)),
                Err(e) => Err(e.into()),
            }
        })
        .collect()
}

/// Evaluates chain outcomes in chain order, appending rows and traces.
fn collect_outcomes(
    ev: &Evaluator<'_>,
    kind: SamplerKind,
    outcomes: Vec<ChainOutcome>,
    out: &mut ExperimentOutput,
) -> Result<()> {
    let evaluated: Vec<Result<Vec<ResultRow>>> = outcomes
        .par_iter()
        .enumerate()
        .map(|(k, o)| match o {
            Ok(trace) => ev.rows(trace),
            Err(step) => Ok(vec![ResultRow::diverged(
                ev.cfg.experiment.name(),
                kind.name(),
                ev.cfg.seed + k as u64,
                *step,
            )]),
        })
        .collect();
    for (o, rows) in outcomes.into_iter().zip(evaluated) {
        out.rows.extend(rows?);
        match o {
            Ok(trace) => {
                out.metadata.push(
                    &format!("wall_time_secs[{}/seed {}]", kind.name(), trace.seed),
                    trace.wall_time_secs,
                );
                out.traces.push(trace);
            }
            Err(_) => out.diverged = true,
        }
    }
    Ok(())
}

fn fixed_batch(cfg: &ExperimentConfig, problem: &Problem, meta: Metadata) -> Result<ExperimentOutput> {
    let model = &problem.model;
    let n_data = model.n_data();
    if let Some(k) = cfg.samplers.iter().find(|k| k.is_adaptive()) {
        return Err(HarnessError::config(format!("{} belongs to the adaptive experiment", k.name())));
    }
    let mode = find_mode(cfg, model)?;
    let batch = BatchSize::Fixed(cfg.batch_for(n_data));
    let ev = Evaluator::new(cfg, problem, false)?;
    let mut out = ExperimentOutput { rows: Vec::new(), traces: Vec::new(), metadata: meta, diverged: false };
    out.metadata.push("iterations", cfg.iterations_for(n_data));
    out.metadata.push("batch_size", cfg.batch_for(n_data));
    out.metadata.push("step_size", problem.step_size(cfg));
    out.metadata.push("chain_seeds", format!("{}..{}", cfg.seed, cfg.seed + cfg.chains as u64));
    for &kind in &cfg.samplers {
        let dist = chain_distribution(cfg, kind, model, &mode)?;
        let outcomes = run_chains(cfg, problem, &mode, kind, batch, dist.as_ref())?;
        collect_outcomes(&ev, kind, outcomes, &mut out)?;
    }
    Ok(out)
}

/// Pilot design of the calibration step.
pub fn pilot_spec(cfg: &ExperimentConfig, problem: &Problem) -> PilotSpec {
    let n_data = problem.model.n_data();
    PilotSpec {
        cv_chains: cfg.pilot_cv_chains,
        cv_ps_chains: cfg.pilot_cv_ps_chains,
        iterations: cfg.pilot_iterations.unwrap_or_else(|| cfg.iterations_for(n_data)),
        step_size: problem.step_size(cfg),
        batch_size: Some(cfg.batch_for(n_data)),
        quantile: cfg.quantile,
        floor: cfg.v0_floor,
        seed: cfg.seed + seed_offset::PILOT,
        noise: true,
    }
}

/// Calibrates the noise threshold for an adaptive kind's distribution.
pub fn calibrate(
    cfg: &ExperimentConfig,
    problem: &Problem,
    mode: &ModeInfo,
    kind: SamplerKind,
) -> Result<Calibration> {
    let dist = match chain_distribution(cfg, kind, &problem.model, mode)? {
        Some(d) => d,
        None => SubsampleDistribution::uniform(problem.model.n_data())?,
    };
    Ok(calibrate_noise_threshold(&problem.model, mode, &dist, &pilot_spec(cfg, problem))?)
}

/// Calibration rows: one proposal per pilot chain and the chosen threshold.
pub fn calibration_rows(cfg: &ExperimentConfig, kind: SamplerKind, cal: &Calibration) -> Vec<ResultRow> {
    let exp = cfg.experiment.name();
    let label = format!("calibration[{}]", kind.name());
    let mut rows: Vec<ResultRow> = cal
        .proposals
        .iter()
        .enumerate()
        .map(|(k, &v)| {
            ResultRow::new(exp, &label, cfg.seed + seed_offset::PILOT + k as u64, "v0_proposal", v)
                .with_batch(cal.pilot_batch_size)
        })
        .collect();
    rows.push(ResultRow::new(exp, &label, cfg.seed, "noise_threshold", cal.noise_threshold).with_batch(cal.pilot_batch_size));
    rows.push(ResultRow::new(exp, &label, cfg.seed, "lipschitz_sum", cal.sum_term));
    rows
}

fn adaptive(cfg: &ExperimentConfig, problem: &Problem, meta: Metadata) -> Result<ExperimentOutput> {
    let model = &problem.model;
    let n_data = model.n_data();
    let mode = find_mode(cfg, model)?;
    let ev = Evaluator::new(cfg, problem, true)?;
    let mut out = ExperimentOutput { rows: Vec::new(), traces: Vec::new(), metadata: meta, diverged: false };
    out.metadata.push("iterations", cfg.iterations_for(n_data));
    out.metadata.push("fixed_batch_size", cfg.batch_for(n_data));
    out.metadata.push("step_size", problem.step_size(cfg));
    out.metadata.push("chain_seeds", format!("{}..{}", cfg.seed, cfg.seed + cfg.chains as u64));
    out.metadata.push("pilot_seeds", format!("{}..", cfg.seed + seed_offset::PILOT));
    let n_max = cfg.n_max.unwrap_or(n_data).min(n_data);
    if cfg.n_min > n_max {
        return Err(HarnessError::config("n_min exceeds n_max"));
    }
    for &kind in &cfg.samplers {
        let dist = chain_distribution(cfg, kind, model, &mode)?;
        let batch = if kind.is_adaptive() {
            let noise_threshold = match cfg.noise_threshold {
                Some(v) => v,
                None => {
                    let cal = calibrate(cfg, problem, &mode, kind)?;
                    out.rows.extend(calibration_rows(cfg, kind, &cal));
                    cal.noise_threshold
                }
            };
            out.metadata.push(&format!("noise_threshold[{}]", kind.name()), crate::output::fmt_f64(noise_threshold));
            BatchSize::Adaptive(AdaptiveBatch { noise_threshold, n_min: cfg.n_min, n_max })
        } else {
            BatchSize::Fixed(cfg.batch_for(n_data))
        };
        let outcomes = run_chains(cfg, problem, &mode, kind, batch, dist.as_ref())?;
        collect_outcomes(&ev, kind, outcomes, &mut out)?;
    }
    Ok(out)
}
