//! Flat `key = value` experiment configuration.
//!
//! One key per line, `#` starts a comment, blank lines are ignored. Unknown
//! or repeated keys are errors. Command-line overrides replace file values.
//! The resolved configuration serializes to a canonical sorted form whose
//! SHA-256 identifies a run.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use psgld_core::samplers::SamplerKind;
use psgld_core::subsampling::WeightScheme;
use sha2::{Digest, Sha256};

use crate::error::{HarnessError, Result};
use crate::io::DataFormat;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExperimentKind {
    VarianceSweep,
    FixedBatch,
    Adaptive,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::VarianceSweep => "variance-sweep",
            ExperimentKind::FixedBatch => "fixed-batch",
            ExperimentKind::Adaptive => "adaptive",
        }
    }
}

impl FromStr for ExperimentKind {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        [ExperimentKind::VarianceSweep, ExperimentKind::FixedBatch, ExperimentKind::Adaptive]
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| HarnessError::config(format!("unknown experiment `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DatasetKind {
    SyntheticGaussian,
    SyntheticLogisticBalanced,
    SyntheticLogisticImbalanced,
    SyntheticLinear,
    File,
}

impl DatasetKind {
    const ALL: [DatasetKind; 5] = [
        DatasetKind::SyntheticGaussian,
        DatasetKind::SyntheticLogisticBalanced,
        DatasetKind::SyntheticLogisticImbalanced,
        DatasetKind::SyntheticLinear,
        DatasetKind::File,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DatasetKind::SyntheticGaussian => "synthetic-gaussian",
            DatasetKind::SyntheticLogisticBalanced => "synthetic-logistic-balanced",
            DatasetKind::SyntheticLogisticImbalanced => "synthetic-logistic-imbalanced",
            DatasetKind::SyntheticLinear => "synthetic-linear",
            DatasetKind::File => "file",
        }
    }
}

impl FromStr for DatasetKind {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        DatasetKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| HarnessError::config(format!("unknown dataset `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FileModel {
    Logistic,
    Linear,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PriorChoice {
    /// diag(10³, 10³) for the Gaussian experiment.
    Wide,
    /// diag(10³, 2) for the Gaussian experiment.
    Narrow,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KsdSource {
    Exact,
    Stochastic(usize),
}

/// Fully resolved experiment settings.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub dataset: DatasetKind,
    pub model: FileModel,
    pub data_path: Option<PathBuf>,
    pub data_format: DataFormat,
    pub response_column: String,
    pub feature_dim: Option<usize>,
    pub train_fraction: f64,
    pub max_rows: usize,
    pub allow_large: bool,
    pub n_data: usize,
    pub data_seed: u64,
    pub prior: PriorChoice,
    pub seed: u64,
    pub chains: usize,
    pub samplers: Vec<SamplerKind>,
    /// `None` selects the dataset default.
    pub step_size: Option<f64>,
    pub fractions: Vec<f64>,
    pub candidates: usize,
    pub reps: usize,
    pub batch_fraction: f64,
    pub batch_size: Option<usize>,
    pub passes: f64,
    pub iterations: Option<usize>,
    pub burn_in: usize,
    pub with_replacement: bool,
    pub ps_weights: WeightScheme,
    pub cv_ps_weights: WeightScheme,
    pub thin: usize,
    pub eval_every: usize,
    pub windows: usize,
    pub ksd_max_samples: usize,
    pub ksd_source: KsdSource,
    pub mode_steps: usize,
    /// `None` selects the model default.
    pub mode_alpha: Option<f64>,
    pub pilot_cv_chains: usize,
    pub pilot_cv_ps_chains: usize,
    /// `None` reuses the main run length.
    pub pilot_iterations: Option<usize>,
    pub quantile: f64,
    pub v0_floor: f64,
    /// Skips calibration when set.
    pub noise_threshold: Option<f64>,
    pub n_min: usize,
    pub n_max: Option<usize>,
    pub write_traces: bool,
    pub out: PathBuf,
}

const KEYS: &[&str] = &[
    "allow_large",
    "batch_fraction",
    "batch_size",
    "burn_in",
    "candidates",
    "chains",
    "cv_ps_weights",
    "data_format",
    "data_path",
    "data_seed",
    "dataset",
    "eval_every",
    "experiment",
    "feature_dim",
    "fractions",
    "iterations",
    "ksd_max_samples",
    "ksd_source",
    "max_rows",
    "mode_alpha",
    "mode_steps",
    "model",
    "n_data",
    "n_max",
    "n_min",
    "noise_threshold",
    "out",
    "passes",
    "pilot_cv_chains",
    "pilot_cv_ps_chains",
    "pilot_iterations",
    "prior",
    "ps_weights",
    "quantile",
    "reps",
    "response_column",
    "samplers",
    "seed",
    "step_size",
    "thin",
    "train_fraction",
    "v0_floor",
    "windows",
    "with_replacement",
    "write_traces",
];

/// Raw `key → value` pairs before defaults are applied.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RawConfig {
    values: BTreeMap<String, String>,
}

impl RawConfig {
    pub fn parse(text: &str, source_name: &str) -> Result<Self> {
        let mut raw = RawConfig::default();
        for (k, line) in text.lines().enumerate() {
            let content = line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let err = |message: String| HarnessError::Parse { source_name: source_name.to_string(), line: k + 1, message };
            let (key, value) = content.split_once('=').ok_or_else(|| err(format!("expected key = value, found `{content}`")))?;
            let key = key.trim();
            check_key(key).map_err(|_| err(format!("unknown key `{key}`")))?;
            if raw.values.insert(key.to_string(), value.trim().to_string()).is_some() {
                return Err(err(format!("duplicate key `{key}`")));
            }
        }
        Ok(raw)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        RawConfig::parse(&text, &path.display().to_string())
    }

    /// Applies a `key=value` override.
    pub fn set_pair(&mut self, pair: &str) -> Result<()> {
        let (key, value) =
            pair.split_once('=').ok_or_else(|| HarnessError::config(format!("override `{pair}` is not key=value")))?;
        self.set(key.trim(), value.trim())
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<()> {
        check_key(key)?;
        self.values.insert(key.to_string(), value.into());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn resolve(&self) -> Result<ExperimentConfig> {
        ExperimentConfig::from_raw(self)
    }
}

fn check_key(key: &str) -> Result<()> {
    if KEYS.binary_search(&key).is_ok() {
        Ok(())
    } else {
        Err(HarnessError::config(format!("unknown key `{key}`")))
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| HarnessError::config(format!("invalid value `{value}` for `{key}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(HarnessError::config(format!("invalid boolean `{value}` for `{key}`"))),
    }
}

fn parse_scheme(key: &str, value: &str) -> Result<WeightScheme> {
    match value {
        "uniform" => Ok(WeightScheme::Uniform),
        "exact" | "ps-exact" => Ok(WeightScheme::PsExact),
        "approx" | "ps-approx" => Ok(WeightScheme::PsApprox),
        "cv-exact" => Ok(WeightScheme::CvExact),
        "cv-approx" => Ok(WeightScheme::CvApprox),
        _ => Err(HarnessError::config(format!("invalid weight scheme `{value}` for `{key}`"))),
    }
}

pub fn scheme_name(s: WeightScheme) -> &'static str {
    match s {
        WeightScheme::Uniform => "uniform",
        WeightScheme::PsExact => "ps-exact",
        WeightScheme::PsApprox => "ps-approx",
        WeightScheme::CvExact => "cv-exact",
        WeightScheme::CvApprox => "cv-approx",
    }
}

struct Lookup<'a>(&'a RawConfig);

impl Lookup<'_> {
    fn opt<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.0.get(key) {
            None | Some("") | Some("auto") => Ok(None),
            Some(v) => parse_value(key, v).map(Some),
        }
    }

    fn or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.opt(key)?.unwrap_or(default))
    }

    fn flag(&self, key: &str, default: bool) -> Result<bool> {
        self.0.get(key).map_or(Ok(default), |v| parse_bool(key, v))
    }

    fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>> {
        self.0
            .get(key)
            .map(|v| v.split(',').map(|s| parse_value(key, s.trim())).collect::<Result<Vec<T>>>())
            .transpose()
    }
}

impl ExperimentConfig {
    fn from_raw(raw: &RawConfig) -> Result<Self> {
        let l = Lookup(raw);
        let experiment: ExperimentKind = l.or("experiment", ExperimentKind::FixedBatch)?;
        let samplers = match raw.get("samplers") {
            Some(v) => v
                .split(',')
                .map(|s| {
                    SamplerKind::from_name(s.trim())
                        .ok_or_else(|| HarnessError::config(format!("unknown sampler `{}`", s.trim())))
                })
                .collect::<Result<Vec<_>>>()?,
            None => match experiment {
                ExperimentKind::Adaptive => vec![SamplerKind::SgldCvPs, SamplerKind::AsgldCvPs],
                _ => vec![SamplerKind::Sgld, SamplerKind::SgldCv, SamplerKind::SgldPs, SamplerKind::SgldCvPs],
            },
        };
        let model = match raw.get("model") {
            None | Some("logistic") => FileModel::Logistic,
            Some("linear") => FileModel::Linear,
            Some(v) => return Err(HarnessError::config(format!("invalid model `{v}` (logistic, linear)"))),
        };
        let prior = match raw.get("prior") {
            None | Some("wide") => PriorChoice::Wide,
            Some("narrow") => PriorChoice::Narrow,
            Some(v) => return Err(HarnessError::config(format!("invalid prior `{v}` (wide, narrow)"))),
        };
        let ksd_source = match raw.get("ksd_source") {
            None | Some("exact") => KsdSource::Exact,
            Some(v) => match v.strip_prefix("stochastic:") {
                Some(n) => KsdSource::Stochastic(parse_value("ksd_source", n)?),
                None => return Err(HarnessError::config(format!("invalid ksd_source `{v}` (exact, stochastic:<n>)"))),
            },
        };
        let cfg = ExperimentConfig {
            experiment,
            dataset: l.or("dataset", DatasetKind::SyntheticGaussian)?,
            model,
            data_path: l.opt("data_path")?,
            data_format: l.or("data_format", DataFormat::Libsvm)?,
            response_column: l.or("response_column", "y".to_string())?,
            feature_dim: l.opt("feature_dim")?,
            train_fraction: l.or("train_fraction", 0.75)?,
            max_rows: l.or("max_rows", 50_000)?,
            allow_large: l.flag("allow_large", false)?,
            n_data: l.or("n_data", 1000)?,
            data_seed: l.or("data_seed", 0)?,
            prior,
            seed: l.or("seed", 0)?,
            chains: l.or("chains", 10)?,
            samplers,
            step_size: l.opt("step_size")?,
            fractions: l.list("fractions")?.unwrap_or_else(|| vec![0.01, 0.05, 0.1, 0.2, 0.5, 1.0]),
            candidates: l.or("candidates", 10)?,
            reps: l.or("reps", 500)?,
            batch_fraction: l.or("batch_fraction", 0.001)?,
            batch_size: l.opt("batch_size")?,
            passes: l.or("passes", 10.0)?,
            iterations: l.opt("iterations")?,
            burn_in: l.or("burn_in", 0)?,
            with_replacement: l.flag("with_replacement", true)?,
            ps_weights: raw.get("ps_weights").map_or(Ok(WeightScheme::PsApprox), |v| parse_scheme("ps_weights", v))?,
            cv_ps_weights: raw
                .get("cv_ps_weights")
                .map_or(Ok(WeightScheme::CvApprox), |v| parse_scheme("cv_ps_weights", v))?,
            thin: l.or("thin", 1)?,
            eval_every: l.or("eval_every", 10)?,
            windows: l.or("windows", 4)?,
            ksd_max_samples: l.or("ksd_max_samples", 1000)?,
            ksd_source,
            mode_steps: l.or("mode_steps", 10_000)?,
            mode_alpha: l.opt("mode_alpha")?,
            pilot_cv_chains: l.or("pilot_cv_chains", 5)?,
            pilot_cv_ps_chains: l.or("pilot_cv_ps_chains", 5)?,
            pilot_iterations: l.opt("pilot_iterations")?,
            quantile: l.or("quantile", 0.95)?,
            v0_floor: l.or("v0_floor", 1e-12)?,
            noise_threshold: l.opt("noise_threshold")?,
            n_min: l.or("n_min", 1)?,
            n_max: l.opt("n_max")?,
            write_traces: l.flag("write_traces", false)?,
            out: l.or("out", PathBuf::from("results"))?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(HarnessError::config(m.to_string()));
        if self.chains == 0 {
            return fail("chains must be at least 1");
        }
        if self.samplers.is_empty() {
            return fail("samplers must not be empty");
        }
        if self.fractions.is_empty() || self.fractions.iter().any(|&f| !(f > 0.0 && f <= 1.0)) {
            return fail("fractions must lie in (0, 1]");
        }
        if !(self.batch_fraction > 0.0 && self.batch_fraction <= 1.0) {
            return fail("batch_fraction must lie in (0, 1]");
        }
        if self.step_size.is_some_and(|e| !(e > 0.0 && e.is_finite())) {
            return fail("step_size must be positive");
        }
        if self.candidates == 0 || self.reps == 0 {
            return fail("candidates and reps must be at least 1");
        }
        if self.thin == 0 || self.eval_every == 0 || self.windows == 0 {
            return fail("thin, eval_every and windows must be at least 1");
        }
        if !(self.passes > 0.0) {
            return fail("passes must be positive");
        }
        if self.ksd_max_samples < 2 {
            return fail("ksd_max_samples must be at least 2");
        }
        if !(self.quantile > 0.0 && self.quantile <= 1.0) {
            return fail("quantile must lie in (0, 1]");
        }
        if self.n_min == 0 || self.n_max.is_some_and(|m| m < self.n_min) {
            return fail("batch clamps need 1 <= n_min <= n_max");
        }
        if self.dataset == DatasetKind::File {
            match &self.data_path {
                None => return fail("dataset = file needs data_path"),
                Some(p) if !p.exists() => {
                    return Err(HarnessError::config(format!("data_path {} does not exist", p.display())))
                }
                Some(_) => {}
            }
        }
        Ok(())
    }

    /// Iterations of each chain: explicit, or `passes / batch_fraction`.
    pub fn iterations_for(&self, n_data: usize) -> usize {
        self.iterations.unwrap_or_else(|| {
            let batch = self.batch_size.unwrap_or_else(|| self.batch_for(n_data));
            ((self.passes * n_data as f64) / batch as f64).round().max(1.0) as usize
        })
    }

    /// Fixed batch size: explicit, or `ceil(batch_fraction · N)`.
    pub fn batch_for(&self, n_data: usize) -> usize {
        self.batch_size.unwrap_or_else(|| ((self.batch_fraction * n_data as f64).ceil() as usize).clamp(1, n_data))
    }

    /// Canonical `key=value` lines, sorted by key, with every default filled in.
    pub fn canonical(&self) -> String {
        let opt = |v: Option<String>| v.unwrap_or_else(|| "auto".to_string());
        let list = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(",");
        let mut m: BTreeMap<&str, String> = BTreeMap::new();
        m.insert("allow_large", self.allow_large.to_string());
        m.insert("batch_fraction", format!("{:?}", self.batch_fraction));
        m.insert("batch_size", opt(self.batch_size.map(|v| v.to_string())));
        m.insert("burn_in", self.burn_in.to_string());
        m.insert("candidates", self.candidates.to_string());
        m.insert("chains", self.chains.to_string());
        m.insert("cv_ps_weights", scheme_name(self.cv_ps_weights).into());
        m.insert(
            "data_format",
            match self.data_format {
                DataFormat::Libsvm => "libsvm",
                DataFormat::Csv => "csv",
            }
            .into(),
        );
        m.insert("data_path", opt(self.data_path.as_ref().map(|p| p.display().to_string())));
        m.insert("data_seed", self.data_seed.to_string());
        m.insert("dataset", self.dataset.name().into());
        m.insert("eval_every", self.eval_every.to_string());
        m.insert("experiment", self.experiment.name().into());
        m.insert("feature_dim", opt(self.feature_dim.map(|v| v.to_string())));
        m.insert("fractions", list(&self.fractions));
        m.insert("iterations", opt(self.iterations.map(|v| v.to_string())));
        m.insert("ksd_max_samples", self.ksd_max_samples.to_string());
        m.insert(
            "ksd_source",
            match self.ksd_source {
                KsdSource::Exact => "exact".into(),
                KsdSource::Stochastic(n) => format!("stochastic:{n}"),
            },
        );
        m.insert("max_rows", self.max_rows.to_string());
        m.insert("mode_alpha", opt(self.mode_alpha.map(|v| format!("{v:?}"))));
        m.insert("mode_steps", self.mode_steps.to_string());
        m.insert(
            "model",
            match self.model {
                FileModel::Logistic => "logistic",
                FileModel::Linear => "linear",
            }
            .into(),
        );
        m.insert("n_data", self.n_data.to_string());
        m.insert("n_max", opt(self.n_max.map(|v| v.to_string())));
        m.insert("n_min", self.n_min.to_string());
        m.insert("noise_threshold", opt(self.noise_threshold.map(|v| format!("{v:?}"))));
        m.insert("out", self.out.display().to_string());
        m.insert("passes", format!("{:?}", self.passes));
        m.insert("pilot_cv_chains", self.pilot_cv_chains.to_string());
        m.insert("pilot_cv_ps_chains", self.pilot_cv_ps_chains.to_string());
        m.insert("pilot_iterations", opt(self.pilot_iterations.map(|v| v.to_string())));
        m.insert(
            "prior",
            match self.prior {
                PriorChoice::Wide => "wide",
                PriorChoice::Narrow => "narrow",
            }
            .into(),
        );
        m.insert("ps_weights", scheme_name(self.ps_weights).into());
        m.insert("quantile", format!("{:?}", self.quantile));
        m.insert("reps", self.reps.to_string());
        m.insert("response_column", self.response_column.clone());
        m.insert("samplers", self.samplers.iter().map(|s| s.name()).collect::<Vec<_>>().join(","));
        m.insert("seed", self.seed.to_string());
        m.insert("step_size", opt(self.step_size.map(|v| format!("{v:?}"))));
        m.insert("thin", self.thin.to_string());
        m.insert("train_fraction", format!("{:?}", self.train_fraction));
        m.insert("v0_floor", format!("{:?}", self.v0_floor));
        m.insert("windows", self.windows.to_string());
        m.insert("with_replacement", self.with_replacement.to_string());
        m.insert("write_traces", self.write_traces.to_string());
        debug_assert_eq!(m.len(), KEYS.len());
        m.into_iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    /// SHA-256 of [`canonical`](Self::canonical), lowercase hex.
    pub fn hash(&self) -> String {
        Sha256::digest(self.canonical().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        RawConfig::default().resolve().expect("defaults are valid")
    }
}

impl fmt::Display for ExperimentConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical())
    }
}
