//! CSV emission and run metadata.

use std::fs;
use std::io::Write;
use std::path::Path;

use psgld_core::samplers::ChainTrace;

use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};
use crate::experiments::ExperimentOutput;

/// Shortest decimal string that parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:?}")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RowStatus {
    Ok,
    Diverged,
}

impl RowStatus {
    pub fn name(self) -> &'static str {
        match self {
            RowStatus::Ok => "ok",
            RowStatus::Diverged => "diverged",
        }
    }
}

/// One metric observation. Optional fields are written as empty cells.
#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub experiment: String,
    pub sampler: String,
    pub seed: u64,
    pub iteration: Option<usize>,
    pub fraction: Option<f64>,
    /// `first-last` iteration range (1-based, inclusive) a windowed metric covers.
    pub window: Option<(usize, usize)>,
    pub metric: String,
    pub value: Option<f64>,
    pub batch_size: Option<usize>,
    pub data_usage: Option<u64>,
    pub status: RowStatus,
}

impl ResultRow {
    pub fn new(experiment: &str, sampler: &str, seed: u64, metric: &str, value: f64) -> Self {
        ResultRow {
            experiment: experiment.to_string(),
            sampler: sampler.to_string(),
            seed,
            iteration: None,
            fraction: None,
            window: None,
            metric: metric.to_string(),
            value: Some(value),
            batch_size: None,
            data_usage: None,
            status: RowStatus::Ok,
        }
    }

    /// Marker row for a chain that stopped on a non-finite state.
    pub fn diverged(experiment: &str, sampler: &str, seed: u64, step: usize) -> Self {
        ResultRow {
            iteration: Some(step),
            value: None,
            status: RowStatus::Diverged,
            ..ResultRow::new(experiment, sampler, seed, "divergence", 0.0)
        }
    }

    pub fn at_iteration(mut self, t: usize) -> Self {
        self.iteration = Some(t);
        self
    }

    pub fn at_fraction(mut self, f: f64) -> Self {
        self.fraction = Some(f);
        self
    }

    pub fn over_window(mut self, first: usize, last: usize) -> Self {
        self.window = Some((first, last));
        self
    }

    pub fn with_batch(mut self, n: usize) -> Self {
        self.batch_size = Some(n);
        self
    }

    pub fn with_usage(mut self, usage: u64) -> Self {
        self.data_usage = Some(usage);
        self
    }

    pub const HEADER: [&'static str; 11] = [
        "experiment",
        "sampler",
        "seed",
        "iteration",
        "fraction",
        "iteration_window",
        "metric",
        "value",
        "batch_size",
        "data_usage",
        "status",
    ];

    fn record(&self) -> [String; 11] {
        let opt = |v: Option<String>| v.unwrap_or_default();
        [
            self.experiment.clone(),
            self.sampler.clone(),
            self.seed.to_string(),
            opt(self.iteration.map(|v| v.to_string())),
            opt(self.fraction.map(fmt_f64)),
            opt(self.window.map(|(a, b)| format!("{a}-{b}"))),
            self.metric.clone(),
            opt(self.value.map(fmt_f64)),
            opt(self.batch_size.map(|v| v.to_string())),
            opt(self.data_usage.map(|v| v.to_string())),
            self.status.name().to_string(),
        ]
    }
}

pub fn write_results(path: &Path, rows: &[ResultRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(ResultRow::HEADER)?;
    for row in rows {
        w.write_record(row.record())?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

/// One row per retained state: seed, iteration, θ, batch size, cumulative usage.
pub fn write_trace(path: &Path, trace: &ChainTrace) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let d = trace.samples.cols();
    let mut header = vec!["seed".to_string(), "iteration".to_string()];
    header.extend((0..d).map(|j| format!("theta_{j}")));
    header.push("batch_size".into());
    header.push("cumulative_data_usage".into());
    w.write_record(&header)?;
    for r in 0..trace.len() {
        let t = trace.sample_iterations[r];
        let mut rec = vec![trace.seed.to_string(), t.to_string()];
        rec.extend(trace.samples.row(r).iter().map(|&v| fmt_f64(v)));
        rec.push(trace.batch_sizes[t - 1].to_string());
        rec.push(trace.sample_data_usage[r].to_string());
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

/// `index, weight` for every data point.
pub fn write_weights(path: &Path, probs: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["index", "weight"])?;
    for (i, &p) in probs.iter().enumerate() {
        w.write_record([i.to_string(), fmt_f64(p)])?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

/// Free-form run record: config hash, seeds, versions, timings.
#[derive(Clone, Debug, Default)]
pub struct Metadata {
    entries: Vec<(String, String)>,
}

impl Metadata {
    pub fn new(config_hash: &str) -> Self {
        let mut m = Metadata::default();
        m.push("config_hash", config_hash);
        m.push("psgld_version", env!("CARGO_PKG_VERSION"));
        m
    }

    pub fn push(&mut self, key: &str, value: impl ToString) {
        self.entries.push((key.to_string(), value.to_string()));
    }

    pub fn write(&self, path: &Path, canonical_config: &str) -> Result<()> {
        let mut f = fs::File::create(path).map_err(|e| HarnessError::io(path, e))?;
        let mut text = String::new();
        for (k, v) in &self.entries {
            text.push_str(&format!("{k}: {v}\n"));
        }
        text.push_str("\n[config]\n");
        text.push_str(canonical_config);
        f.write_all(text.as_bytes()).map_err(|e| HarnessError::io(path, e))
    }
}

/// Writes `results.csv`, `metadata.txt` and, when requested, one trace
/// file per chain under `traces/`.
pub fn write_outputs(dir: &Path, cfg: &ExperimentConfig, out: &ExperimentOutput) -> Result<()> {
    ensure_dir(dir)?;
    write_results(&dir.join("results.csv"), &out.rows)?;
    if cfg.write_traces && !out.traces.is_empty() {
        let traces = dir.join("traces");
        ensure_dir(&traces)?;
        for trace in &out.traces {
            let chain = trace.seed - cfg.seed;
            write_trace(&traces.join(format!("{}_chain{chain}.csv", trace.kind.name())), trace)?;
        }
    }
    out.metadata.write(&dir.join("metadata.txt"), &cfg.canonical())
}

/// Creates `dir` (and parents) if missing.
pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))
}
