use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use psgld::config::{scheme_name, RawConfig};
use psgld::experiments::{self, build_problem, calibration_rows, find_mode, Problem};
use psgld::io::{read_trace_samples, write_dataset_csv};
use psgld::output::{self, fmt_f64, Metadata, ResultRow};
use psgld::{ExperimentConfig, HarnessError, Result};
use psgld_core::diagnostics::ksd;
use psgld_core::samplers::SamplerKind;
use psgld_core::subsampling::{compute_weights, WeightScheme};
use psgld_core::ModelKind;

/// Preferential-subsampling SGLD: sampling experiments and diagnostics.
#[derive(Parser)]
#[command(name = "psgld", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Flat key = value configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override one configuration key (repeatable), e.g. `--set chains=5`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Use every row of a large file dataset instead of a subsample.
    #[arg(long, global = true)]
    allow_large: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Write the configured dataset (synthetic or loaded) to CSV.
    Generate(Common),
    /// Find the posterior mode with ADAM.
    Mode(Common),
    /// Compute subsampling weights at the mode.
    Weights {
        #[command(flatten)]
        common: Common,
        /// uniform, ps-exact, ps-approx, cv-exact or cv-approx.
        #[arg(long, default_value = "cv-approx")]
        scheme: String,
    },
    /// Empirical pseudo-variance against subsample fraction.
    VarianceSweep(Common),
    /// Fixed-batch sampler comparison.
    Sample(Common),
    /// Calibrate the adaptive noise threshold from pilot chains.
    Calibrate(Common),
    /// Fixed against adaptive batch sizes.
    Adaptive(Common),
    /// Kernel Stein discrepancy of a trace file against the configured model.
    Ksd {
        #[command(flatten)]
        common: Common,
        /// Trace CSV with theta_* columns.
        #[arg(long)]
        trace: PathBuf,
    },
}

fn resolve(common: &Common, experiment: Option<&str>) -> Result<ExperimentConfig> {
    let mut raw = match &common.config {
        Some(p) => RawConfig::load(p)?,
        None => RawConfig::default(),
    };
    if let Some(e) = experiment {
        raw.set("experiment", e)?;
    }
    for pair in &common.overrides {
        raw.set_pair(pair)?;
    }
    if let Some(s) = common.seed {
        raw.set("seed", s.to_string())?;
    }
    if let Some(o) = &common.out {
        raw.set("out", o.display().to_string())?;
    }
    if common.allow_large {
        raw.set("allow_large", "true")?;
    }
    raw.resolve()
}

fn write_rows(cfg: &ExperimentConfig, rows: &[ResultRow], meta: &Metadata) -> Result<()> {
    output::ensure_dir(&cfg.out)?;
    output::write_results(&cfg.out.join("results.csv"), rows)?;
    meta.write(&cfg.out.join("metadata.txt"), &cfg.canonical())
}

fn run_family(common: &Common, experiment: &str) -> Result<bool> {
    let cfg = resolve(common, Some(experiment))?;
    let out = experiments::run_experiment(&cfg)?;
    output::write_outputs(&cfg.out, &cfg, &out)?;
    eprintln!("wrote {} rows to {}", out.rows.len(), cfg.out.join("results.csv").display());
    if out.diverged {
        eprintln!("one or more chains diverged; see rows with status `diverged`");
    }
    Ok(out.diverged)
}

fn generate(common: &Common) -> Result<()> {
    let cfg = resolve(common, None)?;
    let problem = build_problem(&cfg)?;
    output::ensure_dir(&cfg.out)?;
    let intercept = problem.model.kind() != ModelKind::Gaussian;
    write_dataset_csv(&cfg.out.join("train.csv"), problem.model.dataset(), intercept)?;
    if let Some(test) = &problem.test {
        write_dataset_csv(&cfg.out.join("test.csv"), test, intercept)?;
    }
    let mut meta = Metadata::new(&cfg.hash());
    meta.push("n_train", problem.model.n_data());
    meta.push("data_seed", cfg.data_seed);
    meta.write(&cfg.out.join("metadata.txt"), &cfg.canonical())?;
    eprintln!("wrote {} training rows to {}", problem.model.n_data(), cfg.out.display());
    Ok(())
}

fn mode(common: &Common) -> Result<()> {
    let cfg = resolve(common, None)?;
    let problem = build_problem(&cfg)?;
    let mode = find_mode(&cfg, &problem.model)?;
    let exp = "mode";
    let mut rows = Vec::new();
    for (j, &v) in mode.mode().as_slice().iter().enumerate() {
        rows.push(ResultRow::new(exp, "adam", cfg.seed, &format!("theta_{j}"), v));
        println!("theta_{j} = {}", fmt_f64(v));
    }
    let grad = problem.model.full_gradient(mode.mode())?;
    rows.push(ResultRow::new(exp, "adam", cfg.seed, "gradient_norm", grad.norm()));
    if let Some(cov) = mode.laplace_cov() {
        for (j, v) in cov.diag().into_iter().enumerate() {
            rows.push(ResultRow::new(exp, "adam", cfg.seed, &format!("laplace_sd_{j}"), v.sqrt()));
        }
    }
    write_rows(&cfg, &rows, &Metadata::new(&cfg.hash()))
}

fn parse_scheme(name: &str) -> Result<WeightScheme> {
    [WeightScheme::Uniform, WeightScheme::PsExact, WeightScheme::PsApprox, WeightScheme::CvExact, WeightScheme::CvApprox]
        .into_iter()
        .find(|&s| scheme_name(s) == name)
        .ok_or_else(|| HarnessError::config(format!("unknown weight scheme `{name}`")))
}

fn weights(common: &Common, scheme: &str) -> Result<()> {
    let scheme = parse_scheme(scheme)?;
    let cfg = resolve(common, None)?;
    let problem = build_problem(&cfg)?;
    let mode = find_mode(&cfg, &problem.model)?;
    // State-dependent schemes are evaluated at the mode.
    let dist = compute_weights(scheme, &problem.model, Some(mode.mode()), Some(&mode))?;
    output::ensure_dir(&cfg.out)?;
    output::write_weights(&cfg.out.join("weights.csv"), dist.probs())?;
    let mut meta = Metadata::new(&cfg.hash());
    meta.push("scheme", scheme_name(scheme));
    meta.write(&cfg.out.join("metadata.txt"), &cfg.canonical())?;
    eprintln!("wrote {} weights to {}", dist.len(), cfg.out.join("weights.csv").display());
    Ok(())
}

fn calibrate(common: &Common) -> Result<()> {
    let cfg = resolve(common, Some("adaptive"))?;
    let problem: Problem = build_problem(&cfg)?;
    let mode = find_mode(&cfg, &problem.model)?;
    let kind = cfg.samplers.iter().copied().find(|k| k.is_adaptive()).unwrap_or(SamplerKind::AsgldCvPs);
    let cal = experiments::calibrate(&cfg, &problem, &mode, kind)?;
    println!("noise_threshold = {}", fmt_f64(cal.noise_threshold));
    let mut meta = Metadata::new(&cfg.hash());
    meta.push("pilot_batch_size", cal.pilot_batch_size);
    write_rows(&cfg, &calibration_rows(&cfg, kind, &cal), &meta)
}

fn ksd_of_trace(common: &Common, trace: &Path) -> Result<()> {
    let cfg = resolve(common, None)?;
    let problem = build_problem(&cfg)?;
    let samples = read_trace_samples(trace)?;
    let ksd_cfg = psgld_core::diagnostics::KsdConfig {
        max_samples: cfg.ksd_max_samples,
        source: match cfg.ksd_source {
            psgld::config::KsdSource::Exact => psgld_core::diagnostics::ScoreSource::ExactFullData,
            psgld::config::KsdSource::Stochastic(n) => psgld_core::diagnostics::ScoreSource::Stochastic(n),
        },
        seed: cfg.seed + experiments::seed_offset::KSD,
        ..Default::default()
    };
    let report = ksd(&samples, &problem.model, &ksd_cfg)?;
    println!("ksd = {}", fmt_f64(report.value));
    let mut rows = vec![ResultRow::new("ksd", "trace", cfg.seed, "ksd", report.value).over_window(1, samples.rows())];
    for (j, v) in report.per_dimension.iter().enumerate() {
        rows.push(ResultRow::new("ksd", "trace", cfg.seed, &format!("ksd_dim_{j}"), *v));
    }
    let mut meta = Metadata::new(&cfg.hash());
    meta.push("trace", trace.display());
    meta.push("samples_used", report.samples_used);
    meta.push("clamped", report.clamped);
    write_rows(&cfg, &rows, &meta)
}

fn dispatch(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Generate(c) => generate(&c).map(|_| false),
        Command::Mode(c) => mode(&c).map(|_| false),
        Command::Weights { common, scheme } => weights(&common, &scheme).map(|_| false),
        Command::VarianceSweep(c) => run_family(&c, "variance-sweep"),
        Command::Sample(c) => run_family(&c, "fixed-batch"),
        Command::Calibrate(c) => calibrate(&c).map(|_| false),
        Command::Adaptive(c) => run_family(&c, "adaptive"),
        Command::Ksd { common, trace } => ksd_of_trace(&common, &trace).map(|_| false),
    }
}

/// Parses `args`, runs the command and returns the process exit status.
fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match dispatch(cli) {
        Ok(false) => 0,
        Ok(true) => 2,
        Err(e) => {
            eprintln!("psgld: {e}");
            e.exit_code()
        }
    }
}

fn main() -> ExitCode {
    ExitCode::from(run(std::env::args_os()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn psgld(dir: &Path, args: &[&str]) -> u8 {
        let out = dir.to_str().unwrap();
        run(["psgld"].iter().chain(args).chain(&["--out", out]))
    }

    #[test]
    fn subcommands_write_their_outputs() {
        let tmp = tempfile::tempdir().unwrap();
        let small = ["--set", "n_data=300", "--set", "dataset=synthetic-logistic-balanced", "--set", "mode_steps=500"];
        let gen = tmp.path().join("gen");
        assert_eq!(psgld(&gen, &[&["generate"][..], &small].concat()), 0);
        assert!(gen.join("train.csv").exists() && gen.join("test.csv").exists());

        let w = tmp.path().join("w");
        assert_eq!(psgld(&w, &[&["weights", "--scheme", "ps-approx"][..], &small].concat()), 0);
        let text = std::fs::read_to_string(w.join("weights.csv")).unwrap();
        assert_eq!(text.lines().count(), 301);

        let s = tmp.path().join("s");
        let sample = [&["sample", "--set", "chains=2", "--set", "iterations=100", "--set", "write_traces=true"][..], &small];
        assert_eq!(psgld(&s, &sample.concat()), 0);
        let trace = s.join("traces").join("sgld_chain1.csv");
        assert!(trace.exists());
        let header = std::fs::read_to_string(&trace).unwrap();
        assert!(header.starts_with("seed,iteration,theta_0,theta_1,theta_2,theta_3,theta_4,batch_size,cumulative_data_usage"));

        let k = tmp.path().join("k");
        assert_eq!(psgld(&k, &[&["ksd", "--trace", trace.to_str().unwrap()][..], &small].concat()), 0);
        assert!(std::fs::read_to_string(k.join("results.csv")).unwrap().contains(",ksd,"));

        let c = tmp.path().join("c");
        assert_eq!(psgld(&c, &[&["calibrate", "--set", "iterations=200"][..], &small].concat()), 0);
        assert!(std::fs::read_to_string(c.join("results.csv")).unwrap().contains("noise_threshold"));
    }

    #[test]
    fn config_file_and_overrides_combine() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = tmp.path().join("sweep.cfg");
        std::fs::write(&cfg, "# small sweep\nn_data = 200\nfractions = 0.1, 1.0\nreps = 10\ncandidates = 2\n").unwrap();
        let out = tmp.path().join("out");
        let args = ["variance-sweep", "--config", cfg.to_str().unwrap(), "--set", "mode_steps=300", "--seed", "4"];
        assert_eq!(psgld(&out, &args), 0);
        let meta = std::fs::read_to_string(out.join("metadata.txt")).unwrap();
        assert!(meta.contains("seed=4\n") && meta.contains("reps=10\n") && meta.contains("config_hash: "));
        let rows = std::fs::read_to_string(out.join("results.csv")).unwrap();
        assert_eq!(rows.lines().count(), 1 + 8 * 2);
    }

    #[test]
    fn exit_codes_distinguish_config_errors_and_divergence() {
        let tmp = tempfile::tempdir().unwrap();
        assert_eq!(psgld(tmp.path(), &["sample", "--set", "bogus=1"]), 1);
        assert_eq!(psgld(tmp.path(), &["sample", "--config", "/no/such.cfg"]), 1);
        let diverging = ["sample", "--set", "samplers=sgld", "--set", "step_size=1e6", "--set", "n_data=100"];
        let args = [&diverging[..], &["--set", "iterations=500", "--set", "chains=1", "--set", "mode_steps=50"]].concat();
        assert_eq!(psgld(tmp.path(), &args), 2);
        let rows = std::fs::read_to_string(tmp.path().join("results.csv")).unwrap();
        assert!(rows.contains(",divergence,") && rows.contains(",diverged"));
    }
}
