//! `sar`: generate datasets, run the SAR significance test, sweep Monte Carlo
//! experiments.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage error.

mod output;
mod report;
mod sweep;

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use sar_core::generators::{self, HeteroGenConfig};
use sar_core::harness::{self, DataSource, Method, Regime, SweepConfig};
use sar_core::risk::ThresholdBounds;
use sar_core::sar::ThresholdMode;
use sar_core::Dataset;

use output::{fmt_f64, manifest_path, RunManifest};
use report::{RegressorArg, TestSettings};

#[derive(Debug, Parser)]
#[command(name = "sar", version, about = "Statistical agnostic regression: significance tests and validation sweeps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic dataset as CSV (header x1..xP,y).
    Gen(GenArgs),
    /// Fit a regressor and report SAR, F and Breusch-Pagan results as JSON.
    Test(TestArgs),
    /// Run a Monte Carlo sweep and write risks, power and fold-variance tables.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum GenRegime {
    /// Bivariate Gaussian, one predictor.
    Gaussian2d,
    /// Gaussian with a random `p`-dimensional transform.
    Transformed,
    /// Gaussian with k-means clusters pruned away.
    ClusterPruned,
    /// Size grows with age, noise grows with age.
    Heteroscedastic,
    /// Same trend as `heteroscedastic` with constant noise.
    Homoscedastic,
}

fn parse_tau(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if (0.0..1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("tau must lie in [0, 1), got {v}"))
    }
}

fn parse_open_unit(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err(format!("value must lie in (0, 1), got {v}"))
    }
}

fn parse_positive(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("value must be a positive number, got {v}"))
    }
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: sar_core::Error| e.to_string())
}

#[derive(Debug, Args)]
struct GenArgs {
    #[arg(long, value_enum, default_value = "gaussian2d")]
    regime: GenRegime,
    #[arg(long, value_parser = clap::value_parser!(u64).range(3..))]
    n: u64,
    #[arg(long, default_value = "0", value_parser = parse_tau)]
    tau: f64,
    /// Rotation angle of the 2-D transform, radians.
    #[arg(long, default_value_t = std::f64::consts::FRAC_PI_4)]
    theta: f64,
    /// Predictors for `transformed` and `cluster-pruned`.
    #[arg(long, default_value = "1", value_parser = clap::value_parser!(u64).range(1..))]
    p: u64,
    #[arg(long, default_value = "0")]
    seed: u64,
    /// Output CSV; stdout when absent (the manifest then goes to stderr).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TestArgs {
    /// Input CSV with a header row.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "y")]
    response: String,
    /// Comma-separated predictor columns; all other columns when absent.
    #[arg(long, value_delimiter = ',')]
    predictors: Vec<String>,
    #[arg(long, value_enum, default_value = "ols")]
    regressor: RegressorArg,
    /// Tube half-width of the L1 loss for `svr-l1`.
    #[arg(long, default_value = "0")]
    epsilon: f64,
    /// SVR regularization constant.
    #[arg(long, default_value = "10", value_parser = parse_positive)]
    c: f64,
    #[arg(long, default_value = "0.5", value_parser = parse_open_unit)]
    eta: f64,
    #[arg(long, default_value = "0.05", value_parser = parse_open_unit)]
    alpha: f64,
    #[arg(long, value_enum, default_value = "analytic")]
    threshold: ThresholdArg,
    #[arg(long, value_enum, default_value = "uniform-moments")]
    bounds: BoundsArg,
    /// Output JSON; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ThresholdArg {
    Analytic,
    Mesh,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BoundsArg {
    UniformMoments,
    SampleMax,
}

impl From<BoundsArg> for ThresholdBounds {
    fn from(b: BoundsArg) -> Self {
        match b {
            BoundsArg::UniformMoments => ThresholdBounds::UniformMoments,
            BoundsArg::SampleMax => ThresholdBounds::SampleMax,
        }
    }
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// JSON or key=value config file; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', value_parser = parse_tau)]
    taus: Vec<f64>,
    #[arg(long = "ns", value_delimiter = ',', value_parser = clap::value_parser!(u64).range(3..))]
    sample_sizes: Vec<u64>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    realizations: Option<u64>,
    #[arg(long, value_delimiter = ',', value_parser = parse_method)]
    methods: Vec<Method>,
    /// gaussian, cluster_pruned or heteroscedastic (csv via config file).
    #[arg(long)]
    regime: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = parse_open_unit)]
    alpha: Option<f64>,
    #[arg(long, value_parser = parse_open_unit)]
    eta: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

/// Runtime failure: message for stderr, exit code 1.
struct Failure(String);

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure(e.to_string())
    }
}

fn configure_threads() {
    let threads = std::env::var("SAR_THREADS")
        .ok()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .unwrap_or(0);
    if threads > 0 {
        // only fails if a pool already exists, which cannot happen this early
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
}

fn dataset_csv(d: &Dataset) -> Result<Vec<u8>, Failure> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = (1..=d.p()).map(|j| format!("x{j}")).collect();
    header.push("y".into());
    w.write_record(&header)?;
    for i in 0..d.n() {
        let mut row: Vec<String> = d.row(i).iter().map(|v| fmt_f64(*v)).collect();
        row.push(fmt_f64(d.response()[i]));
        w.write_record(&row)?;
    }
    w.into_inner().map_err(|e| Failure(e.to_string()))
}

fn generate(a: &GenArgs) -> sar_core::Result<Dataset> {
    let n = a.n as usize;
    let base = SweepConfig {
        p: a.p as usize,
        theta: a.theta,
        ..SweepConfig::default()
    };
    let source = |regime: Regime, p: usize| DataSource::new(&SweepConfig { regime, p, ..base.clone() });
    match a.regime {
        GenRegime::Gaussian2d => source(Regime::Gaussian, 1)?.draw(n, a.tau, a.seed),
        GenRegime::Transformed => source(Regime::Gaussian, a.p as usize)?.draw(n, a.tau, a.seed),
        GenRegime::ClusterPruned => source(Regime::ClusterPruned, a.p as usize)?.draw(n, a.tau, a.seed),
        GenRegime::Heteroscedastic => source(Regime::Heteroscedastic, 1)?.draw(n, a.tau, a.seed),
        GenRegime::Homoscedastic => generators::gen_homoscedastic_control(&HeteroGenConfig {
            n,
            seed: a.seed,
            ..HeteroGenConfig::default()
        }),
    }
}

fn cmd_gen(a: &GenArgs) -> Result<(), Failure> {
    let d = generate(a)?;
    let bytes = dataset_csv(&d)?;
    let config = json!({
        "regime": a.regime.to_possible_value().map(|v| v.get_name().to_string()),
        "n": a.n,
        "tau": a.tau,
        "theta": a.theta,
        "p": a.p,
        "seed": a.seed,
    });
    match &a.out {
        Some(path) => {
            fs::write(path, &bytes)?;
            let manifest = RunManifest::new("gen", config, a.seed, vec![path.display().to_string()]);
            manifest.write(&manifest_path(path))?;
            print!("{}", manifest.to_json());
        }
        None => {
            io::stdout().write_all(&bytes)?;
            let manifest = RunManifest::new("gen", config, a.seed, vec!["-".into()]);
            eprint!("{}", manifest.to_json());
        }
    }
    Ok(())
}

fn write_json(value: &Value, out: Option<&Path>) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match out {
        Some(path) => fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn cmd_test(a: &TestArgs) -> Result<(), Failure> {
    let settings = TestSettings {
        regressor: a.regressor,
        epsilon: a.epsilon,
        c: a.c,
        eta: a.eta,
        alpha: a.alpha,
        threshold_mode: match a.threshold {
            ThresholdArg::Analytic => ThresholdMode::Analytic,
            ThresholdArg::Mesh => ThresholdMode::Mesh,
        },
        bounds: a.bounds.into(),
    };
    let input = a.input.display().to_string();
    let outcome = generators::load_csv(&a.input, &a.response, &a.predictors)
        .and_then(|load| report::build(&load.dataset, &input, &settings));
    let value = match outcome {
        Ok(v) => v,
        Err(e) => {
            write_json(&report::error_report(&e), a.out.as_deref())?;
            return Err(Failure(e.to_string()));
        }
    };
    write_json(&value, a.out.as_deref())?;
    if let Some(path) = &a.out {
        let config = json!({
            "input": input,
            "response": a.response,
            "predictors": a.predictors,
            "regressor": a.regressor.name(),
            "epsilon": a.epsilon,
            "c": a.c,
            "eta": a.eta,
            "alpha": a.alpha,
            "threshold": a.threshold.to_possible_value().map(|v| v.get_name().to_string()),
            "bounds": a.bounds.to_possible_value().map(|v| v.get_name().to_string()),
        });
        RunManifest::new("test", config, 0, vec![path.display().to_string()]).write(&manifest_path(path))?;
    }
    Ok(())
}

fn sweep_config(a: &SweepArgs) -> Result<SweepConfig, Failure> {
    let mut partial = match &a.config {
        Some(path) => sweep::read_config_file(path).map_err(Failure)?,
        None => serde_json::Map::new(),
    };
    if !a.taus.is_empty() {
        partial.insert("taus".into(), json!(a.taus));
    }
    if !a.sample_sizes.is_empty() {
        partial.insert("sample_sizes".into(), json!(a.sample_sizes));
    }
    if !a.methods.is_empty() {
        partial.insert("methods".into(), serde_json::to_value(&a.methods)?);
    }
    if let Some(r) = a.realizations {
        partial.insert("realizations".into(), json!(r));
    }
    if let Some(regime) = &a.regime {
        partial.insert("regime".into(), json!({ "kind": regime }));
    }
    if let Some(s) = a.seed {
        partial.insert("master_seed".into(), json!(s));
    }
    if let Some(v) = a.alpha {
        partial.insert("alpha".into(), json!(v));
    }
    if let Some(v) = a.eta {
        partial.insert("eta".into(), json!(v));
    }
    let cfg = sweep::resolve(partial).map_err(Failure)?;
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_sweep(a: &SweepArgs) -> Result<(), Failure> {
    let cfg = sweep_config(a)?;
    let result = harness::run_sweep(&cfg)?;
    let mut outputs = sweep::write_tables(&result, &a.out)?;
    let manifest_file = a.out.join("manifest.json");
    outputs.push(manifest_file.display().to_string());
    RunManifest::new("sweep", serde_json::to_value(&cfg)?, cfg.master_seed, outputs).write(&manifest_file)?;

    let total = result.records.len();
    for (tau, n, method) in &result.failed_cells {
        eprintln!("failed cell: tau={tau} n={n} method={method}");
    }
    if !result.failed_cells.is_empty() {
        eprintln!("{} of {total} cells failed", result.failed_cells.len());
    }
    if result.failed_cells.len() == total {
        return Err(Failure("every cell failed".into()));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    configure_threads();
    let outcome = match &cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Test(a) => cmd_test(a),
        Command::Sweep(a) => cmd_sweep(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
