//! `netreg` — sample from, fit, validate, and benchmark regression models
//! with network-dependent responses.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::{DMatrix, DVector};

use netreg_core::experiments::{emit_report, run_consistency_with_jobs, ExperimentSpec};
use netreg_core::interaction::{
    build_bounded_degree, build_curie_weiss, build_sk, validate_assumptions,
};
use netreg_core::io::{read_matrix, read_samples, read_vector, write_matrix, write_samples};
use netreg_core::linear::fit_linear_mle;
use netreg_core::logistic::fit_logistic_mple;
use netreg_core::model::{
    Dataset, InteractionMatrix, LogisticParams, ModelKind, ParameterBox, RegressionDesign,
};
use netreg_core::optimize::FitOptions;
use netreg_core::rng::rng_from_seed;
use netreg_core::sampling::{gaussian_sample, ising_gibbs_sample, GibbsConfig};
use rand::Rng as _;

#[derive(Parser)]
#[command(
    name = "netreg",
    about = "Regression with network-dependent responses",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Logistic,
    Linear,
}

impl From<ModelArg> for ModelKind {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Logistic => ModelKind::Logistic,
            ModelArg::Linear => ModelKind::Linear,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Draw dependent samples and write them as CSV (y, x_1..x_d per row).
    Sample(SampleArgs),
    /// Fit a model to a sample file by projected gradient descent.
    Fit(FitArgs),
    /// Evaluate the model's consistency conditions on an instance.
    Check(CheckArgs),
    /// Run a consistency-rate experiment from a JSON spec.
    Experiment(ExperimentArgs),
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long, value_enum)]
    model: ModelArg,
    /// Number of units.
    #[arg(long)]
    n: usize,
    /// Feature dimension.
    #[arg(long)]
    d: usize,
    /// Interaction matrix: regular:K, sk, cw, or file:PATH.
    #[arg(long)]
    graph: String,
    /// Comma-separated coefficient vector, e.g. "0.5,-0.3".
    #[arg(long)]
    theta: String,
    #[arg(long)]
    beta: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of samples (rows blocks) to draw; each sample forms n rows.
    #[arg(long, default_value_t = 1)]
    n_samples: usize,
    /// Gibbs burn-in sweeps (logistic).
    #[arg(long, default_value_t = 200)]
    burn_in: usize,
    /// Gibbs sweeps between retained samples (logistic).
    #[arg(long, default_value_t = 5)]
    thinning: usize,
    /// Constant diagonal of D (linear).
    #[arg(long, default_value_t = 1.0)]
    d_diag_value: f64,
    /// Optional D diagonal file (linear), overrides --d-diag-value.
    #[arg(long)]
    d_diag: Option<PathBuf>,
    /// Output CSV for the sample table.
    #[arg(long)]
    out: PathBuf,
    /// Also write the generated interaction matrix here (CSV or JSON).
    #[arg(long)]
    graph_out: Option<PathBuf>,
    /// Also write the generated feature matrix here (CSV or JSON).
    #[arg(long)]
    features_out: Option<PathBuf>,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long, value_enum)]
    model: ModelArg,
    /// Sample table CSV (y, x_1..x_d per row).
    #[arg(long)]
    data: PathBuf,
    /// Interaction matrix file (CSV or JSON).
    #[arg(long)]
    graph: PathBuf,
    /// D diagonal file (linear); identity scaled by --d-diag-value otherwise.
    #[arg(long)]
    d_diag: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    d_diag_value: f64,
    #[arg(long)]
    theta_bound: f64,
    #[arg(long)]
    beta_bound: f64,
    /// Gradient-norm stopping tolerance (default 1/sqrt(n)).
    #[arg(long)]
    tol: Option<f64>,
    /// Step size override (default: inverse smoothness bound).
    #[arg(long)]
    step_size: Option<f64>,
    #[arg(long, default_value_t = 100_000)]
    max_iters: usize,
    /// Output JSON with parameters and diagnostics.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long, value_enum)]
    model: ModelArg,
    /// Interaction matrix: regular:K, sk, cw, or file:PATH.
    #[arg(long)]
    graph: String,
    /// Feature matrix file; generated standard normal when omitted.
    #[arg(long)]
    features: Option<PathBuf>,
    /// Number of units (required when --features is omitted).
    #[arg(long)]
    n: Option<usize>,
    /// Feature dimension (required when --features is omitted).
    #[arg(long)]
    d: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    d_diag: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    d_diag_value: f64,
    #[arg(long)]
    theta_bound: f64,
    #[arg(long)]
    beta_bound: f64,
    /// Threshold constant c in the ||A||_F^2 >= c n condition.
    #[arg(long, default_value_t = 0.1)]
    frob_c: f64,
    /// Optional JSON report output.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Experiment spec (JSON).
    #[arg(long)]
    spec: PathBuf,
    /// Output directory for errors.csv, summary.csv, summary.json.
    #[arg(long)]
    out: PathBuf,
    /// Parallel cells.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

fn main() {
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            2
        }
    };
    std::process::exit(code);
}

fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Sample(args) => cmd_sample(args).map(|_| 0),
        Command::Fit(args) => cmd_fit(args).map(|_| 0),
        Command::Check(args) => cmd_check(args),
        Command::Experiment(args) => cmd_experiment(args).map(|_| 0),
    }
}

fn parse_graph(spec: &str, n: usize, seed: u64) -> Result<InteractionMatrix> {
    if let Some(k) = spec.strip_prefix("regular:") {
        let degree: usize = k.parse().context("degree in regular:K")?;
        return Ok(build_bounded_degree(n, degree, seed)?);
    }
    if spec == "sk" {
        return Ok(build_sk(n, seed)?);
    }
    if spec == "cw" {
        return Ok(build_curie_weiss(n)?);
    }
    if let Some(path) = spec.strip_prefix("file:") {
        let m = read_matrix(Path::new(path))?;
        if m.nrows() != n {
            bail!("graph file {path} has order {}, expected n = {n}", m.nrows());
        }
        return Ok(InteractionMatrix::from_matrix(m)?);
    }
    Err(anyhow!(
        "unknown graph spec {spec:?}; expected regular:K, sk, cw, or file:PATH"
    ))
}

fn parse_theta(text: &str, d: usize) -> Result<DVector<f64>> {
    let vals: Vec<f64> = text
        .split(',')
        .map(|t| t.trim().parse::<f64>().context("theta entry"))
        .collect::<Result<_>>()?;
    if vals.len() != d {
        bail!("theta has {} entries, expected d = {d}", vals.len());
    }
    Ok(DVector::from_vec(vals))
}

fn load_d_diag(
    n: usize,
    path: &Option<PathBuf>,
    constant: f64,
) -> Result<DVector<f64>> {
    match path {
        Some(p) => {
            let v = read_vector(p)?;
            if v.len() != n {
                bail!("d_diag file has length {}, expected n = {n}", v.len());
            }
            Ok(v)
        }
        None => Ok(DVector::from_element(n, constant)),
    }
}

fn cmd_sample(args: SampleArgs) -> Result<()> {
    let a = parse_graph(&args.graph, args.n, args.seed)?;
    let theta = parse_theta(&args.theta, args.d)?;
    let mut rng = rng_from_seed(args.seed.wrapping_add(1));
    let x = DMatrix::<f64>::from_fn(args.n, args.d, |_, _| {
        rng.sample::<f64, _>(rand_distr::StandardNormal)
    });

    let (design, samples) = match ModelKind::from(args.model) {
        ModelKind::Logistic => {
            let design = RegressionDesign::new(x)?;
            let params = LogisticParams::new(theta, args.beta);
            let cfg = GibbsConfig {
                burn_in: args.burn_in,
                n_samples: args.n_samples,
                thinning: args.thinning,
                seed: args.seed.wrapping_add(2),
            };
            let samples = ising_gibbs_sample(&params, &design, &a, &cfg);
            (design, samples)
        }
        ModelKind::Linear => {
            let d_diag = load_d_diag(args.n, &args.d_diag, args.d_diag_value)?;
            let design = RegressionDesign::with_d_diag(x, d_diag)?;
            let samples = gaussian_sample(
                &theta,
                args.beta,
                &design,
                &a,
                args.n_samples,
                args.seed.wrapping_add(2),
            )?;
            (design, samples)
        }
    };

    // Stack samples: each retained sample contributes n rows sharing X.
    let total = args.n * samples.len();
    let mut y_all = DVector::zeros(total);
    let mut x_all = DMatrix::zeros(total, args.d);
    for (s, y) in samples.iter().enumerate() {
        y_all.rows_mut(s * args.n, args.n).copy_from(y);
        x_all
            .rows_mut(s * args.n, args.n)
            .copy_from(design.x());
    }
    write_samples(&args.out, &y_all, &x_all)?;
    if let Some(p) = &args.graph_out {
        write_matrix(p, a.matrix())?;
    }
    if let Some(p) = &args.features_out {
        write_matrix(p, design.x())?;
    }
    println!(
        "wrote {} sample(s) of {} units to {}",
        samples.len(),
        args.n,
        args.out.display()
    );
    Ok(())
}

fn cmd_fit(args: FitArgs) -> Result<()> {
    let (y, x) = read_samples(&args.data)?;
    let a = Arc::new(InteractionMatrix::from_matrix(read_matrix(&args.graph)?)?);
    if y.len() != a.n() {
        bail!(
            "data has {} rows but the graph has order {}",
            y.len(),
            a.n()
        );
    }
    let bounds = ParameterBox::new(args.theta_bound, args.beta_bound)?;
    let options = FitOptions {
        step_size: args.step_size,
        tolerance: args.tol,
        max_iters: args.max_iters,
        record_trace: false,
    };

    let output = match ModelKind::from(args.model) {
        ModelKind::Logistic => {
            let design = Arc::new(RegressionDesign::new(x)?);
            let dataset = Dataset::logistic(design, a, y)?;
            let (params, diag) = fit_logistic_mple(&dataset, &bounds, &options)?;
            serde_json::json!({
                "model": "logistic",
                "params": {
                    "theta": params.theta.as_slice(),
                    "beta": params.beta,
                },
                "diagnostics": diagnostics_json(&diag),
            })
        }
        ModelKind::Linear => {
            let n = y.len();
            let d_diag = load_d_diag(n, &args.d_diag, args.d_diag_value)?;
            let design = Arc::new(RegressionDesign::with_d_diag(x, d_diag)?);
            let dataset = Dataset::linear(design, a, y)?;
            let (params, diag) = fit_linear_mle(&dataset, &bounds, &options)?;
            serde_json::json!({
                "model": "linear",
                "params": {
                    "theta": params.theta.as_slice(),
                    "beta": params.beta,
                    "kappa": params.kappa.as_slice(),
                },
                "diagnostics": diagnostics_json(&diag),
            })
        }
    };
    std::fs::write(&args.out, serde_json::to_string_pretty(&output)?)
        .with_context(|| format!("writing {}", args.out.display()))?;
    println!("wrote fit to {}", args.out.display());
    Ok(())
}

fn diagnostics_json(diag: &netreg_core::optimize::FitDiagnostics) -> serde_json::Value {
    serde_json::json!({
        "iterations": diag.iterations,
        "grad_norm": diag.grad_norm,
        "objective_value": diag.objective_value,
        "step_size": diag.step_size,
        "tolerance": diag.tolerance,
        "flat_coords": diag.flat_coords,
    })
}

fn cmd_check(args: CheckArgs) -> Result<i32> {
    let (x, n) = match &args.features {
        Some(path) => {
            let x = read_matrix(path)?;
            let n = x.nrows();
            (x, n)
        }
        None => {
            let n = args
                .n
                .ok_or_else(|| anyhow!("--n is required when --features is omitted"))?;
            let d = args
                .d
                .ok_or_else(|| anyhow!("--d is required when --features is omitted"))?;
            let mut rng = rng_from_seed(args.seed.wrapping_add(1));
            (
                DMatrix::<f64>::from_fn(n, d, |_, _| {
                    rng.sample::<f64, _>(rand_distr::StandardNormal)
                }),
                n,
            )
        }
    };
    let a = parse_graph(&args.graph, n, args.seed)?;
    let d_diag = load_d_diag(n, &args.d_diag, args.d_diag_value)?;
    let design = RegressionDesign::with_d_diag(x, d_diag)?;
    let bounds = ParameterBox::new(args.theta_bound, args.beta_bound)?;
    let report = validate_assumptions(&a, &design, &bounds, args.model.into(), args.frob_c)?;

    println!("{:<34} {:>14} {:>14}  result", "check", "measured", "threshold");
    for c in &report.checks {
        println!(
            "{:<34} {:>14.6e} {:>14.6e}  {}",
            c.name,
            c.measured,
            c.threshold,
            if c.passed { "pass" } else { "FAIL" }
        );
    }
    println!(
        "overall: {}",
        if report.overall { "pass" } else { "FAIL" }
    );
    if let Some(path) = &args.json {
        std::fs::write(path, serde_json::to_string_pretty(&report)?)
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(if report.overall { 0 } else { 1 })
}

fn cmd_experiment(args: ExperimentArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.spec)
        .with_context(|| format!("reading {}", args.spec.display()))?;
    let spec: ExperimentSpec = serde_json::from_str(&text)
        .with_context(|| format!("parsing {}", args.spec.display()))?;
    let report = run_consistency_with_jobs(&spec, args.jobs)?;
    emit_report(&report, &args.out)?;
    match report.slope {
        Some(s) => println!("log-log slope of median error vs n: {s:.4}"),
        None => println!("log-log slope: undefined (fewer than two usable grid points)"),
    }
    for v in &report.validation {
        if !v.overall {
            println!(
                "note: assumption checks failed at n = {}: {}",
                v.n,
                v.failed_checks.join(", ")
            );
        }
    }
    if report.failures > 0 {
        println!("note: {} cell(s) did not converge", report.failures);
    }
    println!("report written to {}", args.out.display());
    Ok(())
}
