//! Consistency-rate experiment harness.
//!
//! For each sample size in the grid it builds one interaction matrix and one
//! feature matrix, then runs independent replicas: draw ONE dependent
//! response vector, fit, record the parameter error. Medians per sample size
//! and the log-log slope of median error against n summarize the rate; a
//! slope near -1/2 is the square-root consistency signature.
//!
//! Everything is driven by explicit seeds: cell seeds derive from
//! (base seed, n, replica), so reruns and parallel execution produce
//! identical statistical output regardless of scheduling.

use std::fs;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interaction::{
    build_bounded_degree, build_curie_weiss, build_sk, validate_assumptions,
};
use crate::io::read_matrix;
use crate::linear::{fit_linear_mle_with_eigen, PrecisionEigen};
use crate::logistic::fit_logistic_mple;
use crate::model::{
    Dataset, InteractionMatrix, LogisticParams, ModelKind, ParameterBox, RegressionDesign,
};
use crate::optimize::FitOptions;
use crate::rng::{derive_seed, rng_from_seed};
use crate::sampling::{gaussian_sample, ising_gibbs_sample, GibbsConfig};
use rand::Rng as _;
use rand_distr::StandardNormal;

const TAG_GRAPH: u64 = 1;
const TAG_FEATURES: u64 = 2;
const TAG_SAMPLE: u64 = 3;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum GraphSpec {
    /// Random regular graph scaled by its degree.
    Regular { degree: usize },
    /// Sherrington-Kirkpatrick Gaussian matrix.
    Sk,
    /// Complete graph with entries 1/n (negative control).
    CurieWeiss,
    /// Fixed matrix loaded from a CSV/JSON file; usable with a single grid
    /// entry matching its order.
    File { path: String },
}

fn default_max_iters() -> usize {
    100_000
}
fn default_burn_in() -> usize {
    200
}
fn default_thinning() -> usize {
    5
}
fn default_frob_c() -> f64 {
    0.1
}
fn default_feature_clamp() -> Option<f64> {
    Some(3.0)
}
fn default_d_diag_value() -> f64 {
    1.0
}
fn default_replicas() -> usize {
    20
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ExperimentSpec {
    pub model: ModelKind,
    pub graph: GraphSpec,
    pub d: usize,
    pub theta0: Vec<f64>,
    pub beta0: f64,
    /// Strictly increasing sample sizes.
    pub n_grid: Vec<usize>,
    #[serde(default = "default_replicas")]
    pub replicas: usize,
    pub seed: u64,
    pub theta_bound: f64,
    pub beta_bound: f64,
    #[serde(default)]
    pub tolerance: Option<f64>,
    #[serde(default)]
    pub step_size: Option<f64>,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    /// Gibbs sweeps discarded before the retained sample (logistic).
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    /// Gibbs sweeps between burn-in and the retained sample (logistic).
    #[serde(default = "default_thinning")]
    pub thinning: usize,
    /// Threshold constant for the `||A||_F^2 >= c n` validator check.
    #[serde(default = "default_frob_c")]
    pub frob_c: f64,
    /// Logistic features are clamped to `[-M, M]` with this `M`.
    #[serde(default = "default_feature_clamp")]
    pub feature_clamp: Option<f64>,
    /// Constant diagonal of `D` (linear model).
    #[serde(default = "default_d_diag_value")]
    pub d_diag_value: f64,
}

impl ExperimentSpec {
    pub fn parameter_box(&self) -> Result<ParameterBox> {
        ParameterBox::new(self.theta_bound, self.beta_bound)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_grid.is_empty() {
            return Err(Error::InvalidArgument("n_grid must be nonempty".into()));
        }
        if self.n_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument(
                "n_grid must be strictly increasing".into(),
            ));
        }
        if self.replicas == 0 {
            return Err(Error::InvalidArgument("replicas must be >= 1".into()));
        }
        if self.theta0.len() != self.d {
            return Err(Error::InvalidArgument(format!(
                "theta0 has length {}, expected d = {}",
                self.theta0.len(),
                self.d
            )));
        }
        let bounds = self.parameter_box()?;
        let theta0 = DVector::from_column_slice(&self.theta0);
        if !bounds.strictly_contains(&theta0, self.beta0) {
            return Err(Error::InvalidArgument(
                "true parameters must lie strictly inside the box".into(),
            ));
        }
        if let Some(m) = self.feature_clamp {
            if m.is_nan() || m <= 0.0 {
                return Err(Error::InvalidArgument(
                    "feature_clamp must be positive".into(),
                ));
            }
        }
        if self.d_diag_value.is_nan() || self.d_diag_value <= 0.0 {
            return Err(Error::InvalidArgument(
                "d_diag_value must be positive".into(),
            ));
        }
        Ok(())
    }

    fn fit_options(&self) -> FitOptions {
        FitOptions {
            step_size: self.step_size,
            tolerance: self.tolerance,
            max_iters: self.max_iters,
            record_trace: false,
        }
    }
}

/// One (n, replica) cell. `error` is present whenever an estimate exists,
/// including best-iterate estimates from runs that hit the iteration cap or
/// stalled on the box boundary; `converged` distinguishes those.
#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub n: usize,
    pub replica: usize,
    pub seed: u64,
    pub error: Option<f64>,
    pub iterations: usize,
    pub runtime_ms: u64,
    pub converged: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NSummary {
    pub n: usize,
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidationFlag {
    pub n: usize,
    pub overall: bool,
    pub failed_checks: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct RateReport {
    pub spec: ExperimentSpec,
    pub cells: Vec<CellResult>,
    pub summaries: Vec<NSummary>,
    /// Least-squares slope of ln(median error) against ln(n); `None` with
    /// fewer than two usable grid points.
    pub slope: Option<f64>,
    pub validation: Vec<ValidationFlag>,
    /// Number of cells that did not converge.
    pub failures: usize,
}

pub fn run_consistency(spec: &ExperimentSpec) -> Result<RateReport> {
    run_consistency_with_jobs(spec, 1)
}

pub fn run_consistency_with_jobs(spec: &ExperimentSpec, jobs: usize) -> Result<RateReport> {
    spec.validate()?;
    let bounds = spec.parameter_box()?;
    let theta0 = DVector::from_column_slice(&spec.theta0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;

    let mut cells = Vec::with_capacity(spec.n_grid.len() * spec.replicas);
    let mut validation = Vec::new();

    for &n in &spec.n_grid {
        let graph_seed = derive_seed(spec.seed, &[n as u64, TAG_GRAPH]);
        let a = Arc::new(build_graph(&spec.graph, n, graph_seed)?);
        let design = Arc::new(build_design(spec, n)?);

        let report = validate_assumptions(&a, &design, &bounds, spec.model, spec.frob_c)?;
        validation.push(ValidationFlag {
            n,
            overall: report.overall,
            failed_checks: report
                .checks
                .iter()
                .filter(|c| !c.passed)
                .map(|c| c.name.clone())
                .collect(),
        });

        let eigen = match spec.model {
            ModelKind::Linear => Some(PrecisionEigen::new(&a, design.d_diag())?),
            ModelKind::Logistic => None,
        };

        let mut group: Vec<CellResult> = pool.install(|| {
            (0..spec.replicas)
                .into_par_iter()
                .map(|replica| {
                    run_cell(spec, &bounds, &theta0, &a, &design, eigen.as_ref(), n, replica)
                })
                .collect()
        });
        group.sort_by_key(|c| c.replica);
        cells.extend(group);
    }

    let summaries = summarize(&cells, &spec.n_grid);
    let slope = log_log_slope(
        &summaries
            .iter()
            .filter(|s| s.count > 0 && s.median > 0.0)
            .map(|s| (s.n as f64, s.median))
            .collect::<Vec<_>>(),
    );
    let failures = cells.iter().filter(|c| !c.converged).count();
    Ok(RateReport {
        spec: spec.clone(),
        cells,
        summaries,
        slope,
        validation,
        failures,
    })
}

#[allow(clippy::too_many_arguments)]
fn run_cell(
    spec: &ExperimentSpec,
    bounds: &ParameterBox,
    theta0: &DVector<f64>,
    a: &Arc<InteractionMatrix>,
    design: &Arc<RegressionDesign>,
    eigen: Option<&PrecisionEigen>,
    n: usize,
    replica: usize,
) -> CellResult {
    let cell_seed = derive_seed(spec.seed, &[n as u64, replica as u64, TAG_SAMPLE]);
    let start = Instant::now();
    let outcome = match spec.model {
        ModelKind::Logistic => logistic_cell(spec, bounds, theta0, a, design, cell_seed),
        ModelKind::Linear => linear_cell(spec, bounds, theta0, a, design, eigen, cell_seed),
    };
    let runtime_ms = start.elapsed().as_millis() as u64;
    let (error, iterations, converged) = outcome;
    CellResult {
        n,
        replica,
        seed: cell_seed,
        error,
        iterations,
        runtime_ms,
        converged,
    }
}

fn logistic_cell(
    spec: &ExperimentSpec,
    bounds: &ParameterBox,
    theta0: &DVector<f64>,
    a: &Arc<InteractionMatrix>,
    design: &Arc<RegressionDesign>,
    cell_seed: u64,
) -> (Option<f64>, usize, bool) {
    let truth = LogisticParams::new(theta0.clone(), spec.beta0);
    let gibbs = GibbsConfig {
        burn_in: spec.burn_in,
        n_samples: 1,
        thinning: spec.thinning,
        seed: cell_seed,
    };
    let y = ising_gibbs_sample(&truth, design, a, &gibbs).pop().expect("one sample");
    let dataset = match Dataset::logistic(design.clone(), a.clone(), y) {
        Ok(ds) => ds,
        Err(_) => return (None, 0, false),
    };
    match fit_logistic_mple(&dataset, bounds, &spec.fit_options()) {
        Ok((fitted, diag)) => {
            let err = logistic_error(&fitted, theta0, spec.beta0);
            (Some(err), diag.iterations, true)
        }
        Err(Error::IterationCap { best }) | Err(Error::Stalled { best }) => {
            let fitted = LogisticParams::from_vector(&DVector::from_column_slice(&best.point));
            let err = logistic_error(&fitted, theta0, spec.beta0);
            (Some(err), best.iterations, false)
        }
        Err(_) => (None, 0, false),
    }
}

fn logistic_error(fitted: &LogisticParams, theta0: &DVector<f64>, beta0: f64) -> f64 {
    let dt = (&fitted.theta - theta0).norm_squared();
    (dt + (fitted.beta - beta0).powi(2)).sqrt()
}

fn linear_cell(
    spec: &ExperimentSpec,
    bounds: &ParameterBox,
    theta0: &DVector<f64>,
    a: &Arc<InteractionMatrix>,
    design: &Arc<RegressionDesign>,
    eigen: Option<&PrecisionEigen>,
    cell_seed: u64,
) -> (Option<f64>, usize, bool) {
    let eigen = eigen.expect("linear cells carry an eigendecomposition");
    let y = match gaussian_sample(theta0, spec.beta0, design, a, 1, cell_seed) {
        Ok(mut v) => v.pop().expect("one sample"),
        Err(_) => return (None, 0, false),
    };
    let dataset = match Dataset::linear(design.clone(), a.clone(), y) {
        Ok(ds) => ds,
        Err(_) => return (None, 0, false),
    };
    match fit_linear_mle_with_eigen(&dataset, bounds, &spec.fit_options(), eigen) {
        Ok((fitted, diag)) => {
            let err = linear_error(&fitted.theta, fitted.beta, theta0, spec.beta0);
            (Some(err), diag.iterations, true)
        }
        Err(Error::IterationCap { best }) | Err(Error::Stalled { best }) => {
            let v = DVector::from_column_slice(&best.point);
            let fitted = crate::model::LinearParams::from_vector(&v);
            let err = linear_error(&fitted.theta, fitted.beta, theta0, spec.beta0);
            (Some(err), best.iterations, false)
        }
        Err(_) => (None, 0, false),
    }
}

/// Error over `(theta, beta)` only; the auxiliary `kappa` block is not part
/// of the reported estimate.
fn linear_error(theta: &DVector<f64>, beta: f64, theta0: &DVector<f64>, beta0: f64) -> f64 {
    ((theta - theta0).norm_squared() + (beta - beta0).powi(2)).sqrt()
}

fn build_graph(graph: &GraphSpec, n: usize, seed: u64) -> Result<InteractionMatrix> {
    match graph {
        GraphSpec::Regular { degree } => build_bounded_degree(n, *degree, seed),
        GraphSpec::Sk => build_sk(n, seed),
        GraphSpec::CurieWeiss => build_curie_weiss(n),
        GraphSpec::File { path } => {
            let m = read_matrix(Path::new(path))?;
            if m.nrows() != n {
                return Err(Error::InvalidArgument(format!(
                    "graph file {path} has order {}, but the grid requests n = {n}",
                    m.nrows()
                )));
            }
            InteractionMatrix::from_matrix(m)
        }
    }
}

fn build_design(spec: &ExperimentSpec, n: usize) -> Result<RegressionDesign> {
    let feat_seed = derive_seed(spec.seed, &[n as u64, TAG_FEATURES]);
    let mut rng = rng_from_seed(feat_seed);
    let mut x = DMatrix::<f64>::from_fn(n, spec.d, |_, _| rng.sample(StandardNormal));
    if spec.model == ModelKind::Logistic {
        if let Some(m) = spec.feature_clamp {
            x.apply(|v| *v = v.clamp(-m, m));
        }
    }
    match spec.model {
        ModelKind::Logistic => RegressionDesign::new(x),
        ModelKind::Linear => {
            let d_diag = DVector::from_element(n, spec.d_diag_value);
            RegressionDesign::with_d_diag(x, d_diag)
        }
    }
}

fn summarize(cells: &[CellResult], n_grid: &[usize]) -> Vec<NSummary> {
    n_grid
        .iter()
        .map(|&n| {
            let mut errs: Vec<f64> = cells
                .iter()
                .filter(|c| c.n == n)
                .filter_map(|c| c.error)
                .collect();
            errs.sort_by(|a, b| a.partial_cmp(b).unwrap());
            if errs.is_empty() {
                NSummary {
                    n,
                    median: f64::NAN,
                    q25: f64::NAN,
                    q75: f64::NAN,
                    count: 0,
                }
            } else {
                NSummary {
                    n,
                    median: quantile(&errs, 0.5),
                    q25: quantile(&errs, 0.25),
                    q75: quantile(&errs, 0.75),
                    count: errs.len(),
                }
            }
        })
        .collect()
}

/// Linear-interpolation quantile of a sorted slice.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let frac = pos - lo as f64;
    if lo + 1 < sorted.len() {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    } else {
        sorted[lo]
    }
}

/// Least-squares slope of `ln y` against `ln x`. `None` for fewer than two
/// points.
pub fn log_log_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let k = points.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(x, y) in points {
        let lx = x.ln();
        let ly = y.ln();
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    let denom = k * sxx - sx * sx;
    if denom.abs() < 1e-12 {
        return None;
    }
    Some((k * sxy - sx * sy) / denom)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorsRow {
    pub n: usize,
    pub replica: usize,
    pub seed: u64,
    pub error: Option<f64>,
    pub iters: usize,
    pub runtime_ms: u64,
}

/// Writes `errors.csv`, `summary.csv`, and `summary.json` into `dir`.
///
/// All statistical content in the three files is a pure function of the
/// spec and seeds; the `runtime_ms` column in `errors.csv` is the one
/// wall-clock quantity and the only field that varies between reruns.
pub fn emit_report(report: &RateReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let errors_path = dir.join("errors.csv");
    let mut errors = String::from("n,replica,seed,error,iters,runtime_ms\n");
    for c in &report.cells {
        let err = c.error.map(|e| format!("{e}")).unwrap_or_default();
        errors.push_str(&format!(
            "{},{},{},{},{},{}\n",
            c.n, c.replica, c.seed, err, c.iterations, c.runtime_ms
        ));
    }
    fs::write(&errors_path, errors).map_err(|e| Error::io(&errors_path, e))?;

    let summary_path = dir.join("summary.csv");
    let mut summary = String::from("n,median,q25,q75\n");
    for s in &report.summaries {
        summary.push_str(&format!("{},{},{},{}\n", s.n, s.median, s.q25, s.q75));
    }
    fs::write(&summary_path, summary).map_err(|e| Error::io(&summary_path, e))?;

    let json_path = dir.join("summary.json");
    let body = serde_json::json!({
        "slope": report.slope,
        "failures": report.failures,
        "validation": report.validation,
        "spec": report.spec,
    });
    fs::write(&json_path, serde_json::to_string_pretty(&body)?)
        .map_err(|e| Error::io(&json_path, e))?;
    Ok(())
}

/// Reads back `errors.csv` rows exactly as written.
pub fn read_errors_csv(path: &Path) -> Result<Vec<ErrorsRow>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 || line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(Error::parse(path, format!("line {}: expected 6 fields", i + 1)));
        }
        let parse_err = |what: &str| Error::parse(path, format!("line {}: bad {what}", i + 1));
        rows.push(ErrorsRow {
            n: fields[0].parse().map_err(|_| parse_err("n"))?,
            replica: fields[1].parse().map_err(|_| parse_err("replica"))?,
            seed: fields[2].parse().map_err(|_| parse_err("seed"))?,
            error: if fields[3].is_empty() {
                None
            } else {
                Some(fields[3].parse().map_err(|_| parse_err("error"))?)
            },
            iters: fields[4].parse().map_err(|_| parse_err("iters"))?,
            runtime_ms: fields[5].parse().map_err(|_| parse_err("runtime_ms"))?,
        });
    }
    Ok(rows)
}
