//! Projected gradient descent over a box, shared by both estimators.
//!
//! Fixed step size, gradient-norm stopping rule, componentwise clipping as
//! the (exact) Euclidean projection onto the box. No line search.

use nalgebra::DVector;

use crate::error::{BestIterate, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PgdConfig {
    pub step_size: f64,
    /// Stop once the gradient norm drops to this value or below.
    pub tolerance: f64,
    pub max_iters: usize,
    /// Record every iterate, objective value, and gradient norm.
    pub record_trace: bool,
}

impl PgdConfig {
    pub fn new(step_size: f64, tolerance: f64, max_iters: usize) -> Result<Self> {
        let positive = |v: f64| !v.is_nan() && v > 0.0;
        if !positive(step_size) || !positive(tolerance) || max_iters == 0 {
            return Err(Error::InvalidArgument(
                "step size and tolerance must be positive and max_iters >= 1".into(),
            ));
        }
        Ok(Self {
            step_size,
            tolerance,
            max_iters,
            record_trace: false,
        })
    }

    pub fn with_trace(mut self) -> Self {
        self.record_trace = true;
        self
    }
}

/// Knobs for the model-fitting wrappers. `None` fields fall back to the
/// model-specific defaults (inverse smoothness bound for the step size,
/// `1/sqrt(n)` for the tolerance).
#[derive(Debug, Clone)]
pub struct FitOptions {
    pub step_size: Option<f64>,
    pub tolerance: Option<f64>,
    pub max_iters: usize,
    pub record_trace: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            step_size: None,
            tolerance: None,
            max_iters: 100_000,
            record_trace: false,
        }
    }
}

/// Outcome bookkeeping for a converged fit.
#[derive(Debug, Clone)]
pub struct FitDiagnostics {
    pub iterations: usize,
    pub grad_norm: f64,
    pub objective_value: f64,
    pub step_size: f64,
    pub tolerance: f64,
    /// Coordinates whose gradient was exactly zero at both the initial and
    /// final point — directions the data does not identify (e.g. beta and
    /// kappa when `A = 0`).
    pub flat_coords: Vec<usize>,
    pub trace: Option<PgdTrace>,
}

/// Value-and-gradient oracle. Implemented for closures.
pub trait Objective {
    fn eval(&self, x: &DVector<f64>) -> (f64, DVector<f64>);
}

impl<F> Objective for F
where
    F: Fn(&DVector<f64>) -> (f64, DVector<f64>),
{
    fn eval(&self, x: &DVector<f64>) -> (f64, DVector<f64>) {
        self(x)
    }
}

/// Per-iterate history, recorded when `record_trace` is set. Entry `t`
/// describes the iterate after `t` gradient steps (entry 0 is the projected
/// initial point).
#[derive(Debug, Clone, Default)]
pub struct PgdTrace {
    pub points: Vec<DVector<f64>>,
    pub values: Vec<f64>,
    pub grad_norms: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct PgdOutcome {
    pub x: DVector<f64>,
    pub value: f64,
    pub grad_norm: f64,
    /// Number of gradient steps taken.
    pub iterations: usize,
    pub trace: Option<PgdTrace>,
}

/// Componentwise clamp of `point` onto `[lower, upper]`; this is the
/// Euclidean projection onto the box.
pub fn project_box(
    point: &DVector<f64>,
    lower: &DVector<f64>,
    upper: &DVector<f64>,
) -> Result<DVector<f64>> {
    if point.len() != lower.len() || point.len() != upper.len() {
        return Err(Error::DimensionMismatch(format!(
            "projection: point has length {}, bounds {} / {}",
            point.len(),
            lower.len(),
            upper.len()
        )));
    }
    if lower.iter().zip(upper.iter()).any(|(l, u)| l > u) {
        return Err(Error::InvalidArgument(
            "box projection requires lower <= upper componentwise".into(),
        ));
    }
    Ok(DVector::from_fn(point.len(), |i, _| {
        point[i].clamp(lower[i], upper[i])
    }))
}

/// Minimizes `objective` over the box with fixed-step projected gradient
/// descent, starting from the projection of `init`.
///
/// Returns the first iterate whose gradient norm is at most
/// `config.tolerance`. Hitting the iteration cap is an error carrying the
/// best (lowest gradient norm) iterate seen; reaching an exact projected
/// fixed point with the tolerance unmet (a boundary optimum) errs likewise,
/// since no further step can change the iterate.
pub fn pgd_minimize(
    objective: &dyn Objective,
    init: &DVector<f64>,
    lower: &DVector<f64>,
    upper: &DVector<f64>,
    config: &PgdConfig,
) -> Result<PgdOutcome> {
    let mut x = project_box(init, lower, upper)?;
    let mut trace = config.record_trace.then(PgdTrace::default);
    let mut best: Option<(f64, DVector<f64>, usize)> = None;

    for t in 0..=config.max_iters {
        let (value, grad) = objective.eval(&x);
        let grad_norm = grad.norm();
        if let Some(tr) = trace.as_mut() {
            tr.points.push(x.clone());
            tr.values.push(value);
            tr.grad_norms.push(grad_norm);
        }
        if best.as_ref().is_none_or(|(g, _, _)| grad_norm < *g) {
            best = Some((grad_norm, x.clone(), t));
        }
        if grad_norm <= config.tolerance {
            return Ok(PgdOutcome {
                x,
                value,
                grad_norm,
                iterations: t,
                trace,
            });
        }
        if t == config.max_iters {
            break;
        }
        let stepped = &x - grad * config.step_size;
        let next = project_box(&stepped, lower, upper)?;
        if next == x {
            let (g, point, iters) = best.unwrap();
            return Err(Error::Stalled {
                best: Box::new(BestIterate {
                    point: point.iter().copied().collect(),
                    grad_norm: g,
                    iterations: iters.max(t),
                }),
            });
        }
        x = next;
    }

    let (g, point, _) = best.unwrap();
    Err(Error::IterationCap {
        best: Box::new(BestIterate {
            point: point.iter().copied().collect(),
            grad_norm: g,
            iterations: config.max_iters,
        }),
    })
}
