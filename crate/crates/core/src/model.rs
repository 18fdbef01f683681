//! Shared domain types: interaction matrices, regression designs, parameter
//! vectors, the feasible box, and datasets pairing a response realization
//! with its design and interaction structure.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;
use rand::Rng as _;

/// Matrices up to this order get their spectral norm from a full symmetric
/// eigendecomposition; larger ones use power iteration on `A^2`.
const EIGEN_NORM_CUTOFF: usize = 512;

/// Symmetric interaction matrix with zero diagonal and cached norms.
///
/// Immutable after construction. The spectral norm is exact (via symmetric
/// eigendecomposition) up to order 512 and a deterministic power-iteration
/// estimate beyond that; the infinity and Frobenius norms are always exact
/// sums.
#[derive(Debug, Clone)]
pub struct InteractionMatrix {
    a: DMatrix<f64>,
    norm2: f64,
    norm_inf: f64,
    frob_sq: f64,
}

impl InteractionMatrix {
    /// Builds the matrix from its strict upper triangle: `f(i, j)` is called
    /// once per pair `i < j` and mirrored, so symmetry is exact by
    /// construction and the diagonal is exactly zero.
    pub fn from_upper(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut a = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            for j in (i + 1)..n {
                let v = f(i, j);
                a[(i, j)] = v;
                a[(j, i)] = v;
            }
        }
        Self::from_symmetric_unchecked(a)
    }

    /// Wraps an existing square matrix. The diagonal must be exactly zero;
    /// off-diagonal entries are mirrored from the upper triangle and must
    /// already agree with the lower triangle to within `1e-12` absolute.
    pub fn from_matrix(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "interaction matrix must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        for i in 0..m.nrows() {
            if m[(i, i)] != 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "interaction matrix diagonal must be exactly zero, entry ({i},{i}) = {}",
                    m[(i, i)]
                )));
            }
            for j in (i + 1)..m.ncols() {
                if (m[(i, j)] - m[(j, i)]).abs() > 1e-12 {
                    return Err(Error::InvalidArgument(format!(
                        "interaction matrix is not symmetric at ({i},{j}): {} vs {}",
                        m[(i, j)],
                        m[(j, i)]
                    )));
                }
            }
        }
        let n = m.nrows();
        let mut a = m;
        for i in 0..n {
            for j in (i + 1)..n {
                let v = a[(i, j)];
                a[(j, i)] = v;
            }
        }
        Ok(Self::from_symmetric_unchecked(a))
    }

    pub fn zeros(n: usize) -> Self {
        Self::from_symmetric_unchecked(DMatrix::zeros(n, n))
    }

    fn from_symmetric_unchecked(a: DMatrix<f64>) -> Self {
        let norm_inf = max_row_l1(&a);
        let frob_sq = a.iter().map(|v| v * v).sum();
        let norm2 = spectral_norm(&a, frob_sq);
        Self {
            a,
            norm2,
            norm_inf,
            frob_sq,
        }
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    /// Spectral norm `||A||_2`.
    pub fn norm2(&self) -> f64 {
        self.norm2
    }

    /// Maximum row l1 norm `||A||_inf`.
    pub fn norm_inf(&self) -> f64 {
        self.norm_inf
    }

    /// Squared Frobenius norm `||A||_F^2`.
    pub fn frob_sq(&self) -> f64 {
        self.frob_sq
    }

    /// Magnetizations `m_i(y) = sum_j A_ij y_j`.
    pub fn magnetizations(&self, y: &DVector<f64>) -> DVector<f64> {
        &self.a * y
    }
}

fn max_row_l1(a: &DMatrix<f64>) -> f64 {
    (0..a.nrows())
        .map(|i| a.row(i).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn spectral_norm(a: &DMatrix<f64>, frob_sq: f64) -> f64 {
    if frob_sq == 0.0 {
        return 0.0;
    }
    let n = a.nrows();
    if n <= EIGEN_NORM_CUTOFF {
        let eig = a.clone().symmetric_eigen();
        return eig.eigenvalues.iter().map(|v| v.abs()).fold(0.0, f64::max);
    }
    // Power iteration on A^2 (PSD, so the Rayleigh quotient converges from
    // below to ||A||_2^2). Deterministic seeded start vector.
    let mut rng = rng_from_seed(0x5eed_4a11_u64);
    let mut v = DVector::<f64>::from_fn(n, |_, _| rng.gen::<f64>() - 0.5);
    let nv = v.norm();
    if nv == 0.0 {
        return frob_sq.sqrt();
    }
    v /= nv;
    let mut estimate_sq = 0.0_f64;
    for _ in 0..200 {
        let w = a * &v;
        let s2 = w.norm_squared();
        if s2 == 0.0 {
            break;
        }
        let next = a * &w;
        let nn = next.norm();
        if nn == 0.0 {
            estimate_sq = s2;
            break;
        }
        v = next / nn;
        if (s2 - estimate_sq).abs() <= 1e-13 * s2 {
            estimate_sq = s2;
            break;
        }
        estimate_sq = s2;
    }
    estimate_sq.sqrt()
}

/// Feature matrix `X` (n x d) plus the diagonal `D` used by the linear
/// model (ignored by the logistic one). `Q = X^T X / n` is cached.
#[derive(Debug, Clone)]
pub struct RegressionDesign {
    x: DMatrix<f64>,
    d_diag: DVector<f64>,
    q: DMatrix<f64>,
}

impl RegressionDesign {
    /// Design with `D = I`.
    pub fn new(x: DMatrix<f64>) -> Result<Self> {
        let d = DVector::from_element(x.nrows(), 1.0);
        Self::with_d_diag(x, d)
    }

    pub fn with_d_diag(x: DMatrix<f64>, d_diag: DVector<f64>) -> Result<Self> {
        let (n, d) = x.shape();
        if n <= d {
            return Err(Error::InvalidArgument(format!(
                "need more samples than features, got n = {n}, d = {d}"
            )));
        }
        if d_diag.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "d_diag has length {} but X has {} rows",
                d_diag.len(),
                n
            )));
        }
        if d_diag.iter().any(|&v| v.is_nan() || v <= 0.0) {
            return Err(Error::InvalidArgument(
                "d_diag entries must be strictly positive".into(),
            ));
        }
        let q = x.transpose() * &x / n as f64;
        Ok(Self { x, d_diag, q })
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn d_diag(&self) -> &DVector<f64> {
        &self.d_diag
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn d(&self) -> usize {
        self.x.ncols()
    }

    /// Empirical covariance `Q = X^T X / n`.
    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    /// Row `i` of `X` as a column vector.
    pub fn feature_row(&self, i: usize) -> DVector<f64> {
        self.x.row(i).transpose()
    }
}

/// The feasible box. Logistic parameters live in `[-T, T]^d x [-B, B]`;
/// linear ones in `[-T, T]^d x [-B, B] x [-TB, TB]^d` where `T` is the
/// theta bound and `B` the beta bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParameterBox {
    pub theta_bound: f64,
    pub beta_bound: f64,
}

impl ParameterBox {
    pub fn new(theta_bound: f64, beta_bound: f64) -> Result<Self> {
        if theta_bound.is_nan() || theta_bound <= 0.0 || beta_bound.is_nan() || beta_bound <= 0.0 {
            return Err(Error::InvalidArgument(
                "parameter box bounds must be strictly positive".into(),
            ));
        }
        Ok(Self {
            theta_bound,
            beta_bound,
        })
    }

    pub fn kappa_bound(&self) -> f64 {
        self.theta_bound * self.beta_bound
    }

    /// (lower, upper) bounds for the packed logistic vector `(theta, beta)`.
    pub fn logistic_bounds(&self, d: usize) -> (DVector<f64>, DVector<f64>) {
        let mut lo = DVector::from_element(d + 1, -self.theta_bound);
        let mut hi = DVector::from_element(d + 1, self.theta_bound);
        lo[d] = -self.beta_bound;
        hi[d] = self.beta_bound;
        (lo, hi)
    }

    /// (lower, upper) bounds for the packed linear vector `(theta, beta, kappa)`.
    pub fn linear_bounds(&self, d: usize) -> (DVector<f64>, DVector<f64>) {
        let mut lo = DVector::from_element(2 * d + 1, -self.theta_bound);
        let mut hi = DVector::from_element(2 * d + 1, self.theta_bound);
        lo[d] = -self.beta_bound;
        hi[d] = self.beta_bound;
        let kb = self.kappa_bound();
        for k in 0..d {
            lo[d + 1 + k] = -kb;
            hi[d + 1 + k] = kb;
        }
        (lo, hi)
    }

    pub fn contains_logistic(&self, p: &LogisticParams) -> bool {
        p.theta.iter().all(|t| t.abs() <= self.theta_bound) && p.beta.abs() <= self.beta_bound
    }

    pub fn contains_linear(&self, p: &LinearParams) -> bool {
        let kb = self.kappa_bound();
        p.theta.iter().all(|t| t.abs() <= self.theta_bound)
            && p.beta.abs() <= self.beta_bound
            && p.kappa.iter().all(|k| k.abs() <= kb)
    }

    /// True when the point lies strictly inside the box (no boundary contact).
    pub fn strictly_contains(&self, theta: &DVector<f64>, beta: f64) -> bool {
        theta.iter().all(|t| t.abs() < self.theta_bound) && beta.abs() < self.beta_bound
    }
}

/// Logistic model parameters `(theta, beta)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticParams {
    pub theta: DVector<f64>,
    pub beta: f64,
}

impl LogisticParams {
    pub fn new(theta: DVector<f64>, beta: f64) -> Self {
        Self { theta, beta }
    }

    pub fn zeros(d: usize) -> Self {
        Self::new(DVector::zeros(d), 0.0)
    }

    pub fn d(&self) -> usize {
        self.theta.len()
    }

    /// Packs as `(theta_1 .. theta_d, beta)`.
    pub fn to_vector(&self) -> DVector<f64> {
        let d = self.d();
        let mut v = DVector::zeros(d + 1);
        v.rows_mut(0, d).copy_from(&self.theta);
        v[d] = self.beta;
        v
    }

    pub fn from_vector(v: &DVector<f64>) -> Self {
        let d = v.len() - 1;
        Self::new(v.rows(0, d).into_owned(), v[d])
    }
}

/// Linear model parameters `(theta, beta, kappa)`. At the data-generating
/// truth `kappa = beta * theta`; a fitted point need not satisfy that.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearParams {
    pub theta: DVector<f64>,
    pub beta: f64,
    pub kappa: DVector<f64>,
}

impl LinearParams {
    pub fn new(theta: DVector<f64>, beta: f64, kappa: DVector<f64>) -> Result<Self> {
        if theta.len() != kappa.len() {
            return Err(Error::DimensionMismatch(format!(
                "theta has length {} but kappa has length {}",
                theta.len(),
                kappa.len()
            )));
        }
        Ok(Self { theta, beta, kappa })
    }

    pub fn zeros(d: usize) -> Self {
        Self {
            theta: DVector::zeros(d),
            beta: 0.0,
            kappa: DVector::zeros(d),
        }
    }

    /// Parameters at a data-generating truth, where `kappa = beta * theta`.
    pub fn at_truth(theta: DVector<f64>, beta: f64) -> Self {
        let kappa = &theta * beta;
        Self { theta, beta, kappa }
    }

    pub fn d(&self) -> usize {
        self.theta.len()
    }

    /// Packs as `(theta_1 .. theta_d, beta, kappa_1 .. kappa_d)`.
    pub fn to_vector(&self) -> DVector<f64> {
        let d = self.d();
        let mut v = DVector::zeros(2 * d + 1);
        v.rows_mut(0, d).copy_from(&self.theta);
        v[d] = self.beta;
        v.rows_mut(d + 1, d).copy_from(&self.kappa);
        v
    }

    pub fn from_vector(v: &DVector<f64>) -> Self {
        let d = (v.len() - 1) / 2;
        Self {
            theta: v.rows(0, d).into_owned(),
            beta: v[d],
            kappa: v.rows(d + 1, d).into_owned(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Logistic,
    Linear,
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ModelKind::Logistic => write!(f, "logistic"),
            ModelKind::Linear => write!(f, "linear"),
        }
    }
}

/// One realization of responses paired with its design and interaction
/// matrix. For logistic datasets the responses are spins in `{-1, +1}` and
/// the magnetizations `m_i(y)` are cached at construction.
///
/// Design and interaction are held behind `Arc` so replicas of an experiment
/// can share one (possibly large) interaction matrix.
#[derive(Debug, Clone)]
pub struct Dataset {
    design: Arc<RegressionDesign>,
    interaction: Arc<InteractionMatrix>,
    y: DVector<f64>,
    kind: ModelKind,
    magnetizations: Option<DVector<f64>>,
}

impl Dataset {
    pub fn logistic(
        design: Arc<RegressionDesign>,
        interaction: Arc<InteractionMatrix>,
        y: DVector<f64>,
    ) -> Result<Self> {
        check_dataset_dims(&design, &interaction, &y)?;
        if y.iter().any(|&v| v != 1.0 && v != -1.0) {
            return Err(Error::InvalidArgument(
                "logistic responses must be exactly -1 or +1".into(),
            ));
        }
        let m = interaction.magnetizations(&y);
        Ok(Self {
            design,
            interaction,
            y,
            kind: ModelKind::Logistic,
            magnetizations: Some(m),
        })
    }

    pub fn linear(
        design: Arc<RegressionDesign>,
        interaction: Arc<InteractionMatrix>,
        y: DVector<f64>,
    ) -> Result<Self> {
        check_dataset_dims(&design, &interaction, &y)?;
        Ok(Self {
            design,
            interaction,
            y,
            kind: ModelKind::Linear,
            magnetizations: None,
        })
    }

    pub fn design(&self) -> &RegressionDesign {
        &self.design
    }

    pub fn interaction(&self) -> &InteractionMatrix {
        &self.interaction
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn d(&self) -> usize {
        self.design.d()
    }

    /// Cached magnetizations; present only for logistic datasets.
    pub fn magnetizations(&self) -> Option<&DVector<f64>> {
        self.magnetizations.as_ref()
    }

    pub(crate) fn require_kind(&self, kind: ModelKind) -> Result<()> {
        if self.kind != kind {
            return Err(Error::InvalidArgument(format!(
                "expected a {kind} dataset, got {}",
                self.kind
            )));
        }
        Ok(())
    }
}

fn check_dataset_dims(
    design: &RegressionDesign,
    interaction: &InteractionMatrix,
    y: &DVector<f64>,
) -> Result<()> {
    if design.n() != interaction.n() || design.n() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "design has n = {}, interaction n = {}, y has length {}",
            design.n(),
            interaction.n(),
            y.len()
        )));
    }
    Ok(())
}
