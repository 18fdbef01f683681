//! Regression with network-dependent responses.
//!
//! Two models share the same estimation machinery: a logistic model whose
//! joint law is an Ising measure with per-site external fields
//! `theta^T x_i` and interaction strength `beta` on a known matrix `A`, and
//! a linear model whose noise precision is `beta A + D`. Both are estimated
//! from a SINGLE dependent sample by projected gradient descent — on the
//! log-pseudolikelihood (logistic) or on a reparametrized log-likelihood
//! that is convex in `(theta, beta, kappa)` (linear).
//!
//! The crate provides, per subsystem:
//!
//! * [`model`] — interaction matrices, designs, parameter boxes, datasets;
//! * [`interaction`] — graph builders, the assumption validator, hat-matrix
//!   and index-selection diagnostics;
//! * [`sampling`] — Gibbs and exact samplers for the logistic model,
//!   Cholesky sampling for the linear one, small-n enumeration oracles;
//! * [`logistic`] / [`linear`] — objectives, gradients, Hessians, fits;
//! * [`optimize`] — the shared box-projected gradient descent;
//! * [`experiments`] — the consistency-rate harness with CSV/JSON output;
//! * [`io`] — bit-exact matrix and sample-table serialization.

pub mod error;
pub mod experiments;
pub mod interaction;
pub mod io;
pub mod linear;
pub mod logistic;
pub mod model;
pub mod moments;
pub mod optimize;
pub mod rng;
pub mod sampling;

pub use error::{Error, Result};
pub use model::{
    Dataset, InteractionMatrix, LinearParams, LogisticParams, ModelKind, ParameterBox,
    RegressionDesign,
};
pub use moments::quadratic_gaussian_moments;
pub use optimize::{FitDiagnostics, FitOptions, PgdConfig};
