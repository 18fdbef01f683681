//! Closed-form moments of a Gaussian quadratic form.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Mean and variance of `f(z) = z^T A z + b^T z + c` for `z ~ N(mu, sigma)`:
///
/// ```text
/// E[f]  = tr(A sigma) + f(mu)
/// V[f]  = 2 tr(A sigma A sigma) + 4 mu^T A sigma A mu + 4 b^T sigma A mu + b^T sigma b
/// ```
///
/// `A` is symmetrized internally (only its symmetric part contributes to the
/// quadratic form). `sigma` must be symmetric positive semidefinite.
pub fn quadratic_gaussian_moments(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    c: f64,
    mu: &DVector<f64>,
    sigma: &DMatrix<f64>,
) -> Result<(f64, f64)> {
    let n = mu.len();
    if a.nrows() != n || a.ncols() != n || b.len() != n || sigma.nrows() != n || sigma.ncols() != n
    {
        return Err(Error::DimensionMismatch(format!(
            "quadratic form dimensions do not match mu (len {n}): A {}x{}, b {}, sigma {}x{}",
            a.nrows(),
            a.ncols(),
            b.len(),
            sigma.nrows(),
            sigma.ncols()
        )));
    }
    check_psd(sigma)?;

    let a_sym = (a + a.transpose()) * 0.5;
    let a_sigma = &a_sym * sigma;

    let f_mu = (mu.transpose() * &a_sym * mu)[0] + b.dot(mu) + c;
    let mean = a_sigma.trace() + f_mu;

    let a_mu = &a_sym * mu;
    let sigma_a_mu = sigma * &a_mu;
    let var = 2.0 * (&a_sigma * &a_sigma).trace()
        + 4.0 * a_mu.dot(&sigma_a_mu)
        + 4.0 * b.dot(&sigma_a_mu)
        + b.dot(&(sigma * b));
    Ok((mean, var))
}

fn check_psd(sigma: &DMatrix<f64>) -> Result<()> {
    let n = sigma.nrows();
    let scale = sigma.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1.0);
    for i in 0..n {
        for j in (i + 1)..n {
            if (sigma[(i, j)] - sigma[(j, i)]).abs() > 1e-10 * scale {
                return Err(Error::NotPositiveSemidefinite(
                    "covariance is not symmetric".into(),
                ));
            }
        }
    }
    // Cholesky certifies strict positive definiteness cheaply; fall back to
    // an eigenvalue check so boundary PSD inputs (e.g. sigma = 0) pass.
    if sigma.clone().cholesky().is_some() {
        return Ok(());
    }
    let eig = sigma.clone().symmetric_eigen();
    let min = eig.eigenvalues.min();
    if min < -1e-10 * scale {
        return Err(Error::NotPositiveSemidefinite(format!(
            "covariance has eigenvalue {min:.3e}"
        )));
    }
    Ok(())
}
