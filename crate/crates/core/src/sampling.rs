//! Samplers and exact small-instance oracles for the two dependent-response
//! models: the Ising-form logistic model and the Gaussian graphical linear
//! model.
//!
//! Spin-vector convention for the exact distribution: configuration index
//! `k` encodes site `i` as `+1` when bit `i` of `k` is set.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::model::{InteractionMatrix, LogisticParams, RegressionDesign};
use crate::rng::{rng_from_seed, Rng};
use rand::Rng as _;
use rand_distr::StandardNormal;

/// Enumeration guard: the exact distribution is a table of `2^n` entries.
pub const MAX_EXACT_SITES: usize = 20;

/// `Pr[y_i = +1 | y_{-i}]` for the logistic model:
/// `1 / (1 + exp(-2 (theta^T x_i + beta m_i(y))))` with
/// `m_i(y) = sum_{j != i} A_ij y_j` (the diagonal of `A` is zero, so the
/// cached full sum is the same thing).
pub fn logistic_conditional(
    i: usize,
    y: &DVector<f64>,
    params: &LogisticParams,
    design: &RegressionDesign,
    a: &InteractionMatrix,
) -> f64 {
    let m_i = a.matrix().row(i).transpose().dot(y);
    let field = params.theta.dot(&design.feature_row(i)) + params.beta * m_i;
    sigmoid(2.0 * field)
}

/// Conditional probability of `y_i = target` for `target` in `{-1, +1}`.
/// The two targets are exact complements by construction.
pub fn logistic_conditional_signed(
    i: usize,
    y: &DVector<f64>,
    params: &LogisticParams,
    design: &RegressionDesign,
    a: &InteractionMatrix,
    target: f64,
) -> f64 {
    let p_plus = logistic_conditional(i, y, params, design, a);
    if target > 0.0 {
        p_plus
    } else {
        1.0 - p_plus
    }
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Exact joint distribution of the logistic model over all `2^n` spin
/// configurations, with its log partition function.
///
/// The joint is `Pr[y = s] ∝ exp(sum_i h_i s_i + beta * sum_{i<j} A_ij s_i s_j)`
/// with `h_i = theta^T x_i`; counting each pair once is what makes the
/// conditionals of this joint coincide with [`logistic_conditional`].
#[derive(Debug, Clone)]
pub struct IsingExact {
    pub probs: Vec<f64>,
    pub log_z: f64,
    n: usize,
}

impl IsingExact {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Decodes configuration `index` into a spin vector.
    pub fn config(&self, index: usize) -> DVector<f64> {
        DVector::from_fn(self.n, |i, _| if index >> i & 1 == 1 { 1.0 } else { -1.0 })
    }

    /// `E[y_i]` under the exact distribution.
    pub fn marginal_mean(&self, i: usize) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(k, p)| if k >> i & 1 == 1 { *p } else { -*p })
            .sum()
    }

    /// `Pr[y_i = +1 | y_{-i}]` read off the table for the configuration
    /// containing `y_{-i}`.
    pub fn conditional_plus(&self, i: usize, config_index: usize) -> f64 {
        let plus = config_index | (1 << i);
        let minus = config_index & !(1 << i);
        let p_plus = self.probs[plus];
        let p_minus = self.probs[minus];
        p_plus / (p_plus + p_minus)
    }
}

pub fn ising_exact_distribution(
    params: &LogisticParams,
    design: &RegressionDesign,
    a: &InteractionMatrix,
) -> Result<IsingExact> {
    let n = a.n();
    if n > MAX_EXACT_SITES {
        return Err(Error::InvalidArgument(format!(
            "exact enumeration is limited to n <= {MAX_EXACT_SITES}, got n = {n}"
        )));
    }
    if design.n() != n {
        return Err(Error::DimensionMismatch(format!(
            "design has n = {}, interaction has n = {n}",
            design.n()
        )));
    }
    let fields: Vec<f64> = (0..n)
        .map(|i| params.theta.dot(&design.feature_row(i)))
        .collect();
    let count = 1usize << n;
    let mut energies = Vec::with_capacity(count);
    for k in 0..count {
        let spin = |i: usize| if k >> i & 1 == 1 { 1.0 } else { -1.0 };
        let mut e = 0.0;
        for (i, field) in fields.iter().enumerate() {
            e += field * spin(i);
            for j in (i + 1)..n {
                e += params.beta * a.matrix()[(i, j)] * spin(i) * spin(j);
            }
        }
        energies.push(e);
    }
    let max = energies.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let sum_exp: f64 = energies.iter().map(|e| (e - max).exp()).sum();
    let log_z = max + sum_exp.ln();
    let probs = energies.iter().map(|e| (e - log_z).exp()).collect();
    Ok(IsingExact { probs, log_z, n })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GibbsConfig {
    /// Full sweeps discarded before any sample is retained.
    pub burn_in: usize,
    pub n_samples: usize,
    /// Full sweeps between retained samples.
    pub thinning: usize,
    pub seed: u64,
}

impl GibbsConfig {
    pub fn new(n_samples: usize, seed: u64) -> Self {
        Self {
            burn_in: 200,
            n_samples,
            thinning: 5,
            seed,
        }
    }
}

/// Systematic-scan Gibbs sampler for the logistic model. Sites are visited
/// in index order; each visit resamples the site from its conditional
/// given the current configuration. Magnetizations are maintained
/// incrementally and refreshed before each retained sample.
pub fn ising_gibbs_sample(
    params: &LogisticParams,
    design: &RegressionDesign,
    a: &InteractionMatrix,
    config: &GibbsConfig,
) -> Vec<DVector<f64>> {
    let n = a.n();
    let mut rng = rng_from_seed(config.seed);
    let fields: Vec<f64> = (0..n)
        .map(|i| params.theta.dot(&design.feature_row(i)))
        .collect();
    let mut y = DVector::from_fn(n, |_, _| if rng.gen::<bool>() { 1.0 } else { -1.0 });
    let mut m = a.magnetizations(&y);

    let sweep = |y: &mut DVector<f64>, m: &mut DVector<f64>, rng: &mut Rng| {
        for i in 0..n {
            let p_plus = sigmoid(2.0 * (fields[i] + params.beta * m[i]));
            let new = if rng.gen::<f64>() < p_plus { 1.0 } else { -1.0 };
            let old = y[i];
            if new != old {
                y[i] = new;
                let delta = new - old; // +-2
                m.axpy(delta, &a.matrix().column(i), 1.0);
            }
        }
    };

    for _ in 0..config.burn_in {
        sweep(&mut y, &mut m, &mut rng);
    }
    let mut samples = Vec::with_capacity(config.n_samples);
    while samples.len() < config.n_samples {
        for _ in 0..config.thinning.max(1) {
            sweep(&mut y, &mut m, &mut rng);
        }
        m = a.magnetizations(&y); // shed accumulated float drift
        samples.push(y.clone());
    }
    samples
}

/// Conditional law of `y_i` given `y_{-i}` in the linear model:
/// mean `theta^T x_i - (beta / D_ii) sum_{j != i} A_ij (y_j - theta^T x_j)`,
/// variance `1 / D_ii`.
pub fn gaussian_conditional(
    i: usize,
    y: &DVector<f64>,
    theta: &DVector<f64>,
    beta: f64,
    design: &RegressionDesign,
    a: &InteractionMatrix,
) -> (f64, f64) {
    let resid = y - design.x() * theta;
    let weighted: f64 = a.matrix().row(i).transpose().dot(&resid); // A_ii = 0 drops j = i
    let d_ii = design.d_diag()[i];
    let mean = theta.dot(&design.feature_row(i)) - beta / d_ii * weighted;
    (mean, 1.0 / d_ii)
}

/// Draws exact samples `y = X theta + L^{-T} w` where `L L^T = beta A + D`
/// and `w` is standard normal. Errors when `beta A + D` is not positive
/// definite, naming the offending `beta`.
pub fn gaussian_sample(
    theta: &DVector<f64>,
    beta: f64,
    design: &RegressionDesign,
    a: &InteractionMatrix,
    n_samples: usize,
    seed: u64,
) -> Result<Vec<DVector<f64>>> {
    if design.n() != a.n() {
        return Err(Error::DimensionMismatch(format!(
            "design has n = {}, interaction has n = {}",
            design.n(),
            a.n()
        )));
    }
    let n = design.n();
    let mut p = a.matrix() * beta;
    for i in 0..n {
        p[(i, i)] += design.d_diag()[i];
    }
    let chol = p.cholesky().ok_or(Error::NotPositiveDefinite {
        what: "beta A + D".into(),
        beta: Some(beta),
    })?;
    let l_t = chol.l().transpose();
    let mean = design.x() * theta;
    let mut rng = rng_from_seed(seed);
    let mut out = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let w = DVector::<f64>::from_fn(n, |_, _| rng.sample(StandardNormal));
        let eps = l_t
            .solve_upper_triangular(&w)
            .ok_or(Error::NotPositiveDefinite {
                what: "beta A + D (triangular solve)".into(),
                beta: Some(beta),
            })?;
        out.push(&mean + eps);
    }
    Ok(out)
}
