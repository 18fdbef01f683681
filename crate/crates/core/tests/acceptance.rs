//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line
//! with the measured quantity and its required band. Run with
//! `cargo test -p netreg-core --test acceptance -- --nocapture` to see every
//! line; the heavy rate experiments take a few minutes each.

use std::sync::Arc;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use netreg_core::experiments::{
    emit_report, read_errors_csv, run_consistency_with_jobs, ExperimentSpec, GraphSpec,
};
use netreg_core::interaction::{build_bounded_degree, build_sk};
use netreg_core::linear::{fit_linear_mle, nll_gradient, nll_hessian, nll_value};
use netreg_core::logistic::{fit_logistic_mple, lpl_gradient, lpl_hessian, lpl_value};
use netreg_core::model::{
    Dataset, InteractionMatrix, LinearParams, LogisticParams, ModelKind, ParameterBox,
    RegressionDesign,
};
use netreg_core::optimize::{pgd_minimize, project_box, FitOptions, PgdConfig};
use netreg_core::rng::{rng_from_seed, Rng as CoreRng};
use netreg_core::sampling::{
    gaussian_sample, ising_exact_distribution, ising_gibbs_sample, logistic_conditional,
    GibbsConfig,
};

fn verdict(name: &str, pass: bool, detail: &str, start: Instant) {
    let status = if pass { "PASS" } else { "FAIL" };
    println!(
        "[{status}] {name}: {detail} ({:.1}s)",
        start.elapsed().as_secs_f64()
    );
}

fn normal_matrix(n: usize, d: usize, rng: &mut CoreRng) -> DMatrix<f64> {
    DMatrix::from_fn(n, d, |_, _| rng.sample(StandardNormal))
}

/// Random symmetric zero-diagonal matrix rescaled to `||A||_inf <= 1`.
fn bounded_interaction(n: usize, seed: u64) -> InteractionMatrix {
    let mut rng = rng_from_seed(seed);
    let raw = InteractionMatrix::from_upper(n, |_, _| rng.gen::<f64>() * 2.0 - 1.0);
    let scale = raw.norm_inf().max(1.0);
    InteractionMatrix::from_matrix(raw.matrix() / scale).unwrap()
}

fn random_spins(n: usize, rng: &mut CoreRng) -> DVector<f64> {
    DVector::from_fn(n, |_, _| if rng.gen::<bool>() { 1.0 } else { -1.0 })
}

// ---------------------------------------------------------------------------
// 1. Conditionals of the exact joint match the one-site logistic formula.
// ---------------------------------------------------------------------------
#[test]
fn c01_logistic_conditionals_match_exact_joint() {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for seed in 0..50u64 {
        let mut rng = rng_from_seed(1000 + seed);
        let n = 2 + (seed as usize) % 5; // 2..=6
        let x = normal_matrix(n, 1, &mut rng);
        let design = RegressionDesign::new(x).unwrap();
        let a = bounded_interaction(n, 2000 + seed);
        let params = LogisticParams::new(
            DVector::from_fn(1, |_, _| rng.gen::<f64>() - 0.5),
            rng.gen::<f64>() - 0.5,
        );
        let exact = ising_exact_distribution(&params, &design, &a).unwrap();
        for k in 0..(1usize << n) {
            let y = exact.config(k);
            for i in 0..n {
                let direct = logistic_conditional(i, &y, &params, &design, &a);
                let joint = exact.conditional_plus(i, k);
                worst = worst.max((direct - joint).abs());
            }
        }
    }
    let pass = worst <= 1e-12;
    verdict(
        "criterion 01 conditional/joint equivalence",
        pass,
        &format!("max |difference| = {worst:.3e} (tol 1e-12, 50 seeds, n <= 6)"),
        start,
    );
    assert!(pass);
}

// ---------------------------------------------------------------------------
// 2. Analytic gradients and Hessians match central finite differences.
// ---------------------------------------------------------------------------
#[test]
fn c02_gradients_and_hessians_match_finite_differences() {
    let start = Instant::now();
    let h = 1e-5;
    let mut worst_lg: f64 = 0.0;
    let mut worst_lh: f64 = 0.0;
    let mut worst_ng: f64 = 0.0;
    let mut worst_nh: f64 = 0.0;

    for seed in 0..20u64 {
        let mut rng = rng_from_seed(3000 + seed);
        let n = 20 + (seed as usize % 4) * 5;
        let d = 2;
        let x = normal_matrix(n, d, &mut rng);
        let design = Arc::new(RegressionDesign::new(x).unwrap());
        let a = Arc::new(bounded_interaction(n, 4000 + seed));
        let y = random_spins(n, &mut rng);
        let ds = Dataset::logistic(design.clone(), a.clone(), y).unwrap();
        let params = LogisticParams::new(
            DVector::from_fn(d, |_, _| rng.gen::<f64>() - 0.5),
            (rng.gen::<f64>() - 0.5) * 0.8,
        );
        let g = lpl_gradient(&params, &ds).unwrap();
        let hess = lpl_hessian(&params, &ds).unwrap();
        let v = params.to_vector();
        for k in 0..d + 1 {
            let mut up = v.clone();
            let mut dn = v.clone();
            up[k] += h;
            dn[k] -= h;
            let pu = LogisticParams::from_vector(&up);
            let pd = LogisticParams::from_vector(&dn);
            let fd = (lpl_value(&pu, &ds).unwrap() - lpl_value(&pd, &ds).unwrap()) / (2.0 * h);
            worst_lg = worst_lg.max((g[k] - fd).abs());
            let gu = lpl_gradient(&pu, &ds).unwrap();
            let gd = lpl_gradient(&pd, &ds).unwrap();
            for r in 0..d + 1 {
                worst_lh = worst_lh.max((hess[(r, k)] - (gu[r] - gd[r]) / (2.0 * h)).abs());
            }
        }
    }

    for seed in 0..20u64 {
        let mut rng = rng_from_seed(5000 + seed);
        let n = 15 + (seed as usize % 3) * 5;
        let d = 2;
        let x = normal_matrix(n, d, &mut rng);
        let design = Arc::new(RegressionDesign::new(x).unwrap());
        let a = Arc::new(build_sk(n, 6000 + seed).unwrap());
        let theta0 = DVector::from_fn(d, |_, _| rng.gen::<f64>() - 0.5);
        let y = gaussian_sample(&theta0, 0.2, &design, &a, 1, 7000 + seed).unwrap()[0].clone();
        let ds = Dataset::linear(design, a, y).unwrap();
        let params = LinearParams::new(
            DVector::from_fn(d, |_, _| (rng.gen::<f64>() - 0.5) * 0.8),
            (rng.gen::<f64>() - 0.5) * 0.4,
            DVector::from_fn(d, |_, _| (rng.gen::<f64>() - 0.5) * 0.2),
        )
        .unwrap();
        let g = nll_gradient(&params, &ds).unwrap();
        let hess = nll_hessian(&params, &ds).unwrap();
        let v = params.to_vector();
        for k in 0..2 * d + 1 {
            let mut up = v.clone();
            let mut dn = v.clone();
            up[k] += h;
            dn[k] -= h;
            let pu = LinearParams::from_vector(&up);
            let pd = LinearParams::from_vector(&dn);
            let fd = (nll_value(&pu, &ds).unwrap() - nll_value(&pd, &ds).unwrap()) / (2.0 * h);
            worst_ng = worst_ng.max((g[k] - fd).abs());
            let gu = nll_gradient(&pu, &ds).unwrap();
            let gd = nll_gradient(&pd, &ds).unwrap();
            for r in 0..2 * d + 1 {
                worst_nh = worst_nh.max((hess[(r, k)] - (gu[r] - gd[r]) / (2.0 * h)).abs());
            }
        }
    }

    let pass = worst_lg <= 1e-7 && worst_lh <= 1e-6 && worst_ng <= 1e-6 && worst_nh <= 1e-5;
    verdict(
        "criterion 02 finite-difference agreement",
        pass,
        &format!(
            "lpl grad {worst_lg:.2e} (tol 1e-7), lpl hess {worst_lh:.2e} (1e-6), \
             nll grad {worst_ng:.2e} (1e-6), nll hess {worst_nh:.2e} (1e-5); 20 instances each"
        ),
        start,
    );
    assert!(pass);
}

// ---------------------------------------------------------------------------
// 3. Smoothness: lambda_max(-H) <= d T^2 + 1 under the bounded-feature
//    premise ||x_i||^2 <= d T^2 (features clamped to [-T, T]).
// ---------------------------------------------------------------------------
#[test]
fn c03_logistic_smoothness_bound() {
    let start = Instant::now();
    let mut worst_excess = f64::NEG_INFINITY;
    let mut rng = rng_from_seed(8000);
    for trial in 0..100u64 {
        let n = 20 + (trial as usize % 5) * 8;
        let d = 1 + (trial as usize) % 3;
        let theta_bound = 0.5 + rng.gen::<f64>() * 1.5;
        let x = DMatrix::<f64>::from_fn(n, d, |_, _| {
            let v: f64 = rng.sample(StandardNormal);
            v.clamp(-theta_bound, theta_bound)
        });
        let design = Arc::new(RegressionDesign::new(x).unwrap());
        let a = Arc::new(bounded_interaction(n, 9000 + trial));
        let y = random_spins(n, &mut rng);
        let ds = Dataset::logistic(design, a, y).unwrap();
        let params = LogisticParams::new(
            DVector::from_fn(d, |_, _| (rng.gen::<f64>() * 2.0 - 1.0) * theta_bound),
            rng.gen::<f64>() * 2.0 - 1.0,
        );
        let neg_h = -lpl_hessian(&params, &ds).unwrap();
        let lmax = neg_h.symmetric_eigen().eigenvalues.max();
        let bound = d as f64 * theta_bound * theta_bound + 1.0;
        worst_excess = worst_excess.max(lmax - bound);
    }
    let pass = worst_excess <= 1e-9;
    verdict(
        "criterion 03 smoothness bound",
        pass,
        &format!("max lambda_max(-H) excess over dT^2+1 = {worst_excess:.3e} (tol 1e-9, 100 points)"),
        start,
    );
    assert!(pass);
}

// ---------------------------------------------------------------------------
// 4. Variance bounds, evaluated exactly over all 2^12 configurations:
//    E[Q_beta^2] <= (12 + 4B) n and sum_k E[Q_theta_k^2] <= (4 + 4B) M^2 d n.
// ---------------------------------------------------------------------------
#[test]
fn c04_variance_bounds_exact_at_n12() {
    let start = Instant::now();
    let n = 12usize;
    let d = 2usize;
    let beta_cap = 0.5; // B
    let feature_cap = 1.5; // M
    let mut worst_beta_ratio: f64 = 0.0;
    let mut worst_theta_ratio: f64 = 0.0;

    for seed in 0..5u64 {
        let mut rng = rng_from_seed(10_000 + seed);
        let x = DMatrix::<f64>::from_fn(n, d, |_, _| (rng.gen::<f64>() * 2.0 - 1.0) * feature_cap);
        let design = RegressionDesign::new(x.clone()).unwrap();
        let a = bounded_interaction(n, 11_000 + seed);
        let theta0 = DVector::from_fn(d, |_, _| (rng.gen::<f64>() * 2.0 - 1.0) * 0.8);
        let beta0 = (rng.gen::<f64>() * 2.0 - 1.0) * beta_cap;
        let params = LogisticParams::new(theta0.clone(), beta0);
        let exact = ising_exact_distribution(&params, &design, &a).unwrap();

        let mut e_q_beta_sq = 0.0;
        let mut e_q_theta_sq = vec![0.0; d];
        for k in 0..(1usize << n) {
            let y = exact.config(k);
            let m = a.magnetizations(&y);
            let mut q_beta = 0.0;
            let mut q_theta = vec![0.0; d];
            for i in 0..n {
                let arg = beta0 * m[i] + theta0.dot(&design.feature_row(i));
                let resid = y[i] - arg.tanh();
                q_beta += resid * m[i];
                for t in 0..d {
                    q_theta[t] += resid * x[(i, t)];
                }
            }
            let p = exact.probs[k];
            e_q_beta_sq += p * q_beta * q_beta;
            for t in 0..d {
                e_q_theta_sq[t] += p * q_theta[t] * q_theta[t];
            }
        }
        let beta_bound_value = (12.0 + 4.0 * beta_cap) * n as f64;
        let theta_bound_value =
            (4.0 + 4.0 * beta_cap) * feature_cap * feature_cap * d as f64 * n as f64;
        worst_beta_ratio = worst_beta_ratio.max(e_q_beta_sq / beta_bound_value);
        worst_theta_ratio =
            worst_theta_ratio.max(e_q_theta_sq.iter().sum::<f64>() / theta_bound_value);
    }
    let pass = worst_beta_ratio <= 1.0 && worst_theta_ratio <= 1.0;
    verdict(
        "criterion 04 variance bounds at n=12",
        pass,
        &format!(
            "E[Q_beta^2] reaches {:.1}% of (12+4B)n; theta sum reaches {:.1}% of (4+4B)M^2dn \
             (5 instances, exact enumeration)",
            100.0 * worst_beta_ratio,
            100.0 * worst_theta_ratio
        ),
        start,
    );
    assert!(pass);
}

// ---------------------------------------------------------------------------
// 5. Both fitters land within 1e-3 (l2) of a dense grid search.
// ---------------------------------------------------------------------------
#[test]
fn c05_fits_match_dense_grid_search() {
    let start = Instant::now();

    // Logistic: d = 1, n = 50, box [-0.6, 0.6] x [-0.3, 0.3], grid step 2e-4.
    let logistic_dist = {
        let n = 50;
        let mut rng = rng_from_seed(12_004);
        let x = normal_matrix(n, 1, &mut rng);
        let design = Arc::new(RegressionDesign::new(x).unwrap());
        let a = Arc::new(build_bounded_degree(n, 4, 12_104).unwrap());
        let truth = LogisticParams::new(DVector::from_vec(vec![0.35]), 0.15);
        let cfg = GibbsConfig::new(1, 12_204);
        let y = ising_gibbs_sample(&truth, &design, &a, &cfg).pop().unwrap();
        let ds = Dataset::logistic(design.clone(), a.clone(), y.clone()).unwrap();
        let bounds = ParameterBox::new(0.6, 0.3).unwrap();
        let options = FitOptions {
            tolerance: Some(1e-9),
            ..FitOptions::default()
        };
        let (fitted, _) = fit_logistic_mple(&ds, &bounds, &options).unwrap();

        // Dense grid argmax of the pseudolikelihood at resolution 2e-4,
        // evaluated directly from magnetizations and features.
        let m = a.magnetizations(&y);
        let step = 2e-4_f64;
        let theta_steps = (2.0 * 0.6 / step).round() as usize; // 6000 intervals
        let beta_steps = (2.0 * 0.3 / step).round() as usize;
        let xs: Vec<f64> = (0..n).map(|i| design.x()[(i, 0)]).collect();
        let best = rayon_grid_max(beta_steps + 1, |bi| {
            let beta = -0.3 + bi as f64 * step;
            let mut best_val = f64::NEG_INFINITY;
            let mut best_theta = 0.0;
            let bm: Vec<f64> = (0..n).map(|i| beta * m[i]).collect();
            for ti in 0..=theta_steps {
                let theta = -0.6 + ti as f64 * step;
                let mut acc = 0.0;
                for i in 0..n {
                    let arg = bm[i] + theta * xs[i];
                    acc += y[i] * arg - ln_cosh_local(arg);
                }
                if acc > best_val {
                    best_val = acc;
                    best_theta = theta;
                }
            }
            (best_val, (best_theta, beta))
        });
        let (grid_theta, grid_beta) = best.1;
        ((fitted.theta[0] - grid_theta).powi(2) + (fitted.beta - grid_beta).powi(2)).sqrt()
    };

    // Linear: d = 1, n = 40, box [-0.8, 0.8] x [-0.4, 0.4] x [-0.32, 0.32],
    // grid step 2e-3 over (theta, beta, kappa).
    let linear_dist = {
        let n = 40;
        let mut rng = rng_from_seed(13_009);
        let x = normal_matrix(n, 1, &mut rng);
        let design = Arc::new(RegressionDesign::new(x.clone()).unwrap());
        let a = Arc::new(build_sk(n, 13_109).unwrap());
        let theta0 = DVector::from_vec(vec![0.5]);
        let y = gaussian_sample(&theta0, 0.2, &design, &a, 1, 13_209).unwrap()[0].clone();
        let ds = Dataset::linear(design.clone(), a.clone(), y.clone()).unwrap();
        let bounds = ParameterBox::new(0.8, 0.4).unwrap();
        let options = FitOptions {
            tolerance: Some(1e-8),
            ..FitOptions::default()
        };
        let (fitted, _) = fit_linear_mle(&ds, &bounds, &options).unwrap();

        // Grid argmin of the negative log-likelihood. For fixed beta the
        // objective is quadratic in (theta, kappa) given five scalars, so
        // the triple loop stays cheap.
        let step = 2e-3_f64;
        let tb = 0.8;
        let bb = 0.4;
        let kb = bounds.kappa_bound(); // 0.32
        let theta_steps = (2.0 * tb / step).round() as usize;
        let beta_steps = (2.0 * bb / step).round() as usize;
        let kappa_steps = (2.0 * kb / step).round() as usize;
        let u = a.matrix() * &x; // A X (n x 1)
        let v = x.clone(); // D X with D = I
        let y_a_y = (y.transpose() * a.matrix() * &y)[0];
        let y_dot_u = y.dot(&u.column(0).into_owned());
        let y_dot_v = y.dot(&v.column(0).into_owned());
        let y_d_y = y.norm_squared();

        let best = rayon_grid_max(beta_steps + 1, |bi| {
            let beta = -bb + bi as f64 * step;
            let mut p = a.matrix() * beta;
            for i in 0..n {
                p[(i, i)] += 1.0;
            }
            let chol = p.cholesky().expect("pd over the box");
            let logdet = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
            let pu = chol.solve(&u);
            let pv = chol.solve(&v);
            let alpha = (u.transpose() * &pu)[0];
            let gamma = (u.transpose() * &pv)[0];
            let delta = (v.transpose() * &pv)[0];
            let base = 0.5 * (y_d_y + beta * y_a_y) - 0.5 * logdet;
            let mut best_val = f64::NEG_INFINITY;
            let mut best_tk = (0.0, 0.0);
            for ti in 0..=theta_steps {
                let theta = -tb + ti as f64 * step;
                for ki in 0..=kappa_steps {
                    let kappa = -kb + ki as f64 * step;
                    let nll = base - kappa * y_dot_u - theta * y_dot_v
                        + 0.5
                            * (kappa * kappa * alpha
                                + 2.0 * kappa * theta * gamma
                                + theta * theta * delta);
                    // grid argmin == argmax of -nll
                    if -nll > best_val {
                        best_val = -nll;
                        best_tk = (theta, kappa);
                    }
                }
            }
            (best_val, (best_tk.0, beta, best_tk.1))
        });
        let (gt, gb, gk) = best.1;
        ((fitted.theta[0] - gt).powi(2) + (fitted.beta - gb).powi(2) + (fitted.kappa[0] - gk).powi(2))
            .sqrt()
    };

    let pass = logistic_dist <= 1e-3 && linear_dist <= 1e-3;
    verdict(
        "criterion 05 grid-search optimality",
        pass,
        &format!(
            "logistic fit-to-grid-argmax distance {logistic_dist:.2e}, linear {linear_dist:.2e} (tol 1e-3)"
        ),
        start,
    );
    assert!(pass);
}

fn ln_cosh_local(t: f64) -> f64 {
    let a = t.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

/// Parallel argmax over an outer grid dimension; deterministic reduction
/// (ties go to the lower index).
fn rayon_grid_max<T: Send + Clone>(
    outer: usize,
    eval: impl Fn(usize) -> (f64, T) + Sync,
) -> (f64, T) {
    use rayon::prelude::*;
    (0..outer)
        .into_par_iter()
        .map(|i| (i, eval(i)))
        .collect::<Vec<_>>()
        .into_iter()
        .fold(None, |acc: Option<(f64, T)>, (_, (val, payload))| match acc {
            Some((bv, bp)) if bv >= val => Some((bv, bp)),
            _ => Some((val, payload)),
        })
        .expect("nonempty grid")
}

// ---------------------------------------------------------------------------
// 6. Logistic sqrt-n rate on a 4-regular graph.
// ---------------------------------------------------------------------------
#[test]
fn c06_logistic_rate_regular_graph() {
    let start = Instant::now();
    let spec = ExperimentSpec {
        model: ModelKind::Logistic,
        graph: GraphSpec::Regular { degree: 4 },
        d: 2,
        theta0: vec![0.5, -0.3],
        beta0: 0.2,
        n_grid: vec![500, 1000, 2000, 4000, 8000],
        replicas: 20,
        seed: 20260809,
        theta_bound: 1.0,
        beta_bound: 0.4,
        tolerance: Some(2e-3),
        step_size: None,
        max_iters: 100_000,
        burn_in: 200,
        thinning: 5,
        frob_c: 0.1,
        feature_clamp: Some(3.0),
        d_diag_value: 1.0,
    };
    let report = run_consistency_with_jobs(&spec, 2).unwrap();
    let slope = report.slope.unwrap();
    let decays = report.summaries.last().unwrap().median < report.summaries[0].median;
    let pass = (-0.65..=-0.35).contains(&slope) && decays;
    verdict(
        "criterion 06 logistic sqrt-n rate",
        pass,
        &format!(
            "log-log slope = {slope:.4}, band [-0.65, -0.35]; medians {:?}",
            report
                .summaries
                .iter()
                .map(|s| (s.n, (s.median * 1e4).round() / 1e4))
                .collect::<Vec<_>>()
        ),
        start,
    );
    assert!(pass);
}

// ---------------------------------------------------------------------------
// 7. Linear sqrt-n rate on SK matrices.
// ---------------------------------------------------------------------------
#[test]
fn c07_linear_rate_sk() {
    let start = Instant::now();
    let spec = ExperimentSpec {
        model: ModelKind::Linear,
        graph: GraphSpec::Sk,
        d: 2,
        theta0: vec![0.5, -0.3],
        beta0: 0.2,
        n_grid: vec![250, 500, 1000, 2000],
        replicas: 20,
        seed: 20260809,
        theta_bound: 1.0,
        beta_bound: 0.4,
        tolerance: None,
        step_size: None,
        max_iters: 100_000,
        burn_in: 200,
        thinning: 5,
        frob_c: 0.1,
        feature_clamp: None,
        d_diag_value: 1.0,
    };
    let report = run_consistency_with_jobs(&spec, 2).unwrap();
    let slope = report.slope.unwrap();
    let pass = (-0.7..=-0.3).contains(&slope);
    verdict(
        "criterion 07 linear sqrt-n rate",
        pass,
        &format!(
            "log-log slope = {slope:.4}, band [-0.7, -0.3]; medians {:?}",
            report
                .summaries
                .iter()
                .map(|s| (s.n, (s.median * 1e4).round() / 1e4))
                .collect::<Vec<_>>()
        ),
        start,
    );
    assert!(pass);
}

// ---------------------------------------------------------------------------
// 8. Curie-Weiss negative control: no sqrt-n decay.
// ---------------------------------------------------------------------------
#[test]
fn c08_curie_weiss_negative_control() {
    let start = Instant::now();
    let spec = ExperimentSpec {
        model: ModelKind::Logistic,
        graph: GraphSpec::CurieWeiss,
        d: 2,
        theta0: vec![0.5, -0.3],
        beta0: 0.2,
        n_grid: vec![500, 1000, 2000, 4000, 8000],
        replicas: 20,
        seed: 20260809,
        theta_bound: 1.0,
        beta_bound: 0.4,
        tolerance: Some(2e-3),
        step_size: None,
        max_iters: 100_000,
        burn_in: 200,
        thinning: 5,
        frob_c: 0.1,
        feature_clamp: Some(3.0),
        d_diag_value: 1.0,
    };
    let report = run_consistency_with_jobs(&spec, 2).unwrap();
    let slope = report.slope.unwrap();
    let frob_flagged = report
        .validation
        .iter()
        .all(|v| v.failed_checks.iter().any(|c| c == "frobenius_lower"));
    let pass = slope > -0.2 && frob_flagged;
    verdict(
        "criterion 08 Curie-Weiss negative control",
        pass,
        &format!(
            "log-log slope = {slope:.4} (must exceed -0.2); Frobenius condition flagged at every n: {frob_flagged}"
        ),
        start,
    );
    assert!(pass);
}

// ---------------------------------------------------------------------------
// 9. Projected gradient descent respects the geometric contraction bound.
// ---------------------------------------------------------------------------
#[test]
fn c09_pgd_geometric_contract() {
    let start = Instant::now();
    // Separable strongly convex quadratic with known alpha and lambda.
    let h = [0.5_f64, 1.2, 2.0, 4.0];
    let alpha = 0.5;
    let lambda = 4.0;

    // Interior optimum: verify via the recorded trace.
    let c_interior = [0.3_f64, -0.2, 0.4, -0.5];
    let obj = move |x: &DVector<f64>| {
        let mut v = 0.0;
        let mut g = DVector::zeros(4);
        for i in 0..4 {
            let r = x[i] - c_interior[i];
            v += 0.5 * h[i] * r * r;
            g[i] = h[i] * r;
        }
        (v, g)
    };
    let lo = DVector::from_element(4, -1.0);
    let hi = DVector::from_element(4, 1.0);
    let init = DVector::from_vec(vec![-0.9, 0.9, -0.9, 0.9]);
    let cfg = PgdConfig::new(1.0 / lambda, 1e-10, 10_000)
        .unwrap()
        .with_trace();
    let out = pgd_minimize(&obj, &init, &lo, &hi, &cfg).unwrap();
    let xstar = DVector::from_column_slice(&c_interior);
    let trace = out.trace.unwrap();
    let r0 = (&trace.points[0] - &xstar).norm_squared();
    // trace.points[t] is the iterate after t gradient steps, i.e. x_{t+1}
    // with x_1 the projected start, so the bound exponent is t.
    let mut worst_factor_interior: f64 = 0.0;
    for (t, point) in trace.points.iter().enumerate().skip(1) {
        let bound = (-(alpha * t as f64) / lambda).exp() * r0;
        let err = (point - &xstar).norm_squared();
        worst_factor_interior = worst_factor_interior.max(err / bound);
    }

    // Exterior optimum: iterate the projection recursion directly; the
    // constrained minimizer of a separable quadratic is the clamped center.
    let c_exterior = DVector::from_vec(vec![3.0, -0.2, 0.4, -5.0]);
    let xstar2 = project_box(&c_exterior, &lo, &hi).unwrap();
    let mut x = project_box(&init, &lo, &hi).unwrap();
    let r0 = (&x - &xstar2).norm_squared();
    let mut worst_factor_boundary: f64 = 0.0;
    for t in 0..200 {
        let mut g = DVector::zeros(4);
        for i in 0..4 {
            g[i] = h[i] * (x[i] - c_exterior[i]);
        }
        x = project_box(&(&x - g / lambda), &lo, &hi).unwrap();
        // After this update x is x_{t+2}, i.e. the theorem's index is t + 1.
        let bound = (-(alpha * (t + 1) as f64) / lambda).exp() * r0;
        let err = (&x - &xstar2).norm_squared();
        worst_factor_boundary = worst_factor_boundary.max(err / bound);
    }

    let worst = worst_factor_interior.max(worst_factor_boundary);
    let pass = worst <= 1.0 + 1e-9;
    verdict(
        "criterion 09 PGD geometric bound",
        pass,
        &format!(
            "max error/bound ratio = {worst:.6} (interior {worst_factor_interior:.6}, \
             boundary {worst_factor_boundary:.6}; allowed 1 + 1e-9)"
        ),
        start,
    );
    assert!(pass);
}

// ---------------------------------------------------------------------------
// 10. Deterministic reproducibility of experiment output.
// ---------------------------------------------------------------------------
#[test]
fn c10_reproducible_experiment_output() {
    let start = Instant::now();
    let spec = ExperimentSpec {
        model: ModelKind::Logistic,
        graph: GraphSpec::Regular { degree: 4 },
        d: 2,
        theta0: vec![0.5, -0.3],
        beta0: 0.2,
        n_grid: vec![100, 200],
        replicas: 3,
        seed: 99,
        theta_bound: 1.0,
        beta_bound: 0.4,
        tolerance: None,
        step_size: None,
        max_iters: 100_000,
        burn_in: 60,
        thinning: 2,
        frob_c: 0.1,
        feature_clamp: Some(3.0),
        d_diag_value: 1.0,
    };
    // Different job counts on the two runs: scheduling must not leak into
    // the output.
    let r1 = run_consistency_with_jobs(&spec, 1).unwrap();
    let r2 = run_consistency_with_jobs(&spec, 2).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let d1 = dir.path().join("run1");
    let d2 = dir.path().join("run2");
    emit_report(&r1, &d1).unwrap();
    emit_report(&r2, &d2).unwrap();

    let summary_equal = std::fs::read(d1.join("summary.csv")).unwrap()
        == std::fs::read(d2.join("summary.csv")).unwrap();
    let json_equal = std::fs::read(d1.join("summary.json")).unwrap()
        == std::fs::read(d2.join("summary.json")).unwrap();

    // errors.csv carries one wall-clock column (runtime_ms); every
    // statistical field must match bit-for-bit.
    let rows1 = read_errors_csv(&d1.join("errors.csv")).unwrap();
    let rows2 = read_errors_csv(&d2.join("errors.csv")).unwrap();
    let stats_equal = rows1.len() == rows2.len()
        && rows1.iter().zip(&rows2).all(|(a, b)| {
            a.n == b.n
                && a.replica == b.replica
                && a.seed == b.seed
                && a.error.map(f64::to_bits) == b.error.map(f64::to_bits)
                && a.iters == b.iters
        });

    let pass = summary_equal && json_equal && stats_equal;
    verdict(
        "criterion 10 reproducibility",
        pass,
        &format!(
            "summary.csv byte-identical: {summary_equal}, summary.json byte-identical: {json_equal}, \
             errors.csv statistical columns bit-identical across 1-job and 2-job runs: {stats_equal}"
        ),
        start,
    );
    assert!(pass);
}
