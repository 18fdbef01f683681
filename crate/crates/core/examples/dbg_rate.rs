use std::sync::Arc;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use netreg_core::interaction::build_bounded_degree;
use netreg_core::logistic::fit_logistic_mple;
use netreg_core::model::{Dataset, LogisticParams, ParameterBox, RegressionDesign};
use netreg_core::optimize::FitOptions;
use netreg_core::rng::{derive_seed, rng_from_seed};
use netreg_core::sampling::{ising_gibbs_sample, GibbsConfig};

fn main() {
    let theta0 = DVector::from_vec(vec![0.5, -0.3]);
    let beta0 = 0.2;
    let bounds = ParameterBox::new(1.0, 0.4).unwrap();
    for &n in &[500usize, 2000, 8000] {
        let a = Arc::new(build_bounded_degree(n, 4, derive_seed(1, &[n as u64, 1])).unwrap());
        let mut rng = rng_from_seed(derive_seed(1, &[n as u64, 2]));
        let x = DMatrix::<f64>::from_fn(n, 2, |_, _| {
            let v: f64 = rng.sample(StandardNormal);
            v.clamp(-3.0, 3.0)
        });
        let design = Arc::new(RegressionDesign::new(x).unwrap());
        for tol_scale in [1.0f64, 0.05] {
            let mut terrs = vec![];
            let mut berrs = vec![];
            let mut iters = vec![];
            for rep in 0..10u64 {
                let cfg = GibbsConfig { burn_in: 200, n_samples: 1, thinning: 5,
                    seed: derive_seed(1, &[n as u64, rep, 3]) };
                let truth = LogisticParams::new(theta0.clone(), beta0);
                let y = ising_gibbs_sample(&truth, &design, &a, &cfg).pop().unwrap();
                let ds = Dataset::logistic(design.clone(), a.clone(), y).unwrap();
                let opts = FitOptions { tolerance: Some(tol_scale / (n as f64).sqrt()), ..Default::default() };
                let (p, d) = fit_logistic_mple(&ds, &bounds, &opts).unwrap();
                terrs.push((&p.theta - &theta0).norm());
                berrs.push((p.beta - beta0).abs());
                iters.push(d.iterations);
            }
            terrs.sort_by(|a, b| a.partial_cmp(b).unwrap());
            berrs.sort_by(|a, b| a.partial_cmp(b).unwrap());
            println!("n={n:5} tol_scale={tol_scale:4}: med theta-err={:.4} med beta-err={:.4} iters~{}",
                terrs[5], berrs[5], iters.iter().sum::<usize>() / 10);
        }
    }
}
