use super::*;
use crate::optim::{central_gradient, Objective};
use crate::simulation::{generate_sample, DgpConfig, Scheme};

fn sample(scheme: Scheme, n: usize, seed: u64) -> Dataset {
    generate_sample(&DgpConfig::new(scheme, n, 1, seed), 0).unwrap()
}

fn quick() -> FitOptions {
    FitOptions {
        n_starts: 3,
        ..FitOptions::default()
    }
}

#[test]
fn chain_rule_gradient_matches_full_differences() {
    let data = sample(Scheme::S2, 150, 1);
    let truth = DgpConfig::new(Scheme::S2, 150, 1, 1).truth();
    for restricted in [false, true] {
        let obj = LikelihoodObjective::new(&data, restricted);
        let mut u = obj.transform.to_unconstrained(&truth);
        u[0] += 0.05;
        u[obj.transform.scalar_offset() + 2] -= 0.1;
        let fast = obj.gradient(&u);
        let slow = central_gradient(|x: &[f64]| obj.value(x), &u);
        for (k, (a, b)) in fast.iter().zip(&slow).enumerate() {
            assert!((a - b).abs() < 1e-6 * b.abs().max(1.0), "coordinate {k}: {a} vs {b}");
        }
    }
}

#[test]
fn scores_sum_to_gradient() {
    let data = sample(Scheme::S3, 80, 2);
    let obj = LikelihoodObjective::new(&data, false);
    let u = obj.transform.to_unconstrained(&DgpConfig::new(Scheme::S3, 80, 1, 2).truth());
    let scores = obj.row_scores(&u).unwrap();
    let g = obj.gradient(&u);
    for k in 0..obj.dim() {
        let s: f64 = scores.iter().map(|r| r[k]).sum();
        assert!((-s / 80.0 - g[k]).abs() < 1e-12);
    }
}

#[test]
fn fit_improves_on_truth_and_is_interior() {
    let data = sample(Scheme::S3, 500, 3);
    let truth = DgpConfig::new(Scheme::S3, 500, 1, 3).truth();
    let f = fit(&data, &quick()).unwrap();
    assert!(f.converged);
    assert!(f.loglik_value >= model::loglik(&truth, &data).unwrap() - 1e-9);
    assert!(f.theta_hat.rho_u > 0.3, "ρ̂_U = {}", f.theta_hat.rho_u);
    assert!(!f.boundary_flag);
    let cov = f.covariance.as_ref().expect("interior fit has a covariance");
    let se = f.std_errors().unwrap();
    assert!(se.iter().all(|s| s.is_finite() && *s > 0.0));
    // Symmetric and positive definite.
    let k = cov.len();
    let m = DMatrix::from_fn(k, k, |i, j| cov[i][j]);
    assert!((&m - m.transpose()).abs().max() < 1e-12 * m.abs().max());
    assert!(m.symmetric_eigen().eigenvalues.min() > 0.0);
}

#[test]
fn restricted_never_beats_unrestricted() {
    let data = sample(Scheme::S1, 300, 4);
    let opts = quick();
    let r = fit(&data, &FitOptions { restrict_rho_u_zero: true, ..opts.clone() }).unwrap();
    assert_eq!(r.theta_hat.rho_u, 0.0);
    assert!(r.restricted && !r.boundary_flag);
    let mut warm = r.theta_hat.clone();
    warm.rho_u = 0.1;
    let u = fit_with_starts(&data, &opts, &[r.theta_hat.clone(), warm]).unwrap();
    assert!(u.loglik_value >= r.loglik_value - 1e-9);
    if let Some(c) = &r.covariance {
        let i = data.dims().rho_u_index();
        assert!(c[i].iter().all(|v| *v == 0.0));
    }
}

#[test]
fn fits_are_deterministic() {
    let data = sample(Scheme::S2, 200, 5);
    let a = fit(&data, &quick()).unwrap();
    let b = fit(&data, &quick()).unwrap();
    assert_eq!(a, b);
    let s1 = starting_values(&data, &quick()).unwrap();
    assert_eq!(s1, starting_values(&data, &quick()).unwrap());
}

#[test]
fn starts_depend_on_seed_only_through_perturbations() {
    let data = sample(Scheme::S2, 200, 6);
    let p = pilot(&data).unwrap();
    let a = start_points(&data, &p, &FitOptions { seed: 1, ..quick() });
    let b = start_points(&data, &p, &FitOptions { seed: 2, ..quick() });
    assert_eq!(a[0].beta, b[0].beta);
    assert_eq!(a[1].beta, b[1].beta);
    assert!(a[1].delta.iter().all(|d| *d == 0.0));
    assert_ne!(a[2].beta, b[2].beta);
    let r = start_points(&data, &p, &FitOptions { seed: 1, restrict_rho_u_zero: true, ..quick() });
    assert_eq!(a, r);
}

#[test]
fn row_order_does_not_matter() {
    let data = sample(Scheme::S2, 200, 7);
    let n = data.n_obs();
    let perm: Vec<usize> = (0..n).rev().collect();
    let shuffled = data.select_rows(&perm).unwrap();
    let t = DgpConfig::new(Scheme::S2, 200, 1, 7).truth();
    let a = model::loglik(&t, &data).unwrap();
    let b = model::loglik(&t, &shuffled).unwrap();
    assert!((a - b).abs() <= 1e-12 * a.abs());
}

#[test]
fn boundary_estimates_refuse_covariance() {
    let data = sample(Scheme::S1, 200, 8);
    let mut f = fit(&data, &FitOptions { compute_covariance: false, ..quick() }).unwrap();
    f.boundary_flag = true;
    f.theta_hat.rho_u = 0.0;
    assert!(matches!(covariance(&f, &data), Err(SfError::BoundaryInference(_))));
    f.boundary_flag = false;
    f.converged = false;
    assert!(matches!(covariance(&f, &data), Err(SfError::NonConvergence(_))));
}

#[test]
fn duplicated_rows_halve_the_variance() {
    let data = sample(Scheme::S3, 400, 9);
    let f = fit(&data, &quick()).unwrap();
    let idx: Vec<usize> = (0..data.n_obs()).chain(0..data.n_obs()).collect();
    let doubled = data.select_rows(&idx).unwrap();
    let f2 = fit(&doubled, &quick()).unwrap();
    let (c1, c2) = (f.covariance.unwrap(), f2.covariance.unwrap());
    // Same optimum (up to optimizer tolerance) ⇒ OPG doubles.
    for k in 0..data.dims().frontier {
        let ratio = c2[k][k] / c1[k][k];
        assert!((ratio - 0.5).abs() < 0.075, "β[{k}] ratio {ratio}");
    }
}

#[test]
fn invalid_options_are_config_errors() {
    let data = sample(Scheme::S1, 50, 10);
    let bad = FitOptions { n_starts: 0, ..FitOptions::default() };
    assert!(matches!(fit(&data, &bad), Err(SfError::Config(_))));
    let bad: std::result::Result<FitOptions, _> = serde_json::from_str(r#"{"n_start": 2}"#);
    assert!(bad.is_err());
}

#[test]
fn supplied_start_with_wrong_dimensions_is_rejected() {
    let data = sample(Scheme::S1, 50, 11);
    let mut t = DgpConfig::new(Scheme::S1, 50, 1, 11).truth();
    t.gamma.pop();
    assert!(fit_with_starts(&data, &quick(), &[t]).is_err());
}
