//! Cross-module properties on simulated data.

use endosf::baseline::{fit_exog_sf, lr_instrument_relevance};
use endosf::efficiency::te_report;
use endosf::estimation::{fit, starting_values, FitOptions};
use endosf::model::{loglik, loglik_contributions};
use endosf::numeric::mean_sd;
use endosf::simulation::{generate_sample, run_monte_carlo, DgpConfig, Scheme, SixNumber};
use endosf::SfError;

fn quick(seed: u64) -> FitOptions {
    FitOptions {
        n_starts: 4,
        seed,
        compute_covariance: false,
        ..FitOptions::default()
    }
}

#[test]
fn expected_second_derivative_in_rho_u_vanishes_at_the_truth() {
    // Under S1 the per-observation curvature in ρ_U at 0 has mean zero.
    let cfg = DgpConfig::new(Scheme::S1, 100_000, 1, 31);
    let data = generate_sample(&cfg, 0).unwrap();
    let truth = cfg.truth();
    let h = 1e-3;
    let l0 = loglik_contributions(&truth, &data).unwrap();
    let lh = loglik_contributions(&truth.with_rho_u(h), &data).unwrap();
    // Evenness: ℓ(h) + ℓ(−h) − 2ℓ(0) = 2(ℓ(h) − ℓ(0)).
    let d2: Vec<f64> = lh.iter().zip(&l0).map(|(a, b)| 2.0 * (a - b) / (h * h)).collect();
    let (m, sd) = mean_sd(&d2);
    let se = sd / (d2.len() as f64).sqrt();
    assert!(m.abs() <= 3.0 * se, "mean {m}, se {se}");
    assert!(sd > 0.0);
}

#[test]
fn starting_values_are_valid_and_reproducible() {
    let data = generate_sample(&DgpConfig::new(Scheme::S1, 1000, 1, 32), 0).unwrap();
    let a = starting_values(&data, &quick(5)).unwrap();
    a.validate(false).unwrap();
    assert!(a.rho_v.abs() < 1.0 && (0.0..1.0).contains(&a.rho_u));
    assert_eq!(a, starting_values(&data, &quick(5)).unwrap());
}

#[test]
fn pilot_frontier_is_close_to_the_truth() {
    let cfg = DgpConfig::new(Scheme::S2, 500, 100, 33);
    let truth = cfg.truth();
    let mut errs: Vec<f64> = (0..100)
        .map(|rep| {
            let data = generate_sample(&cfg, rep).unwrap();
            let p = fit_exog_sf(&data).unwrap();
            p.beta.iter().zip(&truth.beta).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
        })
        .collect();
    errs.sort_by(f64::total_cmp);
    let median = 0.5 * (errs[49] + errs[50]);
    assert!(median < 0.2, "median sup-norm error {median}");
}

#[test]
fn reported_optimum_is_the_best_start() {
    let data = generate_sample(&DgpConfig::new(Scheme::S2, 400, 1, 34), 0).unwrap();
    let f = fit(&data, &quick(1)).unwrap();
    let best = f.per_start_log.iter().map(|l| l.final_loglik).fold(f64::NEG_INFINITY, f64::max);
    assert!((f.loglik_value - best).abs() <= 1e-9 * best.abs());
    assert_eq!(f.loglik_value, loglik(&f.theta_hat, &data).unwrap());
    assert_eq!(f.per_start_log[f.best_start_index].final_loglik, best);
}

#[test]
fn permuting_rows_leaves_the_estimate_unchanged() {
    let data = generate_sample(&DgpConfig::new(Scheme::S3, 400, 1, 35), 0).unwrap();
    let n = data.n_obs();
    let perm: Vec<usize> = (0..n).map(|i| (i * 7 + 3) % n).collect();
    let shuffled = data.select_rows(&perm).unwrap();
    let opts = FitOptions { convergence_tol: 1e-9, ..quick(2) };
    let a = fit(&data, &opts).unwrap().theta_hat.to_vec();
    let b = fit(&shuffled, &opts).unwrap().theta_hat.to_vec();
    let diff = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(diff < 1e-6, "sup-norm change {diff}");
}

#[test]
fn too_few_observations_is_a_data_error() {
    let data = generate_sample(&DgpConfig::new(Scheme::S1, 10, 1, 36), 0).unwrap();
    assert!(matches!(fit(&data, &quick(0)), Err(SfError::Data(_))));
}

#[test]
fn monte_carlo_summaries_are_reproducible() {
    let cfg = DgpConfig::new(Scheme::S2, 200, 4, 37);
    let a = run_monte_carlo(&cfg, &quick(3), true).unwrap();
    let b = run_monte_carlo(&cfg, &quick(3), true).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.table1_csv(), b.table1_csv());
    assert_eq!(a.n_converged, 4);
    assert!(a.params.iter().all(|p| p.sd >= 0.0));
    assert!(a.table2_csv().lines().count() == 7);
}

#[test]
fn efficiency_summary_without_endogeneity() {
    // Single-replicate analogue of the S1, n = 1000 efficiency row
    // (mean 0.391, median 0.405).
    let data = generate_sample(&DgpConfig::new(Scheme::S1, 1000, 1, 38), 0).unwrap();
    let f = fit(&data, &quick(8)).unwrap();
    let s = SixNumber::of(&te_report(&f.theta_hat, &data).unwrap().te);
    assert!((s.mean - 0.391).abs() < 0.05, "{s:?}");
    assert!((s.median - 0.405).abs() < 0.05, "{s:?}");
}

#[test]
fn strong_instruments_are_always_relevant() {
    let cfg = DgpConfig::new(Scheme::S2, 500, 20, 39);
    let w = ["w1".to_string(), "w2".to_string()];
    for rep in 0..20 {
        let r = lr_instrument_relevance(&generate_sample(&cfg, rep).unwrap(), &w).unwrap();
        assert!(r.p_value < 0.01, "rep {rep}: {r:?}");
    }
}

#[test]
fn irrelevant_instruments_give_uniform_p_values() {
    let mut cfg = DgpConfig::new(Scheme::S2, 1000, 200, 40);
    cfg.gamma[4] = 0.0;
    cfg.gamma[5] = 0.0;
    let w = ["w1".to_string(), "w2".to_string()];
    let mut p: Vec<f64> = (0..200)
        .map(|rep| lr_instrument_relevance(&generate_sample(&cfg, rep).unwrap(), &w).unwrap().p_value)
        .collect();
    p.sort_by(f64::total_cmp);
    let n = p.len() as f64;
    let ks = p
        .iter()
        .enumerate()
        .map(|(i, &x)| (x - i as f64 / n).abs().max(((i + 1) as f64 / n - x).abs()))
        .fold(0.0, f64::max);
    // 1% critical value of the one-sample Kolmogorov–Smirnov statistic.
    assert!(ks < 1.63 / n.sqrt(), "KS statistic {ks}");
}
