//! Likelihood-ratio test of `H₀: ρ_U = 0` and Wald intervals.
//!
//! Under the null `ρ_U` sits on the boundary of its support and the
//! likelihood is even in it, so the LR statistic is asymptotically an equal
//! mixture of a point mass at zero and a `χ²₁`.

use crate::error::{Result, SfError};
use crate::estimation::{fit, fit_with_starts, FitOptions, FitResult};
use crate::model::Dataset;
use crate::special_fns::{chi2_1_sf, norm_quantile};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Negative LR values down to this magnitude are optimizer noise.
pub const LR_FLOOR_TOL: f64 = 1e-6;

/// Significance levels reported with every test.
pub const LEVELS: [f64; 3] = [0.10, 0.05, 0.01];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrTestResult {
    pub statistic: f64,
    pub p_value: f64,
    /// Keyed by significance level, e.g. `"0.10"`.
    pub critical_values: BTreeMap<String, f64>,
    pub restricted_loglik: f64,
    pub unrestricted_loglik: f64,
    pub rho_u_hat: f64,
    pub n_obs: usize,
}

/// Upper-`level` critical value of `½δ₀ + ½χ²₁`: the `χ²₁` quantile at
/// `1 − 2·level`.
pub fn mixture_critical_value(level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 0.5) {
        return Err(SfError::Domain(format!("level {level} outside (0, 0.5)")));
    }
    let z = norm_quantile(1.0 - level);
    Ok(z * z)
}

/// `P(LR > x)` under the mixture null; 1 for `x ≤ 0`.
pub fn mixture_p_value(statistic: f64) -> f64 {
    if statistic > 0.0 {
        0.5 * chi2_1_sf(statistic)
    } else {
        1.0
    }
}

fn critical_values() -> BTreeMap<String, f64> {
    LEVELS
        .iter()
        .map(|&l| (format!("{l:.2}"), mixture_critical_value(l).expect("level in range")))
        .collect()
}

/// Builds the test result from the two maximized log-likelihoods.
pub fn lr_from_logliks(restricted: f64, unrestricted: f64, rho_u_hat: f64, n_obs: usize) -> Result<LrTestResult> {
    let raw = 2.0 * (unrestricted - restricted);
    if !raw.is_finite() {
        return Err(SfError::Domain("non-finite likelihood-ratio statistic".into()));
    }
    if raw < -LR_FLOOR_TOL {
        return Err(SfError::NonConvergence(format!(
            "unrestricted optimum lies below the restricted one (LR = {raw:.3e})"
        )));
    }
    let statistic = raw.max(0.0);
    Ok(LrTestResult {
        statistic,
        p_value: mixture_p_value(statistic),
        critical_values: critical_values(),
        restricted_loglik: restricted,
        unrestricted_loglik: unrestricted,
        rho_u_hat,
        n_obs,
    })
}

/// Fits the model with `ρ_U = 0` imposed and unrestricted, from the same
/// generated starts. The unrestricted fit additionally starts from the
/// restricted optimum (at `ρ_U = 0` and at `ρ_U = 0.1`), so it can never end
/// below it.
pub fn lr_endogeneity_test(data: &Dataset, options: &FitOptions) -> Result<LrTestResult> {
    let (restricted, unrestricted) = lr_fits(data, options)?;
    lr_from_logliks(
        restricted.loglik_value,
        unrestricted.loglik_value,
        unrestricted.theta_hat.rho_u,
        data.n_obs(),
    )
}

/// The restricted and unrestricted fits behind [`lr_endogeneity_test`].
pub fn lr_fits(data: &Dataset, options: &FitOptions) -> Result<(FitResult, FitResult)> {
    let base = FitOptions {
        compute_covariance: false,
        ..options.clone()
    };
    let restricted = fit(
        data,
        &FitOptions {
            restrict_rho_u_zero: true,
            ..base.clone()
        },
    )
    .map_err(|e| e.context("restricted fit (ρ_U = 0)"))?;
    let mut nudged = restricted.theta_hat.clone();
    nudged.rho_u = 0.1;
    let unrestricted = fit_with_starts(
        data,
        &FitOptions {
            restrict_rho_u_zero: false,
            compute_covariance: options.compute_covariance,
            ..base
        },
        &[restricted.theta_hat.clone(), nudged],
    )
    .map_err(|e| e.context("unrestricted fit"))?;
    Ok((restricted, unrestricted))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaldInterval {
    pub estimate: f64,
    pub std_error: f64,
    pub lo: f64,
    pub hi: f64,
    pub level: f64,
    /// Set when the fit is at the `ρ_U` boundary: intervals for the other
    /// parameters are then of doubtful validity.
    pub warning: Option<String>,
}

/// `θ̂_k ± z_{1−α/2}·SE_k` with `α = 1 − level`.
pub fn wald_interval(fit: &FitResult, param_index: usize, level: f64) -> Result<WaldInterval> {
    let names = &fit.param_names;
    if param_index >= names.len() {
        return Err(SfError::Domain(format!("parameter index {param_index} out of range")));
    }
    if !(0.0..1.0).contains(&level) {
        return Err(SfError::Domain(format!("confidence level {level} outside [0, 1)")));
    }
    let rho_u_index = fit.theta_hat.dims().rho_u_index();
    let warning = if fit.boundary_flag {
        if param_index == rho_u_index {
            return Err(SfError::BoundaryInference(
                "ρ̂_U is on the boundary; its estimator is not asymptotically normal".into(),
            ));
        }
        Some("ρ̂_U is on the boundary; normal-approximation intervals may be unreliable".to_string())
    } else {
        None
    };
    if fit.restricted && param_index == rho_u_index {
        return Err(SfError::BoundaryInference("ρ_U is fixed at 0 in a restricted fit".into()));
    }
    let se = match &fit.covariance {
        Some(c) => c[param_index][param_index].max(0.0).sqrt(),
        None => {
            return Err(SfError::BoundaryInference(
                fit.covariance_note.clone().unwrap_or_else(|| "no covariance estimate available".into()),
            ))
        }
    };
    let estimate = fit.theta_hat.to_vec()[param_index];
    Ok(interval(estimate, se, level, warning))
}

fn interval(estimate: f64, std_error: f64, level: f64, warning: Option<String>) -> WaldInterval {
    let z = if level == 0.0 { 0.0 } else { norm_quantile(0.5 + 0.5 * level) };
    WaldInterval {
        estimate,
        std_error,
        lo: estimate - z * std_error,
        hi: estimate + z * std_error,
        level,
        warning,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulation::{generate_sample, DgpConfig, Scheme};

    #[test]
    fn critical_values_of_the_mixture() {
        assert!((mixture_critical_value(0.10).unwrap() - 1.642).abs() < 5e-4);
        assert!((mixture_critical_value(0.05).unwrap() - 2.706).abs() < 5e-4);
        for l in LEVELS {
            let c = mixture_critical_value(l).unwrap();
            assert!((mixture_p_value(c) - l).abs() < 1e-12);
        }
        assert!(mixture_critical_value(0.5).is_err());
    }

    #[test]
    fn p_value_edges_and_monotonicity() {
        assert_eq!(mixture_p_value(0.0), 1.0);
        assert!((mixture_p_value(1e-300) - 0.5).abs() < 1e-12);
        let mut prev = 1.0;
        for k in 0..200 {
            let p = mixture_p_value(k as f64 * 0.05);
            assert!(p <= prev);
            prev = p;
        }
    }

    #[test]
    fn statistic_floor() {
        let r = lr_from_logliks(-100.0, -100.0 - 4e-7, 0.0, 10).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
        assert!(lr_from_logliks(-100.0, -100.1, 0.0, 10).is_err());
        let r = lr_from_logliks(-100.0, -99.0, 0.4, 10).unwrap();
        assert!((r.statistic - 2.0).abs() < 1e-9);
        assert_eq!(r.critical_values.len(), 3);
    }

    #[test]
    fn textbook_interval() {
        let w = interval(1.0, 0.1, 0.95, None);
        assert!((w.lo - 0.804).abs() < 5e-4 && (w.hi - 1.196).abs() < 5e-4);
        let w = interval(1.0, 0.1, 0.0, None);
        assert_eq!((w.lo, w.hi), (1.0, 1.0));
    }

    fn quick() -> FitOptions {
        FitOptions {
            n_starts: 3,
            ..FitOptions::default()
        }
    }

    #[test]
    fn lr_is_nonnegative_and_detects_strong_endogeneity() {
        let data = generate_sample(&DgpConfig::new(Scheme::S3, 800, 1, 21), 0).unwrap();
        let r = lr_endogeneity_test(&data, &quick()).unwrap();
        assert!(r.statistic >= 0.0);
        assert!((r.statistic - 2.0 * (r.unrestricted_loglik - r.restricted_loglik)).abs() < 1e-9);
        assert!(r.p_value < 0.05, "{r:?}");
    }

    #[test]
    fn lr_is_invariant_to_rescaling_the_output() {
        let data = generate_sample(&DgpConfig::new(Scheme::S2, 400, 1, 22), 0).unwrap();
        let mut scaled = data.clone();
        scaled.y.iter_mut().for_each(|y| *y *= 2.0);
        let a = lr_endogeneity_test(&data, &quick()).unwrap();
        let b = lr_endogeneity_test(&scaled, &quick()).unwrap();
        let shift = data.n_obs() as f64 * 2f64.ln();
        assert!((a.restricted_loglik - (b.restricted_loglik + shift)).abs() < 1e-6);
        assert!((a.statistic - b.statistic).abs() < 1e-6, "{} vs {}", a.statistic, b.statistic);
    }

    #[test]
    fn wald_refuses_rho_u_at_the_boundary() {
        let data = generate_sample(&DgpConfig::new(Scheme::S3, 500, 1, 23), 0).unwrap();
        let mut f = fit(&data, &quick()).unwrap();
        let i = f.theta_hat.dims().rho_u_index();
        let w = wald_interval(&f, 1, 0.95).unwrap();
        assert!(w.lo < w.estimate && w.estimate < w.hi && w.warning.is_none());
        f.boundary_flag = true;
        assert!(matches!(wald_interval(&f, i, 0.95), Err(SfError::BoundaryInference(_))));
        assert!(wald_interval(&f, 1, 0.95).unwrap().warning.is_some());
        assert!(wald_interval(&f, 999, 0.95).is_err());
    }
}
