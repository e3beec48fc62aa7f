//! Multi-start maximum likelihood for the full parameter vector.

mod objective;
mod transform;

pub use objective::{LikelihoodObjective, N_PARTIALS};
pub use transform::Transform;

use crate::baseline::{fit_exog_sf, fit_probit, ExogSfResult, ProbitResult};
use crate::error::{Result, SfError};
use crate::model::{self, Dataset, Theta};
use crate::optim::{minimize, OptimOptions};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// `ρ̂_U` below this value marks a boundary estimate.
pub const BOUNDARY_TOL: f64 = 1e-3;

/// Largest magnitude used for randomly drawn correlation starts.
const RHO_START_LIMIT: f64 = 0.99;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitOptions {
    /// Number of starting points (the pilot plus perturbed copies).
    pub n_starts: usize,
    /// Uniform `(ρ_V, ρ_U)` candidates per start; the best by likelihood is kept.
    pub rho_draws: usize,
    /// Relative jitter applied to the pilot for starts after the first.
    pub perturbation_scale: f64,
    pub max_iterations: usize,
    /// Sup-norm tolerance on the gradient of the mean log-likelihood; its
    /// square is used as the relative step tolerance.
    pub convergence_tol: f64,
    pub seed: u64,
    /// Impose `ρ_U = 0` (the null model of the endogeneity test).
    pub restrict_rho_u_zero: bool,
    pub compute_covariance: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            n_starts: 8,
            rho_draws: 10,
            perturbation_scale: 0.1,
            max_iterations: 500,
            convergence_tol: 1e-6,
            seed: 0,
            restrict_rho_u_zero: false,
            compute_covariance: true,
        }
    }
}

impl FitOptions {
    pub fn validate(&self) -> Result<()> {
        if self.n_starts == 0 {
            return Err(SfError::Config("n_starts must be at least 1".into()));
        }
        if self.rho_draws == 0 {
            return Err(SfError::Config("rho_draws must be at least 1".into()));
        }
        if !(self.convergence_tol > 0.0) || !(self.perturbation_scale >= 0.0) {
            return Err(SfError::Config("tolerances must be positive".into()));
        }
        if self.max_iterations == 0 {
            return Err(SfError::Config("max_iterations must be at least 1".into()));
        }
        Ok(())
    }

    fn optim(&self) -> OptimOptions {
        OptimOptions {
            max_iterations: self.max_iterations,
            grad_tol: self.convergence_tol,
            step_tol: self.convergence_tol * self.convergence_tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StartLog {
    pub index: usize,
    /// `pilot`, `perturbed` or `supplied`.
    pub origin: String,
    pub start: Theta,
    pub initial_loglik: f64,
    pub final_loglik: f64,
    pub converged: bool,
    pub iterations: usize,
    pub method: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub theta_hat: Theta,
    pub param_names: Vec<String>,
    pub loglik_value: f64,
    pub n_obs: usize,
    pub converged: bool,
    pub restricted: bool,
    pub n_starts_used: usize,
    pub best_start_index: usize,
    /// Inverse outer-product-of-scores estimate in the natural
    /// parameterization (`ρ_U` row and column are zero in a restricted fit).
    pub covariance: Option<Vec<Vec<f64>>>,
    /// Why no covariance is reported.
    pub covariance_note: Option<String>,
    pub boundary_flag: bool,
    pub per_start_log: Vec<StartLog>,
}

impl FitResult {
    pub fn std_errors(&self) -> Option<Vec<f64>> {
        self.covariance
            .as_ref()
            .map(|c| (0..c.len()).map(|i| c[i][i].max(0.0).sqrt()).collect())
    }
}

/// Pilot fits that seed every start.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Pilot {
    pub exog: ExogSfResult,
    pub probit: ProbitResult,
}

pub fn pilot(data: &Dataset) -> Result<Pilot> {
    Ok(Pilot {
        exog: fit_exog_sf(data)?,
        probit: fit_probit(data)?,
    })
}

fn pilot_theta(p: &Pilot) -> Theta {
    Theta {
        beta: p.exog.beta.clone(),
        delta: p.exog.delta.clone(),
        sigma2_u: p.exog.sigma2_u,
        sigma2_v: p.exog.sigma2_v,
        rho_v: 0.0,
        rho_u: 0.0,
        gamma: p.probit.gamma.clone(),
    }
}

fn start_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64 + 1);
    rng
}

/// Draws `rho_draws` uniform `(ρ_V, ρ_U)` pairs and keeps the one with the
/// highest likelihood at the given coefficients.
fn choose_rhos(data: &Dataset, base: &Theta, draws: usize, rng: &mut ChaCha8Rng) -> Theta {
    let mut best: Option<(f64, Theta)> = None;
    for _ in 0..draws {
        let mut t = base.clone();
        t.rho_v = rng.random_range(-1.0..1.0f64).clamp(-RHO_START_LIMIT, RHO_START_LIMIT);
        t.rho_u = rng.random_range(0.0..1.0f64).min(RHO_START_LIMIT);
        let ll = model::loglik(&t, data).unwrap_or(f64::NEG_INFINITY);
        if best.as_ref().is_none_or(|(b, _)| ll > *b) {
            best = Some((ll, t));
        }
    }
    best.map(|(_, t)| t).unwrap_or_else(|| base.clone())
}

/// Starting points in two families. Even starts build on the pilot
/// (exogenous frontier + Probit); odd starts on the same pilot with the
/// scale function reset to `g ≡ 1` (`δ = 0`), since the exogenous fit can
/// itself run off to `δ → −∞` and drag every nearby start with it. Starts 0
/// and 1 are the two bases; later starts jitter every unconstrained
/// coordinate of their base by `perturbation_scale·max(|u|, 0.1)·N(0, 1)`.
/// Each start then picks its correlations from uniform draws. The points do
/// not depend on `restrict_rho_u_zero`, so restricted and unrestricted fits
/// share them.
pub fn start_points(data: &Dataset, pilot: &Pilot, options: &FitOptions) -> Vec<Theta> {
    let pilot_base = pilot_theta(pilot);
    let mut neutral_base = pilot_base.clone();
    neutral_base.delta.iter_mut().for_each(|d| *d = 0.0);
    let tr = Transform::new(data.dims(), true);
    let bases = [&pilot_base, &neutral_base];
    let u0 = bases.map(|b| tr.to_unconstrained(b));
    (0..options.n_starts)
        .map(|k| {
            let mut rng = start_rng(options.seed, k);
            let mut theta = if k < 2 {
                bases[k].clone()
            } else {
                let u: Vec<f64> = u0[k % 2]
                    .iter()
                    .map(|&v| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        v + options.perturbation_scale * v.abs().max(0.1) * z
                    })
                    .collect();
                tr.to_theta(&u)
            };
            theta = choose_rhos(data, &theta, options.rho_draws, &mut rng);
            theta
        })
        .collect()
}

/// Label of generated start `k` in the per-start log.
fn start_origin(k: usize) -> &'static str {
    match k {
        0 => "pilot",
        1 => "neutral",
        _ => "perturbed",
    }
}

/// Starting value of the first start.
pub fn starting_values(data: &Dataset, options: &FitOptions) -> Result<Theta> {
    options.validate()?;
    let p = pilot(data)?;
    Ok(start_points(data, &p, &FitOptions { n_starts: 1, ..options.clone() }).remove(0))
}

fn check_scale_rank(data: &Dataset) -> Result<()> {
    if data.scale.ncols() == 0 {
        return Ok(());
    }
    let svd = data.scale.clone().svd(false, false);
    if !(svd.singular_values.min() > svd.singular_values.max() * 1e-10) {
        return Err(SfError::Data("rank-deficient scale-function design".into()));
    }
    Ok(())
}

/// Maximizes `ℓ_n(θ)` jointly over all parameters from every start.
pub fn fit(data: &Dataset, options: &FitOptions) -> Result<FitResult> {
    fit_with_starts(data, options, &[])
}

/// As [`fit`], with additional caller-supplied starting points appended
/// after the generated ones.
pub fn fit_with_starts(data: &Dataset, options: &FitOptions, extra: &[Theta]) -> Result<FitResult> {
    options.validate()?;
    if data.n_obs() < data.dims().n_params() {
        return Err(SfError::Data(format!(
            "{} observations for {} parameters",
            data.n_obs(),
            data.dims().n_params()
        )));
    }
    check_scale_rank(data)?;
    let p = pilot(data)?;
    let mut starts: Vec<(Theta, &str)> = start_points(data, &p, options)
        .into_iter()
        .enumerate()
        .map(|(k, t)| (t, start_origin(k)))
        .collect();
    for t in extra {
        t.check_dims(data.dims())?;
        starts.push((t.clone(), "supplied"));
    }
    fit_from(data, options, &starts)
}

fn fit_from(data: &Dataset, options: &FitOptions, starts: &[(Theta, &str)]) -> Result<FitResult> {
    let restricted = options.restrict_rho_u_zero;
    let obj = LikelihoodObjective::new(data, restricted);
    let opts = options.optim();
    let runs: Vec<(StartLog, Vec<f64>)> = starts
        .par_iter()
        .enumerate()
        .map(|(index, (start, origin))| {
            let mut start = start.clone();
            if restricted {
                start.rho_u = 0.0;
            }
            let u0 = obj.transform.to_unconstrained(&start);
            let initial_loglik = obj.loglik(&u0);
            let r = minimize(&obj, &u0, &opts);
            let final_loglik = if r.value.is_finite() { obj.loglik(&r.x) } else { f64::NEG_INFINITY };
            let log = StartLog {
                index,
                origin: origin.to_string(),
                start,
                initial_loglik,
                final_loglik,
                converged: r.converged && final_loglik.is_finite(),
                iterations: r.iterations,
                method: r.method.to_string(),
            };
            (log, r.x)
        })
        .collect();

    // Highest log-likelihood wins; ties go to the lowest start index.
    let best = runs
        .iter()
        .enumerate()
        .filter(|(_, (log, _))| log.final_loglik.is_finite())
        .fold(None::<(usize, f64)>, |acc, (i, (log, _))| match acc {
            Some((_, v)) if v >= log.final_loglik => acc,
            _ => Some((i, log.final_loglik)),
        });
    let per_start_log: Vec<StartLog> = runs.iter().map(|(l, _)| l.clone()).collect();
    let Some((best_index, best_ll)) = best else {
        return Err(SfError::NonConvergence(format!(
            "no start reached a finite log-likelihood: {}",
            summarize_starts(&per_start_log)
        )));
    };
    let converged = per_start_log
        .iter()
        .any(|l| l.converged && l.final_loglik >= best_ll - 1e-6 * best_ll.abs().max(1.0));
    if !converged {
        return Err(SfError::NonConvergence(format!(
            "no start converged at the best optimum: {}",
            summarize_starts(&per_start_log)
        )));
    }
    let u_hat = &runs[best_index].1;
    let theta_hat = obj.transform.to_canonical_theta(u_hat);
    let loglik_value = model::loglik(&theta_hat, data)?;
    let boundary_flag = !restricted && theta_hat.rho_u < BOUNDARY_TOL;
    let mut result = FitResult {
        param_names: data.spec.param_names(),
        theta_hat,
        loglik_value,
        n_obs: data.n_obs(),
        converged,
        restricted,
        n_starts_used: starts.len(),
        best_start_index: best_index,
        covariance: None,
        covariance_note: None,
        boundary_flag,
        per_start_log,
    };
    if options.compute_covariance {
        match covariance(&result, data) {
            Ok(c) => result.covariance = Some(c),
            Err(e) => result.covariance_note = Some(e.to_string()),
        }
    }
    Ok(result)
}

fn summarize_starts(logs: &[StartLog]) -> String {
    logs.iter()
        .map(|l| format!("#{} {} ll={:.6} converged={}", l.index, l.origin, l.final_loglik, l.converged))
        .collect::<Vec<_>>()
        .join("; ")
}

/// Inverse outer product of the per-observation scores at `θ̂`, in the
/// natural parameterization.
pub fn covariance(fit: &FitResult, data: &Dataset) -> Result<Vec<Vec<f64>>> {
    if !fit.converged {
        return Err(SfError::NonConvergence("covariance requested for a non-converged fit".into()));
    }
    if fit.boundary_flag {
        return Err(SfError::BoundaryInference(format!(
            "ρ̂_U = {:.3e} is at the boundary of its support; its estimator is not asymptotically normal — use the likelihood-ratio endogeneity test",
            fit.theta_hat.rho_u
        )));
    }
    let restricted = fit.restricted;
    let obj = LikelihoodObjective::new(data, restricted);
    let tr = obj.transform;
    let u = tr.to_unconstrained(&fit.theta_hat);
    let scores = obj
        .row_scores(&u)
        .ok_or_else(|| SfError::Domain("scores are not finite at the estimate".into()))?;
    // d θ_natural / d u for the scalar block.
    let t = &fit.theta_hat;
    let mut jac = vec![1.0; tr.dim()];
    let o = tr.scalar_offset();
    jac[o] = if t.sigma2_u > crate::baseline::VARIANCE_FLOOR { t.sigma2_u } else { f64::NAN };
    jac[o + 1] = if t.sigma2_v > crate::baseline::VARIANCE_FLOOR { t.sigma2_v } else { f64::NAN };
    jac[o + 2] = 1.0 - t.rho_v * t.rho_v;
    if !restricted {
        jac[o + 3] = 1.0 - t.rho_u * t.rho_u;
    }
    if jac.iter().any(|j| !j.is_finite()) {
        return Err(SfError::BoundaryInference("a variance estimate sits at its floor".into()));
    }
    let k = tr.dim();
    let mut opg = DMatrix::<f64>::zeros(k, k);
    for s in &scores {
        let v = nalgebra::DVector::from_iterator(k, s.iter().zip(&jac).map(|(a, j)| a / j));
        opg.ger(1.0, &v, &v, 1.0);
    }
    let eig = opg.clone().symmetric_eigen();
    let (lo, hi) = (eig.eigenvalues.min(), eig.eigenvalues.max());
    if !(lo > hi * 1e-13) {
        return Err(SfError::Singular(format!(
            "outer product of scores is singular (eigenvalues {lo:.3e} / {hi:.3e})"
        )));
    }
    let inv = opg
        .cholesky()
        .ok_or_else(|| SfError::Singular("outer product of scores is not positive definite".into()))?
        .inverse();
    // Embed into the full layout (zero row/column for a pinned ρ_U).
    let p = data.dims().n_params();
    let rho_u_pos = data.dims().rho_u_index();
    let map = |i: usize| -> Option<usize> {
        if !restricted {
            Some(i)
        } else if i == rho_u_pos {
            None
        } else if i > rho_u_pos {
            Some(i - 1)
        } else {
            Some(i)
        }
    };
    let mut out = vec![vec![0.0; p]; p];
    for i in 0..p {
        for j in 0..p {
            if let (Some(a), Some(b)) = (map(i), map(j)) {
                out[i][j] = 0.5 * (inv[(a, b)] + inv[(b, a)]);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests;
