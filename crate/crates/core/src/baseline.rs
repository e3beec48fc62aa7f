//! Exogenous normal/half-normal frontier and the Probit first stage.

use crate::error::{Result, SfError};
use crate::model::Dataset;
use crate::numeric::ExactSum;
use crate::optim::{minimize, Objective, OptimOptions};
use crate::special_fns::{chi2_sf, log_norm_cdf, log_norm_pdf};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use std::f64::consts::{LN_2, PI};

/// Exogenous-frontier fit, `ε = V − U`, `U = σ_U g(Z, δ)|N(0,1)|`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExogSfResult {
    pub beta: Vec<f64>,
    pub delta: Vec<f64>,
    pub sigma2_u: f64,
    pub sigma2_v: f64,
    pub loglik: f64,
    pub converged: bool,
    /// Set when the inefficiency variance collapses towards zero, where δ is
    /// not identified.
    pub near_boundary: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbitResult {
    pub gamma: Vec<f64>,
    pub loglik: f64,
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InstrumentRelevance {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    pub unrestricted_loglik: f64,
    pub restricted_loglik: f64,
}

/// Log-density of the normal/half-normal composite error:
/// `ln 2 − ln σ + ln φ(ε/σ) + ln Φ(−λε/σ)`.
pub fn exog_log_density(eps: f64, sigma_u_z: f64, sigma_v: f64) -> f64 {
    let sigma = sigma_u_z.hypot(sigma_v);
    let lambda = sigma_u_z / sigma_v;
    LN_2 - sigma.ln() + log_norm_pdf(eps / sigma) + log_norm_cdf(-lambda * eps / sigma)
}

/// Probit log-likelihood of one row.
#[inline]
pub fn probit_log_prob(index: f64, treated: bool) -> f64 {
    log_norm_cdf(if treated { index } else { -index })
}

/// Least-squares coefficients; errors on a rank-deficient design.
pub fn ols(x: &DMatrix<f64>, y: &[f64]) -> Result<Vec<f64>> {
    let svd = x.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > smax * 1e-10) {
        return Err(SfError::Data(format!(
            "rank-deficient design (singular values {smin:e} / {smax:e})"
        )));
    }
    let sol = svd
        .solve(&DVector::from_column_slice(y), 0.0)
        .map_err(|e| SfError::Singular(e.to_string()))?;
    Ok(sol.iter().copied().collect())
}

struct ExogObjective<'a> {
    data: &'a Dataset,
}

impl ExogObjective<'_> {
    fn unpack<'b>(&self, u: &'b [f64]) -> (&'b [f64], &'b [f64], f64, f64) {
        let p = self.data.frontier.ncols();
        let s = self.data.scale.ncols();
        (&u[..p], &u[p..p + s], u[p + s], u[p + s + 1])
    }

    fn loglik(&self, u: &[f64]) -> f64 {
        let (beta, delta, lu, lv) = self.unpack(u);
        let (su, sv) = (variance_from_log(lu).sqrt(), variance_from_log(lv).sqrt());
        let fit = &self.data.frontier * DVector::from_column_slice(beta);
        let idx = &self.data.scale * DVector::from_column_slice(delta);
        let mut acc = ExactSum::new();
        for i in 0..self.data.n_obs() {
            acc.add(exog_log_density(self.data.y[i] - fit[i], su * idx[i].exp(), sv));
        }
        acc.value()
    }
}

impl Objective for ExogObjective<'_> {
    fn dim(&self) -> usize {
        self.data.frontier.ncols() + self.data.scale.ncols() + 2
    }

    fn value(&self, u: &[f64]) -> f64 {
        let v = -self.loglik(u) / self.data.n_obs() as f64;
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    }
}

/// Lower bound on variances (`ln σ²` is clamped at `ln 1e−8`).
pub const VARIANCE_FLOOR: f64 = 1e-8;

#[inline]
pub fn variance_from_log(u: f64) -> f64 {
    u.max(VARIANCE_FLOOR.ln()).exp()
}

/// Corrected-OLS pilot: OLS slopes, half-normal σ_U from the third moment
/// of the residuals, intercept shifted by `E[U]`.
fn cols_start(data: &Dataset) -> Result<Vec<f64>> {
    let mut beta = ols(&data.frontier, &data.y)?;
    let fit = &data.frontier * DVector::from_column_slice(&beta);
    let n = data.n_obs() as f64;
    let resid: Vec<f64> = data.y.iter().zip(fit.iter()).map(|(y, f)| y - f).collect();
    let mean = resid.iter().sum::<f64>() / n;
    let m2 = resid.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / n;
    let m3 = resid.iter().map(|e| (e - mean).powi(3)).sum::<f64>() / n;
    let c3 = (2.0 / PI).sqrt() * (4.0 / PI - 1.0);
    let mut s2u = if m3 < 0.0 { (-m3 / c3).powf(2.0 / 3.0) } else { 0.1 * m2 };
    let mut s2v = m2 - (1.0 - 2.0 / PI) * s2u;
    if s2v < 0.1 * m2 {
        s2v = 0.1 * m2;
        s2u = (m2 - s2v) / (1.0 - 2.0 / PI);
    }
    if let Some(k) = intercept_column(&data.frontier) {
        beta[k] += (2.0 * s2u / PI).sqrt();
    }
    let mut u = beta;
    u.extend(std::iter::repeat_n(0.0, data.scale.ncols()));
    u.push(s2u.max(VARIANCE_FLOOR).ln());
    u.push(s2v.max(VARIANCE_FLOOR).ln());
    Ok(u)
}

fn intercept_column(m: &DMatrix<f64>) -> Option<usize> {
    (0..m.ncols()).find(|&j| m.column(j).iter().all(|v| *v == 1.0))
}

/// Maximum-likelihood fit of the exogenous frontier in
/// `(β, δ, ln σ²_U, ln σ²_V)`.
pub fn fit_exog_sf(data: &Dataset) -> Result<ExogSfResult> {
    let obj = ExogObjective { data };
    let start = cols_start(data)?;
    let opts = OptimOptions {
        max_iterations: 1000,
        ..OptimOptions::default()
    };
    let r = minimize(&obj, &start, &opts);
    if !r.value.is_finite() {
        return Err(SfError::NonConvergence(format!(
            "exogenous frontier: no finite log-likelihood reached after {} evaluations",
            r.evaluations
        )));
    }
    let (beta, delta, lu, lv) = obj.unpack(&r.x);
    let sigma2_u = variance_from_log(lu);
    let sigma2_v = variance_from_log(lv);
    // Largest inefficiency variance over the sample, σ²_U·max g(Z, δ)².
    let idx = &data.scale * DVector::from_column_slice(delta);
    let max_s2u = sigma2_u * (2.0 * idx.max()).exp();
    Ok(ExogSfResult {
        beta: beta.to_vec(),
        delta: delta.to_vec(),
        sigma2_u,
        sigma2_v,
        loglik: obj.loglik(&r.x),
        converged: r.converged,
        near_boundary: max_s2u < 1e-3 * (max_s2u + sigma2_v),
    })
}

fn probit_loglik(w: &DMatrix<f64>, z: &[bool], gamma: &DVector<f64>) -> f64 {
    let idx = w * gamma;
    idx.iter().zip(z).map(|(x, &t)| probit_log_prob(*x, t)).collect::<ExactSum>().value()
}

/// Probit MLE by Newton's method with step halving. Convergence requires the
/// sup-norm of the mean score to drop below 1e−10.
pub fn fit_probit_design(w: &DMatrix<f64>, z: &[bool]) -> Result<ProbitResult> {
    let n = z.len();
    let k = w.ncols();
    let treated = z.iter().filter(|&&t| t).count();
    if treated == 0 || treated == n {
        return Err(SfError::Data("treatment is constant; the Probit model is not identified".into()));
    }
    if k > 0 {
        let svd = w.clone().svd(false, false);
        if !(svd.singular_values.min() > svd.singular_values.max() * 1e-10) {
            return Err(SfError::Data("rank-deficient first-stage design".into()));
        }
    }
    let nf = n as f64;
    let mut gamma = DVector::zeros(k);
    let mut ll = probit_loglik(w, z, &gamma);
    for iter in 0..200 {
        let idx = w * &gamma;
        let mut grad = DVector::zeros(k);
        let mut info = DMatrix::zeros(k, k);
        for i in 0..n {
            let q = if z[i] { 1.0 } else { -1.0 };
            let xb = idx[i];
            // Inverse Mills ratio φ(qxb)/Φ(qxb), computed in logs.
            let mills = (log_norm_pdf(xb) - log_norm_cdf(q * xb)).exp();
            let row = w.row(i).transpose();
            grad.axpy(q * mills, &row, 1.0);
            let curv = mills * (mills + q * xb);
            info.ger(curv, &row, &row, 1.0);
        }
        let score = grad.amax() / nf;
        if score < 1e-10 {
            return Ok(ProbitResult {
                gamma: gamma.iter().copied().collect(),
                loglik: ll,
                converged: true,
                iterations: iter,
            });
        }
        if ll > -1e-8 * nf || gamma.amax() > 1e3 {
            return Err(SfError::Separation(format!(
                "coefficients diverge (sup |γ| = {:.3e}, log-likelihood {ll:.3e})",
                gamma.amax()
            )));
        }
        let step = match info.clone().cholesky() {
            Some(c) => c.solve(&grad),
            None => return Err(SfError::Separation("information matrix is not positive definite".into())),
        };
        let mut t = 1.0;
        let mut improved = false;
        for _ in 0..60 {
            let cand = &gamma + t * &step;
            let cand_ll = probit_loglik(w, z, &cand);
            if cand_ll >= ll {
                improved = cand_ll > ll;
                gamma = cand;
                ll = cand_ll;
                break;
            }
            t *= 0.5;
        }
        if !improved {
            // Rounding floor reached.
            let converged = score < 1e-8;
            if converged {
                return Ok(ProbitResult {
                    gamma: gamma.iter().copied().collect(),
                    loglik: ll,
                    converged,
                    iterations: iter,
                });
            }
            break;
        }
    }
    if gamma.amax() > 30.0 {
        return Err(SfError::Separation(format!(
            "coefficients diverge (sup |γ| = {:.3e})",
            gamma.amax()
        )));
    }
    Err(SfError::NonConvergence("Probit Newton iterations exhausted".into()))
}

pub fn fit_probit(data: &Dataset) -> Result<ProbitResult> {
    fit_probit_design(&data.first_stage, &data.treatment)
}

/// LR test that the listed instrument coefficients are jointly zero,
/// referred to χ² with one degree of freedom per instrument.
pub fn lr_instrument_relevance(data: &Dataset, instruments: &[String]) -> Result<InstrumentRelevance> {
    if instruments.is_empty() {
        return Err(SfError::Config("instrument set is empty".into()));
    }
    let cols = &data.spec.first_stage_columns;
    for inst in instruments {
        if !cols.contains(inst) {
            return Err(SfError::Config(format!("instrument `{inst}` is not a first-stage column")));
        }
    }
    let keep: Vec<usize> = (0..cols.len()).filter(|&j| !instruments.contains(&cols[j])).collect();
    let dof = cols.len() - keep.len();
    let restricted_w = DMatrix::from_fn(data.n_obs(), keep.len(), |i, j| data.first_stage[(i, keep[j])]);
    let full = fit_probit(data)?;
    let restricted = fit_probit_design(&restricted_w, &data.treatment)?;
    let statistic = (2.0 * (full.loglik - restricted.loglik)).max(0.0);
    Ok(InstrumentRelevance {
        statistic,
        dof,
        p_value: chi2_sf(statistic, dof),
        unrestricted_loglik: full.loglik,
        restricted_loglik: restricted.loglik,
    })
}
