//! Technical-efficiency prediction `E[exp(−U) | ε]`.
//!
//! Given `ε`, `U` is a two-component mixture of normals truncated below at
//! zero. With `s⋆ = σ̃_V σ̃_U(Z) / σ̃(Z)`:
//!
//! ```text
//! σ_{j⋆} = s⋆ √(1 + q_j² σ̃² / (σ̃² + ρ_j²))
//! μ_{j⋆} = −s⋆ ε (λ/σ̃ − q_j ρ_j / (σ̃² + ρ_j²))        (μ_{j⋆}/σ_{j⋆} = τ_j ε)
//! ω_j    ∝ Φ(τ_j ε) φ(ε/σ_{ε,j}) / σ_{ε,j}
//! TE     = Σ_j ω_j exp(−μ_{j⋆} + σ²_{j⋆}/2) Φ(μ_{j⋆}/σ_{j⋆} − σ_{j⋆}) / Φ(τ_j ε)
//! ```
//!
//! The shrinkage factor uses `σ̃(Z)` (not `σ(Z)`); only this version reduces
//! to the classical normal/half-normal predictor when `ρ_U = ρ_V = 0`.

use crate::error::{Result, SfError};
use crate::model::{Dataset, RegimeQuantities, RowInputs, Theta};
use crate::numeric::ExactSum;
use crate::special_fns::{log_norm_cdf, norm_pdf};
use serde::Serialize;

/// TE values above `1 + CLAMP_SLACK` are counted as clamps.
pub const CLAMP_SLACK: f64 = 1e-8;

/// Conditional law of `U` given `ε` for one observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TeComponents {
    pub mu_star: [f64; 2],
    pub sigma_star: [f64; 2],
    pub omega: [f64; 2],
}

impl TeComponents {
    pub fn new(rq: &RegimeQuantities, eps: f64) -> Result<Self> {
        let s_star = rq.sigma_tilde_v * rq.sigma_tilde_u / rq.sigma_tilde;
        let s2t = rq.sigma_tilde * rq.sigma_tilde;
        let mut mu_star = [0.0; 2];
        let mut sigma_star = [0.0; 2];
        let mut log_w = [0.0; 2];
        for (j, b) in rq.branches.iter().enumerate() {
            let denom = s2t + b.rho * b.rho;
            sigma_star[j] = s_star * (1.0 + b.q * b.q * s2t / denom).sqrt();
            mu_star[j] = -s_star * eps * (rq.lambda / rq.sigma_tilde - b.q * b.rho / denom);
            log_w[j] = rq.log_branch_density(j, eps);
        }
        let top = log_w[0].max(log_w[1]);
        if top == f64::NEG_INFINITY || top.is_nan() {
            return Err(SfError::Underflow { row: usize::MAX });
        }
        let w0 = (log_w[0] - top).exp();
        let w1 = (log_w[1] - top).exp();
        Ok(Self {
            mu_star,
            sigma_star,
            omega: [w0 / (w0 + w1), w1 / (w0 + w1)],
        })
    }

    /// `f_{U|ε}(u)`.
    pub fn u_density(&self, u: f64) -> f64 {
        if u < 0.0 {
            return 0.0;
        }
        (0..2)
            .filter(|&j| self.omega[j] > 0.0)
            .map(|j| {
                let (m, s) = (self.mu_star[j], self.sigma_star[j]);
                let log_mass = log_norm_cdf(m / s);
                self.omega[j] * norm_pdf((u - m) / s) / s / log_mass.exp()
            })
            .sum()
    }

    /// `E[exp(−U) | ε]`, each branch evaluated in logs.
    pub fn expected_efficiency(&self) -> f64 {
        (0..2)
            .filter(|&j| self.omega[j] > 0.0)
            .map(|j| {
                let (m, s) = (self.mu_star[j], self.sigma_star[j]);
                let log_branch = -m + 0.5 * s * s + log_norm_cdf(m / s - s) - log_norm_cdf(m / s);
                self.omega[j] * log_branch.exp()
            })
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TeReport {
    pub te: Vec<f64>,
    pub mean_te: f64,
    pub components: Vec<TeComponents>,
    /// Rows whose raw prediction exceeded `1 + CLAMP_SLACK`.
    pub clamped: usize,
}

fn row_components(theta: &Theta, rows: &RowInputs, i: usize) -> Result<TeComponents> {
    let rq = RegimeQuantities::new(theta, rows.scale[i])?;
    TeComponents::new(&rq, rows.eps[i]).map_err(|e| match e {
        SfError::Underflow { .. } => SfError::Underflow { row: i },
        other => other,
    })
}

pub fn te_components(theta: &Theta, data: &Dataset, i: usize) -> Result<TeComponents> {
    theta.validate(true)?;
    row_components(theta, &RowInputs::new(theta, data)?, i)
}

/// Clamps a raw prediction into `(0, 1]`; returns whether it was a clamp.
fn clamp_te(raw: f64) -> (f64, bool) {
    (raw.clamp(f64::MIN_POSITIVE, 1.0), raw > 1.0 + CLAMP_SLACK)
}

pub fn te_score(theta: &Theta, data: &Dataset, i: usize) -> Result<f64> {
    Ok(clamp_te(te_components(theta, data, i)?.expected_efficiency()).0)
}

pub fn te_report(theta: &Theta, data: &Dataset) -> Result<TeReport> {
    theta.validate(true)?;
    let rows = RowInputs::new(theta, data)?;
    let mut te = Vec::with_capacity(data.n_obs());
    let mut components = Vec::with_capacity(data.n_obs());
    let mut clamped = 0;
    for i in 0..data.n_obs() {
        let c = row_components(theta, &rows, i)?;
        let (v, was_clamped) = clamp_te(c.expected_efficiency());
        clamped += usize::from(was_clamped);
        te.push(v);
        components.push(c);
    }
    let mut report = TeReport {
        te,
        mean_te: 0.0,
        components,
        clamped,
    };
    report.mean_te = mean_te(&report)?;
    Ok(report)
}

pub fn mean_te(report: &TeReport) -> Result<f64> {
    if report.te.is_empty() {
        return Err(SfError::Data("empty efficiency report".into()));
    }
    Ok(report.te.iter().copied().collect::<ExactSum>().value() / report.te.len() as f64)
}
