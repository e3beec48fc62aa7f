//! Parameter vector, data layout and the closed-form likelihood.
//!
//! For branch `j ∈ {1, 2}` with sign `s₁ = −1`, `s₂ = +1`:
//!
//! ```text
//! ρ_j        = ρ_V σ_V + s_j ρ_U σ_U(Z)
//! σ²_{ε,j}   = σ²_V + σ²_U(Z) + 2 s_j ρ_V σ_V ρ_U σ_U(Z)      (= σ̃² + ρ_j²)
//! q_j        = λ ρ_V σ_V / σ̃ − s_j ρ_U σ_U(Z) / (λ σ̃)
//! μ_{η,j}    = ρ_j / σ²_{ε,j},      σ²_{η,j} = σ̃² / σ²_{ε,j}
//! τ_j        = (μ_{η,j} q_j − λ/σ̃) / √(1 + q_j² σ²_{η,j})
//! ρ*_j       = −q_j σ_{η,j} / √(1 + q_j² σ²_{η,j})
//! Ψ₀,j       = Φ₂((−W̃γ − μ_{η,j} ε)/σ_{η,j}, τ_j ε; ρ*_j),   Ψ₁,j = Φ(τ_j ε) − Ψ₀,j
//! L_i        = Σ_j Ψ_{z,j} φ(ε/σ_{ε,j}) / σ_{ε,j}
//! ```
//!
//! All branch quantities are formed from the product `s_j·ρ_U σ_U(Z)`, so
//! negating `ρ_U` swaps the two branches bit for bit and the log-likelihood
//! is exactly even in `ρ_U`.

mod data;
mod theta;

pub use data::{Dataset, ModelSpec};
pub use theta::{Dims, Theta};

use crate::error::{Result, SfError};
use crate::numeric::ExactSum;
use crate::special_fns::{bvn_cdf_unchecked, log_add_exp, log_norm_pdf, norm_cdf};
use nalgebra::DVector;
use serde::Serialize;
use std::f64::consts::PI;

/// Branch signs `s₁ = −1`, `s₂ = +1`.
pub const BRANCH_SIGNS: [f64; 2] = [-1.0, 1.0];

/// Scalars of one mixture branch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Branch {
    pub rho: f64,
    pub sigma2_eps: f64,
    pub sigma_eps: f64,
    pub q: f64,
    pub mu_eta: f64,
    pub sigma2_eta: f64,
    pub sigma_eta: f64,
    pub tau: f64,
    pub rho_star: f64,
}

/// Per-observation quantities that depend on the data only through `g(Z, δ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegimeQuantities {
    pub scale_factor: f64,
    pub sigma_u_z: f64,
    pub sigma_tilde_u: f64,
    pub sigma_tilde_v: f64,
    pub sigma_tilde: f64,
    pub lambda: f64,
    pub branches: [Branch; 2],
}

impl RegimeQuantities {
    /// Builds the branch scalars for scale factor `g`. Accepts `ρ_U ∈ (−1, 1)`.
    pub fn new(theta: &Theta, g: f64) -> Result<Self> {
        let sigma_v = theta.sigma2_v.sqrt();
        let sigma_u_z = theta.sigma2_u.sqrt() * g;
        let sigma_tilde_u = ((1.0 - theta.rho_u) * (1.0 + theta.rho_u)).sqrt() * sigma_u_z;
        let sigma_tilde_v = ((1.0 - theta.rho_v) * (1.0 + theta.rho_v)).sqrt() * sigma_v;
        if !(sigma_tilde_u > 0.0 && sigma_tilde_u.is_finite()) {
            return Err(SfError::Degenerate(format!(
                "σ̃_U(Z) = {sigma_tilde_u} (scale factor {g}); λ is undefined"
            )));
        }
        if !(sigma_tilde_v > 0.0 && sigma_tilde_v.is_finite()) {
            return Err(SfError::Degenerate(format!("σ̃_V = {sigma_tilde_v}; λ is undefined")));
        }
        let sigma2_tilde = sigma_tilde_u * sigma_tilde_u + sigma_tilde_v * sigma_tilde_v;
        let sigma_tilde = sigma2_tilde.sqrt();
        let lambda = sigma_tilde_u / sigma_tilde_v;
        let rv_sv = theta.rho_v * sigma_v;
        let ru_su = theta.rho_u * sigma_u_z;
        let base = theta.sigma2_v + sigma_u_z * sigma_u_z;
        let branches = BRANCH_SIGNS.map(|s| {
            let shift = s * ru_su;
            let rho = rv_sv + shift;
            let sigma2_eps = base + 2.0 * rv_sv * shift;
            let q = lambda * rv_sv / sigma_tilde - shift / (lambda * sigma_tilde);
            let mu_eta = rho / sigma2_eps;
            let sigma2_eta = sigma2_tilde / sigma2_eps;
            let sigma_eta = sigma2_eta.sqrt();
            let root = (1.0 + q * q * sigma2_eta).sqrt();
            Branch {
                rho,
                sigma2_eps,
                sigma_eps: sigma2_eps.sqrt(),
                q,
                mu_eta,
                sigma2_eta,
                sigma_eta,
                tau: (mu_eta * q - lambda / sigma_tilde) / root,
                rho_star: -q * sigma_eta / root,
            }
        });
        Ok(Self {
            scale_factor: g,
            sigma_u_z,
            sigma_tilde_u,
            sigma_tilde_v,
            sigma_tilde,
            lambda,
            branches,
        })
    }

    /// `f_{ε,j}(ε) = Φ(τ_j ε) φ(ε/σ_{ε,j}) / σ_{ε,j}` in logs (skew-normal
    /// branch density up to the common factor 2).
    pub fn log_branch_density(&self, j: usize, eps: f64) -> f64 {
        let b = &self.branches[j];
        crate::special_fns::log_norm_cdf(b.tau * eps) + log_norm_pdf(eps / b.sigma_eps) - b.sigma_eps.ln()
    }

    /// Marginal density of the composite error, `Σ_j f_{ε,j}(ε)`.
    pub fn f_eps(&self, eps: f64) -> f64 {
        (0..2).map(|j| self.log_branch_density(j, eps).exp()).sum()
    }
}

/// `(Ψ₀,₁, Ψ₀,₂, Ψ₁,₁, Ψ₁,₂)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PsiTerms {
    pub psi0: [f64; 2],
    pub psi1: [f64; 2],
}

/// Below this level the difference `Φ(τε) − Ψ₀` has lost most of its
/// significant digits and the complementary rectangle is integrated instead.
const PSI1_CANCELLATION: f64 = 1e-8;

/// Ψ terms for residual `eps` and first-stage index `wg = W̃γ`.
pub fn psi_terms_at(rq: &RegimeQuantities, eps: f64, wg: f64) -> PsiTerms {
    let mut out = PsiTerms {
        psi0: [0.0; 2],
        psi1: [0.0; 2],
    };
    for (j, b) in rq.branches.iter().enumerate() {
        let a = (-wg - b.mu_eta * eps) / b.sigma_eta;
        let t = b.tau * eps;
        let psi0 = bvn_cdf_unchecked(a, t, b.rho_star);
        let mut psi1 = norm_cdf(t) - psi0;
        if psi1 < PSI1_CANCELLATION {
            psi1 = bvn_cdf_unchecked(-a, t, -b.rho_star);
        }
        out.psi0[j] = psi0;
        out.psi1[j] = psi1.max(0.0);
    }
    out
}

/// Log of `L_i` given the regime quantities.
pub fn log_density_at(rq: &RegimeQuantities, eps: f64, wg: f64, treated: bool) -> f64 {
    let psi = psi_terms_at(rq, eps, wg);
    let w = if treated { psi.psi1 } else { psi.psi0 };
    let term = |j: usize| {
        let b = &rq.branches[j];
        w[j].ln() + log_norm_pdf(eps / b.sigma_eps) - b.sigma_eps.ln()
    };
    log_add_exp(term(0), term(1))
}

/// `g(Z, δ) = exp(Z δ)`.
pub fn scale_factor(theta: &Theta, scale_row: &[f64]) -> f64 {
    let idx: f64 = scale_row.iter().zip(&theta.delta).map(|(z, d)| z * d).sum();
    idx.exp()
}

fn row_scale(theta: &Theta, data: &Dataset, i: usize) -> f64 {
    let row: Vec<f64> = data.scale.row(i).iter().copied().collect();
    scale_factor(theta, &row)
}

/// `ε_i(θ) = y_i − m(X_i, Z_i, β)`.
pub fn residual(theta: &Theta, data: &Dataset, i: usize) -> f64 {
    let fit: f64 = data.frontier.row(i).iter().zip(&theta.beta).map(|(x, b)| x * b).sum();
    data.y[i] - fit
}

/// First-stage index `W̃_i γ`.
pub fn first_stage_index(theta: &Theta, data: &Dataset, i: usize) -> f64 {
    data.first_stage.row(i).iter().zip(&theta.gamma).map(|(w, g)| w * g).sum()
}

pub fn regime_quantities(theta: &Theta, data: &Dataset, i: usize) -> Result<RegimeQuantities> {
    theta.check_dims(data.dims())?;
    RegimeQuantities::new(theta, row_scale(theta, data, i))
}

pub fn psi_terms(theta: &Theta, data: &Dataset, i: usize) -> Result<PsiTerms> {
    let rq = regime_quantities(theta, data, i)?;
    Ok(psi_terms_at(&rq, residual(theta, data, i), first_stage_index(theta, data, i)))
}

/// Log-likelihood contribution of row `i`; `−∞` signals underflow.
pub fn loglik_obs(theta: &Theta, data: &Dataset, i: usize) -> Result<f64> {
    theta.validate(true)?;
    let rq = regime_quantities(theta, data, i)?;
    Ok(log_density_at(
        &rq,
        residual(theta, data, i),
        first_stage_index(theta, data, i),
        data.treatment[i],
    ))
}

/// Residuals, first-stage indices and scale factors for every row.
pub struct RowInputs {
    pub eps: Vec<f64>,
    pub index: Vec<f64>,
    pub scale: Vec<f64>,
}

impl RowInputs {
    pub fn new(theta: &Theta, data: &Dataset) -> Result<Self> {
        theta.check_dims(data.dims())?;
        let fit = &data.frontier * DVector::from_column_slice(&theta.beta);
        let index = &data.first_stage * DVector::from_column_slice(&theta.gamma);
        let scale = &data.scale * DVector::from_column_slice(&theta.delta);
        Ok(Self {
            eps: data.y.iter().zip(fit.iter()).map(|(y, f)| y - f).collect(),
            index: index.iter().copied().collect(),
            scale: scale.iter().map(|s| s.exp()).collect(),
        })
    }
}

/// Per-row log-likelihood contributions (may contain `−∞`).
pub fn loglik_contributions(theta: &Theta, data: &Dataset) -> Result<Vec<f64>> {
    theta.validate(true)?;
    let rows = RowInputs::new(theta, data)?;
    let mut out = Vec::with_capacity(data.n_obs());
    // Rows sharing a scale factor (common with discrete determinants) reuse
    // the regime quantities.
    let mut cache: Option<RegimeQuantities> = None;
    for i in 0..data.n_obs() {
        let g = rows.scale[i];
        let rq = match cache {
            Some(rq) if rq.scale_factor == g => rq,
            _ => {
                let rq = RegimeQuantities::new(theta, g)?;
                cache = Some(rq);
                rq
            }
        };
        out.push(log_density_at(&rq, rows.eps[i], rows.index[i], data.treatment[i]));
    }
    Ok(out)
}

/// `ℓ_n(θ)` with compensated summation. A row whose likelihood underflows
/// is reported as [`SfError::Underflow`].
pub fn loglik(theta: &Theta, data: &Dataset) -> Result<f64> {
    let contributions = loglik_contributions(theta, data)?;
    let mut acc = ExactSum::new();
    for (row, v) in contributions.into_iter().enumerate() {
        if !v.is_finite() {
            return Err(SfError::Underflow { row });
        }
        acc.add(v);
    }
    Ok(acc.value())
}

/// Joint density of `(ε, η)` at scale factor `g`:
///
/// ```text
/// (2π σ̃)⁻¹ Σ_± Φ(λρ_Vσ_Vη/σ̃ ± ρ_Uσ_U(Z)η/(λσ̃) − λε/σ̃)
///            · exp(−(ε − ρ_Vσ_Vη ± ρ_Uσ_U(Z)η)²/(2σ̃²) − η²/2)
/// ```
pub fn f_eps_eta(theta: &Theta, g: f64, eps: f64, eta: f64) -> Result<f64> {
    theta.validate(true)?;
    let rq = RegimeQuantities::new(theta, g)?;
    let rv_sv = theta.rho_v * theta.sigma2_v.sqrt();
    let ru_su = theta.rho_u * rq.sigma_u_z;
    let (st, lam) = (rq.sigma_tilde, rq.lambda);
    let total: f64 = [1.0, -1.0]
        .iter()
        .map(|&s| {
            let shift = s * ru_su * eta;
            let arg = lam * rv_sv * eta / st + shift / (lam * st) - lam * eps / st;
            let dev = eps - rv_sv * eta + shift;
            norm_cdf(arg) * (-dev * dev / (2.0 * st * st) - 0.5 * eta * eta).exp()
        })
        .sum();
    Ok(total / (2.0 * PI * st))
}
