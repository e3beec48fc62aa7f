//! First-principles densities of the composite error `ε = V − U`.
//!
//! Conditional on the first-stage shock `η`:
//!
//! * `V | η ~ N(ρ_V σ_V η, σ²_V (1 − ρ²_V))`
//! * `U | η = σ_U(Z) |A|` with `A | η ~ N(ρ_U η, 1 − ρ²_U)` (folded normal)
//!
//! Every quantity below is obtained by integrating products of these two
//! densities and `φ(η)` numerically; no closed-form convolution is used.

use crate::Quadrature;
use std::f64::consts::PI;

fn normal_pdf(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    (-0.5 * z * z).exp() / (sd * (2.0 * PI).sqrt())
}

/// Structural scale and correlation parameters at one value of `Z`.
#[derive(Debug, Clone, Copy)]
pub struct Composite {
    /// `σ_U · g(Z, δ)`
    pub sigma_u_z: f64,
    pub sigma_v: f64,
    pub rho_v: f64,
    pub rho_u: f64,
}

impl Composite {
    pub fn v_given_eta(&self, v: f64, eta: f64) -> f64 {
        normal_pdf(v, self.rho_v * self.sigma_v * eta, self.sigma_v * (1.0 - self.rho_v * self.rho_v).sqrt())
    }

    pub fn u_given_eta(&self, u: f64, eta: f64) -> f64 {
        if u < 0.0 {
            return 0.0;
        }
        let a = u / self.sigma_u_z;
        let sd = (1.0 - self.rho_u * self.rho_u).sqrt();
        let m = self.rho_u * eta;
        (normal_pdf(a, m, sd) + normal_pdf(-a, m, sd)) / self.sigma_u_z
    }

    /// `f(ε, u | η)`: joint density of the composite error and inefficiency.
    pub fn eps_u_given_eta(&self, eps: f64, u: f64, eta: f64) -> f64 {
        self.v_given_eta(eps + u, eta) * self.u_given_eta(u, eta)
    }

    /// `f_{ε|η}(ε | η) = ∫₀^∞ f_{V|η}(ε + u) f_{U|η}(u) du`.
    pub fn eps_given_eta(&self, q: &Quadrature, eps: f64, eta: f64) -> f64 {
        q.integrate(|u| self.eps_u_given_eta(eps, u, eta), 0.0, f64::INFINITY)
    }

    /// `f_{ε,η}(ε, η)`.
    pub fn joint(&self, q: &Quadrature, eps: f64, eta: f64) -> f64 {
        self.eps_given_eta(q, eps, eta) * normal_pdf(eta, 0.0, 1.0)
    }

    /// Likelihood of one observation: the joint density integrated over the
    /// half-line of `η` consistent with the observed treatment
    /// (`Z = 1 ⇔ η ≥ −W̃γ`).
    pub fn likelihood(&self, q: &Quadrature, eps: f64, index: f64, treated: bool) -> f64 {
        let inner = Quadrature { abs_tol: q.abs_tol * 1e-3, ..q.clone() }.with_panels(8);
        let f = |eta: f64| self.joint(&inner, eps, eta);
        if treated {
            q.integrate(f, -index, f64::INFINITY)
        } else {
            q.integrate(f, f64::NEG_INFINITY, -index)
        }
    }

    /// `∫ f(ε, u | η) φ(η) dη`: joint density of `(ε, U)`.
    pub fn eps_u(&self, q: &Quadrature, eps: f64, u: f64) -> f64 {
        q.integrate(
            |eta| self.eps_u_given_eta(eps, u, eta) * normal_pdf(eta, 0.0, 1.0),
            f64::NEG_INFINITY,
            f64::INFINITY,
        )
    }

    /// Marginal density of `ε`.
    pub fn eps_density(&self, q: &Quadrature, eps: f64) -> f64 {
        let inner = Quadrature { abs_tol: q.abs_tol * 1e-3, ..q.clone() }.with_panels(8);
        q.integrate(|u| self.eps_u(&inner, eps, u), 0.0, f64::INFINITY)
    }

    /// `f_{U|ε}(u | ε)`.
    pub fn u_given_eps(&self, q: &Quadrature, u: f64, eps: f64) -> f64 {
        self.eps_u(q, eps, u) / self.eps_density(q, eps)
    }

    /// `E[exp(−U) | ε]`.
    pub fn technical_efficiency(&self, q: &Quadrature, eps: f64) -> f64 {
        let inner = Quadrature { abs_tol: q.abs_tol * 1e-3, ..q.clone() }.with_panels(8);
        let num = q.integrate(|u| (-u).exp() * self.eps_u(&inner, eps, u), 0.0, f64::INFINITY);
        num / self.eps_density(q, eps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conditional_densities_have_unit_mass() {
        let c = Composite { sigma_u_z: 1.3, sigma_v: 0.8, rho_v: 0.4, rho_u: 0.7 };
        let q = Quadrature::new(1e-12);
        for eta in [-1.5, 0.0, 2.0] {
            let mu = q.integrate(|u| c.u_given_eta(u, eta), 0.0, f64::INFINITY);
            assert!((mu - 1.0).abs() < 1e-11);
            let me = q.integrate(|e| c.eps_given_eta(&q, e, eta), f64::NEG_INFINITY, f64::INFINITY);
            assert!((me - 1.0).abs() < 1e-9, "{me}");
        }
    }

    #[test]
    fn treated_and_untreated_likelihoods_sum_to_marginal() {
        let c = Composite { sigma_u_z: 1.1, sigma_v: 1.0, rho_v: 0.5, rho_u: 0.5 };
        let q = Quadrature::new(1e-10);
        let eps = -0.7;
        let l0 = c.likelihood(&q, eps, 0.3, false);
        let l1 = c.likelihood(&q, eps, 0.3, true);
        assert!((l0 + l1 - c.eps_density(&q, eps)).abs() < 1e-9);
    }
}
