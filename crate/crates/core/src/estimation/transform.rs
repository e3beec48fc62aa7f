use crate::baseline::{variance_from_log, VARIANCE_FLOOR};
use crate::model::{Dims, Theta};

/// Map between `Theta` and the unconstrained optimization vector
/// `(β, δ, ln σ²_U, ln σ²_V, atanh ρ_V, s, γ)` with `ρ_U = tanh s`.
///
/// The likelihood is even in `ρ_U`, hence in `s`, so the optimizer works on
/// `ρ_{2,U} = ρ_U² = tanh² s ∈ [0, 1)` without a hard bound; the reported
/// estimate is `|tanh ŝ|`. In the restricted layout `s` is absent and
/// `ρ_U = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Transform {
    pub dims: Dims,
    pub restricted: bool,
}

impl Transform {
    pub fn new(dims: Dims, restricted: bool) -> Self {
        Self { dims, restricted }
    }

    pub fn dim(&self) -> usize {
        self.dims.n_params() - usize::from(self.restricted)
    }

    /// Position of `ln σ²_U`; the scalar block is `[ln σ²_U, ln σ²_V, atanh ρ_V, (s)]`.
    pub fn scalar_offset(&self) -> usize {
        self.dims.frontier + self.dims.scale
    }

    pub fn gamma_offset(&self) -> usize {
        self.scalar_offset() + if self.restricted { 3 } else { 4 }
    }

    pub fn to_unconstrained(&self, theta: &Theta) -> Vec<f64> {
        let mut u = Vec::with_capacity(self.dim());
        u.extend_from_slice(&theta.beta);
        u.extend_from_slice(&theta.delta);
        u.push(theta.sigma2_u.max(VARIANCE_FLOOR).ln());
        u.push(theta.sigma2_v.max(VARIANCE_FLOOR).ln());
        u.push(theta.rho_v.atanh());
        if !self.restricted {
            u.push(theta.rho_u.atanh());
        }
        u.extend_from_slice(&theta.gamma);
        u
    }

    /// Parameter vector with `ρ_U = tanh s` (possibly negative).
    pub fn to_theta(&self, u: &[f64]) -> Theta {
        let d = self.dims;
        let o = self.scalar_offset();
        Theta {
            beta: u[..d.frontier].to_vec(),
            delta: u[d.frontier..o].to_vec(),
            sigma2_u: variance_from_log(u[o]),
            sigma2_v: variance_from_log(u[o + 1]),
            rho_v: u[o + 2].tanh(),
            rho_u: if self.restricted { 0.0 } else { u[o + 3].tanh() },
            gamma: u[self.gamma_offset()..].to_vec(),
        }
    }

    /// Parameter vector on the reported support `ρ_U ∈ [0, 1)`.
    pub fn to_canonical_theta(&self, u: &[f64]) -> Theta {
        let mut t = self.to_theta(u);
        t.rho_u = t.rho_u.abs();
        t
    }
}
