use crate::error::{Result, SfError};
use serde::{Deserialize, Serialize};

/// Widths of the three design blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub frontier: usize,
    pub scale: usize,
    pub first_stage: usize,
}

impl Dims {
    pub fn n_params(&self) -> usize {
        self.frontier + self.scale + 4 + self.first_stage
    }

    /// Offset of σ²_U in the flat parameter vector.
    pub fn sigma2_u_index(&self) -> usize {
        self.frontier + self.scale
    }

    pub fn sigma2_v_index(&self) -> usize {
        self.sigma2_u_index() + 1
    }

    pub fn rho_v_index(&self) -> usize {
        self.sigma2_u_index() + 2
    }

    pub fn rho_u_index(&self) -> usize {
        self.sigma2_u_index() + 3
    }

    pub fn gamma_offset(&self) -> usize {
        self.sigma2_u_index() + 4
    }
}

/// Full parameter vector `(β, δ, σ²_U, σ²_V, ρ_V, ρ_U, γ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theta {
    pub beta: Vec<f64>,
    pub delta: Vec<f64>,
    pub sigma2_u: f64,
    pub sigma2_v: f64,
    pub rho_v: f64,
    pub rho_u: f64,
    pub gamma: Vec<f64>,
}

impl Theta {
    pub fn dims(&self) -> Dims {
        Dims {
            frontier: self.beta.len(),
            scale: self.delta.len(),
            first_stage: self.gamma.len(),
        }
    }

    pub fn n_params(&self) -> usize {
        self.dims().n_params()
    }

    /// Flatten in the canonical order.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.n_params());
        v.extend_from_slice(&self.beta);
        v.extend_from_slice(&self.delta);
        v.extend_from_slice(&[self.sigma2_u, self.sigma2_v, self.rho_v, self.rho_u]);
        v.extend_from_slice(&self.gamma);
        v
    }

    pub fn from_slice(dims: Dims, v: &[f64]) -> Result<Self> {
        if v.len() != dims.n_params() {
            return Err(SfError::Domain(format!(
                "parameter vector has length {}, expected {}",
                v.len(),
                dims.n_params()
            )));
        }
        let s = dims.sigma2_u_index();
        Ok(Self {
            beta: v[..dims.frontier].to_vec(),
            delta: v[dims.frontier..s].to_vec(),
            sigma2_u: v[s],
            sigma2_v: v[s + 1],
            rho_v: v[s + 2],
            rho_u: v[s + 3],
            gamma: v[s + 4..].to_vec(),
        })
    }

    /// Checks the variance and correlation ranges. `allow_negative_rho_u`
    /// admits the mirror image `ρ_U ∈ (-1, 0)` used by the unrestricted
    /// evaluator.
    pub fn validate(&self, allow_negative_rho_u: bool) -> Result<()> {
        let finite = self.to_vec().iter().all(|x| x.is_finite());
        if !finite {
            return Err(SfError::Domain("non-finite parameter".into()));
        }
        if !(self.sigma2_u > 0.0) || !(self.sigma2_v > 0.0) {
            return Err(SfError::Domain(format!(
                "variances must be positive (σ²_U = {}, σ²_V = {})",
                self.sigma2_u, self.sigma2_v
            )));
        }
        if !(self.rho_v.abs() < 1.0) {
            return Err(SfError::Domain(format!("ρ_V = {} outside (-1, 1)", self.rho_v)));
        }
        let lower_ok = if allow_negative_rho_u {
            self.rho_u > -1.0
        } else {
            self.rho_u >= 0.0
        };
        if !lower_ok || !(self.rho_u < 1.0) {
            return Err(SfError::Domain(format!("ρ_U = {} outside its support", self.rho_u)));
        }
        Ok(())
    }

    pub fn check_dims(&self, dims: Dims) -> Result<()> {
        if self.dims() != dims {
            return Err(SfError::Domain(format!(
                "parameter widths {:?} do not match design widths {:?}",
                self.dims(),
                dims
            )));
        }
        Ok(())
    }

    /// Copy with `ρ_U` replaced.
    pub fn with_rho_u(&self, rho_u: f64) -> Self {
        Self { rho_u, ..self.clone() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Theta {
        Theta {
            beta: vec![0.1, 0.2],
            delta: vec![0.3],
            sigma2_u: 1.5,
            sigma2_v: 0.7,
            rho_v: -0.2,
            rho_u: 0.4,
            gamma: vec![1.0, -1.0, 0.5],
        }
    }

    #[test]
    fn flat_round_trip() {
        let t = sample();
        let v = t.to_vec();
        assert_eq!(v.len(), 10);
        assert_eq!(Theta::from_slice(t.dims(), &v).unwrap(), t);
        assert_eq!(v[t.dims().rho_u_index()], 0.4);
        assert_eq!(v[t.dims().gamma_offset()], 1.0);
    }

    #[test]
    fn validation() {
        let t = sample();
        assert!(t.validate(false).is_ok());
        assert!(t.with_rho_u(-0.1).validate(false).is_err());
        assert!(t.with_rho_u(-0.1).validate(true).is_ok());
        assert!(t.with_rho_u(1.0).validate(true).is_err());
        let mut bad = sample();
        bad.sigma2_v = 0.0;
        assert!(bad.validate(false).is_err());
        bad = sample();
        bad.rho_v = -1.0;
        assert!(bad.validate(false).is_err());
        assert!(Theta::from_slice(t.dims(), &[0.0; 3]).is_err());
    }
}
