use super::transform::Transform;
use crate::model::{log_density_at, Dataset, RegimeQuantities, RowInputs, Theta};
use crate::numeric::ExactSum;
use crate::optim::{fd_step, Objective};

/// Number of per-row partial derivatives: `(ε, W̃γ, ln g)` and the four
/// scalar coordinates `(ln σ²_U, ln σ²_V, atanh ρ_V, s)`.
pub const N_PARTIALS: usize = 7;

/// Negative mean log-likelihood in the unconstrained coordinates.
///
/// The gradient is assembled by the chain rule from central differences of
/// each row's log-density with respect to its residual, first-stage index
/// and log scale factor, and with respect to the four scalar coordinates.
/// This needs 14 row evaluations per gradient instead of two full
/// likelihood passes per parameter.
pub struct LikelihoodObjective<'a> {
    pub data: &'a Dataset,
    pub transform: Transform,
}

impl<'a> LikelihoodObjective<'a> {
    pub fn new(data: &'a Dataset, restricted: bool) -> Self {
        Self {
            data,
            transform: Transform::new(data.dims(), restricted),
        }
    }

    pub fn loglik(&self, u: &[f64]) -> f64 {
        let theta = self.transform.to_theta(u);
        let Ok(rows) = crate::model::loglik_contributions(&theta, self.data) else {
            return f64::NEG_INFINITY;
        };
        let mut acc = ExactSum::new();
        for v in rows {
            if !v.is_finite() {
                return f64::NEG_INFINITY;
            }
            acc.add(v);
        }
        acc.value()
    }

    /// Unconstrained vector with one scalar coordinate shifted.
    fn shifted(&self, u: &[f64], k: usize, h: f64) -> Theta {
        let mut v = u.to_vec();
        v[self.transform.scalar_offset() + k] += h;
        self.transform.to_theta(&v)
    }

    /// Per-row central-difference partials. `None` if any row is outside
    /// the domain at `u`.
    pub fn row_partials(&self, u: &[f64]) -> Option<Vec<[f64; N_PARTIALS]>> {
        let theta = self.transform.to_theta(u);
        let rows = RowInputs::new(&theta, self.data).ok()?;
        let n_scalar = if self.transform.restricted { 3 } else { 4 };
        let o = self.transform.scalar_offset();
        let probes: Vec<(f64, Theta, Theta)> = (0..n_scalar)
            .map(|k| {
                let h = fd_step(u[o + k]);
                (h, self.shifted(u, k, h), self.shifted(u, k, -h))
            })
            .collect();
        let mut out = Vec::with_capacity(self.data.n_obs());
        for i in 0..self.data.n_obs() {
            let (eps, wg, g, z) = (rows.eps[i], rows.index[i], rows.scale[i], self.data.treatment[i]);
            let rq = RegimeQuantities::new(&theta, g).ok()?;
            let mut p = [0.0; N_PARTIALS];
            let h = fd_step(eps);
            p[0] = (log_density_at(&rq, eps + h, wg, z) - log_density_at(&rq, eps - h, wg, z)) / (2.0 * h);
            let h = fd_step(wg);
            p[1] = (log_density_at(&rq, eps, wg + h, z) - log_density_at(&rq, eps, wg - h, z)) / (2.0 * h);
            let lg = g.ln();
            let h = fd_step(lg);
            let up = RegimeQuantities::new(&theta, (lg + h).exp()).ok()?;
            let down = RegimeQuantities::new(&theta, (lg - h).exp()).ok()?;
            p[2] = (log_density_at(&up, eps, wg, z) - log_density_at(&down, eps, wg, z)) / (2.0 * h);
            for (k, (h, t_up, t_down)) in probes.iter().enumerate() {
                let up = RegimeQuantities::new(t_up, g).ok()?;
                let down = RegimeQuantities::new(t_down, g).ok()?;
                p[3 + k] = (log_density_at(&up, eps, wg, z) - log_density_at(&down, eps, wg, z)) / (2.0 * h);
            }
            if p.iter().any(|v| !v.is_finite()) {
                return None;
            }
            out.push(p);
        }
        Some(out)
    }

    /// Per-row scores in the unconstrained coordinates.
    pub fn row_scores(&self, u: &[f64]) -> Option<Vec<Vec<f64>>> {
        let partials = self.row_partials(u)?;
        let d = self.transform.dims;
        let n_scalar = if self.transform.restricted { 3 } else { 4 };
        Some(
            partials
                .iter()
                .enumerate()
                .map(|(i, p)| {
                    let mut s = Vec::with_capacity(self.transform.dim());
                    s.extend((0..d.frontier).map(|k| -self.data.frontier[(i, k)] * p[0]));
                    s.extend((0..d.scale).map(|k| self.data.scale[(i, k)] * p[2]));
                    s.extend_from_slice(&p[3..3 + n_scalar]);
                    s.extend((0..d.first_stage).map(|k| self.data.first_stage[(i, k)] * p[1]));
                    s
                })
                .collect(),
        )
    }
}

impl Objective for LikelihoodObjective<'_> {
    fn dim(&self) -> usize {
        self.transform.dim()
    }

    fn value(&self, u: &[f64]) -> f64 {
        let ll = self.loglik(u);
        if ll.is_finite() {
            -ll / self.data.n_obs() as f64
        } else {
            f64::INFINITY
        }
    }

    fn gradient(&self, u: &[f64]) -> Vec<f64> {
        let Some(scores) = self.row_scores(u) else {
            return vec![f64::NAN; self.dim()];
        };
        let n = self.data.n_obs() as f64;
        (0..self.dim())
            .map(|k| -scores.iter().map(|s| s[k]).collect::<ExactSum>().value() / n)
            .collect()
    }
}
