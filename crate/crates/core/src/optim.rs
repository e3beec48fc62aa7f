//! Unconstrained minimizers: BFGS with backtracking line search and a
//! Nelder–Mead simplex fallback.

use serde::Serialize;

/// Objective to minimize. `value` returns `+∞` outside the domain.
pub trait Objective {
    fn dim(&self) -> usize;

    fn value(&self, x: &[f64]) -> f64;

    /// Gradient at `x`; defaults to central differences.
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        central_gradient(|p| self.value(p), x)
    }
}

/// Central-difference step `∛ε · max(1, |x|)`.
#[inline]
pub fn fd_step(x: f64) -> f64 {
    f64::EPSILON.cbrt() * x.abs().max(1.0)
}

/// Central-difference gradient, falling back to a one-sided difference when
/// one of the two probes leaves the domain.
pub fn central_gradient<F: Fn(&[f64]) -> f64>(f: F, x: &[f64]) -> Vec<f64> {
    let mut probe = x.to_vec();
    let mut out = vec![0.0; x.len()];
    let mut fx = None;
    for k in 0..x.len() {
        let h = fd_step(x[k]);
        probe[k] = x[k] + h;
        let up = f(&probe);
        probe[k] = x[k] - h;
        let down = f(&probe);
        probe[k] = x[k];
        out[k] = match (up.is_finite(), down.is_finite()) {
            (true, true) => (up - down) / (2.0 * h),
            (true, false) => (up - *fx.get_or_insert_with(|| f(x))) / h,
            (false, true) => (*fx.get_or_insert_with(|| f(x)) - down) / h,
            (false, false) => f64::NAN,
        };
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OptimOptions {
    pub max_iterations: usize,
    /// Sup-norm gradient tolerance.
    pub grad_tol: f64,
    /// Relative step and objective-change tolerance.
    pub step_tol: f64,
}

impl Default for OptimOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            grad_tol: 1e-6,
            step_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    pub grad_norm: f64,
    pub method: &'static str,
}

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Quasi-Newton minimization with the inverse-Hessian BFGS update.
pub fn bfgs<O: Objective + ?Sized>(obj: &O, x0: &[f64], opts: &OptimOptions) -> OptimResult {
    let n = obj.dim();
    let mut x = x0.to_vec();
    let mut f = obj.value(&x);
    let mut evaluations = 1;
    if !f.is_finite() {
        return OptimResult {
            x,
            value: f,
            iterations: 0,
            evaluations,
            converged: false,
            grad_norm: f64::NAN,
            method: "bfgs",
        };
    }
    let mut g = obj.gradient(&x);
    let mut h = identity(n);
    let mut fresh = true;
    let mut stalls = 0;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iterations {
        if g.iter().any(|v| !v.is_finite()) {
            break;
        }
        if sup_norm(&g) < opts.grad_tol {
            converged = true;
            break;
        }
        iterations += 1;
        let mut d: Vec<f64> = (0..n).map(|i| -dot(&h[i], &g)).collect();
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            h = identity(n);
            fresh = true;
            d = g.iter().map(|v| -v).collect();
            slope = -dot(&g, &g);
        }
        // Keep the first trial step of a fresh approximation modest.
        let mut alpha = if fresh { (1.0 / sup_norm(&d)).min(1.0) } else { 1.0 };
        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + alpha * di).collect();
            let ft = obj.value(&trial);
            evaluations += 1;
            if ft.is_finite() && ft <= f + 1e-4 * alpha * slope {
                accepted = Some((trial, ft));
                break;
            }
            alpha *= 0.5;
        }
        let Some((x_new, f_new)) = accepted else {
            if fresh {
                break;
            }
            h = identity(n);
            fresh = true;
            continue;
        };
        let g_new = obj.gradient(&x_new);
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let small_step = sup_norm(&s) <= opts.step_tol * (1.0 + sup_norm(&x));
        let small_change = (f - f_new).abs() <= opts.step_tol * (1.0 + f.abs());
        stalls = if small_step && small_change { stalls + 1 } else { 0 };
        x = x_new;
        f = f_new;
        g = g_new;
        if stalls >= 3 {
            converged = sup_norm(&g) < opts.grad_tol.sqrt();
            break;
        }
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            if fresh {
                let scale = sy / dot(&y, &y);
                h = identity(n).into_iter().map(|row| row.into_iter().map(|v| v * scale).collect()).collect();
                fresh = false;
            }
            bfgs_update(&mut h, &s, &y, sy);
        }
    }
    OptimResult {
        grad_norm: sup_norm(&g),
        x,
        value: f,
        iterations,
        evaluations,
        converged,
        method: "bfgs",
    }
}

fn identity(n: usize) -> Vec<Vec<f64>> {
    (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect()
}

/// `H ← (I − ρ s yᵀ) H (I − ρ y sᵀ) + ρ s sᵀ`, `ρ = 1/(yᵀs)`.
fn bfgs_update(h: &mut [Vec<f64>], s: &[f64], y: &[f64], sy: f64) {
    let n = s.len();
    let rho = 1.0 / sy;
    let hy: Vec<f64> = (0..n).map(|i| dot(&h[i], y)).collect();
    let yhy = dot(y, &hy);
    for i in 0..n {
        for j in 0..n {
            h[i][j] += -rho * (hy[i] * s[j] + s[i] * hy[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
        }
    }
}

/// Adaptive Nelder–Mead (dimension-dependent coefficients).
pub fn nelder_mead<O: Objective + ?Sized>(obj: &O, x0: &[f64], step: f64, max_evaluations: usize, tol: f64) -> OptimResult {
    let n = obj.dim();
    let nf = n as f64;
    let (alpha, gamma, rho, sigma) = (1.0, 1.0 + 2.0 / nf, 0.75 - 1.0 / (2.0 * nf), 1.0 - 1.0 / nf);
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let mut evaluations = 0;
    let eval = |x: &[f64], evaluations: &mut usize| {
        *evaluations += 1;
        let v = obj.value(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    simplex.push((x0.to_vec(), eval(x0, &mut evaluations)));
    for k in 0..n {
        let mut p = x0.to_vec();
        p[k] += step * x0[k].abs().max(1.0);
        let v = eval(&p, &mut evaluations);
        simplex.push((p, v));
    }
    let mut iterations = 0;
    let mut converged = false;
    while evaluations < max_evaluations {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[n].1;
        if best.is_finite() && (worst - best).abs() <= tol * (1.0 + best.abs()) {
            let spread = (0..n).fold(0.0f64, |m, k| {
                simplex.iter().fold(m, |m, (p, _)| m.max((p[k] - simplex[0].0[k]).abs()))
            });
            if spread <= tol.sqrt() {
                converged = true;
                break;
            }
        }
        iterations += 1;
        let centroid: Vec<f64> = (0..n).map(|k| simplex[..n].iter().map(|(p, _)| p[k]).sum::<f64>() / nf).collect();
        let along = |t: f64| -> Vec<f64> {
            centroid.iter().zip(&simplex[n].0).map(|(c, w)| c + t * (c - w)).collect()
        };
        let xr = along(alpha);
        let fr = eval(&xr, &mut evaluations);
        if fr < simplex[0].1 {
            let xe = along(alpha * gamma);
            let fe = eval(&xe, &mut evaluations);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            let outside = fr < simplex[n].1;
            let xc = along(if outside { alpha * rho } else { -rho });
            let fc = eval(&xc, &mut evaluations);
            if (outside && fc <= fr) || (!outside && fc < simplex[n].1) {
                simplex[n] = (xc, fc);
            } else {
                let x_best = simplex[0].0.clone();
                for entry in simplex.iter_mut().skip(1) {
                    let p: Vec<f64> = x_best.iter().zip(&entry.0).map(|(b, x)| b + sigma * (x - b)).collect();
                    let v = eval(&p, &mut evaluations);
                    *entry = (p, v);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, value) = simplex.swap_remove(0);
    OptimResult {
        x,
        value,
        iterations,
        evaluations,
        converged,
        grad_norm: f64::NAN,
        method: "nelder_mead",
    }
}

/// BFGS, then a simplex restart from the BFGS end point if it did not
/// converge, then a final BFGS polish.
pub fn minimize<O: Objective + ?Sized>(obj: &O, x0: &[f64], opts: &OptimOptions) -> OptimResult {
    let first = bfgs(obj, x0, opts);
    if first.converged {
        return first;
    }
    let from = if first.value.is_finite() { first.x.clone() } else { x0.to_vec() };
    let simplex = nelder_mead(obj, &from, 0.1, 400 * obj.dim().max(1), opts.step_tol);
    let polished = bfgs(obj, &simplex.x, opts);
    let total = first.evaluations + simplex.evaluations + polished.evaluations;
    let best = [first, polished]
        .into_iter()
        .chain(std::iter::once(simplex.clone()))
        .filter(|r| r.value.is_finite())
        .min_by(|a, b| a.value.total_cmp(&b.value).then(b.converged.cmp(&a.converged)));
    match best {
        Some(mut r) => {
            r.evaluations = total;
            if r.method == "bfgs" {
                r.method = "bfgs+nelder_mead";
            }
            r
        }
        None => simplex,
    }
}
