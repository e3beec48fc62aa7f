//! Adaptive Gauss–Legendre quadrature.
//!
//! Reference integrator for tests: closed-form quantities in `endosf` are
//! checked against direct numerical integration of the underlying densities.
//! Nodes are generated by Newton iteration on the Legendre recurrence, so
//! nothing here shares code or constants with the library under test.

use std::f64::consts::PI;

pub mod composite;

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0_f64, 0.0_f64);
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        // recompute derivative at the converged node
        let (mut p0, mut p1) = (1.0_f64, 0.0_f64);
        for j in 0..n {
            let p2 = p1;
            p1 = p0;
            p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
        }
        if z.abs() < 1.0 {
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
        }
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Adaptive integrator over finite and (semi-)infinite intervals.
#[derive(Debug, Clone)]
pub struct Quadrature {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    /// Absolute error target for the whole integral.
    pub abs_tol: f64,
    pub max_depth: u32,
    pub initial_panels: usize,
}

impl Default for Quadrature {
    fn default() -> Self {
        Self::new(1e-13)
    }
}

impl Quadrature {
    pub fn new(abs_tol: f64) -> Self {
        let (nodes, weights) = gauss_legendre(20);
        Self {
            nodes,
            weights,
            abs_tol,
            max_depth: 40,
            initial_panels: 16,
        }
    }

    pub fn with_panels(mut self, panels: usize) -> Self {
        self.initial_panels = panels.max(1);
        self
    }

    fn rule(&self, f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(mid + half * x))
            .sum::<f64>()
            * half
    }

    fn recurse(&self, f: &dyn Fn(f64) -> f64, a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let mid = 0.5 * (a + b);
        let left = self.rule(f, a, mid);
        let right = self.rule(f, mid, b);
        let refined = left + right;
        if (refined - whole).abs() <= tol || depth >= self.max_depth {
            return refined;
        }
        self.recurse(f, a, mid, left, 0.5 * tol, depth + 1)
            + self.recurse(f, mid, b, right, 0.5 * tol, depth + 1)
    }

    /// Integral over `[a, b]`; either end may be infinite.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F, a: f64, b: f64) -> f64 {
        self.integrate_dyn(&f, a, b)
    }

    fn integrate_dyn(&self, f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
        if a == b {
            return 0.0;
        }
        if a > b {
            return -self.integrate_dyn(f, b, a);
        }
        match (a.is_finite(), b.is_finite()) {
            (true, true) => self.finite(f, a, b),
            (true, false) => {
                // x = a + t / (1 - t)
                let g = |t: f64| {
                    let s = 1.0 - t;
                    f(a + t / s) / (s * s)
                };
                self.finite(&g, 0.0, 1.0)
            }
            (false, true) => {
                let g = |t: f64| {
                    let s = 1.0 - t;
                    f(b - t / s) / (s * s)
                };
                self.finite(&g, 0.0, 1.0)
            }
            (false, false) => self.integrate_dyn(f, f64::NEG_INFINITY, 0.0) + self.integrate_dyn(f, 0.0, f64::INFINITY),
        }
    }

    fn finite(&self, f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
        let panels = self.initial_panels;
        let width = (b - a) / panels as f64;
        let tol = self.abs_tol / panels as f64;
        (0..panels)
            .map(|k| {
                let lo = a + width * k as f64;
                let hi = if k + 1 == panels { b } else { lo + width };
                let whole = self.rule(f, lo, hi);
                self.recurse(f, lo, hi, whole, tol, 0)
            })
            .sum()
    }

    /// Iterated integral `∫_{x0}^{x1} ∫_{y0(x)}^{y1(x)} f(x, y) dy dx`.
    pub fn integrate_2d<F, L, U>(&self, f: F, x0: f64, x1: f64, y_lo: L, y_hi: U) -> f64
    where
        F: Fn(f64, f64) -> f64,
        L: Fn(f64) -> f64,
        U: Fn(f64) -> f64,
    {
        let inner = Quadrature {
            abs_tol: self.abs_tol * 1e-2,
            ..self.clone()
        }
        .with_panels(4);
        self.integrate(|x| inner.integrate(|y| f(x, y), y_lo(x), y_hi(x)), x0, x1)
    }
}
