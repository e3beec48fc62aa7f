//! Data-generating process of the Monte Carlo design and the replication
//! harness.
//!
//! ```text
//! Y  = β₀ + X₁β₁ + X₂β₂ + X₁Z₂β₁,₁ + X₂Z₂β₁,₂ + V − U₀ exp(Z₁δ₁ + Z₂δ₂)
//! Z₂ = 1(γ₀ + γ₁X₁ + γ₂X₂ + γ₃Z₁ + γ₄W₁ + γ₅W₂ + η ≥ 0)
//! (X₁, X₂, Z₁, W₁, R) ~ N(0, Σ), Σ = 0.5·(I + 11ᵀ),  W₂ = 1(R > 0.5)
//! (V, η) standard bivariate normal with correlation ρ_V
//! U₀ = σ_U |ρ_U η + √(1 − ρ_U²) e|, e ~ N(0, 1)
//! ```

use crate::efficiency::te_report;
use crate::error::{Result, SfError};
use crate::estimation::{fit, FitOptions, FitResult};
use crate::inference::{lr_endogeneity_test, mixture_critical_value, LrTestResult, LR_FLOOR_TOL};
use crate::model::{Dataset, ModelSpec, Theta};
use crate::numeric::{mean_sd, quantile_sorted};
use nalgebra::{DMatrix, Matrix5};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Inefficiency–assignment correlation of the three designs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scheme {
    S1,
    S2,
    S3,
}

impl Scheme {
    pub fn rho_u(self) -> f64 {
        match self {
            Scheme::S1 => 0.0,
            Scheme::S2 => 0.5,
            Scheme::S3 => 0.95,
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "S1" => Ok(Scheme::S1),
            "S2" => Ok(Scheme::S2),
            "S3" => Ok(Scheme::S3),
            other => Err(SfError::Config(format!("unknown scheme `{other}` (expected S1, S2 or S3)"))),
        }
    }
}

pub const SLOPE: f64 = 0.41359;
pub const FIRST_STAGE_SLOPE: f64 = 0.31623;

/// Population value of `E[exp(−U)]` when `δ = 0`:
/// `2 exp(σ²_U/2) (1 − Φ(σ_U))`.
pub fn population_mean_te(sigma2_u: f64) -> f64 {
    let s = sigma2_u.sqrt();
    2.0 * (0.5 * sigma2_u).exp() * crate::special_fns::norm_cdf(-s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgpConfig {
    pub scheme: Scheme,
    pub n: usize,
    pub n_reps: usize,
    pub seed: u64,
    /// `(β₀, β₁, β₂, β₁,₁, β₁,₂)`
    pub beta: Vec<f64>,
    /// `(δ₁, δ₂)`
    pub delta: Vec<f64>,
    /// `(γ₀, …, γ₅)` on `(1, X₁, X₂, Z₁, W₁, W₂)`.
    pub gamma: Vec<f64>,
    pub rho_v: f64,
    pub sigma2_u: f64,
}

impl DgpConfig {
    /// Design constants. The first-stage slopes on `(X₁, X₂, Z₁, W₁)` are
    /// 0.31623 and the binary instrument `W₂` has coefficient 1; `gamma`
    /// may be overridden.
    pub fn new(scheme: Scheme, n: usize, n_reps: usize, seed: u64) -> Self {
        Self {
            scheme,
            n,
            n_reps,
            seed,
            beta: vec![0.0, SLOPE, SLOPE, SLOPE, SLOPE],
            delta: vec![0.0, 0.0],
            gamma: vec![-0.1, FIRST_STAGE_SLOPE, FIRST_STAGE_SLOPE, FIRST_STAGE_SLOPE, FIRST_STAGE_SLOPE, 1.0],
            rho_v: 0.5,
            sigma2_u: PI / (PI - 2.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.beta.len() != 5 || self.delta.len() != 2 || self.gamma.len() != 6 {
            return Err(SfError::Config("design vectors must have lengths 5 (β), 2 (δ), 6 (γ)".into()));
        }
        if self.n == 0 {
            return Err(SfError::Config("sample size must be positive".into()));
        }
        if !(self.rho_v.abs() < 1.0) || !(self.sigma2_u > 0.0) {
            return Err(SfError::Config("invalid ρ_V or σ²_U".into()));
        }
        Ok(())
    }

    pub fn truth(&self) -> Theta {
        Theta {
            beta: self.beta.clone(),
            delta: self.delta.clone(),
            sigma2_u: self.sigma2_u,
            sigma2_v: 1.0,
            rho_v: self.rho_v,
            rho_u: self.scheme.rho_u(),
            gamma: self.gamma.clone(),
        }
    }

    pub fn spec() -> ModelSpec {
        let s = |v: &[&str]| v.iter().map(|c| c.to_string()).collect::<Vec<_>>();
        ModelSpec {
            treatment: "z2".into(),
            frontier_columns: s(&["const", "x1", "x2", "z2_x1", "z2_x2"]),
            scale_columns: s(&["z1", "z2"]),
            first_stage_columns: s(&["const", "x1", "x2", "z1", "w1", "w2"]),
        }
    }
}

/// Unobserved draws behind a sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Latent {
    pub v: Vec<f64>,
    pub eta: Vec<f64>,
    pub u0: Vec<f64>,
    /// `U = U₀ g(Z, δ)`.
    pub u: Vec<f64>,
    /// The standard-normal shock inside the folded normal.
    pub e: Vec<f64>,
}

/// Observable columns `(y, x1, x2, z1, z2, w1, w2)` of a sample.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSample {
    pub y: Vec<f64>,
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
    pub z1: Vec<f64>,
    pub z2: Vec<bool>,
    pub w1: Vec<f64>,
    pub w2: Vec<f64>,
}

impl RawSample {
    pub const COLUMNS: [&'static str; 7] = ["y", "x1", "x2", "z1", "z2", "w1", "w2"];

    pub fn to_dataset(&self) -> Result<Dataset> {
        let n = self.y.len();
        let z = |i: usize| if self.z2[i] { 1.0 } else { 0.0 };
        Dataset::new(
            DgpConfig::spec(),
            self.y.clone(),
            DMatrix::from_fn(n, 5, |i, j| match j {
                0 => 1.0,
                1 => self.x1[i],
                2 => self.x2[i],
                3 => self.x1[i] * z(i),
                _ => self.x2[i] * z(i),
            }),
            DMatrix::from_fn(n, 2, |i, j| if j == 0 { self.z1[i] } else { z(i) }),
            self.z2.clone(),
            DMatrix::from_fn(n, 6, |i, j| match j {
                0 => 1.0,
                1 => self.x1[i],
                2 => self.x2[i],
                3 => self.z1[i],
                4 => self.w1[i],
                _ => self.w2[i],
            }),
        )
    }

    /// Row-major values in [`RawSample::COLUMNS`] order.
    pub fn row(&self, i: usize) -> [f64; 7] {
        [
            self.y[i],
            self.x1[i],
            self.x2[i],
            self.z1[i],
            if self.z2[i] { 1.0 } else { 0.0 },
            self.w1[i],
            self.w2[i],
        ]
    }
}

/// Stream identifiers: one independent generator per (replicate, variable).
const STREAM_EXOGENOUS: u64 = 0;
const STREAM_NOISE: u64 = 1;
const STREAM_INEFFICIENCY: u64 = 2;

fn stream(seed: u64, rep: usize, variable: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep as u64 * 16 + variable);
    rng
}

/// Draws replicate `rep`; deterministic in `(seed, rep)`.
pub fn generate_raw(config: &DgpConfig, rep: usize) -> Result<(RawSample, Latent)> {
    config.validate()?;
    let n = config.n;
    let chol = Matrix5::from_fn(|i, j| if i == j { 1.0 } else { 0.5 })
        .cholesky()
        .expect("equicorrelation matrix is positive definite")
        .l();
    let mut exo = stream(config.seed, rep, STREAM_EXOGENOUS);
    let mut noise = stream(config.seed, rep, STREAM_NOISE);
    let mut ineff = stream(config.seed, rep, STREAM_INEFFICIENCY);
    let draw = |rng: &mut ChaCha8Rng| -> f64 { StandardNormal.sample(rng) };
    let (b, d, g) = (&config.beta, &config.delta, &config.gamma);
    let rho_u = config.scheme.rho_u();
    let sigma_u = config.sigma2_u.sqrt();
    let rv_c = (1.0 - config.rho_v * config.rho_v).sqrt();
    let ru_c = (1.0 - rho_u * rho_u).sqrt();

    let mut raw = RawSample {
        y: Vec::with_capacity(n),
        x1: Vec::with_capacity(n),
        x2: Vec::with_capacity(n),
        z1: Vec::with_capacity(n),
        z2: Vec::with_capacity(n),
        w1: Vec::with_capacity(n),
        w2: Vec::with_capacity(n),
    };
    let mut latent = Latent {
        v: Vec::with_capacity(n),
        eta: Vec::with_capacity(n),
        u0: Vec::with_capacity(n),
        u: Vec::with_capacity(n),
        e: Vec::with_capacity(n),
    };
    for _ in 0..n {
        let raw5 = nalgebra::Vector5::from_fn(|_, _| draw(&mut exo));
        let x = chol * raw5;
        let (x1, x2, z1, w1, r) = (x[0], x[1], x[2], x[3], x[4]);
        let w2 = if r > 0.5 { 1.0 } else { 0.0 };
        let eta = draw(&mut noise);
        let v = config.rho_v * eta + rv_c * draw(&mut noise);
        let e = draw(&mut ineff);
        let u0 = sigma_u * (rho_u * eta + ru_c * e).abs();
        let z2 = g[0] + g[1] * x1 + g[2] * x2 + g[3] * z1 + g[4] * w1 + g[5] * w2 + eta >= 0.0;
        let zf = if z2 { 1.0 } else { 0.0 };
        let u = u0 * (z1 * d[0] + zf * d[1]).exp();
        let y = b[0] + x1 * b[1] + x2 * b[2] + x1 * zf * b[3] + x2 * zf * b[4] + v - u;
        raw.y.push(y);
        raw.x1.push(x1);
        raw.x2.push(x2);
        raw.z1.push(z1);
        raw.z2.push(z2);
        raw.w1.push(w1);
        raw.w2.push(w2);
        latent.v.push(v);
        latent.eta.push(eta);
        latent.u0.push(u0);
        latent.u.push(u);
        latent.e.push(e);
    }
    Ok((raw, latent))
}

pub fn generate_sample(config: &DgpConfig, rep: usize) -> Result<Dataset> {
    generate_raw(config, rep)?.0.to_dataset()
}

/// Six-number summary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SixNumber {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub mean: f64,
    pub q3: f64,
    pub max: f64,
}

impl SixNumber {
    pub fn of(values: &[f64]) -> Self {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Self {
            min: v[0],
            q1: quantile_sorted(&v, 0.25),
            median: quantile_sorted(&v, 0.5),
            mean: mean_sd(&v).0,
            q3: quantile_sorted(&v, 0.75),
            max: v[v.len() - 1],
        }
    }

    pub fn as_array(&self) -> [f64; 6] {
        [self.min, self.q1, self.median, self.mean, self.q3, self.max]
    }

    pub const LABELS: [&'static str; 6] = ["Min.", "1st Qu.", "Median", "Mean", "3rd Qu.", "Max."];
}

/// Outcome of one replicate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RepOutcome {
    pub rep: usize,
    pub estimate: Option<Vec<f64>>,
    pub loglik: Option<f64>,
    pub boundary_flag: bool,
    pub te: Option<SixNumber>,
    pub error: Option<String>,
    /// Per-row efficiency scores, kept for pooling; not serialized.
    #[serde(skip)]
    pub te_values: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamSummary {
    pub name: String,
    pub truth: f64,
    pub bias: f64,
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McSummary {
    pub scheme: Scheme,
    pub n: usize,
    pub n_reps: usize,
    pub n_converged: usize,
    pub params: Vec<ParamSummary>,
    /// Six-number summary of the efficiency scores pooled over all
    /// converged replicates.
    pub te: Option<SixNumber>,
    pub boundary_share: f64,
    pub reps: Vec<RepOutcome>,
}

/// Maximum tolerated share of failed replicates.
pub const MAX_FAILURE_RATE: f64 = 0.2;

/// Per-replicate fitting seed derived from the harness seed.
pub fn rep_fit_seed(seed: u64, rep: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(rep as u64 + 1)
}

fn run_rep(config: &DgpConfig, options: &FitOptions, rep: usize, with_te: bool) -> RepOutcome {
    let mut opts = options.clone();
    opts.seed = rep_fit_seed(options.seed, rep);
    opts.compute_covariance = false;
    let fitted: Result<(FitResult, Option<Vec<f64>>)> = generate_sample(config, rep).and_then(|data| {
        let f = fit(&data, &opts)?;
        let te = if with_te {
            Some(te_report(&f.theta_hat, &data)?.te)
        } else {
            None
        };
        Ok((f, te))
    });
    match fitted {
        Ok((f, te)) => RepOutcome {
            rep,
            estimate: Some(f.theta_hat.to_vec()),
            loglik: Some(f.loglik_value),
            boundary_flag: f.boundary_flag,
            te: te.as_deref().map(SixNumber::of),
            error: None,
            te_values: te,
        },
        Err(e) => RepOutcome {
            rep,
            estimate: None,
            loglik: None,
            boundary_flag: false,
            te: None,
            error: Some(e.to_string()),
            te_values: None,
        },
    }
}

/// Fits every replicate and aggregates bias/SD and TE summaries. Failed
/// replicates are recorded and excluded; more than 20% failures is an error.
pub fn run_monte_carlo(config: &DgpConfig, options: &FitOptions, with_te: bool) -> Result<McSummary> {
    config.validate()?;
    options.validate()?;
    if config.n_reps == 0 {
        return Err(SfError::Config("n_reps must be positive".into()));
    }
    let reps: Vec<RepOutcome> = (0..config.n_reps)
        .into_par_iter()
        .map(|rep| run_rep(config, options, rep, with_te))
        .collect();
    summarize(config, reps)
}

pub fn summarize(config: &DgpConfig, reps: Vec<RepOutcome>) -> Result<McSummary> {
    let ok: Vec<&RepOutcome> = reps.iter().filter(|r| r.estimate.is_some()).collect();
    let failures = reps.len() - ok.len();
    if failures as f64 > MAX_FAILURE_RATE * reps.len() as f64 {
        let first = reps.iter().find_map(|r| r.error.clone()).unwrap_or_default();
        return Err(SfError::NonConvergence(format!(
            "{failures} of {} replicates failed (first error: {first})",
            reps.len()
        )));
    }
    let truth = config.truth().to_vec();
    let names = DgpConfig::spec().param_names();
    let params = (0..truth.len())
        .map(|k| {
            let draws: Vec<f64> = ok.iter().map(|r| r.estimate.as_ref().unwrap()[k] - truth[k]).collect();
            let (bias, sd) = mean_sd(&draws);
            ParamSummary {
                name: names[k].clone(),
                truth: truth[k],
                bias,
                sd,
            }
        })
        .collect();
    let pooled: Vec<f64> = ok.iter().filter_map(|r| r.te_values.as_deref()).flatten().copied().collect();
    Ok(McSummary {
        scheme: config.scheme,
        n: config.n,
        n_reps: reps.len(),
        n_converged: ok.len(),
        params,
        te: (!pooled.is_empty()).then(|| SixNumber::of(&pooled)),
        boundary_share: ok.iter().filter(|r| r.boundary_flag).count() as f64 / ok.len().max(1) as f64,
        reps,
    })
}

impl McSummary {
    /// Bias/SD table: one row per parameter.
    pub fn table1_csv(&self) -> String {
        let mut out = String::from("parameter,truth,bias,sd\n");
        for p in &self.params {
            out.push_str(&format!(
                "{},{},{},{}\n",
                p.name,
                crate::numeric::fmt_f64(p.truth),
                crate::numeric::fmt_f64(p.bias),
                crate::numeric::fmt_f64(p.sd)
            ));
        }
        out
    }

    /// Six-number TE summary table.
    pub fn table2_csv(&self) -> String {
        let mut out = String::from("statistic,value\n");
        if let Some(te) = &self.te {
            for (label, v) in SixNumber::LABELS.iter().zip(te.as_array()) {
                out.push_str(&format!("{label},{}\n", crate::numeric::fmt_f64(v)));
            }
        }
        out
    }
}

/// Null behaviour of the endogeneity test over replicates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LrMcSummary {
    pub scheme: Scheme,
    pub n: usize,
    pub n_reps: usize,
    /// Statistics of the completed replicates, in replicate order.
    pub statistics: Vec<f64>,
    /// Share of statistics at most [`LR_FLOOR_TOL`].
    pub zero_fraction: f64,
    /// Share of statistics above the 10% and 5% mixture critical values.
    pub rejection_rate_10: f64,
    pub rejection_rate_5: f64,
    pub failures: Vec<(usize, String)>,
}

/// Runs the likelihood-ratio test on every replicate.
pub fn run_lr_monte_carlo(config: &DgpConfig, options: &FitOptions) -> Result<LrMcSummary> {
    config.validate()?;
    options.validate()?;
    let outcomes: Vec<Result<LrTestResult>> = (0..config.n_reps)
        .into_par_iter()
        .map(|rep| {
            let opts = FitOptions {
                seed: rep_fit_seed(options.seed, rep),
                ..options.clone()
            };
            generate_sample(config, rep).and_then(|d| lr_endogeneity_test(&d, &opts))
        })
        .collect();
    let mut statistics = Vec::new();
    let mut failures = Vec::new();
    for (rep, o) in outcomes.into_iter().enumerate() {
        match o {
            Ok(r) => statistics.push(r.statistic),
            Err(e) => failures.push((rep, e.to_string())),
        }
    }
    if failures.len() as f64 > MAX_FAILURE_RATE * config.n_reps as f64 {
        return Err(SfError::NonConvergence(format!(
            "{} of {} replicates failed (first error: {})",
            failures.len(),
            config.n_reps,
            failures[0].1
        )));
    }
    let m = statistics.len().max(1) as f64;
    let share = |pred: &dyn Fn(f64) -> bool| statistics.iter().filter(|&&s| pred(s)).count() as f64 / m;
    let (c10, c5) = (mixture_critical_value(0.10)?, mixture_critical_value(0.05)?);
    Ok(LrMcSummary {
        scheme: config.scheme,
        n: config.n,
        n_reps: config.n_reps,
        zero_fraction: share(&|s| s <= LR_FLOOR_TOL),
        rejection_rate_10: share(&|s| s > c10),
        rejection_rate_5: share(&|s| s > c5),
        statistics,
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::mean_sd;

    fn corr(a: &[f64], b: &[f64]) -> f64 {
        let (ma, sa) = mean_sd(a);
        let (mb, sb) = mean_sd(b);
        let n = a.len() as f64;
        a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / ((n - 1.0) * sa * sb)
    }

    #[test]
    fn population_efficiency_constant() {
        let exact = population_mean_te(PI / (PI - 2.0));
        assert!((exact - 0.384555).abs() < 1e-6);
        assert!((exact - 0.3847).abs() < 5e-4);
    }

    #[test]
    fn samples_are_deterministic_and_rep_specific() {
        let cfg = DgpConfig::new(Scheme::S2, 200, 2, 7);
        let a = generate_raw(&cfg, 0).unwrap().0;
        let b = generate_raw(&cfg, 0).unwrap().0;
        let c = generate_raw(&cfg, 1).unwrap().0;
        assert_eq!(a, b);
        assert_ne!(a.y, c.y);
    }

    #[test]
    fn large_sample_moments() {
        let cfg = DgpConfig::new(Scheme::S1, 1_000_000, 1, 11);
        let (raw, lat) = generate_raw(&cfg, 0).unwrap();
        assert!((corr(&raw.x1, &raw.x2) - 0.5).abs() < 0.01);
        assert!((mean_sd(&lat.v).1.powi(2) - 1.0).abs() < 0.01);
        assert!(corr(&lat.e, &lat.eta).abs() < 0.01);
        // Folded-normal mean σ_U √(2/π).
        let want = cfg.sigma2_u.sqrt() * (2.0 / PI).sqrt();
        assert!((mean_sd(&lat.u0).0 / want - 1.0).abs() < 0.005);
        let te: Vec<f64> = lat.u.iter().map(|u| (-u).exp()).collect();
        assert!((mean_sd(&te).0 - 0.3847).abs() < 0.005);
        assert!((corr(&lat.v, &lat.eta) - 0.5).abs() < 0.01);
    }

    #[test]
    fn treatment_share_is_stable_across_reps() {
        let cfg = DgpConfig::new(Scheme::S3, 100_000, 3, 5);
        let shares: Vec<f64> = (0..3)
            .map(|r| {
                let raw = generate_raw(&cfg, r).unwrap().0;
                raw.z2.iter().filter(|&&z| z).count() as f64 / raw.z2.len() as f64
            })
            .collect();
        for s in &shares {
            assert!((s - shares[0]).abs() < 0.01);
        }
    }

    #[test]
    fn dataset_layout() {
        let cfg = DgpConfig::new(Scheme::S2, 50, 1, 3);
        let (raw, _) = generate_raw(&cfg, 0).unwrap();
        let data = raw.to_dataset().unwrap();
        for i in 0..50 {
            let z = if raw.z2[i] { 1.0 } else { 0.0 };
            assert_eq!(data.frontier[(i, 3)], raw.x1[i] * z);
            assert_eq!(data.scale[(i, 1)], z);
            assert_eq!(data.first_stage[(i, 5)], raw.w2[i]);
        }
        // The outcome equation holds at the truth with the latent draws.
        let (_, lat) = generate_raw(&cfg, 0).unwrap();
        let t = cfg.truth();
        for i in 0..50 {
            let eps = crate::model::residual(&t, &data, i);
            assert!((eps - (lat.v[i] - lat.u[i])).abs() < 1e-12);
        }
    }

    #[test]
    fn six_number_summary() {
        let s = SixNumber::of(&[4.0, 1.0, 3.0, 2.0]);
        assert_eq!(s.as_array(), [1.0, 1.75, 2.5, 2.5, 3.25, 4.0]);
    }

    #[test]
    fn summary_pools_efficiency_and_skips_failures() {
        let cfg = DgpConfig::new(Scheme::S1, 10, 3, 0);
        let truth = cfg.truth().to_vec();
        let rep = |k: usize, te: Option<Vec<f64>>| RepOutcome {
            rep: k,
            estimate: te.as_ref().map(|_| truth.iter().map(|t| t + k as f64).collect()),
            loglik: Some(-1.0),
            boundary_flag: k == 0,
            te: te.as_deref().map(SixNumber::of),
            error: te.is_none().then(|| "failed".to_string()),
            te_values: te,
        };
        let reps = vec![rep(0, Some(vec![0.1, 0.2])), rep(1, None), rep(2, Some(vec![0.3, 0.4]))];
        assert!(summarize(&cfg, reps.clone()).is_err(), "one failure in three exceeds 20%");
        let mut reps = reps;
        reps.extend((3..6).map(|k| rep(k, Some(vec![0.5]))));
        let s = summarize(&cfg, reps).unwrap();
        assert_eq!(s.n_converged, 5);
        let te = s.te.unwrap();
        assert_eq!((te.min, te.max), (0.1, 0.5));
        assert_eq!(s.params[0].bias, (0.0 + 2.0 + 3.0 + 4.0 + 5.0) / 5.0);
        assert_eq!(s.boundary_share, 0.2);
    }

    #[test]
    fn scheme_parsing() {
        assert_eq!(Scheme::parse("s3").unwrap(), Scheme::S3);
        assert!(Scheme::parse("S4").is_err());
    }
}
