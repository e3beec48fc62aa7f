//! Normal, bivariate-normal and skew-normal primitives.

use crate::error::{Result, SfError};
use std::f64::consts::{FRAC_1_SQRT_2, PI};

/// 1/sqrt(2π)
pub const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
/// ln(sqrt(2π))
pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

const TWO_PI: f64 = 2.0 * PI;

/// Standard normal density.
#[inline]
pub fn norm_pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

#[inline]
pub fn log_norm_pdf(x: f64) -> f64 {
    -LN_SQRT_2PI - 0.5 * x * x
}

/// Standard normal CDF via the complementary error function.
#[inline]
pub fn norm_cdf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// `ln Φ(x)`, accurate far into the lower tail.
pub fn log_norm_cdf(x: f64) -> f64 {
    if x > 5.0 {
        (-norm_cdf(-x)).ln_1p()
    } else if x > -37.0 {
        norm_cdf(x).ln()
    } else {
        // Φ(x) = φ(x)/|x| · (1 - 1/x² + 3/x⁴ - 15/x⁶ + 105/x⁸ - ...)
        let z = 1.0 / (x * x);
        let series = 1.0 - z * (1.0 - 3.0 * z * (1.0 - 5.0 * z * (1.0 - 7.0 * z * (1.0 - 9.0 * z))));
        log_norm_pdf(x) - (-x).ln() + series.ln()
    }
}

/// Inverse of the standard normal CDF.
///
/// Rational starting point refined by Halley steps against [`norm_cdf`].
pub fn norm_quantile(p: f64) -> f64 {
    if p.is_nan() || !(0.0..=1.0).contains(&p) {
        return f64::NAN;
    }
    if p == 0.0 {
        return f64::NEG_INFINITY;
    }
    if p == 1.0 {
        return f64::INFINITY;
    }
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const P_LOW: f64 = 0.024_25;
    let tail = |q: f64| {
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    let mut x = if p < P_LOW {
        tail((-2.0 * p.ln()).sqrt())
    } else if p > 1.0 - P_LOW {
        -tail((-2.0 * (1.0 - p).ln()).sqrt())
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    };
    for _ in 0..3 {
        // work on the smaller tail to keep the residual accurate
        let e = if x < 0.0 { norm_cdf(x) - p } else { (1.0 - p) - norm_cdf(-x) };
        let u = e / norm_pdf(x);
        if !u.is_finite() {
            break;
        }
        x -= u / (1.0 + 0.5 * x * u);
    }
    x
}

/// Arguments of the standard bivariate normal CDF `P(X₁ ≤ a, X₂ ≤ b)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BvnArgs {
    pub a: f64,
    pub b: f64,
    pub rho: f64,
}

impl BvnArgs {
    pub fn new(a: f64, b: f64, rho: f64) -> Result<Self> {
        if !(rho.abs() <= 1.0) {
            return Err(SfError::Domain(format!("correlation {rho} outside [-1, 1]")));
        }
        if a.is_nan() || b.is_nan() {
            return Err(SfError::Domain("NaN bivariate normal limit".into()));
        }
        Ok(Self { a, b, rho })
    }
}

/// Bivariate normal CDF with domain checking.
pub fn bvn_cdf(args: BvnArgs) -> Result<f64> {
    let BvnArgs { a, b, rho } = BvnArgs::new(args.a, args.b, args.rho)?;
    Ok(bvn_cdf_unchecked(a, b, rho))
}

/// `Φ₂(a, b; ρ)` for callers that already guarantee `|ρ| ≤ 1`.
#[inline]
pub fn bvn_cdf_unchecked(a: f64, b: f64, rho: f64) -> f64 {
    bvn_upper(-a, -b, rho)
}

// Gauss–Legendre half-rules (positive nodes) of order 6, 12 and 20.
const GL6_W: [f64; 3] = [0.171_324_492_379_170_5, 0.360_761_573_048_138_4, 0.467_913_934_572_690_4];
const GL6_X: [f64; 3] = [0.932_469_514_203_152_2, 0.661_209_386_466_264_7, 0.238_619_186_083_197];
const GL12_W: [f64; 6] = [
    0.047_175_336_386_511_77,
    0.106_939_325_995_318_3,
    0.160_078_328_543_346_4,
    0.203_167_426_723_065_9,
    0.233_492_536_538_354_7,
    0.249_147_045_813_402_9,
];
const GL12_X: [f64; 6] = [
    0.981_560_634_246_719_1,
    0.904_117_256_370_475,
    0.769_902_674_194_305,
    0.587_317_954_286_617_1,
    0.367_831_498_998_180_2,
    0.125_233_408_511_469_2,
];
const GL20_W: [f64; 10] = [
    0.017_614_007_139_152_12,
    0.040_601_429_800_386_94,
    0.062_672_048_334_109_06,
    0.083_276_741_576_704_75,
    0.101_930_119_817_240_4,
    0.118_194_531_961_518_4,
    0.131_688_638_449_176_6,
    0.142_096_109_318_382_1,
    0.149_172_986_472_603_7,
    0.152_753_387_130_725_9,
];
const GL20_X: [f64; 10] = [
    0.993_128_599_185_094_9,
    0.963_971_927_277_913_8,
    0.912_234_428_251_325_9,
    0.839_116_971_822_218_8,
    0.746_331_906_460_150_8,
    0.636_053_680_726_515,
    0.510_867_001_950_827_1,
    0.373_706_088_715_419_6,
    0.227_785_851_141_645_1,
    0.076_526_521_133_497_33,
];

/// Upper orthant probability `P(X₁ > h, X₂ > k)` for correlation `r`.
///
/// Drezner–Wesolowsky quadrature over the correlation with Genz's
/// refinements: 6/12/20-point Gauss–Legendre depending on `|r|`, and for
/// `|r| ≥ 0.925` an expansion around the degenerate `|r| = 1` distribution.
pub fn bvn_upper(h: f64, k: f64, r: f64) -> f64 {
    if h == f64::INFINITY || k == f64::INFINITY {
        return 0.0;
    }
    if h == f64::NEG_INFINITY {
        return if k == f64::NEG_INFINITY { 1.0 } else { norm_cdf(-k) };
    }
    if k == f64::NEG_INFINITY {
        return norm_cdf(-h);
    }
    if r == 0.0 {
        return norm_cdf(-h) * norm_cdf(-k);
    }
    let (w, x): (&[f64], &[f64]) = if r.abs() < 0.3 {
        (&GL6_W, &GL6_X)
    } else if r.abs() < 0.75 {
        (&GL12_W, &GL12_X)
    } else {
        (&GL20_W, &GL20_X)
    };
    let mut hk = h * k;
    let mut bvn = 0.0;
    if r.abs() < 0.925 {
        let hs = 0.5 * (h * h + k * k);
        let asr = 0.5 * r.asin();
        for (wi, xi) in w.iter().zip(x) {
            for node in [1.0 - xi, 1.0 + xi] {
                let sn = (asr * node).sin();
                bvn += wi * ((sn * hk - hs) / (1.0 - sn * sn)).exp();
            }
        }
        bvn = bvn * asr / TWO_PI + norm_cdf(-h) * norm_cdf(-k);
    } else {
        let mut k = k;
        if r < 0.0 {
            k = -k;
            hk = -hk;
        }
        if r.abs() < 1.0 {
            let a_s = (1.0 - r) * (1.0 + r);
            let mut a = a_s.sqrt();
            let bs = (h - k) * (h - k);
            let c = (4.0 - hk) / 8.0;
            let d = (12.0 - hk) / 80.0;
            let asr = -0.5 * (bs / a_s + hk);
            if asr > -100.0 {
                bvn = a * asr.exp() * (1.0 - c * (bs - a_s) * (1.0 - d * bs) / 3.0 + c * d * a_s * a_s);
            }
            if hk > -100.0 {
                let b = bs.sqrt();
                let sp = TWO_PI.sqrt() * norm_cdf(-b / a);
                bvn -= (-0.5 * hk).exp() * sp * b * (1.0 - c * bs * (1.0 - d * bs) / 3.0);
            }
            a *= 0.5;
            let mut sum = 0.0;
            for (wi, xi) in w.iter().zip(x) {
                for node in [1.0 - xi, 1.0 + xi] {
                    let xs = (a * node) * (a * node);
                    let asr = -0.5 * (bs / xs + hk);
                    if asr > -100.0 {
                        let sp = 1.0 + c * xs * (1.0 + 5.0 * d * xs);
                        let rs = (1.0 - xs).sqrt();
                        let ep = (-0.5 * hk * xs / ((1.0 + rs) * (1.0 + rs))).exp() / rs;
                        sum += wi * asr.exp() * (sp - ep);
                    }
                }
            }
            bvn = (a * sum - bvn) / TWO_PI;
        }
        if r > 0.0 {
            bvn += norm_cdf(-h.max(k));
        } else if h >= k {
            bvn = -bvn;
        } else {
            let l = if h < 0.0 {
                norm_cdf(k) - norm_cdf(h)
            } else {
                norm_cdf(-h) - norm_cdf(-k)
            };
            bvn = l - bvn;
        }
    }
    bvn.clamp(0.0, 1.0)
}

/// Azzalini skew-normal density with the given location, scale and slant.
pub fn skew_norm_pdf(x: f64, location: f64, scale: f64, slant: f64) -> Result<f64> {
    if !(scale > 0.0) {
        return Err(SfError::Domain(format!("skew-normal scale must be positive, got {scale}")));
    }
    let z = (x - location) / scale;
    Ok(2.0 / scale * norm_pdf(z) * norm_cdf(slant * z))
}

/// `ln(e^a + e^b)` without overflow; symmetric in its arguments.
#[inline]
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// Survival function of χ² with one degree of freedom.
pub fn chi2_1_sf(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    libm::erfc((0.5 * x).sqrt())
}

/// Survival function of χ² with `dof` degrees of freedom (regularized upper
/// incomplete gamma).
pub fn chi2_sf(x: f64, dof: usize) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if dof == 1 {
        return chi2_1_sf(x);
    }
    upper_gamma_regularized(0.5 * dof as f64, 0.5 * x)
}

fn upper_gamma_regularized(a: f64, x: f64) -> f64 {
    let ln_prefix = a * x.ln() - x - libm::lgamma(a);
    if x < a + 1.0 {
        // series for the lower function
        let mut term = 1.0 / a;
        let mut sum = term;
        let mut ap = a;
        for _ in 0..1000 {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * 1e-17 {
                break;
            }
        }
        (1.0 - sum * ln_prefix.exp()).max(0.0)
    } else {
        // Lentz continued fraction
        let tiny = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..1000 {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < 1e-16 {
                break;
            }
        }
        (ln_prefix.exp() * h).clamp(0.0, 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use endosf_oracle::{gauss_legendre, Quadrature};
    use proptest::prelude::*;

    #[test]
    fn norm_pdf_values() {
        assert!((norm_pdf(0.0) - 0.398_942_280_401_432_7).abs() < 1e-16);
        assert!((norm_pdf(1.0) - 0.241_970_724_519_143_37).abs() < 1e-16);
        assert_eq!(norm_pdf(-1.0), norm_pdf(1.0));
    }

    #[test]
    fn norm_cdf_values() {
        assert_eq!(norm_cdf(0.0), 0.5);
        assert_eq!(norm_cdf(f64::INFINITY), 1.0);
        assert_eq!(norm_cdf(f64::NEG_INFINITY), 0.0);
        // Φ(1.959963985) from a 50-digit erf evaluation
        assert!((norm_cdf(1.959_963_985) - 0.975_000_000_026_881_6).abs() < 1e-15);
        for x in [-8.0, -3.3, -1.0, -0.1, 0.7, 2.5, 6.0] {
            assert!((norm_cdf(-x) - (1.0 - norm_cdf(x))).abs() < 1e-15);
        }
    }

    #[test]
    fn norm_cdf_matches_quadrature_of_density() {
        let q = Quadrature::new(1e-15);
        for x in [-6.0, -2.0, -0.5, 0.0, 0.3, 1.5, 4.0] {
            let reference = q.integrate(norm_pdf, f64::NEG_INFINITY, x);
            assert!((norm_cdf(x) - reference).abs() < 1e-15, "x={x}");
        }
    }

    #[test]
    fn log_norm_cdf_is_continuous_across_branches() {
        for x in [-37.0f64, 5.0] {
            let lo = log_norm_cdf(x - 1e-9);
            let hi = log_norm_cdf(x + 1e-9);
            assert!((lo - hi).abs() < 1e-6 * lo.abs().max(1e-12) + 1e-12, "x={x}: {lo} {hi}");
        }
        assert!((log_norm_cdf(-40.0) - (-804.608_442_013_754)).abs() < 1e-9);
        assert!(log_norm_cdf(-1e4).is_finite());
        assert!((log_norm_cdf(0.0) - 0.5f64.ln()).abs() < 1e-16);
    }

    #[test]
    fn quantile_inverts_cdf() {
        for p in [1e-300, 1e-12, 0.001, 0.024, 0.3, 0.5, 0.9, 0.975, 0.999_999] {
            let x = norm_quantile(p);
            let rel = (norm_cdf(x) - p).abs() / p.min(1.0 - p);
            assert!(rel < 1e-13, "p={p} x={x} rel={rel}");
        }
        assert!((norm_quantile(0.975) - 1.959_963_984_540_054).abs() < 1e-14);
        assert!((norm_quantile(0.9) - 1.281_551_565_544_600_5).abs() < 1e-14);
    }

    #[test]
    fn embedded_gauss_legendre_rules_match_generated_nodes() {
        for (w, x, n) in [
            (&GL6_W[..], &GL6_X[..], 6),
            (&GL12_W[..], &GL12_X[..], 12),
            (&GL20_W[..], &GL20_X[..], 20),
        ] {
            let (nodes, weights) = gauss_legendre(n);
            for i in 0..n / 2 {
                assert!((nodes[i] + x[i]).abs() < 1e-15, "n={n} i={i}");
                assert!((weights[i] - w[i]).abs() < 1e-15, "n={n} i={i}");
            }
        }
    }

    #[test]
    fn bvn_closed_forms() {
        assert!((bvn_cdf_unchecked(0.0, 0.0, 0.0) - 0.25).abs() < 1e-16);
        assert!((bvn_cdf_unchecked(0.0, 0.0, 0.5) - 1.0 / 3.0).abs() < 1e-15);
        for i in 0..=40 {
            let rho = -1.0 + 0.05 * i as f64;
            let expected = 0.25 + rho.asin() / TWO_PI;
            assert!((bvn_cdf_unchecked(0.0, 0.0, rho) - expected).abs() < 1e-12, "rho={rho}");
        }
    }

    #[test]
    fn bvn_rejects_bad_correlation() {
        assert!(bvn_cdf(BvnArgs { a: 0.0, b: 0.0, rho: 1.01 }).is_err());
        assert!(BvnArgs::new(0.0, 0.0, f64::NAN).is_err());
        assert!(bvn_cdf(BvnArgs::new(0.1, 0.2, 1.0).unwrap()).is_ok());
    }

    #[test]
    fn bvn_infinite_limits() {
        for b in [-2.0, 0.0, 1.3] {
            assert!((bvn_cdf_unchecked(f64::INFINITY, b, 0.7) - norm_cdf(b)).abs() < 1e-15);
            assert!((bvn_cdf_unchecked(b, f64::INFINITY, -0.4) - norm_cdf(b)).abs() < 1e-15);
            assert_eq!(bvn_cdf_unchecked(f64::NEG_INFINITY, b, 0.3), 0.0);
        }
        assert_eq!(bvn_cdf_unchecked(f64::INFINITY, f64::INFINITY, 0.2), 1.0);
    }

    #[test]
    fn bvn_degenerate_correlation() {
        // ρ = 1: P(X ≤ min(a, b)); ρ = -1: P(-b ≤ X ≤ a)
        assert!((bvn_cdf_unchecked(0.3, -0.2, 1.0) - norm_cdf(-0.2)).abs() < 1e-15);
        assert!((bvn_cdf_unchecked(0.3, 0.2, -1.0) - (norm_cdf(0.3) - norm_cdf(-0.2))).abs() < 1e-15);
        assert_eq!(bvn_cdf_unchecked(-0.3, -0.2, -1.0), 0.0);
    }

    /// Nested quadrature of the bivariate density, independent of any Φ.
    fn bvn_by_quadrature(a: f64, b: f64, rho: f64) -> f64 {
        let q = Quadrature::new(1e-13);
        let det = 1.0 - rho * rho;
        let norm = 1.0 / (TWO_PI * det.sqrt());
        let lo: f64 = -12.0;
        q.integrate_2d(
            |x, y| norm * (-(x * x - 2.0 * rho * x * y + y * y) / (2.0 * det)).exp(),
            lo.min(a),
            a,
            |_| lo.min(b),
            |_| b,
        )
    }

    #[test]
    fn bvn_matches_two_dimensional_quadrature() {
        let reference = bvn_by_quadrature(1.0, -0.5, 0.3);
        assert!((bvn_cdf_unchecked(1.0, -0.5, 0.3) - reference).abs() < 1e-12, "{reference}");
        for &(a, b, rho) in &[(-1.2, 0.4, -0.8), (2.0, 1.5, 0.95), (0.3, -2.2, -0.97), (-0.5, -0.5, 0.6)] {
            let reference = bvn_by_quadrature(a, b, rho);
            assert!((bvn_cdf_unchecked(a, b, rho) - reference).abs() < 1e-10, "({a},{b},{rho})");
        }
    }

    #[test]
    fn skew_normal_values() {
        assert!((skew_norm_pdf(0.0, 0.0, 1.0, 1.0).unwrap() - 0.398_942_280_401_432_7).abs() < 1e-16);
        for x in [-2.0, 0.1, 1.7] {
            let sn = skew_norm_pdf(x, 0.0, 1.0, 0.0).unwrap();
            assert!((sn - norm_pdf(x)).abs() < 1e-16);
        }
        assert!(skew_norm_pdf(0.0, 0.0, 0.0, 1.0).is_err());
        assert!(skew_norm_pdf(0.0, 0.0, -1.0, 1.0).is_err());
    }

    #[test]
    fn skew_normal_integrates_to_one() {
        let q = Quadrature::new(1e-12);
        let mass = q.integrate(
            |x| skew_norm_pdf(x, 0.3, 1.7, -2.1).unwrap(),
            f64::NEG_INFINITY,
            f64::INFINITY,
        );
        assert!((mass - 1.0).abs() < 1e-9, "{mass}");
    }

    #[test]
    fn chi_square_survival() {
        assert!((chi2_1_sf(3.841_458_820_694_124) - 0.05).abs() < 1e-14);
        assert!((chi2_sf(5.991_464_547_107_979, 2) - 0.05).abs() < 1e-13);
        assert!((chi2_sf(11.070_497_693_516_35, 5) - 0.05).abs() < 1e-13);
        assert!((chi2_sf(0.5, 4) - 0.973_500_978_839_256).abs() < 1e-13);
        assert_eq!(chi2_sf(0.0, 3), 1.0);
    }

    proptest! {
        #[test]
        fn bvn_is_symmetric_in_limits(a in -6.0..6.0f64, b in -6.0..6.0f64, rho in -0.999..0.999f64) {
            let p = bvn_cdf_unchecked(a, b, rho);
            let q = bvn_cdf_unchecked(b, a, rho);
            prop_assert!((p - q).abs() < 1e-14);
            prop_assert!((0.0..=1.0).contains(&p));
        }

        #[test]
        fn bvn_marginalizes(a in -6.0..6.0f64, rho in -1.0..1.0f64) {
            prop_assert!((bvn_cdf_unchecked(a, f64::INFINITY, rho) - norm_cdf(a)).abs() < 1e-10);
            // a large finite upper limit behaves like +∞
            prop_assert!((bvn_cdf_unchecked(a, 40.0, rho) - norm_cdf(a)).abs() < 1e-10);
        }

        #[test]
        fn bvn_reduces_to_product_at_zero_correlation(a in -8.0..8.0f64, b in -8.0..8.0f64) {
            prop_assert!((bvn_cdf_unchecked(a, b, 0.0) - norm_cdf(a) * norm_cdf(b)).abs() < 1e-12);
            let tiny = bvn_cdf_unchecked(a, b, 1e-14);
            prop_assert!((tiny - norm_cdf(a) * norm_cdf(b)).abs() < 1e-12);
        }

        #[test]
        fn bvn_is_monotone(a in -5.0..5.0f64, b in -5.0..5.0f64, rho in -0.99..0.99f64, step in 0.01..1.0f64) {
            let base = bvn_cdf_unchecked(a, b, rho);
            prop_assert!(bvn_cdf_unchecked(a + step, b, rho) >= base - 1e-15);
            prop_assert!(bvn_cdf_unchecked(a, b + step, rho) >= base - 1e-15);
        }

        #[test]
        fn bvn_complement_identity(a in -5.0..5.0f64, b in -5.0..5.0f64, rho in -0.99..0.99f64) {
            // Φ₂(a,b;ρ) + Φ₂(-a,b;-ρ) = Φ(b)
            let s = bvn_cdf_unchecked(a, b, rho) + bvn_cdf_unchecked(-a, b, -rho);
            prop_assert!((s - norm_cdf(b)).abs() < 1e-14);
        }
    }
}
