//! Small numeric helpers shared across modules.

/// Double-double accumulator (Knuth two-sum). The rounded result is
/// independent of summation order for all practical sample sizes.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExactSum {
    hi: f64,
    lo: f64,
}

impl ExactSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let s = self.hi + x;
        let bp = s - self.hi;
        let err = (self.hi - (s - bp)) + (x - bp);
        self.hi = s;
        self.lo += err;
    }

    pub fn merge(&mut self, other: ExactSum) {
        self.add(other.hi);
        self.add(other.lo);
    }

    pub fn value(&self) -> f64 {
        self.hi + self.lo
    }
}

impl FromIterator<f64> for ExactSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = ExactSum::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// Sample mean and (n − 1)-denominator standard deviation.
pub fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().copied().collect::<ExactSum>().value() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let ss = xs.iter().map(|x| (x - mean) * (x - mean)).collect::<ExactSum>().value();
    (mean, (ss / (n - 1) as f64).sqrt())
}

/// Linear-interpolated sample quantile (type 7) of sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Seventeen significant digits in scientific notation; enough to
/// reproduce every `f64` bit-exactly. Non-finite values print as `NaN`,
/// `inf` or `-inf`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn recovers_cancelled_terms() {
        let s: ExactSum = [1e16, 1.0, -1e16, 1.0].into_iter().collect();
        assert_eq!(s.value(), 2.0);
    }

    #[test]
    fn quantiles() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&v, 0.0), 1.0);
        assert_eq!(quantile_sorted(&v, 1.0), 4.0);
        assert_eq!(quantile_sorted(&v, 0.5), 2.5);
        assert_eq!(mean_sd(&[2.0, 2.0]), (2.0, 0.0));
    }

    proptest! {
        #[test]
        fn order_independent(mut xs in proptest::collection::vec(-1e3..1e3f64, 1..200)) {
            let forward = xs.iter().copied().collect::<ExactSum>().value();
            xs.reverse();
            let backward = xs.iter().copied().collect::<ExactSum>().value();
            prop_assert_eq!(forward, backward);
            let doubled = xs.iter().chain(xs.iter()).copied().collect::<ExactSum>().value();
            prop_assert_eq!(doubled, 2.0 * forward);
        }
    }

    proptest! {
        #[test]
        fn seventeen_digits_round_trip(bits in any::<u64>()) {
            let x = f64::from_bits(bits);
            prop_assume!(x.is_finite());
            prop_assert_eq!(fmt_f64(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
    }
}
