//! Standard normal density, distribution and quantile functions.
//!
//! Interval probabilities are computed on whichever tail keeps the
//! subtraction well conditioned, so `Φ(b) − Φ(a)` stays accurate when both
//! bounds sit far in the upper tail.

use statrs::function::erf::erfc_inv;

pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal density.
#[inline]
pub fn pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

#[inline]
pub fn ln_pdf(x: f64) -> f64 {
    -0.5 * x * x - LN_SQRT_2PI
}

/// Standard normal CDF.
#[inline]
pub fn cdf(x: f64) -> f64 {
    if x == f64::NEG_INFINITY {
        0.0
    } else if x == f64::INFINITY {
        1.0
    } else {
        0.5 * libm::erfc(-x * std::f64::consts::FRAC_1_SQRT_2)
    }
}

/// Standard normal quantile.
///
/// Evaluated on the lower tail so small probabilities keep relative
/// accuracy; the upper half is obtained by symmetry.
#[inline]
pub fn quantile(p: f64) -> f64 {
    if p <= 0.0 {
        f64::NEG_INFINITY
    } else if p >= 1.0 {
        f64::INFINITY
    } else if p > 0.5 {
        std::f64::consts::SQRT_2 * erfc_inv(2.0 * (1.0 - p))
    } else {
        -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p)
    }
}

/// Log density of `Normal(mean, sd)` at `x`.
#[inline]
pub fn normal_lpdf(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    -0.5 * z * z - sd.ln() - LN_SQRT_2PI
}

/// `P(a < Z < b)` for a standard normal `Z`, with `a <= b`.
#[inline]
pub fn interval_prob(a: f64, b: f64) -> f64 {
    if a + b > 0.0 {
        cdf(-a) - cdf(-b)
    } else {
        cdf(b) - cdf(a)
    }
}

/// Draw from `Z | a < Z < b` by inverting the CDF at `u ∈ (0, 1)`.
///
/// Returns `(z, d)` where `d = P(a < Z < b)`. Intervals in the upper half are
/// reflected so the quantile is taken on the short tail.
#[inline]
pub fn truncated_inverse(a: f64, b: f64, u: f64) -> (f64, f64) {
    if a + b > 0.0 {
        let lo = cdf(-b);
        let hi = cdf(-a);
        let d = hi - lo;
        (-quantile(lo + d * (1.0 - u)), d)
    } else {
        let lo = cdf(a);
        let hi = cdf(b);
        let d = hi - lo;
        (quantile(lo + d * u), d)
    }
}

/// Logistic function.
#[inline]
pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(x))` without overflow.
#[inline]
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn table_values() {
        assert_relative_eq!(cdf(0.0), 0.5, epsilon = 1e-16);
        assert_relative_eq!(cdf(1.959_963_984_540_054), 0.975, epsilon = 1e-15);
        assert_relative_eq!(quantile(0.25), -0.674_489_750_196_081_7, epsilon = 1e-14);
        assert_relative_eq!(quantile(0.1), -1.281_551_565_544_600_5, epsilon = 1e-14);
        assert_relative_eq!(pdf(0.0), 0.398_942_280_401_432_7, epsilon = 1e-16);
    }

    #[test]
    fn deep_tails_keep_relative_accuracy() {
        // Φ(-15) ≈ 3.67097e-51
        assert_relative_eq!(cdf(-15.0), 3.670_966_199_826_9e-51, max_relative = 1e-10);
        assert_relative_eq!(quantile(cdf(-15.0)), -15.0, max_relative = 1e-10);
        assert_relative_eq!(interval_prob(8.0, 9.0), cdf(-8.0) - cdf(-9.0), max_relative = 1e-12);
        assert!(interval_prob(8.0, 9.0) > 0.0);
    }

    #[test]
    fn quantile_inverts_cdf() {
        // above zero the CDF itself rounds toward 1, so only the lower half
        // and the centre can round-trip tightly
        for i in 1..200 {
            let x = -9.0 + 0.05 * i as f64;
            assert_relative_eq!(quantile(cdf(x)), x, epsilon = 1e-9, max_relative = 1e-9);
        }
    }

    #[test]
    fn truncated_inverse_stays_inside_interval() {
        for &(a, b) in &[(-1.0, 0.5), (2.0, 3.0), (-4.0, -3.5), (f64::NEG_INFINITY, 0.0), (1.0, f64::INFINITY)] {
            for k in 1..20 {
                let u = k as f64 / 20.0;
                let (z, d) = truncated_inverse(a, b, u);
                assert!(z > a && z < b, "{z} outside ({a}, {b})");
                assert_relative_eq!(d, interval_prob(a, b), max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn softplus_matches_naive_in_range() {
        for &x in &[-30.0, -1.0, 0.0, 2.0, 30.0] {
            assert_relative_eq!(softplus(x), (1.0f64 + f64::exp(x)).ln(), max_relative = 1e-12);
        }
    }
}
