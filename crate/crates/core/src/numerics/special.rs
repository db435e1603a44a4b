//! Digamma, trigamma and overflow-safe logistic helpers.
//!
//! Both polygamma functions shift the argument above [`ASYMPTOTIC_THRESHOLD`]
//! with the upward recurrence and then evaluate the Bernoulli-series
//! asymptotic expansion in `1/x²`.

use crate::error::{Error, Result};

const ASYMPTOTIC_THRESHOLD: f64 = 6.0;

/// B_{2k} / (2k) for k = 1..=7.
const DIGAMMA_SERIES: [f64; 7] = [
    1.0 / 12.0,
    -1.0 / 120.0,
    1.0 / 252.0,
    -1.0 / 240.0,
    1.0 / 132.0,
    -691.0 / 32760.0,
    1.0 / 12.0,
];

/// B_{2k} for k = 1..=7.
const TRIGAMMA_SERIES: [f64; 7] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
];

fn check_positive(op: &'static str, x: f64) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(Error::domain(
            op,
            format!("argument must be finite and > 0, got {x}"),
        ))
    }
}

/// ψ(x), the logarithmic derivative of the gamma function, for `x > 0`.
///
/// Absolute error is below 1e-10 on `[1e-3, 1e6]`.
pub fn digamma(x: f64) -> Result<f64> {
    check_positive("digamma", x)?;
    Ok(digamma_unchecked(x))
}

/// ψ′(x) for `x > 0`.
pub fn trigamma(x: f64) -> Result<f64> {
    check_positive("trigamma", x)?;
    Ok(trigamma_unchecked(x))
}

/// Digamma without the domain check. Callers guarantee `x > 0`.
pub(crate) fn digamma_unchecked(mut x: f64) -> f64 {
    let mut shift = 0.0;
    while x < ASYMPTOTIC_THRESHOLD {
        shift -= 1.0 / x;
        x += 1.0;
    }
    let inv2 = 1.0 / (x * x);
    let mut series = 0.0;
    let mut power = inv2;
    for c in DIGAMMA_SERIES {
        series += c * power;
        power *= inv2;
    }
    shift + x.ln() - 0.5 / x - series
}

pub(crate) fn trigamma_unchecked(mut x: f64) -> f64 {
    let mut shift = 0.0;
    while x < ASYMPTOTIC_THRESHOLD {
        shift += 1.0 / (x * x);
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    // 1/x + 1/(2x²) + Σ B_{2k} / x^{2k+1}
    let mut series = 0.0;
    let mut power = inv * inv2;
    for c in TRIGAMMA_SERIES {
        series += c * power;
        power *= inv2;
    }
    shift + inv + 0.5 * inv2 + series
}

/// `1 / (1 + e^t)` evaluated without overflow. Decreasing in `t`.
pub fn stable_logistic(t: f64) -> f64 {
    if t > 0.0 {
        let e = (-t).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + t.exp())
    }
}

/// The standard sigmoid `1 / (1 + e^{-t})`.
#[inline]
pub fn sigmoid(t: f64) -> f64 {
    stable_logistic(-t)
}

/// `ln(1 + e^t)`, stable for large `|t|`.
#[inline]
pub fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

    // 40-digit references from an arbitrary-precision library.
    const REFERENCE: [(f64, f64, f64); 9] = [
        (0.001, -1_000.575_571_931_810_3, 1_000_001.642_533_195_9),
        (0.01, -100.560_885_457_868_67, 10_001.621_213_528_313),
        (0.3, -3.502_524_222_200_133, 12.245_364_546_107_73),
        (1.5, 0.036_489_973_978_576_52, 0.934_802_200_544_679_3),
        (3.7, 1.167_153_539_361_511_4, 0.310_037_857_670_038_3),
        (7.25, 1.910_453_526_883_736, 0.147_879_233_158_932_17),
        (42.0, 3.725_717_617_937_282, 0.024_095_219_843_670_564),
        (1000.0, 6.907_255_195_648_812, 0.001_000_500_166_666_633_3),
        (1.0e6, 13.815_510_057_964_19, 1.000_000_500_000_166_7e-6),
    ];

    #[test]
    fn digamma_known_identities() {
        assert_abs_diff_eq!(digamma(1.0).unwrap(), -EULER_GAMMA, epsilon = 1e-12);
        assert_abs_diff_eq!(
            digamma(2.0).unwrap() - digamma(1.0).unwrap(),
            1.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            digamma(0.5).unwrap(),
            -1.963_510_026_021_423_5,
            epsilon = 1e-12
        );
    }

    #[test]
    fn trigamma_known_identities() {
        assert_abs_diff_eq!(trigamma(1.0).unwrap(), PI * PI / 6.0, epsilon = 1e-12);
        assert_abs_diff_eq!(trigamma(2.0).unwrap(), PI * PI / 6.0 - 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(trigamma(0.5).unwrap(), PI * PI / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn matches_high_precision_reference() {
        for (x, psi, psi1) in REFERENCE {
            assert_abs_diff_eq!(digamma(x).unwrap(), psi, epsilon = 1e-10);
            assert_abs_diff_eq!(trigamma(x).unwrap(), psi1, epsilon = 1e-8);
        }
    }

    #[test]
    fn trigamma_matches_digamma_finite_difference() {
        let x = 3.7;
        let h = 1e-5;
        let fd = (digamma(x + h).unwrap() - digamma(x - h).unwrap()) / (2.0 * h);
        let exact = trigamma(x).unwrap();
        assert!(((fd - exact) / exact).abs() < 1e-6);
    }

    #[test]
    fn rejects_non_positive_arguments() {
        for bad in [0.0, -1.0, -0.5, f64::NAN, f64::INFINITY, f64::NEG_INFINITY] {
            assert!(digamma(bad).is_err(), "digamma({bad})");
            assert!(trigamma(bad).is_err(), "trigamma({bad})");
        }
    }

    #[test]
    fn logistic_examples() {
        assert_eq!(stable_logistic(0.0), 0.5);
        assert_eq!(stable_logistic(1000.0), 0.0);
        assert_eq!(stable_logistic(-1000.0), 1.0);
        assert_abs_diff_eq!(stable_logistic(3f64.ln()), 0.25, epsilon = 1e-15);
        assert!(stable_logistic(1e4).is_finite());
    }

    #[test]
    fn softplus_is_stable() {
        assert_abs_diff_eq!(softplus(0.0), 2f64.ln(), epsilon = 1e-15);
        assert_eq!(softplus(800.0), 800.0);
        assert!(softplus(-800.0) >= 0.0);
    }
}
