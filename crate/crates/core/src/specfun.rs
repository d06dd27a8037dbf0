//! Scalar special functions: log-gamma, digamma, log-beta, log-binomial.
//!
//! Every closed-form rate in the crate is assembled from these in log space
//! and exponentiated at the end, since `Γ(i − β)` overflows an `f64` once
//! `i` passes ~170.

use std::f64::consts::PI;

use crate::error::{domain, Error, Result};

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

// Lanczos approximation, g = 7, n = 9.
const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// `ln Γ(x)` for `x >= 0.5`.
fn lanczos_ln_gamma(x: f64) -> f64 {
    let z = x - 1.0;
    let mut acc = LANCZOS[0];
    for (k, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (z + k as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    LN_SQRT_2PI + (z + 0.5) * t.ln() - t + acc.ln()
}

/// Natural log of the gamma function for `x > 0`.
pub fn log_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(domain(format!("log_gamma requires x > 0, got {x}")));
    }
    Ok(ln_gamma_pos(x))
}

pub(crate) fn ln_gamma_pos(x: f64) -> f64 {
    if x < 0.5 {
        // Γ(x) = Γ(x + 1) / x keeps the Lanczos sum away from its pole.
        lanczos_ln_gamma(x + 1.0) - x.ln()
    } else {
        lanczos_ln_gamma(x)
    }
}

/// `ln |Γ(x)|` and the sign of `Γ(x)`, for any real `x` that is not a
/// non-positive integer.
pub fn log_abs_gamma(x: f64) -> Result<(f64, f64)> {
    if !x.is_finite() {
        return Err(domain(format!("log_abs_gamma requires finite x, got {x}")));
    }
    if x > 0.0 {
        return Ok((ln_gamma_pos(x), 1.0));
    }
    if x == x.floor() {
        return Err(Error::Pole(x));
    }
    // Reflection: Γ(x) Γ(1 − x) = π / sin(πx).
    let s = sin_pi(x);
    let ln_abs = PI.ln() - s.abs().ln() - ln_gamma_pos(1.0 - x);
    Ok((ln_abs, s.signum()))
}

/// `sin(πx)` with the argument reduced to [-1, 1] first.
fn sin_pi(x: f64) -> f64 {
    let r = x - 2.0 * (x / 2.0).round();
    (PI * r).sin()
}

/// Digamma `ψ(x) = Γ'(x)/Γ(x)` for `x > 0`.
pub fn digamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(domain(format!("digamma requires x > 0, got {x}")));
    }
    Ok(digamma_pos(x))
}

pub(crate) fn digamma_pos(mut x: f64) -> f64 {
    let mut shift = 0.0;
    while x < 6.0 {
        shift -= 1.0 / x;
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    // Asymptotic series with Bernoulli numbers B_2 .. B_14.
    let series = inv2
        * (1.0 / 12.0
            - inv2
                * (1.0 / 120.0
                    - inv2
                        * (1.0 / 252.0
                            - inv2
                                * (1.0 / 240.0
                                    - inv2 * (1.0 / 132.0 - inv2 * (691.0 / 32_760.0 - inv2 / 12.0))))));
    shift + x.ln() - 0.5 * inv - series
}

/// `ln B(a, b)` for `a, b > 0`.
pub fn log_beta(a: f64, b: f64) -> Result<f64> {
    if !(a > 0.0) || !(b > 0.0) {
        return Err(domain(format!("log_beta requires a, b > 0, got ({a}, {b})")));
    }
    Ok(ln_beta_pos(a, b))
}

pub(crate) fn ln_beta_pos(a: f64, b: f64) -> f64 {
    // Summing the smaller argument's term first makes the result symmetric
    // bit for bit.
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    ln_gamma_pos(lo) + ln_gamma_pos(hi) - ln_gamma_pos(lo + hi)
}

/// `ln C(n, k)` for real `n >= k >= 0`.
pub fn log_binomial(n: f64, k: f64) -> Result<f64> {
    if !(k >= 0.0) || !(n >= k) {
        return Err(domain(format!("log_binomial requires n >= k >= 0, got ({n}, {k})")));
    }
    Ok(ln_binomial(n, k))
}

pub(crate) fn ln_binomial(n: f64, k: f64) -> f64 {
    ln_gamma_pos(n + 1.0) - ln_gamma_pos(k + 1.0) - ln_gamma_pos(n - k + 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1.0)
    }

    #[test]
    fn log_gamma_known_values() {
        assert_abs_diff_eq!(log_gamma(1.0).unwrap(), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(log_gamma(2.0).unwrap(), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(log_gamma(0.5).unwrap(), 0.572_364_942_924_700_1, epsilon = 1e-13);
        assert_abs_diff_eq!(log_gamma(10.0).unwrap(), 362_880f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn log_gamma_against_reference_table() {
        // 25-digit reference values.
        let table = [
            (0.001, 6.907_178_885_383_853_68),
            (0.1, 2.252_712_651_734_205_96),
            (1.5, -0.120_782_237_635_245_222),
            (2.5, 0.284_682_870_472_919_16),
            (7.3, 7.147_892_523_022_249_03),
            (33.3, 82.603_723_581_654_952_9),
            (170.5, 704.004_427_734_204_671),
            (1000.0, 5_905.220_423_209_181_21),
            (123_456.7, 1_323_900.975_390_918_29),
            (1e6, 12_815_504.569_147_611_7),
        ];
        for (x, want) in table {
            let got = log_gamma(x).unwrap();
            assert!(rel(got, want) < 1e-12, "x={x}: {got} vs {want}");
        }
    }

    #[test]
    fn log_gamma_rejects_non_positive() {
        assert!(log_gamma(0.0).is_err());
        assert!(log_gamma(-1.5).is_err());
        assert!(log_gamma(f64::NAN).is_err());
    }

    #[test]
    fn log_abs_gamma_negative_arguments() {
        let (v, s) = log_abs_gamma(-0.5).unwrap();
        assert_abs_diff_eq!(v, 1.265_512_123_484_645_4, epsilon = 1e-12);
        assert_eq!(s, -1.0);
        let (v, s) = log_abs_gamma(-1.5).unwrap();
        assert_abs_diff_eq!(v, 0.860_047_015_376_481, epsilon = 1e-12);
        assert_eq!(s, 1.0);
        let (v, s) = log_abs_gamma(2.0).unwrap();
        assert_abs_diff_eq!(v, 0.0, epsilon = 1e-14);
        assert_eq!(s, 1.0);
        let (v, s) = log_abs_gamma(-3.3).unwrap();
        assert_abs_diff_eq!(v, -0.824_355_805_017_426_5, epsilon = 1e-12);
        assert_eq!(s, 1.0);
    }

    #[test]
    fn log_abs_gamma_poles() {
        for x in [0.0, -1.0, -2.0, -17.0] {
            assert_eq!(log_abs_gamma(x), Err(Error::Pole(x)));
        }
    }

    #[test]
    fn sign_alternates_on_negative_unit_intervals() {
        let mut prev = log_abs_gamma(-0.5).unwrap().1;
        for k in 1..12 {
            let s = log_abs_gamma(-0.5 - k as f64).unwrap().1;
            assert_eq!(s, -prev, "interval {k}");
            prev = s;
        }
    }

    #[test]
    fn digamma_known_values() {
        assert_abs_diff_eq!(digamma(1.0).unwrap(), -EULER_GAMMA, epsilon = 1e-12);
        assert_abs_diff_eq!(digamma(2.0).unwrap(), 1.0 - EULER_GAMMA, epsilon = 1e-12);
        assert_abs_diff_eq!(
            digamma(0.5).unwrap(),
            -EULER_GAMMA - 2.0 * 2f64.ln(),
            epsilon = 1e-12
        );
        let table = [
            (0.001, -1_000.575_571_931_810_3),
            (0.2, -5.289_039_896_592_188_3),
            (3.7, 1.167_153_539_361_511_39),
            (20.0, 2.970_523_992_242_149_05),
            (123.4, 4.811_373_775_116_277_37),
            (1e6, 13.815_510_057_964_190_8),
        ];
        for (x, want) in table {
            assert_abs_diff_eq!(digamma(x).unwrap(), want, epsilon = 1e-10);
        }
        assert!(digamma(0.0).is_err());
    }

    #[test]
    fn log_beta_values() {
        assert_abs_diff_eq!(log_beta(2.0, 3.0).unwrap(), (1.0f64 / 12.0).ln(), epsilon = 1e-13);
        assert_abs_diff_eq!(log_beta(0.5, 1.5).unwrap(), (PI / 2.0).ln(), epsilon = 1e-13);
        for b in [0.3, 1.0, 7.5, 250.0] {
            assert_abs_diff_eq!(log_beta(1.0, b).unwrap(), -f64::ln(b), epsilon = 1e-12);
        }
        assert!(log_beta(0.0, 1.0).is_err());
        assert!(log_beta(1.0, -2.0).is_err());
    }

    #[test]
    fn log_binomial_small() {
        assert_abs_diff_eq!(log_binomial(5.0, 2.0).unwrap(), 10f64.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(log_binomial(7.0, 0.0).unwrap(), 0.0, epsilon = 1e-12);
        assert!(log_binomial(2.0, 3.0).is_err());
    }

    proptest! {
        #[test]
        fn log_gamma_recurrence(x in 1e-6f64..100.0) {
            let lhs = log_gamma(x + 1.0).unwrap();
            let rhs = log_gamma(x).unwrap() + x.ln();
            prop_assert!((lhs - rhs).abs() < 1e-11 * lhs.abs().max(1.0));
        }

        #[test]
        fn digamma_is_derivative_of_log_gamma(x in 0.1f64..50.0) {
            let h = 1e-5;
            let fd = (log_gamma(x + h).unwrap() - log_gamma(x - h).unwrap()) / (2.0 * h);
            prop_assert!((digamma(x).unwrap() - fd).abs() < 1e-6);
        }

        #[test]
        fn log_beta_symmetric(a in 1e-3f64..1e3, b in 1e-3f64..1e3) {
            prop_assert_eq!(log_beta(a, b).unwrap(), log_beta(b, a).unwrap());
        }
    }
}
