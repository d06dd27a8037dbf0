//! Random-variate generation and the generalized-CLT constants for Pareto sums.

use std::f64::consts::PI;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::mc;
use crate::specfun::{log_abs_gamma, EULER_GAMMA};

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A reproducible random stream identified by `(seed, stream_index)`.
///
/// Backed by ChaCha8: the seed fixes the key and the stream index selects
/// one of the 2^64 independent ChaCha streams under that key. Replica `k` of
/// an experiment draws from [`RngStream::replica`], which derives a fresh
/// key from the parent pair, so results never depend on execution order.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_index: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_index);
        Self { seed, stream_index, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_index(&self) -> u64 {
        self.stream_index
    }

    /// Child stream for replica `k`. Independent of this stream's position.
    pub fn replica(&self, k: u64) -> RngStream {
        let key = splitmix64(self.seed ^ splitmix64(self.stream_index.wrapping_add(0x5851_F42D_4C95_7F2D)));
        RngStream::new(key, k)
    }

    /// Uniform variate on the open interval (0, 1).
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard exponential variate.
    #[inline]
    pub fn exp1(&mut self) -> f64 {
        -self.uniform().ln()
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be positive and finite, got {v}")))
    }
}

/// Pareto(α) by inverse CDF from a uniform `u` in (0, 1): `u^(-1/α)`.
#[inline]
pub fn pareto_from_uniform(alpha: f64, u: f64) -> f64 {
    if alpha == 1.0 {
        1.0 / u
    } else {
        (-u.ln() / alpha).exp()
    }
}

/// Pareto(α) variate with `P(X > x) = x^(-α)` on `[1, ∞)`.
pub fn pareto_sample(alpha: f64, rng: &mut RngStream) -> Result<f64> {
    check_positive("alpha", alpha)?;
    Ok(pareto_from_uniform(alpha, rng.uniform()))
}

/// Gamma(θ) variate with unit scale.
pub fn gamma_sample(theta: f64, rng: &mut RngStream) -> Result<f64> {
    check_positive("theta", theta)?;
    let dist = Gamma::new(theta, 1.0).map_err(|e| invalid(e.to_string()))?;
    Ok(dist.sample(rng))
}

/// First `count` points of a rate-one homogeneous Poisson process on the
/// half-line, in increasing order.
pub fn poisson_arrivals(count: usize, rng: &mut RngStream) -> Result<Vec<f64>> {
    if count == 0 {
        return Err(invalid("poisson_arrivals requires count >= 1"));
    }
    let mut t = 0.0;
    Ok((0..count)
        .map(|_| {
            t += rng.exp1();
            t
        })
        .collect())
}

/// Fréchet(α) variate, CDF `exp(-x^(-α))`, generated as `τ₁^(-1/α)`.
pub fn frechet_sample(alpha: f64, rng: &mut RngStream) -> Result<f64> {
    check_positive("alpha", alpha)?;
    Ok(frechet_from_arrival(alpha, rng.exp1()))
}

#[inline]
pub fn frechet_from_arrival(alpha: f64, tau1: f64) -> f64 {
    (-tau1.ln() / alpha).exp()
}

/// Which limit law governs the centred and scaled Pareto sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GcltRegime {
    /// α ∈ (0, 1): one-sided stable.
    StableBelowOne,
    /// α = 1: skewed Cauchy.
    Cauchy,
    /// α ∈ (1, 2): skewed stable.
    StableOneTwo,
    /// α = 2: normal with logarithmic correction.
    Critical,
    /// α > 2: normal.
    Normal,
}

impl GcltRegime {
    pub fn of(alpha: f64) -> Self {
        if alpha < 1.0 {
            Self::StableBelowOne
        } else if alpha == 1.0 {
            Self::Cauchy
        } else if alpha < 2.0 {
            Self::StableOneTwo
        } else if alpha == 2.0 {
            Self::Critical
        } else {
            Self::Normal
        }
    }
}

/// Centering `a_N`, scaling `b_N` and constant `C_α`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GcltConstants {
    pub a_n: f64,
    pub b_n: f64,
    pub c_alpha: f64,
    pub regime: GcltRegime,
}

/// Constants such that `(Σ_N − a_N) / b_N` converges to the regime's limit.
///
/// At α = 1 the centering is the asymptotic `N ln N + N(1 − γ − ln(2/π))`.
/// At α = 2 there is no `C_α`; the field is set to 1 and `b_N = (N ln N)^½`,
/// which needs `N >= 2`.
pub fn gclt_constants(alpha: f64, n: u64) -> Result<GcltConstants> {
    check_positive("alpha", alpha)?;
    if n == 0 {
        return Err(invalid("N must be >= 1"));
    }
    let nf = n as f64;
    let regime = GcltRegime::of(alpha);
    let mu = alpha / (alpha - 1.0);
    let c_alpha = match regime {
        GcltRegime::Cauchy => PI / 2.0,
        GcltRegime::Critical => 1.0,
        GcltRegime::Normal => (alpha / (alpha - 2.0) - mu * mu).sqrt(),
        GcltRegime::StableBelowOne | GcltRegime::StableOneTwo => {
            let (lg, sign) = log_abs_gamma(1.0 - alpha)?;
            let v = sign * lg.exp() * (PI * alpha / 2.0).cos();
            v.powf(1.0 / alpha)
        }
    };
    let b_n = match regime {
        GcltRegime::Critical => {
            if n < 2 {
                return Err(invalid("alpha = 2 scaling (N ln N)^1/2 needs N >= 2"));
            }
            (nf * nf.ln()).sqrt()
        }
        _ => c_alpha * nf.powf((1.0 / alpha).max(0.5)),
    };
    let a_n = match regime {
        GcltRegime::StableBelowOne => 0.0,
        GcltRegime::Cauchy => nf * nf.ln() + nf * (1.0 - EULER_GAMMA - (2.0 / PI).ln()),
        _ => nf * mu,
    };
    Ok(GcltConstants { a_n, b_n, c_alpha, regime })
}

/// Empirical summary of the standardized Pareto sum `(Σ_N − a_N)/b_N`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SumStats {
    pub alpha: f64,
    pub n: u64,
    pub replicas: usize,
    pub constants: GcltConstants,
    pub mean: f64,
    pub stderr_mean: f64,
    pub variance: f64,
    /// `(probability, quantile)` of the standardized statistic.
    pub quantiles: Vec<(f64, f64)>,
    /// Median of the raw sum `Σ_N`.
    pub raw_median: f64,
}

pub const SUMMARY_PROBS: [f64; 7] = [0.01, 0.05, 0.25, 0.5, 0.75, 0.95, 0.99];

/// Empirical quantile by linear interpolation between order statistics.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

/// Sum of `n` i.i.d. Pareto(α) variates.
pub fn pareto_sum(alpha: f64, n: u64, rng: &mut RngStream) -> f64 {
    (0..n).map(|_| pareto_from_uniform(alpha, rng.uniform())).sum()
}

pub fn standardized_sum_stats(alpha: f64, n: u64, replicas: usize, rng: &RngStream) -> Result<SumStats> {
    if replicas < 1000 {
        return Err(invalid("standardized_sum_stats needs at least 1000 replicas"));
    }
    let constants = gclt_constants(alpha, n)?;
    let mut sums = mc::collect_replicas(rng, replicas, |r| pareto_sum(alpha, n, r));
    let std: Vec<f64> = sums.iter().map(|s| (s - constants.a_n) / constants.b_n).collect();
    let rf = replicas as f64;
    let mean = std.iter().sum::<f64>() / rf;
    let variance = std.iter().map(|z| (z - mean).powi(2)).sum::<f64>() / (rf - 1.0);
    let mut sorted = std.clone();
    sorted.sort_by(f64::total_cmp);
    sums.sort_by(f64::total_cmp);
    Ok(SumStats {
        alpha,
        n,
        replicas,
        constants,
        mean,
        stderr_mean: (variance / rf).sqrt(),
        variance,
        quantiles: SUMMARY_PROBS.iter().map(|&p| (p, quantile_sorted(&sorted, p))).collect(),
        raw_median: quantile_sorted(&sums, 0.5),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn mean_se(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        (m, (v / n).sqrt())
    }

    fn draws(n: usize, seed: u64, mut f: impl FnMut(&mut RngStream) -> f64) -> Vec<f64> {
        let mut rng = RngStream::new(seed, 0);
        (0..n).map(|_| f(&mut rng)).collect()
    }

    #[test]
    fn same_pair_same_sequence() {
        let mut a = RngStream::new(42, 7);
        let mut b = RngStream::new(42, 7);
        let mut c = RngStream::new(42, 8);
        let xa: Vec<u64> = (0..64).map(|_| a.next_u64()).collect();
        let xb: Vec<u64> = (0..64).map(|_| b.next_u64()).collect();
        let xc: Vec<u64> = (0..64).map(|_| c.next_u64()).collect();
        assert_eq!(xa, xb);
        assert_ne!(xa, xc);
        let mut r1 = a.replica(3);
        let mut r2 = RngStream::new(42, 7).replica(3);
        assert_eq!(r1.next_u64(), r2.next_u64());
    }

    #[test]
    fn inverse_cdf_points() {
        assert_eq!(pareto_from_uniform(1.0, 0.25), 4.0);
        assert_eq!(pareto_from_uniform(1.0, 0.5), 2.0);
        assert_abs_diff_eq!(pareto_from_uniform(2.0, 0.25), 2.0, epsilon = 1e-14);
        assert_eq!(frechet_from_arrival(2.0, 1.0), 1.0);
    }

    #[test]
    fn pareto_mean_alpha_three() {
        let xs = draws(1_000_000, 1, |r| pareto_sample(3.0, r).unwrap());
        assert!(xs.iter().all(|&x| x >= 1.0));
        let (m, se) = mean_se(&xs);
        assert!((m - 1.5).abs() < 3.0 * se, "{m} ± {se}");
    }

    #[test]
    fn gamma_moments() {
        let xs = draws(1_000_000, 2, |r| gamma_sample(2.0, r).unwrap());
        let (m, se) = mean_se(&xs);
        assert!((m - 2.0).abs() < 3.0 * se);
        let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0);
        assert!((var - 2.0).abs() < 0.02, "variance {var}");
        let mut ys = draws(1_000_000, 3, |r| gamma_sample(1.0, r).unwrap());
        ys.sort_by(f64::total_cmp);
        let med = quantile_sorted(&ys, 0.5);
        // Median stderr: sqrt(p(1-p)/n) / f(median) with f(ln 2) = 1/2.
        let se_med = (0.25f64 / 1e6).sqrt() / 0.5;
        assert!((med - 2f64.ln()).abs() < 3.0 * se_med, "median {med}");
        assert!(gamma_sample(0.0, &mut RngStream::new(0, 0)).is_err());
    }

    #[test]
    fn arrivals_increase_with_erlang_means() {
        let mut rng = RngStream::new(4, 0);
        let mut first = Vec::new();
        let mut fifth = Vec::new();
        for _ in 0..200_000 {
            let t = poisson_arrivals(5, &mut rng).unwrap();
            assert!(t.windows(2).all(|w| w[0] < w[1]));
            first.push(t[0]);
            fifth.push(t[4]);
        }
        let (m1, se1) = mean_se(&first);
        let (m5, se5) = mean_se(&fifth);
        assert!((m1 - 1.0).abs() < 3.0 * se1);
        assert!((m5 - 5.0).abs() < 3.0 * se5);
        assert!(poisson_arrivals(0, &mut rng).is_err());
    }

    #[test]
    fn frechet_median_and_mean() {
        let mut xs = draws(1_000_000, 5, |r| frechet_sample(2.0, r).unwrap());
        assert!(xs.iter().all(|&x| x > 0.0));
        let (m, se) = mean_se(&xs);
        assert!((m - PI.sqrt()).abs() < 3.0 * se, "{m} ± {se}");
        xs.sort_by(f64::total_cmp);
        let med = quantile_sorted(&xs, 0.5);
        let target = 2f64.ln().powf(-0.5);
        // Density of Fréchet(2) at its median: 2 x^-3 exp(-x^-2).
        let dens = 2.0 * target.powi(-3) * 0.5;
        let se_med = (0.25f64 / 1e6).sqrt() / dens;
        assert!((med - target).abs() < 3.0 * se_med, "median {med}");
    }

    #[test]
    fn gclt_constant_values() {
        let c = gclt_constants(1.0, 1000).unwrap();
        assert_eq!(c.c_alpha, PI / 2.0);
        assert_eq!(c.regime, GcltRegime::Cauchy);
        let c = gclt_constants(3.0, 100).unwrap();
        assert_abs_diff_eq!(c.a_n, 150.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c.c_alpha, 0.75f64.sqrt(), epsilon = 1e-14);
        let c = gclt_constants(1.5, 1000).unwrap();
        // (Γ(-1/2) cos(3π/4))^(2/3) = (2√π/√2)^(2/3) = (2π)^(1/3)
        assert_abs_diff_eq!(c.c_alpha, (2.0 * PI).powf(1.0 / 3.0), epsilon = 1e-12);
        assert_abs_diff_eq!(c.b_n, 1.845 * 100.0, epsilon = 0.1);
        let c = gclt_constants(0.5, 10).unwrap();
        assert_eq!(c.a_n, 0.0);
        assert!(c.b_n > 0.0);
        let c = gclt_constants(2.0, 100).unwrap();
        assert_abs_diff_eq!(c.b_n, (100.0 * 100f64.ln()).sqrt(), epsilon = 1e-12);
        assert!(gclt_constants(2.0, 1).is_err());
        assert!(gclt_constants(-1.0, 10).is_err());
    }

    #[test]
    fn single_term_statistic_is_exact() {
        let rng = RngStream::new(9, 0);
        let stats = standardized_sum_stats(3.0, 1, 1000, &rng).unwrap();
        let c = stats.constants;
        let xs = mc::collect_replicas(&rng, 1000, |r| pareto_sum(3.0, 1, r));
        let m = xs.iter().map(|x| (x - c.a_n) / c.b_n).sum::<f64>() / 1000.0;
        assert_abs_diff_eq!(stats.mean, m, epsilon = 1e-12);
        assert!(standardized_sum_stats(3.0, 1, 999, &rng).is_err());
    }

    #[test]
    fn one_big_jump_tail_for_alpha_below_one() {
        // P(Σ_N > s) ~ N s^-α at N = 10 and s the empirical 0.999-quantile.
        let alpha = 0.5;
        let n = 10;
        let mut sums = mc::collect_replicas(&RngStream::new(10, 0), 1_000_000, |r| pareto_sum(alpha, n, r));
        sums.sort_by(f64::total_cmp);
        let s = quantile_sorted(&sums, 0.999);
        let exceed = sums.iter().filter(|&&x| x > s).count() as f64 / sums.len() as f64;
        let ratio = exceed / (n as f64 * s.powf(-alpha));
        assert!((0.7..=1.3).contains(&ratio), "ratio {ratio}");
    }
}
