//! Monte Carlo estimates with standard errors and diagnostics.

use serde::{Deserialize, Serialize};

/// Diagnostics attached to an estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Warning {
    /// Effective sample size below 1% of the replica count.
    WeightDegeneracy,
    /// β-biased weights whose second moment may be infinite.
    VarianceMayBeInfinite,
    /// An alternating sum lost most of its significant digits.
    Cancellation,
    /// At least one trajectory hit the event cap.
    Truncated,
}

/// A point estimate with its Monte Carlo standard error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedEstimate {
    pub value: f64,
    pub stderr: f64,
    pub replicas: usize,
    /// Effective sample size `(Σw)² / Σw²`.
    pub ess: f64,
    pub warnings: Vec<Warning>,
}

impl WeightedEstimate {
    pub fn push_warning(&mut self, w: Warning) {
        if !self.warnings.contains(&w) {
            self.warnings.push(w);
        }
    }

    /// Number of standard errors separating the estimate from `target`.
    pub fn z_score(&self, target: f64) -> f64 {
        (self.value - target) / self.stderr
    }
}

/// Streaming accumulator for a ratio estimator `Σ a_k / Σ b_k`.
///
/// With `b_k = w_k` and `a_k = w_k h_k` this is the self-normalized
/// importance-sampling estimator of `E(w h)/E(w)`; the standard error is the
/// delta-method one, `sqrt(Σ (a_k − r b_k)²) / Σ b_k`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RatioAccumulator {
    n: usize,
    sb: f64,
    sbb: f64,
    sa: f64,
    sab: f64,
    saa: f64,
}

impl RatioAccumulator {
    #[inline]
    pub fn push(&mut self, a: f64, b: f64) {
        self.n += 1;
        self.sb += b;
        self.sbb += b * b;
        self.sa += a;
        self.sab += a * b;
        self.saa += a * a;
    }

    #[inline]
    pub fn push_weighted(&mut self, weight: f64, h: f64) {
        self.push(weight * h, weight);
    }

    pub fn merge(&mut self, o: &Self) {
        self.n += o.n;
        self.sb += o.sb;
        self.sbb += o.sbb;
        self.sa += o.sa;
        self.sab += o.sab;
        self.saa += o.saa;
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn finish(&self) -> WeightedEstimate {
        let r = self.sa / self.sb;
        let ss = (self.saa - 2.0 * r * self.sab + r * r * self.sbb).max(0.0);
        let ess = self.sb * self.sb / self.sbb;
        let mut est = WeightedEstimate {
            value: r,
            stderr: ss.sqrt() / self.sb,
            replicas: self.n,
            ess,
            warnings: Vec::new(),
        };
        if ess < 0.01 * self.n as f64 {
            est.push_warning(Warning::WeightDegeneracy);
        }
        est
    }
}

/// Streaming mean and variance (Welford), mergeable.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MeanAccumulator {
    n: usize,
    mean: f64,
    m2: f64,
}

impl MeanAccumulator {
    #[inline]
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&mut self, o: &Self) {
        if o.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *o;
            return;
        }
        let n = (self.n + o.n) as f64;
        let d = o.mean - self.mean;
        self.mean += d * o.n as f64 / n;
        self.m2 += o.m2 + d * d * self.n as f64 * o.n as f64 / n;
        self.n += o.n;
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn stderr(&self) -> f64 {
        (self.variance() / self.n as f64).sqrt()
    }

    pub fn finish(&self) -> WeightedEstimate {
        WeightedEstimate {
            value: self.mean,
            stderr: self.stderr(),
            replicas: self.n,
            ess: self.n as f64,
            warnings: Vec::new(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn unit_weights_give_binomial_stderr() {
        let mut acc = RatioAccumulator::default();
        for k in 0..1000 {
            acc.push_weighted(1.0, if k % 4 == 0 { 1.0 } else { 0.0 });
        }
        let e = acc.finish();
        assert_abs_diff_eq!(e.value, 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(e.stderr, (0.25f64 * 0.75 / 1000.0).sqrt(), epsilon = 1e-12);
        assert_eq!(e.ess, 1000.0);
        assert!(e.warnings.is_empty());
    }

    #[test]
    fn degenerate_weights_are_flagged() {
        let mut acc = RatioAccumulator::default();
        acc.push_weighted(1e6, 1.0);
        for _ in 0..999 {
            acc.push_weighted(1.0, 0.0);
        }
        assert!(acc.finish().warnings.contains(&Warning::WeightDegeneracy));
    }

    proptest! {
        #[test]
        fn welford_merge_matches_single_pass(xs in prop::collection::vec(-1e3f64..1e3, 2..200), cut in 0usize..200) {
            let cut = cut.min(xs.len());
            let mut whole = MeanAccumulator::default();
            xs.iter().for_each(|&x| whole.push(x));
            let mut a = MeanAccumulator::default();
            let mut b = MeanAccumulator::default();
            xs[..cut].iter().for_each(|&x| a.push(x));
            xs[cut..].iter().for_each(|&x| b.push(x));
            a.merge(&b);
            prop_assert!((a.mean() - whole.mean()).abs() < 1e-9);
            prop_assert!((a.variance() - whole.variance()).abs() < 1e-6 * whole.variance().max(1.0));
        }
    }
}
