//! Weighted regression of `ln ĉ_N` on the regime's predictor.

use serde::Serialize;

use crate::error::{invalid, Result};
use crate::estimate::WeightedEstimate;
use crate::finite::{estimate_c_n_conditional, PartitionModel};
use crate::limit::{c_n_asymptotic, Params, Regime};
use crate::samplers::RngStream;

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959963984540054;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    pub intercept_stderr: f64,
    pub r_squared: f64,
}

/// Weighted least squares `y ≈ intercept + slope·x` with weights `w`
/// taken as inverse variances.
pub fn weighted_fit(x: &[f64], y: &[f64], w: &[f64]) -> Result<LinearFit> {
    if x.len() != y.len() || x.len() != w.len() {
        return Err(invalid("x, y and weights must have equal length"));
    }
    if x.len() < 3 {
        return Err(invalid("a fit needs at least 3 points"));
    }
    if w.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(invalid("weights must be positive and finite"));
    }
    let sw: f64 = w.iter().sum();
    let xm = x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let ym = y.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let sxx: f64 = x.iter().zip(w).map(|(a, b)| b * (a - xm).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(invalid("predictor values must not all coincide"));
    }
    let sxy: f64 = x.iter().zip(y).zip(w).map(|((a, c), b)| b * (a - xm) * (c - ym)).sum();
    let syy: f64 = y.iter().zip(w).map(|(c, b)| b * (c - ym).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .zip(w)
        .map(|((a, c), b)| b * (c - intercept - slope * a).powi(2))
        .sum();
    let r_squared = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    Ok(LinearFit {
        slope,
        intercept,
        slope_stderr: (1.0 / sxx).sqrt(),
        intercept_stderr: (1.0 / sw + xm * xm / sxx).sqrt(),
        r_squared,
    })
}

/// Predictor against which `ln c_N` is linear in each regime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Predictor {
    LnN,
    LnLnN,
    LnNMinusLnLnN,
}

impl Predictor {
    pub fn for_regime(regime: Regime) -> Self {
        match regime {
            Regime::Bs => Predictor::LnLnN,
            Regime::Critical => Predictor::LnNMinusLnLnN,
            _ => Predictor::LnN,
        }
    }

    pub fn eval(self, n: u64) -> f64 {
        let ln_n = (n as f64).ln();
        match self {
            Predictor::LnN => ln_n,
            Predictor::LnLnN => ln_n.ln(),
            Predictor::LnNMinusLnLnN => ln_n - ln_n.ln(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Predictor::LnN => "ln N",
            Predictor::LnLnN => "ln ln N",
            Predictor::LnNMinusLnLnN => "ln N - ln ln N",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingPoint {
    pub n: u64,
    pub predictor: f64,
    pub c_n: WeightedEstimate,
    /// Leading-order `c_N` of the regime.
    pub asymptotic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingFit {
    pub alpha: f64,
    pub beta: f64,
    pub regime: Regime,
    pub predictor: Predictor,
    pub points: Vec<ScalingPoint>,
    pub fit: LinearFit,
    pub slope_ci: (f64, f64),
    /// `exp(intercept)`.
    pub prefactor: f64,
    pub prefactor_ci: (f64, f64),
    /// Set when the 95% interval is wider than `|slope|`.
    pub noisy: bool,
}

/// Checks that `grid` is increasing, has at least four points and roughly
/// constant ratios (integer rounding allowed).
pub fn check_geometric_grid(grid: &[u64]) -> Result<()> {
    if grid.len() < 4 {
        return Err(invalid(format!("N grid needs at least 4 points, got {}", grid.len())));
    }
    if grid[0] < 3 || grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid("N grid must be increasing with N >= 3"));
    }
    let ratios: Vec<f64> = grid.windows(2).map(|w| (w[1] as f64 / w[0] as f64).ln()).collect();
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    if ratios.iter().any(|r| (r - mean).abs() > 0.02 * mean.max(0.05) + 0.02) {
        return Err(invalid("N grid must be geometric"));
    }
    Ok(())
}

/// `k` points `10^{lo}, …, 10^{hi}` rounded to integers.
pub fn geometric_grid(lo: f64, hi: f64, k: usize) -> Vec<u64> {
    (0..k)
        .map(|s| 10f64.powf(lo + (hi - lo) * s as f64 / (k - 1) as f64).round() as u64)
        .collect()
}

/// Estimates `c_N` for Pareto(α) partitions on `grid` and fits `ln ĉ_N`
/// against the regime's predictor with inverse-variance weights. Grid point
/// `s` uses replica stream `s` of `rng`.
pub fn scaling_fit(
    alpha: f64,
    beta: f64,
    grid: &[u64],
    replicas: usize,
    rng: &RngStream,
) -> Result<ScalingFit> {
    let params = Params::new(alpha, beta)?;
    check_geometric_grid(grid)?;
    let regime = params.regime();
    let predictor = Predictor::for_regime(regime);
    let mut points = Vec::with_capacity(grid.len());
    for (s, &n) in grid.iter().enumerate() {
        let model = PartitionModel::pareto(alpha, n as usize, beta)?;
        let c_n = estimate_c_n_conditional(&model, replicas, &rng.replica(s as u64))?;
        let (asymptotic, _) = c_n_asymptotic(&params, n)?;
        points.push(ScalingPoint { n, predictor: predictor.eval(n), c_n, asymptotic });
    }
    if points.iter().any(|p| !(p.c_n.value > 0.0) || !(p.c_n.stderr > 0.0)) {
        return Err(invalid("every c_N estimate needs a positive value and stderr to be fitted"));
    }
    let x: Vec<f64> = points.iter().map(|p| p.predictor).collect();
    let y: Vec<f64> = points.iter().map(|p| p.c_n.value.ln()).collect();
    let w: Vec<f64> = points.iter().map(|p| (p.c_n.value / p.c_n.stderr).powi(2)).collect();
    let fit = weighted_fit(&x, &y, &w)?;
    let half = Z95 * fit.slope_stderr;
    let ihalf = Z95 * fit.intercept_stderr;
    Ok(ScalingFit {
        alpha,
        beta,
        regime,
        predictor,
        points,
        slope_ci: (fit.slope - half, fit.slope + half),
        prefactor: fit.intercept.exp(),
        prefactor_ci: ((fit.intercept - ihalf).exp(), (fit.intercept + ihalf).exp()),
        noisy: 2.0 * half > fit.slope.abs(),
        fit,
    })
}
