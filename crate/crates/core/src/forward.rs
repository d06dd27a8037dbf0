//! Forward branching model with selection.
//!
//! Each generation the `N` parents superpose into one Poisson point process
//! with intensity `α x_{N,α}^α x^{−α−1}`, where `x_{N,α} = (Σ x_n^α)^{1/α}`,
//! and the `N` largest points survive. Writing the arrivals of a unit Poisson
//! process as `τ_1 < τ_2 < …`, the survivors are `x_{N,α} τ_n^{−1/α}`, and
//! given `τ_{N+1}` the ratios `τ_{N+1}/τ_n` are i.i.d. Pareto(1). Hence
//!
//! `ln x_{N,α}(k+1) = ln x_{N,α}(k) − (1/α) ln τ_{N+1} + (1/α) ln Σ_n X_n^α`
//!
//! with `X_n^α ~ Pareto(1)`, which is all the trajectory code tracks.

use std::io::{self, Write};

use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::estimate::{MeanAccumulator, WeightedEstimate};
use crate::fmt_value;
use crate::mc::{collect_replicas, fold_replicas};
use crate::samplers::{pareto_from_uniform, quantile_sorted, RngStream};
use crate::specfun::{digamma, digamma_pos, ln_gamma_pos};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForwardConfig {
    pub n: usize,
    pub alpha: f64,
    pub generations: usize,
    /// Generation-zero fitnesses; all ones when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_fitnesses: Option<Vec<f64>>,
}

impl ForwardConfig {
    pub fn new(n: usize, alpha: f64, generations: usize) -> Result<Self> {
        let c = Self { n, alpha, generations, initial_fitnesses: None };
        c.validate()?;
        Ok(c)
    }

    pub fn with_initial(mut self, fitnesses: Vec<f64>) -> Result<Self> {
        self.initial_fitnesses = Some(fitnesses);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(invalid(format!("population size N must be >= 2, got {}", self.n)));
        }
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return Err(invalid(format!("alpha must be positive, got {}", self.alpha)));
        }
        if self.generations < 1 {
            return Err(invalid("generations must be >= 1"));
        }
        if let Some(x) = &self.initial_fitnesses {
            if x.len() != self.n || x.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
                return Err(invalid("initial fitnesses must be N positive finite values"));
            }
        }
        Ok(())
    }

    fn initial(&self) -> Vec<f64> {
        self.initial_fitnesses.clone().unwrap_or_else(|| vec![1.0; self.n])
    }

    pub fn initial_state(&self) -> ForwardState {
        let x = self.initial();
        let log_global = log_power_mean_sum(&x, self.alpha);
        let log_fittest = x.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v.ln()));
        ForwardState {
            k: 0,
            log_global,
            log_holder_mean: log_global - (self.n as f64).ln() / self.alpha,
            log_increments: Vec::new(),
            log_fittest,
        }
    }
}

/// `(1/α) ln Σ x_n^α`, computed stably from the logs.
fn log_power_mean_sum(x: &[f64], alpha: f64) -> f64 {
    let top = x.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v.ln()));
    let s: f64 = x.iter().map(|&v| (alpha * (v.ln() - top)).exp()).sum();
    top + s.ln() / alpha
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ForwardState {
    pub k: usize,
    /// `ln x_{N,α}(k)`.
    pub log_global: f64,
    /// `ln ⟨x⟩_{N,α}(k) = ln x_{N,α}(k) − (1/α) ln N`.
    pub log_holder_mean: f64,
    pub log_increments: Vec<f64>,
    /// `ln x_(1)(k)`, the fittest individual.
    pub log_fittest: f64,
}

impl ForwardState {
    /// `ln` of the mean output `(1/N) Σ x_n^α`, i.e. `α ln ⟨x⟩`.
    pub fn log_output_mean(&self, alpha: f64) -> f64 {
        alpha * self.log_holder_mean
    }
}

/// Random inputs of one generation.
struct Generation {
    /// `τ_{N+1}`.
    tau: f64,
    /// `Σ X_n^α` with `X_n^α = 1/U_n`.
    pareto_sum: f64,
    /// `max X_n^α`.
    pareto_max: f64,
}

/// Draws generations for a fixed `(N, α)`.
pub struct ForwardModel {
    config: ForwardConfig,
    arrival: Gamma<f64>,
}

impl ForwardModel {
    pub fn new(config: &ForwardConfig) -> Result<Self> {
        config.validate()?;
        let arrival = Gamma::new(config.n as f64 + 1.0, 1.0).map_err(|e| invalid(e.to_string()))?;
        Ok(Self { config: config.clone(), arrival })
    }

    pub fn config(&self) -> &ForwardConfig {
        &self.config
    }

    fn draw(&self, rng: &mut RngStream, mut each: impl FnMut(f64)) -> Generation {
        let tau = self.arrival.sample(rng);
        let mut pareto_sum = 0.0;
        let mut pareto_max: f64 = 0.0;
        for _ in 0..self.config.n {
            let x = 1.0 / rng.uniform();
            each(x);
            pareto_sum += x;
            pareto_max = pareto_max.max(x);
        }
        Generation { tau, pareto_sum, pareto_max }
    }

    /// Advances one generation in log space.
    pub fn step(&self, state: &ForwardState, rng: &mut RngStream) -> ForwardState {
        let mut next = state.clone();
        self.step_in_place(&mut next, rng);
        next
    }

    fn step_in_place(&self, state: &mut ForwardState, rng: &mut RngStream) {
        let g = self.draw(rng, |_| {});
        let inv = 1.0 / self.config.alpha;
        let ln_tau = g.tau.ln();
        let inc = inv * (g.pareto_sum.ln() - ln_tau);
        // τ_1 = τ_{N+1} / max X_n^α.
        state.log_fittest = state.log_global - inv * (ln_tau - g.pareto_max.ln());
        state.log_global += inc;
        state.log_holder_mean += inc;
        state.log_increments.push(inc);
        state.k += 1;
    }

    /// Runs `config.generations` steps from the initial state.
    pub fn run(&self, rng: &mut RngStream) -> Vec<ForwardState> {
        let mut state = self.config.initial_state();
        let mut out = Vec::with_capacity(self.config.generations + 1);
        out.push(state.clone());
        for _ in 0..self.config.generations {
            self.step_in_place(&mut state, rng);
            out.push(state.clone());
        }
        out
    }

    /// Final state only.
    pub fn run_final(&self, rng: &mut RngStream) -> ForwardState {
        let mut state = self.config.initial_state();
        for _ in 0..self.config.generations {
            self.step_in_place(&mut state, rng);
        }
        state
    }
}

/// The population with every fitness materialized: survivor `n` of a
/// generation is `x_{N,α}(k) (τ_{N+1} U_n)^{−1/α}`. Consumes the random
/// stream exactly like [`ForwardModel::step`].
#[derive(Debug, Clone, PartialEq)]
pub struct ExplicitPopulation {
    pub fitnesses: Vec<f64>,
    pub alpha: f64,
}

impl ExplicitPopulation {
    pub fn new(config: &ForwardConfig) -> Self {
        Self { fitnesses: config.initial(), alpha: config.alpha }
    }

    pub fn global(&self) -> f64 {
        self.fitnesses.iter().map(|x| x.powf(self.alpha)).sum::<f64>().powf(1.0 / self.alpha)
    }

    pub fn holder_mean(&self) -> f64 {
        (self.fitnesses.iter().map(|x| x.powf(self.alpha)).sum::<f64>() / self.fitnesses.len() as f64)
            .powf(1.0 / self.alpha)
    }

    pub fn fittest(&self) -> f64 {
        self.fitnesses.iter().copied().fold(0.0, f64::max)
    }

    pub fn step(&mut self, model: &ForwardModel, rng: &mut RngStream) {
        let global = self.global();
        let alpha = self.alpha;
        let mut ratios = Vec::with_capacity(self.fitnesses.len());
        let g = model.draw(rng, |x| ratios.push(x));
        for (f, r) in self.fitnesses.iter_mut().zip(ratios) {
            // τ_n = τ_{N+1} / X_n^α
            *f = global * (g.tau / r).powf(-1.0 / alpha);
        }
    }
}

/// CSV with header `k,log_global,log_holder_mean,log_fittest`.
pub fn write_forward_csv(states: &[ForwardState], out: &mut impl Write) -> io::Result<()> {
    writeln!(out, "k,log_global,log_holder_mean,log_fittest")?;
    for s in states {
        writeln!(
            out,
            "{},{},{},{}",
            s.k,
            fmt_value(s.log_global),
            fmt_value(s.log_holder_mean),
            fmt_value(s.log_fittest)
        )?;
    }
    Ok(())
}

/// Mean over replicas of `(1/k) (ln⟨x⟩(k) − ln⟨x⟩(0))` with `k = generations`.
pub fn speed_estimate(config: &ForwardConfig, replicas: usize, rng: &RngStream) -> Result<WeightedEstimate> {
    if config.generations < 100 {
        return Err(invalid("speed estimate needs at least 100 generations"));
    }
    if replicas < 2 {
        return Err(invalid("speed estimate needs at least 2 replicas"));
    }
    let model = ForwardModel::new(config)?;
    let start = config.initial_state().log_holder_mean;
    let k = config.generations as f64;
    let acc = fold_replicas(
        rng,
        replicas,
        MeanAccumulator::default,
        |acc, r| acc.push((model.run_final(r).log_holder_mean - start) / k),
        |a, b| a.merge(&b),
    );
    Ok(acc.finish())
}

fn check_pressure_args(alpha: f64, n: u64) -> Result<()> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(invalid(format!("alpha must be positive, got {alpha}")));
    }
    if n < 3 {
        return Err(invalid("pressure needs N >= 3 so that ln ln N > 0"));
    }
    Ok(())
}

/// `F_N(β) = −(β/α) ln ln N − β/(α ln N) (ψ(1 − β/α) − ln ln N − 1)` for `β < α`.
pub fn pressure(alpha: f64, n: u64, beta: f64) -> Result<f64> {
    check_pressure_args(alpha, n)?;
    if !(beta < alpha) {
        return Err(invalid(format!("beta < alpha required (alpha = {alpha}, beta = {beta})")));
    }
    Ok(pressure_unchecked(alpha, n, beta))
}

fn pressure_unchecked(alpha: f64, n: u64, beta: f64) -> f64 {
    let ln_n = (n as f64).ln();
    let lnln = ln_n.ln();
    -(beta / alpha) * lnln - beta / (alpha * ln_n) * (digamma_pos(1.0 - beta / alpha) - lnln - 1.0)
}

/// `−F_N'(0) = (1/α)(ln ln N + (ψ(1) − ln ln N − 1)/ln N)`.
pub fn pressure_speed(alpha: f64, n: u64) -> Result<f64> {
    check_pressure_args(alpha, n)?;
    let ln_n = (n as f64).ln();
    let lnln = ln_n.ln();
    Ok((lnln + (digamma(1.0)? - lnln - 1.0) / ln_n) / alpha)
}

pub const LEGENDRE_BETA_MIN: f64 = -50.0;
pub const LEGENDRE_MARGIN: f64 = 1e-6;
pub const LEGENDRE_TOL: f64 = 1e-8;

/// Tangency point of the Legendre transform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LegendrePoint {
    pub a: f64,
    /// `β*` with `F_N'(β*) = a`.
    pub beta: f64,
    /// `f_N(a) = a β* − F_N(β*)`.
    pub value: f64,
}

/// Legendre transform of `F_N` at slope `a`: golden-section minimization of
/// `F_N(β) − aβ` over `β ∈ [−50, α − 10⁻⁶]`, to `10⁻⁸` in `β`.
pub fn legendre(alpha: f64, n: u64, a: f64) -> Result<LegendrePoint> {
    check_pressure_args(alpha, n)?;
    if !a.is_finite() {
        return Err(invalid("slope a must be finite"));
    }
    let objective = |b: f64| pressure_unchecked(alpha, n, b) - a * b;
    let (lo, hi) = (LEGENDRE_BETA_MIN, alpha - LEGENDRE_MARGIN);
    let beta = golden_section_min(objective, lo, hi, LEGENDRE_TOL);
    if beta - lo < 10.0 * LEGENDRE_TOL || hi - beta < 10.0 * LEGENDRE_TOL {
        return Err(Error::Unbracketed(format!(
            "slope a = {a} is outside the range of F_N' on [{lo}, {hi}] (alpha = {alpha}, N = {n}); search ended at beta = {beta}"
        )));
    }
    Ok(LegendrePoint { a, beta, value: -objective(beta) })
}

fn golden_section_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > tol {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        }
    }
    0.5 * (lo + hi)
}

/// Law of `x_(1)(k+1) / x_{N,α}(k)`, which is Fréchet(α).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FittestStats {
    pub replicas: usize,
    /// Sample mean; `None` for `α <= 1`, where the mean is infinite.
    pub mean: Option<WeightedEstimate>,
    pub median: f64,
    /// Half-width of the order-statistic band `n/2 ± √n/2`.
    pub median_stderr: f64,
    pub minimum: f64,
}

/// Ratio of the next generation's fittest individual to the current global
/// fitness, one generation per replica from the initial state.
pub fn fittest_stats(config: &ForwardConfig, replicas: usize, rng: &RngStream) -> Result<FittestStats> {
    if replicas < 100 {
        return Err(invalid("fittest_stats needs at least 100 replicas"));
    }
    let model = ForwardModel::new(config)?;
    let start = config.initial_state();
    let mut ratios = collect_replicas(rng, replicas, |r| {
        let next = model.step(&start, r);
        (next.log_fittest - start.log_global).exp()
    });
    let mean = (config.alpha > 1.0).then(|| {
        let mut acc = MeanAccumulator::default();
        ratios.iter().for_each(|&x| acc.push(x));
        acc.finish()
    });
    ratios.sort_by(f64::total_cmp);
    let n = ratios.len() as f64;
    let half = 0.5 * n.sqrt() / n;
    let median_stderr = 0.5 * (quantile_sorted(&ratios, 0.5 + half) - quantile_sorted(&ratios, 0.5 - half));
    Ok(FittestStats {
        replicas,
        mean,
        median: quantile_sorted(&ratios, 0.5),
        median_stderr,
        minimum: ratios[0],
    })
}

/// How offspring are attributed to parents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMode {
    /// Parent `n` with probability `X_n^α / Σ X^α`.
    Plain,
    /// Parent `n` with probability `X_n / Σ X` (image process under `x ↦ x^α`).
    Distorted,
}

/// One generation's parent probabilities from fresh Pareto(α) draws.
pub fn ancestor_sampling_probs(n: usize, alpha: f64, mode: SamplingMode, rng: &mut RngStream) -> Result<Vec<f64>> {
    if n < 1 {
        return Err(invalid("N must be >= 1"));
    }
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(invalid(format!("alpha must be positive, got {alpha}")));
    }
    let mut w: Vec<f64> = (0..n)
        .map(|_| {
            let x = pareto_from_uniform(alpha, rng.uniform());
            match mode {
                SamplingMode::Plain => x.powf(alpha),
                SamplingMode::Distorted => x,
            }
        })
        .collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    Ok(w)
}

/// Probability that two offspring share a parent under the given sampling
/// mode, by throwing two points on the cumulative parent probabilities.
pub fn genealogy_c_n(
    n: usize,
    alpha: f64,
    mode: SamplingMode,
    replicas: usize,
    rng: &RngStream,
) -> Result<WeightedEstimate> {
    if replicas < 2 {
        return Err(invalid("replicas must be >= 2"));
    }
    ancestor_sampling_probs(n, alpha, mode, &mut rng.clone())?;
    let acc = fold_replicas(
        rng,
        replicas,
        MeanAccumulator::default,
        |acc, r| {
            let probs = ancestor_sampling_probs(n, alpha, mode, r).expect("validated");
            let mut cum = Vec::with_capacity(n);
            let mut s = 0.0;
            for p in probs {
                s += p;
                cum.push(s);
            }
            let a = crate::finite::locate(&cum, r.uniform() * s);
            let b = crate::finite::locate(&cum, r.uniform() * s);
            acc.push(if a == b { 1.0 } else { 0.0 });
        },
        |a, b| a.merge(&b),
    );
    Ok(acc.finish())
}

/// `E(x*^β) = Γ(N+1−β/α)/Γ(N+1)` for the `(N+1)`-st largest point
/// `x* = τ_{N+1}^{−1/α}`; needs `β/α < N+1`.
pub fn power_gamma_moment(n: usize, alpha: f64, beta: f64) -> Result<f64> {
    let shape = n as f64 + 1.0;
    if !(beta / alpha < shape) {
        return Err(invalid("moment of x* needs beta/alpha < N + 1"));
    }
    Ok((ln_gamma_pos(shape - beta / alpha) - ln_gamma_pos(shape)).exp())
}
