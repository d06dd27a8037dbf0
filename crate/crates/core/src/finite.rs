//! Finite-N coalescent induced by dropping `i` uniforms on a random
//! partition `S_n = X_n / Σ_N` of the unit interval.

use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{domain, invalid, Result};
use crate::estimate::{RatioAccumulator, Warning, WeightedEstimate};
use crate::mc::fold_replicas;
use crate::quad::integrate;
use crate::samplers::{pareto_from_uniform, RngStream};
use crate::sim::BlockState;
use crate::specfun::ln_binomial;

pub const MIN_REPLICAS: usize = 1000;
pub const DEFAULT_MAX_STEPS: usize = 10_000_000;

/// Law of the unnormalized segment lengths `X_n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    Pareto { alpha: f64 },
    Gamma { theta: f64 },
}

/// `N` i.i.d. segment lengths, normalized, with size-bias exponent `β`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartitionModel {
    pub family: Family,
    pub n: usize,
    pub beta: f64,
}

impl PartitionModel {
    pub fn pareto(alpha: f64, n: usize, beta: f64) -> Result<Self> {
        Self::new(Family::Pareto { alpha }, n, beta)
    }

    pub fn gamma(theta: f64, n: usize, beta: f64) -> Result<Self> {
        Self::new(Family::Gamma { theta }, n, beta)
    }

    pub fn new(family: Family, n: usize, beta: f64) -> Result<Self> {
        if n == 0 {
            return Err(invalid("N must be >= 1"));
        }
        if !beta.is_finite() {
            return Err(invalid(format!("beta must be finite, got {beta}")));
        }
        match family {
            Family::Pareto { alpha } => {
                if !(alpha > 0.0) || !alpha.is_finite() {
                    return Err(invalid(format!("alpha must be positive, got {alpha}")));
                }
                if alpha < 2.0 && !(beta < alpha) {
                    return Err(invalid(format!("beta < alpha required (alpha = {alpha}, beta = {beta})")));
                }
            }
            Family::Gamma { theta } => {
                if !(theta > 0.0) || !theta.is_finite() {
                    return Err(invalid(format!("theta must be positive, got {theta}")));
                }
            }
        }
        Ok(Self { family, n, beta })
    }

    /// Whether `Σ_N^{2β}` may have infinite mean, making the weighted
    /// estimator's variance infinite.
    pub fn weight_variance_may_be_infinite(&self) -> bool {
        match self.family {
            Family::Pareto { alpha } if alpha >= 2.0 => self.beta >= alpha / 2.0 + 1.0,
            Family::Pareto { alpha } => 2.0 * self.beta >= alpha,
            Family::Gamma { .. } => false,
        }
    }

    /// Typical log-size of `Σ_N`; weights are taken relative to it.
    fn log_scale(&self) -> f64 {
        let n = self.n as f64;
        match self.family {
            Family::Pareto { alpha } => n.ln() * (1.0 / alpha).max(1.0),
            Family::Gamma { theta } => (n * theta).ln(),
        }
    }

    fn weight(&self, log_scale: f64, total: f64) -> f64 {
        if self.beta == 0.0 {
            1.0
        } else {
            (self.beta * (total.ln() - log_scale)).exp()
        }
    }

    fn finish(&self, acc: &RatioAccumulator) -> WeightedEstimate {
        let mut e = acc.finish();
        if self.beta != 0.0 && self.weight_variance_may_be_infinite() {
            e.push_warning(Warning::VarianceMayBeInfinite);
        }
        e
    }
}

/// Draws partitions of a fixed model into a reusable buffer of cumulative sums.
struct PartitionSampler {
    model: PartitionModel,
    gamma: Option<Gamma<f64>>,
}

impl PartitionSampler {
    fn new(model: &PartitionModel) -> Result<Self> {
        let gamma = match model.family {
            Family::Gamma { theta } => Some(Gamma::new(theta, 1.0).map_err(|e| invalid(e.to_string()))?),
            Family::Pareto { .. } => None,
        };
        Ok(Self { model: *model, gamma })
    }

    #[inline]
    fn draw_one(&self, rng: &mut RngStream) -> f64 {
        match (&self.gamma, self.model.family) {
            (Some(g), _) => g.sample(rng),
            (None, Family::Pareto { alpha }) => pareto_from_uniform(alpha, rng.uniform()),
            (None, Family::Gamma { .. }) => unreachable!(),
        }
    }

    /// Fills `cum` with the running sums of `X_1..X_N`; returns `Σ_N`.
    fn cumulative(&self, cum: &mut Vec<f64>, rng: &mut RngStream) -> f64 {
        cum.clear();
        let mut acc = 0.0;
        for _ in 0..self.model.n {
            acc += self.draw_one(rng);
            cum.push(acc);
        }
        acc
    }

    fn raw(&self, xs: &mut Vec<f64>, rng: &mut RngStream) {
        xs.clear();
        xs.extend((0..self.model.n).map(|_| self.draw_one(rng)));
    }
}

/// Index of the segment containing the point `x` in `[0, cum.last())`.
#[inline]
pub(crate) fn locate(cum: &[f64], x: f64) -> usize {
    cum.partition_point(|&c| c <= x).min(cum.len() - 1)
}

/// Tracks which segments the first `k` uniforms have hit.
struct Occupancy {
    hits: Vec<(usize, usize)>,
}

impl Occupancy {
    fn new() -> Self {
        Self { hits: Vec::new() }
    }

    fn clear(&mut self) {
        self.hits.clear();
    }

    #[inline]
    fn add(&mut self, segment: usize) {
        match self.hits.iter_mut().find(|h| h.0 == segment) {
            Some(h) => h.1 += 1,
            None => self.hits.push((segment, 1)),
        }
    }

    fn distinct(&self) -> usize {
        self.hits.len()
    }
}

/// Result of throwing `i` points: how many landed in each hit segment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MergerOutcome {
    pub i: usize,
    /// Non-increasing occupancy counts, summing to `i`.
    pub occupancy: Vec<usize>,
    /// Number of distinct segments hit.
    pub j: usize,
}

/// One partition, `i` uniforms, and the size-bias weight `Σ_N^β` (taken
/// relative to a fixed scale; exactly 1 when `β = 0`).
pub fn draw_merger(model: &PartitionModel, i: usize, rng: &mut RngStream) -> Result<(MergerOutcome, f64)> {
    if i < 2 {
        return Err(invalid("sample size i must be >= 2"));
    }
    let sampler = PartitionSampler::new(model)?;
    let mut cum = Vec::with_capacity(model.n);
    let total = sampler.cumulative(&mut cum, rng);
    let mut occ = Occupancy::new();
    for _ in 0..i {
        occ.add(locate(&cum, rng.uniform() * total));
    }
    let mut occupancy: Vec<usize> = occ.hits.iter().map(|h| h.1).collect();
    occupancy.sort_unstable_by(|a, b| b.cmp(a));
    let j = occupancy.len();
    Ok((MergerOutcome { i, occupancy, j }, model.weight(model.log_scale(), total)))
}

/// Estimates of `P_{i,j}` for `2 <= i <= i_max`, `1 <= j <= i`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MergerTable {
    pub i_max: usize,
    rows: Vec<Vec<WeightedEstimate>>,
}

impl MergerTable {
    pub fn get(&self, i: usize, j: usize) -> Option<&WeightedEstimate> {
        if i < 2 || i > self.i_max || j == 0 || j > i {
            return None;
        }
        self.rows[i - 2].get(j - 1)
    }

    pub fn row(&self, i: usize) -> Option<&[WeightedEstimate]> {
        (2..=self.i_max).contains(&i).then(|| self.rows[i - 2].as_slice())
    }
}

fn check_replicas(replicas: usize) -> Result<()> {
    if replicas < MIN_REPLICAS {
        return Err(invalid(format!("replicas must be >= {MIN_REPLICAS}, got {replicas}")));
    }
    Ok(())
}

/// Estimates every `P_{i,j}` up to `i_max` from shared partitions: replica
/// `k` throws `i_max` nested uniforms and sample size `i` uses the first `i`.
pub fn estimate_merger_table(
    model: &PartitionModel,
    i_max: usize,
    replicas: usize,
    rng: &RngStream,
) -> Result<MergerTable> {
    if i_max < 2 {
        return Err(invalid("i_max must be >= 2"));
    }
    check_replicas(replicas)?;
    let sampler = PartitionSampler::new(model)?;
    let scale = model.log_scale();
    let width = i_max * (i_max + 1) / 2;
    let accs = fold_replicas(
        rng,
        replicas,
        || vec![RatioAccumulator::default(); width],
        |accs, r| {
            let mut cum = Vec::with_capacity(model.n);
            let total = sampler.cumulative(&mut cum, r);
            let w = model.weight(scale, total);
            let mut occ = Occupancy::new();
            for i in 1..=i_max {
                occ.add(locate(&cum, r.uniform() * total));
                if i >= 2 {
                    let base = i * (i - 1) / 2;
                    for j in 1..=i {
                        let hit = if occ.distinct() == j { 1.0 } else { 0.0 };
                        accs[base + j - 1].push_weighted(w, hit);
                    }
                }
            }
        },
        |a, b| a.iter_mut().zip(&b).for_each(|(x, y)| x.merge(y)),
    );
    let rows = (2..=i_max)
        .map(|i| {
            let base = i * (i - 1) / 2;
            (1..=i).map(|j| model.finish(&accs[base + j - 1])).collect()
        })
        .collect();
    Ok(MergerTable { i_max, rows })
}

/// Self-normalized estimate of the size-biased `P_{i,j}^{(N)}`.
pub fn estimate_p_ij(
    model: &PartitionModel,
    i: usize,
    j: usize,
    replicas: usize,
    rng: &RngStream,
) -> Result<WeightedEstimate> {
    if i < 2 || j < 1 || j > i {
        return Err(invalid(format!("need 1 <= j <= i and i >= 2, got ({i}, {j})")));
    }
    let table = estimate_merger_table(model, i, replicas, rng)?;
    Ok(table.get(i, j).expect("in range").clone())
}

/// Coalescence probability `c_N = P_{2,1}^{(N)}`.
pub fn estimate_c_n(model: &PartitionModel, replicas: usize, rng: &RngStream) -> Result<WeightedEstimate> {
    estimate_p_ij(model, 2, 1, replicas, rng)
}

/// `Σ_{|L|=l} (Σ_{n∈L} s_n)^i` for `l = 1..=j` (index `l − 1`).
///
/// Coefficient of `z^l t^i / i!` in `Π_n (1 + z e^{t s_n})`, accumulated over
/// truncated power series in `t`.
pub(crate) fn subset_power_sums(segments: &[f64], i: usize, j: usize) -> Vec<f64> {
    let mut poly = vec![vec![0.0; i + 1]; j + 1];
    poly[0][0] = 1.0;
    let mut series = vec![0.0; i + 1];
    for &s in segments {
        series[0] = 1.0;
        for m in 1..=i {
            series[m] = series[m - 1] * s / m as f64;
        }
        for l in (1..=j).rev() {
            let (lower, upper) = poly.split_at_mut(l);
            let prev = &lower[l - 1];
            let cur = &mut upper[0];
            for m in (0..=i).rev() {
                let mut acc = 0.0;
                for r in 0..=m {
                    acc += prev[m - r] * series[r];
                }
                cur[m] += acc;
            }
        }
    }
    let fact: f64 = (1..=i).map(|m| m as f64).product();
    (1..=j).map(|l| fact * poly[l][i]).collect()
}

/// Estimate of `P_{i,j}^{(N)}` (`β = 0`) from the alternating moment sum
/// `Σ_l (−1)^{j−l} C(N−l, j−l) Σ_{|L|=l} S_L^i`, evaluated exactly per
/// partition and averaged over partitions.
pub fn estimate_moment_form(
    model: &PartitionModel,
    i: usize,
    j: usize,
    replicas: usize,
    rng: &RngStream,
) -> Result<WeightedEstimate> {
    if model.beta != 0.0 {
        return Err(invalid("moment-form estimator requires beta = 0"));
    }
    if !(1..=i).contains(&j) || !(2..=8).contains(&i) {
        return Err(invalid(format!("moment form needs 1 <= j <= i <= 8, got ({i}, {j})")));
    }
    if j > model.n {
        return Err(invalid(format!("j = {j} exceeds N = {}", model.n)));
    }
    check_replicas(replicas)?;
    let sampler = PartitionSampler::new(model)?;
    let n = model.n as f64;
    let coeffs: Vec<f64> = (1..=j)
        .map(|l| {
            let sign = if (j - l) % 2 == 0 { 1.0 } else { -1.0 };
            sign * ln_binomial(n - l as f64, (j - l) as f64).exp()
        })
        .collect();
    let (acc, cancelled) = fold_replicas(
        rng,
        replicas,
        || (RatioAccumulator::default(), false),
        |(acc, cancelled), r| {
            let mut xs = Vec::with_capacity(model.n);
            sampler.raw(&mut xs, r);
            let total: f64 = xs.iter().sum();
            xs.iter_mut().for_each(|x| *x /= total);
            let sums = subset_power_sums(&xs, i, j);
            let terms = coeffs.iter().zip(&sums).map(|(c, e)| c * e);
            let largest = terms.clone().fold(0.0f64, |m, t| m.max(t.abs()));
            let p: f64 = terms.sum();
            if largest > 1e8 * p.abs().max(1e-300) {
                *cancelled = true;
            }
            acc.push_weighted(1.0, p);
        },
        |a, b| {
            a.0.merge(&b.0);
            a.1 |= b.1;
        },
    );
    let mut est = acc.finish();
    if cancelled {
        est.push_warning(Warning::Cancellation);
    }
    Ok(est)
}

/// Coalescence probability with the pair indicator integrated out.
///
/// For Pareto partitions the largest variate is also integrated out: given
/// the other `N − 1` values (second largest `M₂`) the maximum is `M₂ Y` with
/// `Y ~ Pareto(α)`, and both `E(Σ^β Σ S_n²)` and `E(Σ^β)` are computed by
/// quadrature over `Y`. Gamma partitions use `Σ S_n²` directly.
pub fn estimate_c_n_conditional(
    model: &PartitionModel,
    replicas: usize,
    rng: &RngStream,
) -> Result<WeightedEstimate> {
    check_replicas(replicas)?;
    let alpha = match model.family {
        Family::Pareto { alpha } => {
            if !(model.beta < alpha) {
                return Err(domain(format!(
                    "E(Sigma^beta) is infinite for beta = {} >= alpha = {alpha}",
                    model.beta
                )));
            }
            Some(alpha)
        }
        Family::Gamma { .. } => None,
    };
    let sampler = PartitionSampler::new(model)?;
    let scale = model.log_scale();
    let (acc, failure) = fold_replicas(
        rng,
        replicas,
        || (RatioAccumulator::default(), None),
        |(acc, failure), r| {
            let mut xs = Vec::with_capacity(model.n);
            sampler.raw(&mut xs, r);
            let pair = match alpha {
                Some(a) if model.n >= 2 => conditional_on_rest(a, model.beta, scale, &xs),
                _ => {
                    let total: f64 = xs.iter().sum();
                    let sq: f64 = xs.iter().map(|x| x * x).sum();
                    let w = model.weight(scale, total);
                    Ok((w * sq / (total * total), w))
                }
            };
            match pair {
                Ok((num, den)) => acc.push(num, den),
                Err(e) => {
                    failure.get_or_insert(e);
                }
            }
        },
        |a, b| {
            a.0.merge(&b.0);
            if a.1.is_none() {
                a.1 = b.1;
            }
        },
    );
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(model.finish(&acc))
}

/// `(E_Y[w(S) (Q + M₂²Y²)/S²], E_Y[w(S)])` with `S = R + M₂Y`.
fn conditional_on_rest(alpha: f64, beta: f64, scale: f64, xs: &[f64]) -> Result<(f64, f64)> {
    let (mut m1, mut m2) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    let (mut total, mut sq) = (0.0, 0.0);
    for &x in xs {
        total += x;
        sq += x * x;
        if x > m1 {
            m2 = m1;
            m1 = x;
        } else if x > m2 {
            m2 = x;
        }
    }
    let rest = total - m1;
    let rest_sq = sq - m1 * m1;
    // Y = v^{-q}; the density of v is qα v^{qα−1}, and the choice of q makes
    // the integrand bounded at v = 0.
    let q = 1.0f64.min(1.0 / (alpha - beta));
    let qa = q * alpha;
    let weight = |s: f64| if beta == 0.0 { 1.0 } else { (beta * (s.ln() - scale)).exp() };
    let den = integrate(
        |v| {
            let y = v.powf(-q);
            let s = rest + m2 * y;
            qa * v.powf(qa - 1.0) * weight(s)
        },
        0.0,
        1.0,
        1e-300,
        1e-10,
    )?;
    let num = integrate(
        |v| {
            let y = v.powf(-q);
            let big = m2 * y;
            let s = rest + big;
            qa * v.powf(qa - 1.0) * weight(s) * (rest_sq + big * big) / (s * s)
        },
        0.0,
        1.0,
        1e-300,
        1e-10,
    )?;
    Ok((num, den))
}

/// Block-count trajectory of the discrete-time coalescent.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscreteTrajectory {
    /// `time` holds the generation index.
    pub states: Vec<BlockState>,
    /// Generation at which one block remained, if reached.
    pub absorption_step: Option<usize>,
    pub truncated: bool,
}

/// Iterates the one-step map `blocks → distinct segments hit` with a fresh
/// unweighted partition each generation, until one block remains or
/// `max_steps` generations have passed.
pub fn run_discrete_coalescent(
    model: &PartitionModel,
    n0: usize,
    max_steps: usize,
    rng: &mut RngStream,
) -> Result<DiscreteTrajectory> {
    if n0 < 2 || (n0 > model.n && model.n > 1) {
        return Err(invalid(format!("need 2 <= n0 <= N, got n0 = {n0}, N = {}", model.n)));
    }
    let sampler = PartitionSampler::new(model)?;
    let mut cum = Vec::with_capacity(model.n);
    let mut occ = Occupancy::new();
    let mut blocks = n0;
    let mut states = vec![BlockState { time: 0.0, blocks }];
    let mut step = 0;
    while blocks > 1 && step < max_steps {
        let total = sampler.cumulative(&mut cum, rng);
        occ.clear();
        for _ in 0..blocks {
            occ.add(locate(&cum, rng.uniform() * total));
        }
        blocks = occ.distinct();
        step += 1;
        states.push(BlockState { time: step as f64, blocks });
    }
    Ok(DiscreteTrajectory {
        states,
        absorption_step: (blocks == 1).then_some(step),
        truncated: blocks > 1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimate::MeanAccumulator;
    use proptest::prelude::*;

    fn gamma_exact(theta: f64, n: usize) -> f64 {
        // N E(S_1²) for a symmetric Dirichlet(θ, …, θ).
        (1.0 + theta) / (1.0 + n as f64 * theta)
    }

    #[test]
    fn single_segment() {
        let m = PartitionModel::pareto(1.5, 1, 0.0).unwrap();
        let mut r = RngStream::new(1, 0);
        for i in 2..6 {
            let (o, w) = draw_merger(&m, i, &mut r).unwrap();
            assert_eq!(o.occupancy, vec![i]);
            assert_eq!(o.j, 1);
            assert_eq!(w, 1.0);
        }
        let c = estimate_c_n(&m, 1000, &RngStream::new(2, 0)).unwrap();
        assert_eq!(c.value, 1.0);
        assert_eq!(c.stderr, 0.0);
    }

    #[test]
    fn pair_outcomes_and_unit_weights() {
        let m = PartitionModel::gamma(1.0, 20, 0.0).unwrap();
        let mut r = RngStream::new(3, 0);
        for _ in 0..200 {
            let (o, w) = draw_merger(&m, 2, &mut r).unwrap();
            assert!(o.occupancy == vec![2] || o.occupancy == vec![1, 1]);
            assert_eq!(w, 1.0);
        }
        assert!(draw_merger(&m, 1, &mut r).is_err());
    }

    #[test]
    fn gamma_partition_matches_dirichlet_pair_probability() {
        for (theta, n) in [(1.0, 100), (2.0, 50), (0.5, 10), (2.0, 1000)] {
            let m = PartitionModel::gamma(theta, n, 0.0).unwrap();
            let e = estimate_c_n(&m, 100_000, &RngStream::new(4, n as u64)).unwrap();
            let target = gamma_exact(theta, n);
            assert!(e.z_score(target).abs() < 3.0, "θ={theta} N={n}: {} ± {} vs {target}", e.value, e.stderr);
        }
    }

    #[test]
    fn rows_sum_to_one_and_beta_zero_is_plain_frequency() {
        let m = PartitionModel::pareto(1.5, 50, 0.0).unwrap();
        let rng = RngStream::new(5, 0);
        let t = estimate_merger_table(&m, 6, 2000, &rng).unwrap();
        for i in 2..=6 {
            let s: f64 = t.row(i).unwrap().iter().map(|e| e.value).sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
        // Same streams through draw_merger: frequency of j = 1 among pairs.
        let hits = (0..2000u64)
            .filter(|&k| {
                let mut r = rng.replica(k);
                // The table draws the partition first, then nested uniforms.
                let (o, _) = draw_merger(&m, 2, &mut r).unwrap();
                o.j == 1
            })
            .count();
        assert_eq!(t.get(2, 1).unwrap().value, hits as f64 / 2000.0);
    }

    #[test]
    fn size_biased_rows_sum_to_one() {
        for (a, b) in [(0.5, -1.0), (1.5, 0.5), (3.0, 1.0)] {
            let m = PartitionModel::pareto(a, 100, b).unwrap();
            let t = estimate_merger_table(&m, 5, 2000, &RngStream::new(6, 0)).unwrap();
            for i in 2..=5 {
                let s: f64 = t.row(i).unwrap().iter().map(|e| e.value).sum();
                assert!((s - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn xi_limit_pair_probability() {
        let m = PartitionModel::pareto(0.5, 10_000, 0.0).unwrap();
        let e = estimate_c_n(&m, 4000, &RngStream::new(7, 0)).unwrap();
        assert!((e.value - 0.5).abs() < 0.03, "{}", e.value);
    }

    #[test]
    fn moment_form_agrees_with_occupancy_estimator() {
        let m = PartitionModel::pareto(1.5, 200, 0.0).unwrap();
        let a = estimate_moment_form(&m, 3, 2, 20_000, &RngStream::new(8, 0)).unwrap();
        let b = estimate_p_ij(&m, 3, 2, 100_000, &RngStream::new(8, 1)).unwrap();
        let z = (a.value - b.value) / (a.stderr.powi(2) + b.stderr.powi(2)).sqrt();
        assert!(z.abs() < 3.0, "{} vs {}", a.value, b.value);
        let g = PartitionModel::gamma(1.0, 100, 0.0).unwrap();
        let e = estimate_moment_form(&g, 2, 1, 20_000, &RngStream::new(8, 2)).unwrap();
        assert!(e.z_score(gamma_exact(1.0, 100)).abs() < 3.0);
        assert!(estimate_moment_form(&PartitionModel::pareto(1.5, 200, 0.1).unwrap(), 3, 2, 1000, &RngStream::new(0, 0))
            .is_err());
    }

    #[test]
    fn subset_power_sums_brute_force() {
        let s = [0.1, 0.25, 0.05, 0.3, 0.2, 0.1];
        for i in 1..=5 {
            let got = subset_power_sums(&s, i, 4);
            for l in 1..=4usize {
                let mut want = 0.0;
                for mask in 0u32..(1 << s.len()) {
                    if mask.count_ones() as usize == l {
                        let t: f64 = (0..s.len()).filter(|b| mask >> b & 1 == 1).map(|b| s[b]).sum();
                        want += t.powi(i as i32);
                    }
                }
                assert!((got[l - 1] - want).abs() < 1e-13, "i={i} l={l}");
            }
        }
    }

    #[test]
    fn conditional_estimator_matches_gamma_oracle_and_plain_estimator() {
        let g = PartitionModel::gamma(2.0, 50, 0.0).unwrap();
        let e = estimate_c_n_conditional(&g, 20_000, &RngStream::new(9, 0)).unwrap();
        assert!(e.z_score(gamma_exact(2.0, 50)).abs() < 3.0);
        for (a, b) in [(1.5, 0.0), (0.8, 0.4), (3.0, 1.0)] {
            let m = PartitionModel::pareto(a, 100, b).unwrap();
            let c = estimate_c_n_conditional(&m, 20_000, &RngStream::new(10, 0)).unwrap();
            let p = estimate_c_n(&m, 200_000, &RngStream::new(10, 1)).unwrap();
            let z = (c.value - p.value) / (c.stderr.powi(2) + p.stderr.powi(2)).sqrt();
            assert!(z.abs() < 3.0, "({a},{b}): {} ± {} vs {} ± {}", c.value, c.stderr, p.value, p.stderr);
            assert!(c.stderr < p.stderr);
        }
        let n1 = PartitionModel::pareto(1.5, 1, 0.0).unwrap();
        assert_eq!(estimate_c_n_conditional(&n1, 1000, &RngStream::new(0, 0)).unwrap().value, 1.0);
        let heavy = PartitionModel::pareto(3.0, 10, 3.5).unwrap();
        assert!(estimate_c_n_conditional(&heavy, 1000, &RngStream::new(0, 0)).is_err());
    }

    #[test]
    fn triple_mergers_negligible_for_gamma() {
        let m = PartitionModel::gamma(1.0, 1000, 0.0).unwrap();
        let t = estimate_merger_table(&m, 3, 200_000, &RngStream::new(11, 0)).unwrap();
        let ratio = t.get(3, 1).unwrap().value / t.get(2, 1).unwrap().value;
        assert!(ratio < 0.05, "{ratio}");
    }

    #[test]
    fn variance_warnings() {
        assert!(PartitionModel::pareto(0.8, 10, 0.4).unwrap().weight_variance_may_be_infinite());
        assert!(!PartitionModel::pareto(0.5, 10, -1.0).unwrap().weight_variance_may_be_infinite());
        assert!(PartitionModel::pareto(3.0, 10, 2.5).unwrap().weight_variance_may_be_infinite());
        assert!(PartitionModel::pareto(1.5, 10, 1.6).is_err());
        assert!(PartitionModel::pareto(3.0, 10, 7.0).is_ok());
        assert!(PartitionModel::gamma(0.0, 10, 0.0).is_err());
        let e = estimate_c_n(&PartitionModel::pareto(0.8, 100, 0.4).unwrap(), 1000, &RngStream::new(0, 0)).unwrap();
        assert!(e.warnings.contains(&Warning::VarianceMayBeInfinite));
    }

    #[test]
    fn discrete_coalescent_absorption() {
        let one = PartitionModel::pareto(1.5, 1, 0.0).unwrap();
        let t = run_discrete_coalescent(&one, 5, 100, &mut RngStream::new(12, 0)).unwrap();
        assert_eq!(t.absorption_step, Some(1));
        let m = PartitionModel::gamma(1.0, 1000, 0.0).unwrap();
        let mut acc = MeanAccumulator::default();
        let base = RngStream::new(13, 0);
        for k in 0..300 {
            let t = run_discrete_coalescent(&m, 10, DEFAULT_MAX_STEPS, &mut base.replica(k)).unwrap();
            assert!(t.states.windows(2).all(|w| w[1].blocks <= w[0].blocks));
            acc.push(t.absorption_step.unwrap() as f64);
        }
        // Kingman time 2(1 − 1/10) in units of N_e = 1/c_N generations.
        let target = 2.0 * 0.9 / gamma_exact(1.0, 1000);
        assert!((acc.mean() - target).abs() < 3.0 * acc.stderr() + 0.02 * target, "{} ± {}", acc.mean(), acc.stderr());
        let capped = run_discrete_coalescent(&m, 10, 3, &mut base.replica(999)).unwrap();
        assert!(capped.truncated);
        assert_eq!(capped.states.len(), 4);
    }

    #[test]
    fn one_step_law_matches_table() {
        let m = PartitionModel::pareto(1.5, 30, 0.0).unwrap();
        let t = estimate_merger_table(&m, 4, 20_000, &RngStream::new(14, 0)).unwrap();
        let base = RngStream::new(14, 1);
        let reps = 20_000;
        let mut counts = [0usize; 5];
        for k in 0..reps {
            let traj = run_discrete_coalescent(&m, 4, 1, &mut base.replica(k)).unwrap();
            counts[traj.states[1].blocks] += 1;
        }
        for j in 1..=4 {
            let p = counts[j] as f64 / reps as f64;
            let e = t.get(4, j).unwrap();
            let se = (e.stderr.powi(2) + p * (1.0 - p) / reps as f64).sqrt();
            assert!((p - e.value).abs() < 3.0 * se.max(1e-4), "j={j}: {p} vs {}", e.value);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn nested_uniforms_hit_monotonically(seed in any::<u64>(), alpha in 0.3f64..3.0, n in 1usize..60) {
            let m = PartitionModel::pareto(alpha, n, 0.0).unwrap();
            let sampler = PartitionSampler::new(&m).unwrap();
            let mut r = RngStream::new(seed, 0);
            let mut cum = Vec::new();
            let total = sampler.cumulative(&mut cum, &mut r);
            let mut occ = Occupancy::new();
            let mut prev = 0;
            for i in 1..=12 {
                occ.add(locate(&cum, r.uniform() * total));
                let j = occ.distinct();
                prop_assert!(j >= prev && j <= i && j <= n);
                prev = j;
            }
        }
    }
}
