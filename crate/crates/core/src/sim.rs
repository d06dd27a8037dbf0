//! Block-counting simulation of the limiting coalescents and the tree
//! functionals measured along each path.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::estimate::MeanAccumulator;
use crate::fmt_value;
use crate::limit::{merger_sizes_unchecked, Params, RateTable, Regime, TableKind};
use crate::mc::fold_replicas;
use crate::samplers::RngStream;
use crate::specfun::ln_binomial;

/// Cap on merger events per trajectory.
pub const MAX_EVENTS: usize = 10_000_000;

/// Number of blocks at a time (continuous chains) or step (discrete chains).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockState {
    pub time: f64,
    pub blocks: usize,
}

/// CSV with header `time_or_step,blocks`.
pub fn write_trajectory_csv(states: &[BlockState], out: &mut impl Write) -> io::Result<()> {
    writeln!(out, "time_or_step,blocks")?;
    for s in states {
        writeln!(out, "{},{}", fmt_value(s.time), s.blocks)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct TreeFunctionals {
    /// Time to the most recent common ancestor.
    pub height: f64,
    pub total_length: f64,
    /// Summed length of branches ending in a leaf.
    pub external_length: f64,
    /// Number of merger events.
    pub collisions: usize,
    /// External branch length of one leaf picked uniformly.
    pub random_external_branch: f64,
}

/// Merger rates of a Λ-coalescent, organized by the number `k` of blocks
/// taking part (`k = 2..=i`, leading to `i − k + 1` blocks).
pub trait JumpRates {
    /// Largest block count the source can handle.
    fn max_state(&self) -> usize;

    /// Total rate `λ_i`.
    fn total(&self, i: usize) -> f64;

    /// Smallest `k` whose cumulative rate `Σ_{m<=k} λ_{i, i−m+1}` exceeds `target`.
    fn participants(&self, i: usize, target: f64) -> usize;
}

impl JumpRates for RateTable {
    fn max_state(&self) -> usize {
        self.i_max()
    }

    fn total(&self, i: usize) -> f64 {
        RateTable::total(self, i).unwrap_or(0.0)
    }

    fn participants(&self, i: usize, target: f64) -> usize {
        let row = self.row(i).expect("state within table");
        let mut acc = 0.0;
        for k in 2..=i {
            acc += row[i - k];
            if acc > target {
                return k;
            }
        }
        (2..=i).rev().find(|&k| row[i - k] > 0.0).unwrap_or(2)
    }
}

/// Beta(2−α, α−β) or Kingman rates computed row by row without a stored
/// table: only `λ_i` and the first term of each row are kept, and the
/// remaining terms come from the ratio recurrence in `k`.
#[derive(Debug, Clone)]
pub struct LambdaRates {
    params: Params,
    kingman: bool,
    totals: Vec<f64>,
    first: Vec<f64>,
}

impl LambdaRates {
    pub fn new(params: &Params, i_max: usize) -> Result<Self> {
        if i_max < 2 {
            return Err(invalid("i_max must be >= 2"));
        }
        let kingman = match params.regime() {
            Regime::Xi => return Err(invalid("Lambda rates need alpha >= 1")),
            Regime::Critical | Regime::Kingman => true,
            Regime::Bs | Regime::Beta => false,
        };
        let mut totals = vec![0.0; i_max + 1];
        let mut first = vec![0.0; i_max + 1];
        for i in 2..=i_max {
            if kingman {
                totals[i] = ln_binomial(i as f64, 2.0).exp().round();
                first[i] = totals[i];
            } else {
                let row = merger_sizes_unchecked(params, i);
                first[i] = row[0];
                totals[i] = row.iter().sum();
            }
        }
        Ok(Self { params: *params, kingman, totals, first })
    }

    pub fn params(&self) -> &Params {
        &self.params
    }
}

impl JumpRates for LambdaRates {
    fn max_state(&self) -> usize {
        self.totals.len() - 1
    }

    fn total(&self, i: usize) -> f64 {
        self.totals[i]
    }

    fn participants(&self, i: usize, target: f64) -> usize {
        if self.kingman {
            return 2;
        }
        let (a, b) = (self.params.alpha, self.params.beta);
        let fi = i as f64;
        let mut t = self.first[i];
        let mut acc = t;
        let mut k = 2;
        while acc <= target && k < i {
            let kf = k as f64;
            t *= (fi - kf) * (kf - a) / ((kf + 1.0) * (fi - kf - 1.0 + a - b));
            acc += t;
            k += 1;
        }
        k
    }
}

/// Trajectory and functionals of one continuous-time path.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LambdaPath {
    pub trajectory: Vec<BlockState>,
    pub functionals: TreeFunctionals,
    pub truncated: bool,
}

fn check_start<R: JumpRates>(rates: &R, n0: usize) -> Result<()> {
    if n0 > rates.max_state() {
        return Err(Error::OutOfTable { state: n0, i_max: rates.max_state() });
    }
    if n0 == 0 {
        return Err(invalid("n0 must be >= 1"));
    }
    Ok(())
}

/// Gillespie simulation from `n0` blocks, all singletons.
///
/// Each event draws `T ~ exp(λ_i)`, the participant count `k` with
/// probability `λ_{i,i−k+1}/λ_i`, the number of singletons among the `k`
/// hypergeometrically, and whether the tagged leaf is among them.
pub fn simulate_lambda<R: JumpRates>(rates: &R, n0: usize, rng: &mut RngStream) -> Result<LambdaPath> {
    check_start(rates, n0)?;
    let mut trajectory = vec![BlockState { time: 0.0, blocks: n0 }];
    let (functionals, truncated) = run_lambda(rates, n0, rng, |s| trajectory.push(s));
    Ok(LambdaPath { trajectory, functionals, truncated })
}

/// Functionals only; no trajectory is stored.
pub fn lambda_functionals<R: JumpRates>(rates: &R, n0: usize, rng: &mut RngStream) -> Result<(TreeFunctionals, bool)> {
    check_start(rates, n0)?;
    Ok(run_lambda(rates, n0, rng, |_| {}))
}

fn run_lambda<R: JumpRates>(
    rates: &R,
    n0: usize,
    rng: &mut RngStream,
    mut record: impl FnMut(BlockState),
) -> (TreeFunctionals, bool) {
    let mut f = TreeFunctionals::default();
    let mut blocks = n0;
    let mut singletons = n0;
    let mut tagged = n0 >= 2;
    let mut events = 0;
    while blocks > 1 {
        if events == MAX_EVENTS {
            return (f, true);
        }
        let rate = rates.total(blocks);
        let hold = rng.exp1() / rate;
        f.height += hold;
        f.total_length += blocks as f64 * hold;
        f.external_length += singletons as f64 * hold;
        if tagged {
            f.random_external_branch += hold;
        }
        let k = rates.participants(blocks, rng.uniform() * rate);
        // Hypergeometric count of singletons among the k merging blocks.
        let mut merged_singletons = 0;
        let (mut pool, mut pool_singletons) = (blocks, singletons);
        for _ in 0..k {
            if rng.uniform() * (pool as f64) < pool_singletons as f64 {
                merged_singletons += 1;
                pool_singletons -= 1;
            }
            pool -= 1;
        }
        if tagged && merged_singletons > 0 && rng.uniform() * (singletons as f64) < merged_singletons as f64 {
            tagged = false;
        }
        singletons -= merged_singletons;
        blocks -= k - 1;
        f.collisions += 1;
        events += 1;
        record(BlockState { time: f.height, blocks });
    }
    (f, false)
}

/// `E(l_i)` for `i = 2..=i_max` (index `i`) from the first-step identity
/// `λ_i E l_i = 1 + Σ_j λ_{i,j} (j−1)/i · E l_j`: the tagged leaf escapes a
/// merger to `j` blocks with probability `(j−1)/i` and is then one of `j`
/// exchangeable blocks, still a leaf.
pub fn mean_external_branch_lengths(table: &RateTable) -> Result<Vec<f64>> {
    if table.kind() != TableKind::Rates {
        return Err(invalid("external branch recursion needs a rates table"));
    }
    let n = table.i_max();
    let mut el = vec![0.0; n + 1];
    for i in 2..=n {
        let row = table.row(i)?;
        let mut acc = 1.0;
        for j in 2..i {
            acc += row[j - 1] * (j as f64 - 1.0) / i as f64 * el[j];
        }
        el[i] = acc / table.total(i)?;
    }
    Ok(el)
}

/// Discrete-time path.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct XiPath {
    pub trajectory: Vec<BlockState>,
    pub steps: usize,
    /// Steps in which at least one merger happened.
    pub collisions: usize,
    pub truncated: bool,
}

/// Runs the discrete chain with one-step law `P_{i,·}` until one block remains.
pub fn simulate_xi(matrix: &RateTable, n0: usize, rng: &mut RngStream) -> Result<XiPath> {
    if matrix.kind() != TableKind::Probabilities {
        return Err(invalid("simulate_xi needs a probabilities table"));
    }
    if n0 > matrix.i_max() {
        return Err(Error::OutOfTable { state: n0, i_max: matrix.i_max() });
    }
    if n0 == 0 {
        return Err(invalid("n0 must be >= 1"));
    }
    let mut blocks = n0;
    let mut trajectory = vec![BlockState { time: 0.0, blocks }];
    let (mut steps, mut collisions) = (0, 0);
    while blocks > 1 {
        if steps == MAX_EVENTS {
            return Ok(XiPath { trajectory, steps, collisions, truncated: true });
        }
        let row = matrix.row(blocks)?;
        let u = rng.uniform() * row.iter().sum::<f64>();
        let mut acc = 0.0;
        let mut next = blocks;
        for (k, p) in row.iter().enumerate() {
            acc += p;
            if acc > u {
                next = k + 1;
                break;
            }
        }
        if next < blocks {
            collisions += 1;
        }
        blocks = next;
        steps += 1;
        trajectory.push(BlockState { time: steps as f64, blocks });
    }
    Ok(XiPath { trajectory, steps, collisions, truncated: false })
}

/// Coalescent whose functionals are summarized against their large-`i`
/// orders of magnitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ScalingFamily {
    Kingman,
    Bs,
    /// beta(2−α, α−β) with `α ∈ (1, 2)`.
    Beta { alpha: f64, beta: f64 },
}

impl ScalingFamily {
    pub fn name(&self) -> String {
        match self {
            ScalingFamily::Kingman => "kingman".into(),
            ScalingFamily::Bs => "bs".into(),
            ScalingFamily::Beta { alpha, beta } => format!("beta({alpha};{beta})"),
        }
    }

    fn params(&self) -> Result<Params> {
        match *self {
            ScalingFamily::Kingman => Params::new(3.0, 0.0),
            ScalingFamily::Bs => Params::new(1.0, 0.0),
            ScalingFamily::Beta { alpha, beta } => {
                if !(alpha > 1.0 && alpha < 2.0) {
                    return Err(invalid(format!("beta family needs 1 < alpha < 2, got {alpha}")));
                }
                Params::new(alpha, beta)
            }
        }
    }

    /// Leading-order expression for `functional` at size `i`, where one is known.
    pub fn reference(&self, functional: Functional, i: usize) -> Option<f64> {
        let x = i as f64;
        match (self, functional) {
            (ScalingFamily::Kingman, Functional::Height) => Some(2.0 * (1.0 - 1.0 / x)),
            (ScalingFamily::Kingman, Functional::TotalLength) => Some(2.0 * x.ln()),
            (ScalingFamily::Kingman, Functional::ExternalLength) => Some(2.0),
            (ScalingFamily::Kingman, Functional::Collisions) => Some(x - 1.0),
            (ScalingFamily::Kingman, Functional::ExternalBranch) => Some(1.0 / x),
            (ScalingFamily::Bs, Functional::Height) => Some(x.ln().ln()),
            (ScalingFamily::Bs, Functional::TotalLength | Functional::Collisions) => Some(x / x.ln()),
            (ScalingFamily::Bs, Functional::ExternalBranch) => Some(1.0 / x.ln()),
            (ScalingFamily::Beta { alpha, .. }, Functional::TotalLength | Functional::ExternalLength) => {
                Some(x.powf(2.0 - alpha))
            }
            (ScalingFamily::Beta { alpha, .. }, Functional::ExternalBranch) => Some(x.powf(1.0 - alpha)),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Functional {
    Height,
    TotalLength,
    ExternalLength,
    Collisions,
    ExternalBranch,
}

impl Functional {
    pub const ALL: [Functional; 5] = [
        Functional::Height,
        Functional::TotalLength,
        Functional::ExternalLength,
        Functional::Collisions,
        Functional::ExternalBranch,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Functional::Height => "height",
            Functional::TotalLength => "total_length",
            Functional::ExternalLength => "external_length",
            Functional::Collisions => "collisions",
            Functional::ExternalBranch => "external_branch",
        }
    }

    fn of(self, f: &TreeFunctionals) -> f64 {
        match self {
            Functional::Height => f.height,
            Functional::TotalLength => f.total_length,
            Functional::ExternalLength => f.external_length,
            Functional::Collisions => f.collisions as f64,
            Functional::ExternalBranch => f.random_external_branch,
        }
    }
}

/// One row of a scaling report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingRow {
    pub family: String,
    pub n0: usize,
    pub functional: Functional,
    pub mean: f64,
    pub stderr: f64,
    pub reference: Option<f64>,
    /// `mean / reference`.
    pub ratio: Option<f64>,
}

/// Empirical means of every functional at each size, next to the family's
/// leading-order expressions.
pub fn functional_scaling_report(
    family: ScalingFamily,
    sizes: &[usize],
    replicas: usize,
    rng: &RngStream,
) -> Result<Vec<ScalingRow>> {
    if sizes.is_empty() || sizes.windows(2).any(|w| w[0] >= w[1]) || sizes[0] < 2 {
        return Err(invalid("sizes must be increasing and >= 2"));
    }
    if replicas == 0 {
        return Err(invalid("replicas must be >= 1"));
    }
    let rates = LambdaRates::new(&family.params()?, *sizes.last().expect("non-empty"))?;
    let mut rows = Vec::new();
    for (s, &n0) in sizes.iter().enumerate() {
        let stream = rng.replica(s as u64);
        let accs = fold_replicas(
            &stream,
            replicas,
            || [MeanAccumulator::default(); 5],
            |accs, r| {
                let (f, _) = run_lambda(&rates, n0, r, |_| {});
                for (acc, func) in accs.iter_mut().zip(Functional::ALL) {
                    acc.push(func.of(&f));
                }
            },
            |a, b| a.iter_mut().zip(&b).for_each(|(x, y)| x.merge(y)),
        );
        for (acc, func) in accs.iter().zip(Functional::ALL) {
            let reference = family.reference(func, n0);
            rows.push(ScalingRow {
                family: family.name(),
                n0,
                functional: func,
                mean: acc.mean(),
                stderr: acc.stderr(),
                reference,
                ratio: reference.map(|r| acc.mean() / r),
            });
        }
    }
    Ok(rows)
}

/// CSV with header `family,n0,functional,mean,stderr,reference,ratio`.
pub fn write_scaling_csv(rows: &[ScalingRow], out: &mut impl Write) -> io::Result<()> {
    writeln!(out, "family,n0,functional,mean,stderr,reference,ratio")?;
    let opt = |v: Option<f64>| v.map(fmt_value).unwrap_or_default();
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.family,
            r.n0,
            r.functional.name(),
            fmt_value(r.mean),
            fmt_value(r.stderr),
            opt(r.reference),
            opt(r.ratio)
        )?;
    }
    Ok(())
}
