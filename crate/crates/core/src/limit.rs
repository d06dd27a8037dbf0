//! Closed forms for the large-N limits: beta Λ-coalescent rates, the
//! Poisson–Dirichlet Ξ-coalescent transition matrix, the Stirling case, and
//! leading-order coalescence probabilities.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::error::{domain, invalid, Error, Result};
use crate::fmt_value;
use crate::specfun::{ln_beta_pos, ln_binomial, ln_gamma_pos};

/// Largest sample size accepted by the exact discrete-time matrices.
pub const XI_I_MAX_LIMIT: usize = 30;
pub const XI_I_MAX_DEFAULT: usize = 20;

/// Which limiting genealogy a Pareto exponent leads to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// α ∈ [0, 1): discrete-time Poisson–Dirichlet Ξ-coalescent.
    Xi,
    /// α = 1: Bolthausen–Sznitman.
    Bs,
    /// α ∈ (1, 2): beta(2 − α, α − β) Λ-coalescent.
    Beta,
    /// α = 2: Kingman with logarithmic time scale.
    Critical,
    /// α > 2: Kingman.
    Kingman,
}

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Regime::Xi => "xi",
            Regime::Bs => "bs",
            Regime::Beta => "beta",
            Regime::Critical => "critical",
            Regime::Kingman => "kingman",
        }
    }

    fn has_kingman_rates(self) -> bool {
        matches!(self, Regime::Critical | Regime::Kingman)
    }
}

/// Pareto exponent α and size-bias exponent β.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub alpha: f64,
    pub beta: f64,
}

impl Params {
    /// Validates `α >= 0` and `β < α` when `α < 2`.
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha >= 0.0) || !alpha.is_finite() {
            return Err(invalid(format!("alpha must be finite and >= 0, got {alpha}")));
        }
        if !beta.is_finite() {
            return Err(invalid(format!("beta must be finite, got {beta}")));
        }
        if alpha < 2.0 && !(beta < alpha) {
            return Err(invalid(format!("beta < alpha required (alpha = {alpha}, beta = {beta})")));
        }
        Ok(Self { alpha, beta })
    }

    pub fn regime(&self) -> Regime {
        let a = self.alpha;
        if a < 1.0 {
            Regime::Xi
        } else if a == 1.0 {
            Regime::Bs
        } else if a < 2.0 {
            Regime::Beta
        } else if a == 2.0 {
            Regime::Critical
        } else {
            Regime::Kingman
        }
    }
}

/// Whether a table holds continuous-time rates or one-step probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TableKind {
    Rates,
    Probabilities,
}

/// Triangular table indexed by `(i, j)`.
///
/// Rates tables hold `λ_{i,j}` for `1 <= j < i`; probability tables hold
/// `P_{i,j}` for `1 <= j <= i`. Rows start at `i = 2`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateTable {
    kind: TableKind,
    i_max: usize,
    rows: Vec<Vec<f64>>,
    totals: Vec<f64>,
}

impl RateTable {
    fn from_rows(kind: TableKind, i_max: usize, mut row: impl FnMut(usize) -> Result<Vec<f64>>) -> Result<Self> {
        if i_max < 2 {
            return Err(invalid("i_max must be >= 2"));
        }
        let mut rows = vec![Vec::new(), Vec::new()];
        let mut totals = vec![0.0, 0.0];
        for i in 2..=i_max {
            let r = row(i)?;
            totals.push(r.iter().sum());
            rows.push(r);
        }
        Ok(Self { kind, i_max, rows, totals })
    }

    /// Λ-coalescent rates for the regime of `params`: beta/Bolthausen–Sznitman
    /// closed forms, or Kingman for `α >= 2`.
    pub fn lambda(params: &Params, i_max: usize) -> Result<Self> {
        match params.regime() {
            Regime::Xi => Err(domain("alpha < 1 has no Lambda-coalescent limit; use xi_transition_matrix")),
            r if r.has_kingman_rates() => Self::kingman(i_max),
            _ => Self::from_rows(TableKind::Rates, i_max, |i| Ok(lambda_row_unchecked(params, i))),
        }
    }

    pub fn kingman(i_max: usize) -> Result<Self> {
        Self::from_rows(TableKind::Rates, i_max, |i| Ok((1..i).map(|j| kingman_rate(i, j)).collect()))
    }

    /// Rates or probabilities by regime: the Ξ matrix for `α < 1`
    /// (the Stirling matrix at `α = 0`), Λ rates otherwise.
    pub fn for_params(params: &Params, i_max: usize) -> Result<Self> {
        match params.regime() {
            Regime::Xi if params.alpha == 0.0 => stirling_case_matrix(params.beta, i_max),
            Regime::Xi => xi_transition_matrix(params, i_max),
            _ => Self::lambda(params, i_max),
        }
    }

    pub fn kind(&self) -> TableKind {
        self.kind
    }

    pub fn i_max(&self) -> usize {
        self.i_max
    }

    /// Row `i`, indexed by `j − 1`.
    pub fn row(&self, i: usize) -> Result<&[f64]> {
        if i < 2 || i > self.i_max {
            return Err(Error::OutOfTable { state: i, i_max: self.i_max });
        }
        Ok(&self.rows[i])
    }

    /// Entry `(i, j)`; zero where the table has no entry.
    pub fn get(&self, i: usize, j: usize) -> Result<f64> {
        let row = self.row(i)?;
        Ok(if j >= 1 { row.get(j - 1).copied().unwrap_or(0.0) } else { 0.0 })
    }

    /// Row sum: `λ_i` for rates, 1 for probabilities.
    pub fn total(&self, i: usize) -> Result<f64> {
        self.row(i)?;
        Ok(self.totals[i])
    }

    /// CSV with header `i,j,value`.
    pub fn write_csv(&self, out: &mut impl Write) -> io::Result<()> {
        writeln!(out, "i,j,value")?;
        for i in 2..=self.i_max {
            for (k, v) in self.rows[i].iter().enumerate() {
                writeln!(out, "{},{},{}", i, k + 1, fmt_value(*v))?;
            }
        }
        Ok(())
    }
}

fn require_lambda_regime(params: &Params) -> Result<Regime> {
    match params.regime() {
        Regime::Xi => Err(domain(format!(
            "alpha = {} is in the Xi regime; Lambda rates need alpha >= 1",
            params.alpha
        ))),
        r => Ok(r),
    }
}

/// `λ_{i,j} = C(i, j−1) B(i−j+1−α, α−β+j−1) / B(2−α, α−β)` for the
/// beta(2−α, α−β) coalescent, `α ∈ [1, 2)`.
pub fn lambda_rate(params: &Params, i: usize, j: usize) -> Result<f64> {
    if !matches!(params.regime(), Regime::Beta | Regime::Bs) {
        return Err(domain(format!("lambda_rate needs 1 <= alpha < 2, got {}", params.alpha)));
    }
    if i < 2 || j < 1 || j >= i {
        return Err(invalid(format!("lambda_rate needs 1 <= j < i, got ({i}, {j})")));
    }
    let (a, b) = (params.alpha, params.beta);
    let (i, j) = (i as f64, j as f64);
    Ok((ln_binomial(i, j - 1.0) + ln_beta_pos(i - j + 1.0 - a, a - b + j - 1.0) - ln_beta_pos(2.0 - a, a - b)).exp())
}

/// `λ_{i,j}` of the Kingman coalescent.
pub fn kingman_rate(i: usize, j: usize) -> f64 {
    if i >= 2 && j + 1 == i {
        (i * (i - 1) / 2) as f64
    } else {
        0.0
    }
}

/// Rates `λ_{i,k}` of a merger of `k = 2..=i` blocks, indexed by `k − 2`,
/// for the beta(2−α, α−β) coalescent. Built from `k = 2` by the ratio
/// `λ_{i,k+1}/λ_{i,k} = (i−k)(k−α) / ((k+1)(i−k−1+α−β))`.
pub(crate) fn merger_sizes_unchecked(params: &Params, i: usize) -> Vec<f64> {
    let (a, b) = (params.alpha, params.beta);
    let fi = i as f64;
    let mut t = (ln_binomial(fi, 2.0) + ln_beta_pos(2.0 - a, fi - 2.0 + a - b) - ln_beta_pos(2.0 - a, a - b)).exp();
    let mut out = Vec::with_capacity(i - 1);
    for k in 2..=i {
        out.push(t);
        if k < i {
            let kf = k as f64;
            t *= (fi - kf) * (kf - a) / ((kf + 1.0) * (fi - kf - 1.0 + a - b));
        }
    }
    out
}

/// Row `λ_{i,1..i−1}` indexed by `j − 1`.
fn lambda_row_unchecked(params: &Params, i: usize) -> Vec<f64> {
    let mut by_size = merger_sizes_unchecked(params, i);
    // A k-merger leads to j = i − k + 1 blocks.
    by_size.reverse();
    by_size
}

fn lambda_row(params: &Params, i: usize) -> Result<Vec<f64>> {
    if i < 2 {
        return Err(invalid(format!("state must be >= 2, got {i}")));
    }
    Ok(if require_lambda_regime(params)?.has_kingman_rates() {
        (1..i).map(|j| kingman_rate(i, j)).collect()
    } else {
        lambda_row_unchecked(params, i)
    })
}

/// Total merger rate `λ_i = Σ_j λ_{i,j}`.
pub fn total_rate(params: &Params, i: usize) -> Result<f64> {
    Ok(lambda_row(params, i)?.iter().sum())
}

/// Block-loss rate `r(i) = Σ_j (i − j) λ_{i,j}`.
pub fn block_loss_rate(params: &Params, i: usize) -> Result<f64> {
    Ok(lambda_row(params, i)?
        .iter()
        .enumerate()
        .map(|(k, v)| (i - k - 1) as f64 * v)
        .sum())
}

/// Mean number of blocks taking part in the first merger, `1 + r(i)/λ_i`.
pub fn mean_first_collision_size(params: &Params, i: usize) -> Result<f64> {
    let row = lambda_row(params, i)?;
    let total: f64 = row.iter().sum();
    let loss: f64 = row.iter().enumerate().map(|(k, v)| (i - k - 1) as f64 * v).sum();
    Ok(1.0 + loss / total)
}

/// Partial sums `Σ_{i=2}^{m} 1/r(i)` for `m = 2..=max_m`; bounded growth
/// means the coalescent comes down from infinity.
pub fn comes_down_diagnostic(params: &Params, max_m: usize) -> Result<Vec<f64>> {
    if max_m < 2 {
        return Err(invalid("truncation M must be >= 2"));
    }
    let mut acc = 0.0;
    (2..=max_m)
        .map(|i| {
            acc += 1.0 / block_loss_rate(params, i)?;
            Ok(acc)
        })
        .collect()
}

fn require_xi(params: &Params) -> Result<()> {
    if !(params.alpha > 0.0 && params.alpha < 1.0) {
        return Err(domain(format!("Xi-coalescent needs 0 < alpha < 1, got {}", params.alpha)));
    }
    Ok(())
}

fn check_matrix_size(i_max: usize) -> Result<()> {
    if i_max > XI_I_MAX_LIMIT {
        return Err(Error::SizeLimit(format!("i_max = {i_max} exceeds {XI_I_MAX_LIMIT}")));
    }
    if i_max < 2 {
        return Err(invalid("i_max must be >= 2"));
    }
    Ok(())
}

/// `ln` of the part of `φ_j` that depends only on `(i, j)`:
/// `(j−1) ln α + ln Γ(1−β) − ln Γ(1−β/α) + ln Γ(j−β/α) − ln Γ(i−β)`.
fn ln_xi_prefactor(params: &Params, i: usize, j: usize) -> f64 {
    let (a, b) = (params.alpha, params.beta);
    let r = b / a;
    (j as f64 - 1.0) * a.ln() + ln_gamma_pos(1.0 - b) - ln_gamma_pos(1.0 - r) + ln_gamma_pos(j as f64 - r)
        - ln_gamma_pos(i as f64 - b)
}

/// Probability `φ_j(i₁,…,i_j)` of one given `(i₁,…,i_j)`-merger in the
/// Poisson–Dirichlet(α, −β) Ξ-coalescent.
pub fn xi_merger_prob(params: &Params, composition: &[usize]) -> Result<f64> {
    require_xi(params)?;
    if composition.is_empty() || composition.contains(&0) {
        return Err(invalid("composition parts must be >= 1"));
    }
    let a = params.alpha;
    let i: usize = composition.iter().sum();
    let ln_parts: f64 = composition
        .iter()
        .map(|&m| ln_gamma_pos(m as f64 - a) - ln_gamma_pos(1.0 - a))
        .sum();
    Ok((ln_xi_prefactor(params, i, composition.len()) + ln_parts).exp())
}

/// Exact one-step matrix `P_{i,j}` of the Ξ-coalescent for `i <= i_max`.
///
/// `P_{i,j} = (i!/j!) e^{prefactor} [t^i] W(t)^j` with
/// `W(t) = Σ_{m>=1} Γ(m−α)/(Γ(1−α) m!) t^m`, which sums the product over all
/// compositions of `i` into `j` parts.
pub fn xi_transition_matrix(params: &Params, i_max: usize) -> Result<RateTable> {
    require_xi(params)?;
    check_matrix_size(i_max)?;
    let a = params.alpha;
    let mut w = vec![0.0; i_max + 1];
    w[1] = 1.0;
    for m in 1..i_max {
        w[m + 1] = w[m] * (m as f64 - a) / (m as f64 + 1.0);
    }
    // powers[j][i] = [t^i] W(t)^j
    let mut powers = vec![vec![0.0; i_max + 1]; i_max + 1];
    powers[1] = w.clone();
    for j in 2..=i_max {
        for i in j..=i_max {
            powers[j][i] = (1..=i - j + 1).map(|m| w[m] * powers[j - 1][i - m]).sum();
        }
    }
    RateTable::from_rows(TableKind::Probabilities, i_max, |i| {
        Ok((1..=i)
            .map(|j| {
                let ln_fact = ln_gamma_pos(i as f64 + 1.0) - ln_gamma_pos(j as f64 + 1.0);
                (ln_fact + ln_xi_prefactor(params, i, j) + powers[j][i].ln()).exp()
            })
            .collect())
    })
}

/// Unsigned Stirling numbers of the first kind `s_{i,j}`, `0 <= j <= i <= n`.
pub fn stirling_first_unsigned(n: usize) -> Vec<Vec<f64>> {
    let mut s = vec![vec![0.0; n + 1]; n + 1];
    s[0][0] = 1.0;
    for i in 0..n {
        for j in 1..=i + 1 {
            s[i + 1][j] = s[i][j - 1] + i as f64 * s[i][j];
        }
    }
    s
}

/// The `α = 0` limit: `P_{i,j} = (−β)^j Γ(−β)/Γ(i−β) s_{i,j}` for `β < 0`.
pub fn stirling_case_matrix(beta: f64, i_max: usize) -> Result<RateTable> {
    if !(beta < 0.0) || !beta.is_finite() {
        return Err(domain(format!("Stirling case needs beta < 0, got {beta}")));
    }
    check_matrix_size(i_max)?;
    let s = stirling_first_unsigned(i_max);
    let x = -beta;
    RateTable::from_rows(TableKind::Probabilities, i_max, |i| {
        let base = ln_gamma_pos(x) - ln_gamma_pos(i as f64 + x);
        Ok((1..=i)
            .map(|j| (j as f64 * x.ln() + base + s[i][j].ln()).exp())
            .collect())
    })
}

/// Leading-order `c_N` in the regime of `params`.
pub fn c_n_asymptotic(params: &Params, n: u64) -> Result<(f64, Regime)> {
    if n < 3 {
        return Err(invalid("c_N asymptotics need N >= 3"));
    }
    let (a, b) = (params.alpha, params.beta);
    let nf = n as f64;
    let regime = params.regime();
    let value = match regime {
        Regime::Xi => (1.0 - a) / (1.0 - b),
        Regime::Bs => 1.0 / nf.ln(),
        Regime::Beta => {
            let mu = a / (a - 1.0);
            a * mu.powf(-a) * ln_beta_pos(2.0 - a, a - b).exp() * nf.powf(-(a - 1.0))
        }
        Regime::Critical => 0.5 * nf.ln() / nf,
        Regime::Kingman => {
            let mu = a / (a - 1.0);
            let rho = a / (a - 2.0);
            rho / (mu * mu) / nf
        }
    };
    Ok((value, regime))
}
