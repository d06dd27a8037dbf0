//! Command-line front end.
//!
//! Every run is described by an [`ExperimentConfig`], read from an optional
//! JSON document and overridden field by field by command-line flags.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::estimate::{Warning, WeightedEstimate};
use crate::finite::{estimate_c_n, estimate_merger_table, Family, PartitionModel};
use crate::forward::{pressure_speed, speed_estimate, write_forward_csv, ForwardConfig, ForwardModel};
use crate::limit::{Params, RateTable, Regime, XI_I_MAX_DEFAULT, XI_I_MAX_LIMIT};
use crate::regression::{geometric_grid, scaling_fit};
use crate::samplers::{standardized_sum_stats, RngStream, SUMMARY_PROBS};
use crate::sim::{
    functional_scaling_report, simulate_lambda, simulate_xi, write_scaling_csv, write_trajectory_csv, LambdaRates,
    ScalingFamily,
};
use crate::{fmt_value, estimate::MeanAccumulator, mc::fold_replicas};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Exit status for rejected configurations.
pub const EXIT_INVALID: i32 = 2;
/// Exit status for failures after validation.
pub const EXIT_FAILURE: i32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum CommandName {
    Rates,
    XiMatrix,
    FiniteMc,
    ScalingFit,
    Simulate,
    Forward,
    Gclt,
}

impl CommandName {
    pub fn name(self) -> &'static str {
        match self {
            CommandName::Rates => "rates",
            CommandName::XiMatrix => "xi-matrix",
            CommandName::FiniteMc => "finite-mc",
            CommandName::ScalingFit => "scaling-fit",
            CommandName::Simulate => "simulate",
            CommandName::Forward => "forward",
            CommandName::Gclt => "gclt",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
}

/// One run of the harness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: CommandName,
    #[serde(default)]
    pub params: ModelParams,
    #[serde(rename = "N", default, skip_serializing_if = "Option::is_none")]
    pub n: Option<u64>,
    #[serde(rename = "N_grid", default, skip_serializing_if = "Vec::is_empty")]
    pub n_grid: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub i_max: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n0: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replicas: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_path: Option<String>,
    #[serde(default)]
    pub trajectory: bool,
}

impl ExperimentConfig {
    pub fn new(command: CommandName) -> Self {
        Self {
            command,
            params: ModelParams::default(),
            n: None,
            n_grid: Vec::new(),
            i_max: None,
            n0: None,
            generations: None,
            replicas: None,
            seed: 0,
            output_path: None,
            trajectory: false,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| invalid(format!("config: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    fn alpha(&self) -> Result<f64> {
        self.params.alpha.ok_or_else(|| invalid(format!("{} needs --alpha", self.command.name())))
    }

    fn beta(&self) -> f64 {
        self.params.beta.unwrap_or(0.0)
    }

    fn replicas(&self, default: usize) -> usize {
        self.replicas.unwrap_or(default)
    }

    /// `N_grid` when given, else the single `N`.
    fn sizes(&self, default: Option<u64>) -> Result<Vec<u64>> {
        if !self.n_grid.is_empty() {
            return Ok(self.n_grid.clone());
        }
        self.n
            .or(default)
            .map(|n| vec![n])
            .ok_or_else(|| invalid(format!("{} needs --N or --N-grid", self.command.name())))
    }

    /// Compact `key=value` list for the provenance line.
    pub fn params_summary(&self) -> String {
        let mut parts = vec![format!("command={}", self.command.name())];
        let mut push = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                parts.push(format!("{k}={v}"));
            }
        };
        push("alpha", self.params.alpha.map(|v| v.to_string()));
        push("beta", self.params.beta.map(|v| v.to_string()));
        push("theta", self.params.theta.map(|v| v.to_string()));
        push("N", self.n.map(|v| v.to_string()));
        push(
            "N_grid",
            (!self.n_grid.is_empty())
                .then(|| self.n_grid.iter().map(u64::to_string).collect::<Vec<_>>().join(" ")),
        );
        push("i_max", self.i_max.map(|v| v.to_string()));
        push("n0", self.n0.map(|v| v.to_string()));
        push("generations", self.generations.map(|v| v.to_string()));
        push("replicas", self.replicas.map(|v| v.to_string()));
        push("trajectory", self.trajectory.then(|| "true".to_string()));
        parts.join(";")
    }

    pub fn provenance(&self) -> String {
        format!("# seed={}, params={}, version={}", self.seed, self.params_summary(), VERSION)
    }

    /// Parameter checks for the chosen command; runs before any sampling.
    pub fn validate(&self) -> Result<()> {
        if self.replicas == Some(0) {
            return Err(invalid("replicas must be >= 1"));
        }
        match self.command {
            CommandName::Rates => {
                let p = Params::new(self.alpha()?, self.beta())?;
                let i_max = self.i_max.unwrap_or(default_i_max(&p));
                if p.regime() == Regime::Xi && i_max > XI_I_MAX_LIMIT {
                    return Err(invalid(format!("i_max must be <= {XI_I_MAX_LIMIT} for alpha < 1")));
                }
                Ok(())
            }
            CommandName::XiMatrix => {
                let p = Params::new(self.alpha()?, self.beta())?;
                if p.regime() != Regime::Xi {
                    return Err(invalid("xi-matrix needs 0 <= alpha < 1"));
                }
                if self.i_max.unwrap_or(XI_I_MAX_DEFAULT) > XI_I_MAX_LIMIT {
                    return Err(invalid(format!("i_max must be <= {XI_I_MAX_LIMIT}")));
                }
                Ok(())
            }
            CommandName::FiniteMc => {
                let family = self.family()?;
                for n in self.sizes(None)? {
                    PartitionModel::new(family.clone(), n as usize, self.beta())?;
                }
                if let Some(i) = self.i_max {
                    if i < 2 {
                        return Err(invalid("i_max must be >= 2"));
                    }
                }
                Ok(())
            }
            CommandName::ScalingFit => {
                Params::new(self.alpha()?, self.beta())?;
                crate::regression::check_geometric_grid(&self.scaling_grid())
            }
            CommandName::Simulate => {
                let p = Params::new(self.alpha()?, self.beta())?;
                let sizes = self.simulate_sizes();
                if sizes.iter().any(|&n| n < 2) {
                    return Err(invalid("n0 must be >= 2"));
                }
                if p.regime() == Regime::Xi {
                    if sizes.iter().any(|&n| n > XI_I_MAX_LIMIT) {
                        return Err(invalid(format!("n0 must be <= {XI_I_MAX_LIMIT} for alpha < 1")));
                    }
                } else {
                    scaling_family(&p)?;
                }
                Ok(())
            }
            CommandName::Forward => {
                let alpha = self.params.alpha.unwrap_or(1.0);
                let generations = self.generations.unwrap_or(100);
                for n in self.sizes(Some(100))? {
                    ForwardConfig::new(n as usize, alpha, generations)?;
                    if self.replicas(1) > 1 {
                        if generations < 100 {
                            return Err(invalid("speed estimates need generations >= 100"));
                        }
                        pressure_speed(alpha, n)?;
                    }
                }
                Ok(())
            }
            CommandName::Gclt => {
                let alpha = self.alpha()?;
                if self.replicas(10_000) < 1000 {
                    return Err(invalid("gclt needs replicas >= 1000"));
                }
                for n in self.sizes(None)? {
                    crate::samplers::gclt_constants(alpha, n)?;
                }
                Ok(())
            }
        }
    }

    fn family(&self) -> Result<Family> {
        match (self.params.alpha, self.params.theta) {
            (Some(alpha), None) => Ok(Family::Pareto { alpha }),
            (None, Some(theta)) => Ok(Family::Gamma { theta }),
            (Some(_), Some(_)) => Err(invalid("give either --alpha (Pareto) or --theta (gamma), not both")),
            (None, None) => Err(invalid("finite-mc needs --alpha or --theta")),
        }
    }

    fn scaling_grid(&self) -> Vec<u64> {
        if self.n_grid.is_empty() {
            geometric_grid(2.0, 4.0, 5)
        } else {
            self.n_grid.clone()
        }
    }

    fn simulate_sizes(&self) -> Vec<usize> {
        if self.n_grid.is_empty() {
            vec![self.n0.or(self.n.map(|n| n as usize)).unwrap_or(10)]
        } else {
            self.n_grid.iter().map(|&n| n as usize).collect()
        }
    }
}

fn default_i_max(p: &Params) -> usize {
    if p.regime() == Regime::Xi {
        XI_I_MAX_DEFAULT
    } else {
        10
    }
}

fn scaling_family(p: &Params) -> Result<ScalingFamily> {
    match p.regime() {
        Regime::Critical | Regime::Kingman => Ok(ScalingFamily::Kingman),
        Regime::Bs if p.beta == 0.0 => Ok(ScalingFamily::Bs),
        Regime::Bs => Err(invalid("simulate at alpha = 1 supports beta = 0 only")),
        Regime::Beta => Ok(ScalingFamily::Beta { alpha: p.alpha, beta: p.beta }),
        Regime::Xi => Err(invalid("alpha < 1 has no Lambda-coalescent limit")),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
}

#[derive(Debug, Parser)]
#[command(name = "pareto-coalescent", version, about = "Coalescents of Pareto partitions and branching with selection")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Limit rates (Λ regimes) or transition probabilities (Ξ regime).
    Rates(Opts),
    /// Ξ-coalescent transition matrix for 0 <= α < 1.
    XiMatrix(Opts),
    /// Monte Carlo c_N or P_{i,j} for finite Pareto or gamma partitions.
    FiniteMc(Opts),
    /// Weighted fit of ln c_N against the regime's predictor.
    ScalingFit(Opts),
    /// Block-counting coalescent simulations.
    Simulate(Opts),
    /// Forward model trajectories or speed estimates.
    Forward(Opts),
    /// Standardized Pareto sums.
    Gclt(Opts),
}

impl Cmd {
    fn split(&self) -> (CommandName, &Opts) {
        match self {
            Cmd::Rates(o) => (CommandName::Rates, o),
            Cmd::XiMatrix(o) => (CommandName::XiMatrix, o),
            Cmd::FiniteMc(o) => (CommandName::FiniteMc, o),
            Cmd::ScalingFit(o) => (CommandName::ScalingFit, o),
            Cmd::Simulate(o) => (CommandName::Simulate, o),
            Cmd::Forward(o) => (CommandName::Forward, o),
            Cmd::Gclt(o) => (CommandName::Gclt, o),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct Opts {
    /// JSON experiment config; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long = "N")]
    pub n: Option<u64>,
    /// Comma-separated population sizes.
    #[arg(long = "N-grid", value_delimiter = ',')]
    pub n_grid: Option<Vec<u64>>,
    #[arg(long)]
    pub i_max: Option<usize>,
    /// Initial block count for simulate.
    #[arg(long)]
    pub n0: Option<usize>,
    #[arg(long)]
    pub generations: Option<usize>,
    #[arg(long)]
    pub replicas: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Emit one sample path instead of a summary.
    #[arg(long)]
    pub trajectory: bool,
}

/// Merges a JSON config (if any) with the flags of `opts`.
pub fn resolve_config(command: CommandName, opts: &Opts) -> Result<ExperimentConfig> {
    let mut cfg = match &opts.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
            let mut c = ExperimentConfig::from_json(&text)?;
            c.command = command;
            c
        }
        None => ExperimentConfig::new(command),
    };
    macro_rules! set {
        ($field:expr, $flag:expr) => {
            if let Some(v) = $flag.clone() {
                $field = Some(v);
            }
        };
    }
    set!(cfg.params.alpha, opts.alpha);
    set!(cfg.params.beta, opts.beta);
    set!(cfg.params.theta, opts.theta);
    set!(cfg.n, opts.n);
    set!(cfg.i_max, opts.i_max);
    set!(cfg.n0, opts.n0);
    set!(cfg.generations, opts.generations);
    set!(cfg.replicas, opts.replicas);
    if let Some(grid) = &opts.n_grid {
        cfg.n_grid = grid.clone();
    }
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &opts.out {
        cfg.output_path = Some(out.display().to_string());
    }
    cfg.trajectory |= opts.trajectory;
    Ok(cfg)
}

/// CSV body and non-fatal warnings of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub body: String,
    pub warnings: Vec<String>,
}

fn warnings_field(e: &WeightedEstimate) -> String {
    e.warnings
        .iter()
        .map(|w| match w {
            Warning::WeightDegeneracy => "weight_degeneracy",
            Warning::VarianceMayBeInfinite => "variance_may_be_infinite",
            Warning::Cancellation => "cancellation",
            Warning::Truncated => "truncated",
        })
        .collect::<Vec<_>>()
        .join(";")
}

fn csv<F: FnOnce(&mut Vec<u8>) -> std::io::Result<()>>(f: F) -> String {
    let mut buf = Vec::new();
    f(&mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("utf-8 csv")
}

/// Runs a validated config and returns its CSV body.
pub fn execute(cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let rng = RngStream::new(cfg.seed, 0);
    let mut warnings = Vec::new();
    let body = match cfg.command {
        CommandName::Rates | CommandName::XiMatrix => {
            let p = Params::new(cfg.alpha()?, cfg.beta())?;
            let table = RateTable::for_params(&p, cfg.i_max.unwrap_or(default_i_max(&p)))?;
            csv(|b| table.write_csv(b))
        }
        CommandName::FiniteMc => {
            let family = cfg.family()?;
            let replicas = cfg.replicas(10_000);
            let mut out = String::new();
            match cfg.i_max {
                None => out.push_str("N,c_N,stderr,ess,warnings\n"),
                Some(_) => out.push_str("N,i,j,value,stderr,ess,warnings\n"),
            }
            for (s, n) in cfg.sizes(None)?.into_iter().enumerate() {
                let model = PartitionModel::new(family.clone(), n as usize, cfg.beta())?;
                let stream = rng.replica(s as u64);
                let mut row = |prefix: String, e: &WeightedEstimate| {
                    if !e.warnings.is_empty() {
                        warnings.push(format!("N={n} {prefix}: {}", warnings_field(e)));
                    }
                    let _ = writeln!(
                        out,
                        "{n},{prefix}{},{},{},{}",
                        fmt_value(e.value),
                        fmt_value(e.stderr),
                        fmt_value(e.ess),
                        warnings_field(e)
                    );
                };
                match cfg.i_max {
                    None => row(String::new(), &estimate_c_n(&model, replicas, &stream)?),
                    Some(i_max) => {
                        let table = estimate_merger_table(&model, i_max, replicas, &stream)?;
                        for i in 2..=i_max {
                            for (k, e) in table.row(i).expect("in range").iter().enumerate() {
                                row(format!("{i},{},", k + 1), e);
                            }
                        }
                    }
                }
            }
            out
        }
        CommandName::ScalingFit => {
            let fit = scaling_fit(cfg.alpha()?, cfg.beta(), &cfg.scaling_grid(), cfg.replicas(10_000), &rng)?;
            if fit.noisy {
                warnings.push("Monte Carlo noise dominates: slope CI is wider than |slope|".into());
            }
            let mut out = String::from("N,predictor,c_N,stderr,asymptotic,fitted\n");
            for p in &fit.points {
                let fitted = (fit.fit.intercept + fit.fit.slope * p.predictor).exp();
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    p.n,
                    fmt_value(p.predictor),
                    fmt_value(p.c_n.value),
                    fmt_value(p.c_n.stderr),
                    fmt_value(p.asymptotic),
                    fmt_value(fitted)
                );
            }
            let _ = writeln!(
                out,
                "# fit regime={}, predictor={}, slope={}, slope_ci=[{} {}], prefactor={}, prefactor_ci=[{} {}], r2={}, noisy={}",
                fit.regime.name(),
                fit.predictor.name(),
                fmt_value(fit.fit.slope),
                fmt_value(fit.slope_ci.0),
                fmt_value(fit.slope_ci.1),
                fmt_value(fit.prefactor),
                fmt_value(fit.prefactor_ci.0),
                fmt_value(fit.prefactor_ci.1),
                fmt_value(fit.fit.r_squared),
                fit.noisy
            );
            out
        }
        CommandName::Simulate => simulate(cfg, &rng, &mut warnings)?,
        CommandName::Forward => {
            let alpha = cfg.params.alpha.unwrap_or(1.0);
            let generations = cfg.generations.unwrap_or(100);
            let replicas = cfg.replicas(1);
            let sizes = cfg.sizes(Some(100))?;
            if replicas == 1 {
                let mut out = String::new();
                for (s, n) in sizes.into_iter().enumerate() {
                    let fc = ForwardConfig::new(n as usize, alpha, generations)?;
                    let traj = ForwardModel::new(&fc)?.run(&mut rng.replica(s as u64));
                    out.push_str(&csv(|b| write_forward_csv(&traj, b)));
                }
                out
            } else {
                let mut out = String::from("N,alpha,generations,replicas,speed,stderr,lnlnN_over_alpha,pressure_speed\n");
                for (s, n) in sizes.into_iter().enumerate() {
                    let fc = ForwardConfig::new(n as usize, alpha, generations)?;
                    let e = speed_estimate(&fc, replicas, &rng.replica(s as u64))?;
                    let _ = writeln!(
                        out,
                        "{n},{alpha},{generations},{replicas},{},{},{},{}",
                        fmt_value(e.value),
                        fmt_value(e.stderr),
                        fmt_value((n as f64).ln().ln() / alpha),
                        fmt_value(pressure_speed(alpha, n)?)
                    );
                }
                out
            }
        }
        CommandName::Gclt => {
            let alpha = cfg.alpha()?;
            let mut out = String::from("alpha,N,replicas,regime,a_n,b_n,mean,stderr_mean,variance");
            for p in SUMMARY_PROBS {
                let _ = write!(out, ",q{:02}", (p * 100.0).round() as u32);
            }
            out.push_str(",raw_median\n");
            for (s, n) in cfg.sizes(None)?.into_iter().enumerate() {
                let st = standardized_sum_stats(alpha, n, cfg.replicas(10_000), &rng.replica(s as u64))?;
                let regime = serde_json::to_value(st.constants.regime).expect("regime serializes");
                let _ = write!(
                    out,
                    "{alpha},{n},{},{},{},{},{},{},{}",
                    st.replicas,
                    regime.as_str().unwrap_or_default(),
                    fmt_value(st.constants.a_n),
                    fmt_value(st.constants.b_n),
                    fmt_value(st.mean),
                    fmt_value(st.stderr_mean),
                    fmt_value(st.variance)
                );
                for (_, q) in &st.quantiles {
                    let _ = write!(out, ",{}", fmt_value(*q));
                }
                let _ = writeln!(out, ",{}", fmt_value(st.raw_median));
            }
            out
        }
    };
    Ok(RunOutput { body, warnings })
}

fn simulate(cfg: &ExperimentConfig, rng: &RngStream, warnings: &mut Vec<String>) -> Result<String> {
    let p = Params::new(cfg.alpha()?, cfg.beta())?;
    let sizes = cfg.simulate_sizes();
    let largest = *sizes.iter().max().expect("non-empty");
    let replicas = cfg.replicas(1000);
    if p.regime() == Regime::Xi {
        let matrix = RateTable::for_params(&p, largest)?;
        if cfg.trajectory {
            let path = simulate_xi(&matrix, largest, &mut rng.clone())?;
            return Ok(csv(|b| write_trajectory_csv(&path.trajectory, b)));
        }
        let mut out = String::from("n0,quantity,mean,stderr\n");
        for (s, &n0) in sizes.iter().enumerate() {
            let (steps, collisions) = fold_replicas(
                &rng.replica(s as u64),
                replicas,
                || (MeanAccumulator::default(), MeanAccumulator::default()),
                |(a, b), r| {
                    let path = simulate_xi(&matrix, n0, r).expect("validated");
                    a.push(path.steps as f64);
                    b.push(path.collisions as f64);
                },
                |x, y| {
                    x.0.merge(&y.0);
                    x.1.merge(&y.1);
                },
            );
            for (name, acc) in [("steps", steps), ("collisions", collisions)] {
                let _ = writeln!(out, "{n0},{name},{},{}", fmt_value(acc.mean()), fmt_value(acc.stderr()));
            }
        }
        return Ok(out);
    }
    let family = scaling_family(&p)?;
    if cfg.trajectory {
        let rates = LambdaRates::new(&p, largest)?;
        let path = simulate_lambda(&rates, largest, &mut rng.clone())?;
        if path.truncated {
            warnings.push("trajectory truncated at the event cap".into());
        }
        return Ok(csv(|b| write_trajectory_csv(&path.trajectory, b)));
    }
    let mut sorted = sizes.clone();
    sorted.sort_unstable();
    sorted.dedup();
    let rows = functional_scaling_report(family, &sorted, replicas, rng)?;
    Ok(csv(|b| write_scaling_csv(&rows, b)))
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidParameter(_) | Error::Domain(_) | Error::SizeLimit(_) | Error::OutOfTable { .. } => EXIT_INVALID,
        Error::Pole(_) | Error::Unbracketed(_) => EXIT_FAILURE,
    }
}

/// Parses `args` (program name first), runs the command and writes its
/// CSV to `--out` or `stdout`. Returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(stderr, "{text}");
            } else {
                let _ = write!(stdout, "{text}");
            }
            return e.exit_code();
        }
    };
    let (name, opts) = cli.command.split();
    let result = resolve_config(name, opts).and_then(|cfg| {
        cfg.validate()?;
        let out = execute(&cfg)?;
        Ok((cfg, out))
    });
    let (cfg, out) = match result {
        Ok(v) => v,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return exit_code(&e);
        }
    };
    for w in &out.warnings {
        let _ = writeln!(stderr, "warning: {w}");
    }
    let text = format!("{}\n{}", cfg.provenance(), out.body);
    let written = match &cfg.output_path {
        Some(path) => fs::write(path, text).map_err(|e| format!("{path}: {e}")),
        None => stdout.write_all(text.as_bytes()).map_err(|e| e.to_string()),
    };
    match written {
        Ok(()) => 0,
        Err(msg) => {
            let _ = writeln!(stderr, "error: {msg}");
            EXIT_FAILURE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_str(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(args.iter().copied(), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn kingman_rates() {
        let (code, out, _) = run_str(&["pc", "rates", "--alpha", "3", "--i-max", "4"]);
        assert_eq!(code, 0);
        assert!(out.starts_with("# seed=0, params=command=rates;alpha=3;i_max=4, version="));
        assert!(out.lines().any(|l| l == "3,2,3"));
    }

    #[test]
    fn xi_rates_row() {
        let (code, out, _) = run_str(&["pc", "rates", "--alpha", "0.5", "--beta", "0", "--i-max", "2"]);
        assert_eq!(code, 0);
        assert!(out.lines().any(|l| l == "2,1,0.5"), "{out}");
    }

    #[test]
    fn beta_above_alpha_rejected() {
        let (code, out, err) = run_str(&["pc", "rates", "--alpha", "1.5", "--beta", "1.6"]);
        assert_eq!(code, 2);
        assert!(out.is_empty());
        assert!(err.contains("beta < alpha required"), "{err}");
    }

    #[test]
    fn negative_beta_flag() {
        let (code, _, err) = run_str(&["pc", "rates", "--alpha", "0.5", "--beta", "-1", "--i-max", "3"]);
        assert_eq!(code, 0, "{err}");
    }

    #[test]
    fn flags_override_json() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        fs::write(&path, r#"{"command":"rates","params":{"alpha":0.5,"beta":0},"i_max":3,"seed":9}"#).unwrap();
        let opts = Opts {
            config: Some(path),
            alpha: Some(0.3),
            beta: None,
            theta: None,
            n: None,
            n_grid: None,
            i_max: None,
            n0: None,
            generations: None,
            replicas: None,
            seed: None,
            out: None,
            format: Format::Csv,
            trajectory: false,
        };
        let cfg = resolve_config(CommandName::Rates, &opts).unwrap();
        assert_eq!(cfg.params.alpha, Some(0.3));
        assert_eq!(cfg.params.beta, Some(0.0));
        assert_eq!(cfg.i_max, Some(3));
        assert_eq!(cfg.seed, 9);
    }

    #[test]
    fn unknown_json_field_rejected() {
        assert!(ExperimentConfig::from_json(r#"{"command":"rates","alpah":1}"#).is_err());
    }

    #[test]
    fn validation_precedes_sampling() {
        let mut cfg = ExperimentConfig::new(CommandName::FiniteMc);
        cfg.params.alpha = Some(1.0);
        cfg.params.theta = Some(1.0);
        cfg.n = Some(10);
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::new(CommandName::ScalingFit);
        cfg.params.alpha = Some(1.5);
        cfg.n_grid = vec![10, 100, 1000];
        assert!(cfg.validate().is_err());
    }
}
