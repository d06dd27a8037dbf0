//! Coalescents of Pareto partitions: finite-population Monte Carlo, closed
//! forms for the limiting Ξ/Λ/Kingman rates, genealogy simulation, and the
//! forward fitness model.

pub mod cli;
pub mod error;
pub mod estimate;
pub mod finite;
pub mod forward;
pub mod limit;
mod mc;
pub mod quad;
pub mod regression;
pub mod samplers;
pub mod sim;
pub mod specfun;

pub use error::{Error, Result};
pub use estimate::{Warning, WeightedEstimate};
pub use samplers::RngStream;

/// Decimal rendering of `v` rounded to 12 significant digits, so values
/// that differ from a short decimal only in the last ulp print short.
pub fn fmt_value(v: f64) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    let rounded: f64 = format!("{v:.11e}").parse().unwrap_or(v);
    rounded.to_string()
}
