//! C ABI over `pareto_coalescent`.
//!
//! Every fallible call returns a [`PcStatus`]; on failure the message is
//! available from [`pc_last_error_message`] on the same thread. Handles are
//! opaque and must be released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use pareto_coalescent::estimate::Warning;
use pareto_coalescent::finite::{estimate_c_n, PartitionModel};
use pareto_coalescent::forward::{pressure, speed_estimate, ForwardConfig};
use pareto_coalescent::limit::{c_n_asymptotic, lambda_rate, Params, RateTable, TableKind};
use pareto_coalescent::specfun::{digamma, log_abs_gamma, log_gamma};
use pareto_coalescent::{Error, RngStream, WeightedEstimate};

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidParameter = 2,
    Domain = 3,
    Pole = 4,
    OutOfTable = 5,
    SizeLimit = 6,
    Unbracketed = 7,
    Panic = 8,
}

impl From<&Error> for PcStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::InvalidParameter(_) => PcStatus::InvalidParameter,
            Error::Domain(_) => PcStatus::Domain,
            Error::Pole(_) => PcStatus::Pole,
            Error::OutOfTable { .. } => PcStatus::OutOfTable,
            Error::SizeLimit(_) => PcStatus::SizeLimit,
            Error::Unbracketed(_) => PcStatus::Unbracketed,
        }
    }
}

/// Partition family for [`pc_estimate_c_n`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PcFamily {
    Pareto = 0,
    Gamma = 1,
}

pub const PC_WARN_WEIGHT_DEGENERACY: u32 = 1;
pub const PC_WARN_VARIANCE_MAY_BE_INFINITE: u32 = 2;
pub const PC_WARN_CANCELLATION: u32 = 4;
pub const PC_WARN_TRUNCATED: u32 = 8;

/// Monte Carlo estimate with its standard error.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PcEstimate {
    pub value: f64,
    pub std_error: f64,
    pub ess: f64,
    pub replicas: u64,
    /// Bitwise OR of `PC_WARN_*` flags.
    pub warnings: u32,
}

impl From<&WeightedEstimate> for PcEstimate {
    fn from(e: &WeightedEstimate) -> Self {
        let warnings = e.warnings.iter().fold(0, |acc, w| {
            acc | match w {
                Warning::WeightDegeneracy => PC_WARN_WEIGHT_DEGENERACY,
                Warning::VarianceMayBeInfinite => PC_WARN_VARIANCE_MAY_BE_INFINITE,
                Warning::Cancellation => PC_WARN_CANCELLATION,
                Warning::Truncated => PC_WARN_TRUNCATED,
            }
        });
        Self { value: e.value, std_error: e.stderr, ess: e.ess, replicas: e.replicas as u64, warnings }
    }
}

/// Opaque random stream.
pub struct PcRng {
    inner: RngStream,
}

/// Opaque rate or probability table.
pub struct PcRateTable {
    inner: RateTable,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

/// Runs `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), PcFailure>) -> PcStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PcStatus::Ok,
        Ok(Err(PcFailure::Lib(e))) => {
            set_error(e.to_string());
            PcStatus::from(&e)
        }
        Ok(Err(PcFailure::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            PcStatus::NullPointer
        }
        Err(_) => {
            set_error("internal panic".into());
            PcStatus::Panic
        }
    }
}

enum PcFailure {
    Lib(Error),
    Null(&'static str),
}

impl From<Error> for PcFailure {
    fn from(e: Error) -> Self {
        PcFailure::Lib(e)
    }
}

unsafe fn out_ref<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, PcFailure> {
    p.as_mut().ok_or(PcFailure::Null(what))
}

unsafe fn in_ref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, PcFailure> {
    p.as_ref().ok_or(PcFailure::Null(what))
}

fn usize_of(v: u64, what: &str) -> Result<usize, PcFailure> {
    usize::try_from(v).map_err(|_| PcFailure::Lib(Error::InvalidParameter(format!("{what} does not fit in usize"))))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn pc_version() -> *const c_char {
    static VERSION: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
        Ok(v) => v,
        Err(_) => panic!("version has no interior nul"),
    };
    VERSION.as_ptr()
}

/// Message of the last failed call on this thread, or NULL. The pointer is
/// valid until the next library call on the same thread.
#[no_mangle]
pub extern "C" fn pc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// New random stream; never returns NULL.
#[no_mangle]
pub extern "C" fn pc_rng_new(seed: u64, stream_index: u64) -> *mut PcRng {
    Box::into_raw(Box::new(PcRng { inner: RngStream::new(seed, stream_index) }))
}

/// Independent stream number `k` derived from `rng`; NULL if `rng` is NULL.
///
/// # Safety
/// `rng` must be NULL or a live handle from `pc_rng_new`/`pc_rng_replica`.
#[no_mangle]
pub unsafe extern "C" fn pc_rng_replica(rng: *const PcRng, k: u64) -> *mut PcRng {
    match rng.as_ref() {
        Some(r) => Box::into_raw(Box::new(PcRng { inner: r.inner.replica(k) })),
        None => ptr::null_mut(),
    }
}

/// # Safety
/// `rng` must be NULL or a live handle; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn pc_rng_free(rng: *mut PcRng) {
    if !rng.is_null() {
        drop(Box::from_raw(rng));
    }
}

/// Uniform variate on the open interval (0, 1).
///
/// # Safety
/// `rng` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pc_rng_uniform(rng: *mut PcRng, out: *mut f64) -> PcStatus {
    guard(|| {
        let r = out_ref(rng, "rng")?;
        *out_ref(out, "out")? = r.inner.uniform();
        Ok(())
    })
}

/// Pareto(α) variate with tail `x^{−α}` on `[1, ∞)`.
///
/// # Safety
/// `rng` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pc_rng_pareto(rng: *mut PcRng, alpha: f64, out: *mut f64) -> PcStatus {
    guard(|| {
        let r = out_ref(rng, "rng")?;
        let v = pareto_coalescent::samplers::pareto_sample(alpha, &mut r.inner)?;
        *out_ref(out, "out")? = v;
        Ok(())
    })
}

/// Rate table (Λ regimes) or transition matrix (Ξ regime) for `(α, β)`.
///
/// # Safety
/// `out` must be writable; on success `*out` holds a handle to release with
/// `pc_rate_table_free`.
#[no_mangle]
pub unsafe extern "C" fn pc_rate_table_new(alpha: f64, beta: f64, i_max: u32, out: *mut *mut PcRateTable) -> PcStatus {
    guard(|| {
        let slot = out_ref(out, "out")?;
        *slot = ptr::null_mut();
        let table = RateTable::for_params(&Params::new(alpha, beta)?, i_max as usize)?;
        *slot = Box::into_raw(Box::new(PcRateTable { inner: table }));
        Ok(())
    })
}

/// # Safety
/// `table` must be NULL or a live handle; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn pc_rate_table_free(table: *mut PcRateTable) {
    if !table.is_null() {
        drop(Box::from_raw(table));
    }
}

/// Largest state of the table, or 0 for NULL.
///
/// # Safety
/// `table` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pc_rate_table_i_max(table: *const PcRateTable) -> u32 {
    table.as_ref().map_or(0, |t| t.inner.i_max() as u32)
}

/// 1 for a probability table, 0 for rates or NULL.
///
/// # Safety
/// `table` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pc_rate_table_is_probability(table: *const PcRateTable) -> i32 {
    table.as_ref().map_or(0, |t| i32::from(t.inner.kind() == TableKind::Probabilities))
}

/// Entry `(i, j)`; zero where the table has no entry.
///
/// # Safety
/// `table` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pc_rate_table_get(table: *const PcRateTable, i: u32, j: u32, out: *mut f64) -> PcStatus {
    guard(|| {
        let t = in_ref(table, "table")?;
        *out_ref(out, "out")? = t.inner.get(i as usize, j as usize)?;
        Ok(())
    })
}

/// Row sum of state `i`.
///
/// # Safety
/// `table` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pc_rate_table_total(table: *const PcRateTable, i: u32, out: *mut f64) -> PcStatus {
    guard(|| {
        let t = in_ref(table, "table")?;
        *out_ref(out, "out")? = t.inner.total(i as usize)?;
        Ok(())
    })
}

/// `λ_{i,j}` of the beta(2−α, α−β) coalescent, `1 <= α < 2`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pc_lambda_rate(alpha: f64, beta: f64, i: u32, j: u32, out: *mut f64) -> PcStatus {
    guard(|| {
        let v = lambda_rate(&Params::new(alpha, beta)?, i as usize, j as usize)?;
        *out_ref(out, "out")? = v;
        Ok(())
    })
}

/// Leading-order `c_N` for Pareto(α) partitions.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pc_c_n_asymptotic(alpha: f64, beta: f64, n: u64, out: *mut f64) -> PcStatus {
    guard(|| {
        let (v, _) = c_n_asymptotic(&Params::new(alpha, beta)?, n)?;
        *out_ref(out, "out")? = v;
        Ok(())
    })
}

/// Monte Carlo `c_N` for Pareto(`shape`) or gamma(`shape`) partitions of
/// size `n`, tilted by `Σ^β`.
///
/// # Safety
/// `rng` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pc_estimate_c_n(
    family: PcFamily,
    shape: f64,
    n: u64,
    beta: f64,
    replicas: u64,
    rng: *const PcRng,
    out: *mut PcEstimate,
) -> PcStatus {
    guard(|| {
        let r = in_ref(rng, "rng")?;
        let slot = out_ref(out, "out")?;
        let n = usize_of(n, "n")?;
        let model = match family {
            PcFamily::Pareto => PartitionModel::pareto(shape, n, beta)?,
            PcFamily::Gamma => PartitionModel::gamma(shape, n, beta)?,
        };
        *slot = PcEstimate::from(&estimate_c_n(&model, usize_of(replicas, "replicas")?, &r.inner)?);
        Ok(())
    })
}

/// Per-generation growth of the log Hölder mean in the forward model.
///
/// # Safety
/// `rng` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pc_speed_estimate(
    n: u64,
    alpha: f64,
    generations: u64,
    replicas: u64,
    rng: *const PcRng,
    out: *mut PcEstimate,
) -> PcStatus {
    guard(|| {
        let r = in_ref(rng, "rng")?;
        let slot = out_ref(out, "out")?;
        let cfg = ForwardConfig::new(usize_of(n, "n")?, alpha, usize_of(generations, "generations")?)?;
        *slot = PcEstimate::from(&speed_estimate(&cfg, usize_of(replicas, "replicas")?, &r.inner)?);
        Ok(())
    })
}

/// Pressure `F_N(β)` of the forward model.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pc_pressure(alpha: f64, n: u64, beta: f64, out: *mut f64) -> PcStatus {
    guard(|| {
        let v = pressure(alpha, n, beta)?;
        *out_ref(out, "out")? = v;
        Ok(())
    })
}

/// `ln Γ(x)` for `x > 0`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pc_log_gamma(x: f64, out: *mut f64) -> PcStatus {
    guard(|| {
        let v = log_gamma(x)?;
        *out_ref(out, "out")? = v;
        Ok(())
    })
}

/// `ln |Γ(x)|` and the sign of `Γ(x)` away from the poles.
///
/// # Safety
/// `out_log` and `out_sign` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pc_log_abs_gamma(x: f64, out_log: *mut f64, out_sign: *mut f64) -> PcStatus {
    guard(|| {
        let (l, s) = log_abs_gamma(x)?;
        *out_ref(out_log, "out_log")? = l;
        *out_ref(out_sign, "out_sign")? = s;
        Ok(())
    })
}

/// `ψ(x)`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pc_digamma(x: f64, out: *mut f64) -> PcStatus {
    guard(|| {
        let v = digamma(x)?;
        *out_ref(out, "out")? = v;
        Ok(())
    })
}
