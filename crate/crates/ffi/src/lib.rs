//! C interface to the `savg` library.
//!
//! Every function returns a [`SavgStatus`]. On failure the message is kept in
//! a thread-local slot readable through [`savg_last_error`]. Objects cross the
//! boundary as opaque handles that must be released with their `_free`
//! function. Matrices are row-major. Panics never unwind into the caller;
//! they surface as `SAVG_STATUS_INTERNAL`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use nalgebra::DMatrix;
use savg::jump::{build_limit_generator, fdd_expectation, transition_matrix, JumpError, JumpGenerator, VertexLaw};
use savg::model::{builtin_model, ModelError};
use savg::scenario::{configured_suites, load_config, run_suites, ConfigError, RunError, Suite};
use savg::sde::{simulate, Initial, IntegratorConfig, SdeError, TrajectoryBatch};
use savg::simplex::SimplexError;
use savg::{CoefficientModel, Simplex};

/// Result of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SavgStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// Degenerate or ill-conditioned simplex.
    Degenerate = 3,
    Simulation = 4,
    Io = 5,
    Config = 6,
    /// A caught panic or another internal failure.
    Internal = 7,
}

pub struct SavgSimplex(Simplex);

pub struct SavgModel(CoefficientModel);

pub struct SavgGenerator(JumpGenerator);

pub struct SavgBatch(TrajectoryBatch);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure {
    status: SavgStatus,
    message: String,
}

impl Failure {
    fn new(status: SavgStatus, message: impl Into<String>) -> Self {
        Self { status, message: message.into() }
    }

    fn invalid(message: impl Into<String>) -> Self {
        Self::new(SavgStatus::InvalidArgument, message)
    }
}

fn simplex_status(e: &SimplexError) -> SavgStatus {
    match e {
        SimplexError::TooFewVertices | SimplexError::Duplicate(..) | SimplexError::Degenerate(_) => SavgStatus::Degenerate,
        _ => SavgStatus::InvalidArgument,
    }
}

impl From<SimplexError> for Failure {
    fn from(e: SimplexError) -> Self {
        Self::new(simplex_status(&e), e.to_string())
    }
}

impl From<ModelError> for Failure {
    fn from(e: ModelError) -> Self {
        let status = match &e {
            ModelError::Simplex(s) => simplex_status(s),
            _ => SavgStatus::InvalidArgument,
        };
        Self::new(status, e.to_string())
    }
}

impl From<JumpError> for Failure {
    fn from(e: JumpError) -> Self {
        let status = match &e {
            JumpError::Simplex(s) => simplex_status(s),
            _ => SavgStatus::InvalidArgument,
        };
        Self::new(status, e.to_string())
    }
}

impl From<SdeError> for Failure {
    fn from(e: SdeError) -> Self {
        let status = match &e {
            SdeError::NonFinite { .. } => SavgStatus::Simulation,
            SdeError::Simplex(s) => simplex_status(s),
            _ => SavgStatus::InvalidArgument,
        };
        Self::new(status, e.to_string())
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        let status = match &e {
            ConfigError::Io { .. } => SavgStatus::Io,
            _ => SavgStatus::Config,
        };
        Self::new(status, e.to_string())
    }
}

impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        match e {
            RunError::Config(c) => c.into(),
            step @ RunError::Step { .. } => Self::new(SavgStatus::Simulation, step.to_string()),
        }
    }
}

fn set_last_error(message: &str) {
    let c = CString::new(message.replace('\0', "\\0")).expect("interior nul removed");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn panic_message(payload: &(dyn std::any::Any + Send)) -> String {
    if let Some(s) = payload.downcast_ref::<&str>() {
        s.to_string()
    } else if let Some(s) = payload.downcast_ref::<String>() {
        s.clone()
    } else {
        "unknown panic".to_string()
    }
}

/// Runs `f`, recording any failure or panic as the thread's last error.
fn guard<F>(f: F) -> SavgStatus
where
    F: FnOnce() -> Result<(), Failure>,
{
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SavgStatus::Ok,
        Ok(Err(failure)) => {
            set_last_error(&failure.message);
            failure.status
        }
        Err(payload) => {
            set_last_error(&format!("internal panic: {}", panic_message(payload.as_ref())));
            SavgStatus::Internal
        }
    }
}

fn null(what: &str) -> Failure {
    Failure::new(SavgStatus::NullPointer, format!("{what} is null"))
}

unsafe fn input<'a>(ptr: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

unsafe fn output<'a, T>(ptr: *mut T, len: usize, expected: usize, what: &str) -> Result<&'a mut [T], Failure> {
    if len != expected {
        return Err(Failure::invalid(format!("{what}: buffer holds {len} values, expected {expected}")));
    }
    if expected == 0 {
        return Ok(&mut []);
    }
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(ptr, len))
}

unsafe fn handle<'a, T>(ptr: *const T, what: &str) -> Result<&'a T, Failure> {
    ptr.as_ref().ok_or_else(|| null(what))
}

unsafe fn string<'a>(ptr: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if ptr.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| Failure::invalid(format!("{what} is not valid UTF-8")))
}

unsafe fn store<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output handle"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn release<T>(ptr: *mut T) {
    if !ptr.is_null() {
        let _ = catch_unwind(AssertUnwindSafe(|| drop(Box::from_raw(ptr))));
    }
}

/// Message of the most recent failed call on this thread, or null. The
/// pointer stays valid until the next `savg_*` call on the same thread.
#[no_mangle]
pub extern "C" fn savg_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn savg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds a simplex from `n_vertices` row-major vertices of `dim` coordinates.
///
/// # Safety
/// `vertices` must point to `n_vertices * dim` readable doubles and `out` to
/// writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn savg_simplex_new(
    vertices: *const f64,
    n_vertices: usize,
    dim: usize,
    out: *mut *mut SavgSimplex,
) -> SavgStatus {
    guard(|| {
        let count = n_vertices.checked_mul(dim).ok_or_else(|| Failure::invalid("vertex buffer size overflows"))?;
        let flat = input(vertices, count, "vertices")?;
        let rows = if dim == 0 { vec![Vec::new(); n_vertices] } else { flat.chunks(dim).map(<[f64]>::to_vec).collect() };
        store(out, SavgSimplex(Simplex::new(rows)?))
    })
}

/// # Safety
/// `simplex` must be null or a handle from `savg_simplex_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn savg_simplex_free(simplex: *mut SavgSimplex) {
    release(simplex)
}

/// Dimension of the ambient space, or 0 for a null handle.
///
/// # Safety
/// `simplex` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn savg_simplex_dim(simplex: *const SavgSimplex) -> usize {
    simplex.as_ref().map_or(0, |s| s.0.dim())
}

/// Barycentric coordinates of `x` (length `dim`) into `out` (length `dim + 1`).
///
/// # Safety
/// Buffers must match the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn savg_simplex_barycentric(
    simplex: *const SavgSimplex,
    x: *const f64,
    x_len: usize,
    out: *mut f64,
    out_len: usize,
) -> SavgStatus {
    guard(|| {
        let s = &handle(simplex, "simplex")?.0;
        if x_len != s.dim() {
            return Err(SimplexError::PointDimension { got: x_len, dim: s.dim() }.into());
        }
        let x = input(x, x_len, "x")?;
        let out = output(out, out_len, s.num_vertices(), "barycentric output")?;
        s.barycentric_into(x, out);
        Ok(())
    })
}

/// Instantiates a builtin model on `simplex`. `params_json` is a JSON object
/// of parameters, or null for the defaults.
///
/// # Safety
/// Strings must be nul-terminated; handles must be live.
#[no_mangle]
pub unsafe extern "C" fn savg_model_builtin(
    name: *const c_char,
    params_json: *const c_char,
    simplex: *const SavgSimplex,
    out: *mut *mut SavgModel,
) -> SavgStatus {
    guard(|| {
        let name = string(name, "name")?;
        let params = if params_json.is_null() {
            serde_json::Value::Null
        } else {
            serde_json::from_str(string(params_json, "params_json")?)
                .map_err(|e| Failure::invalid(format!("params_json: {e}")))?
        };
        let s = &handle(simplex, "simplex")?.0;
        store(out, SavgModel(builtin_model(name, &params, s)?))
    })
}

/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn savg_model_free(model: *mut SavgModel) {
    release(model)
}

/// The limit jump generator of `model` on `simplex`.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn savg_generator_build(
    model: *const SavgModel,
    simplex: *const SavgSimplex,
    out: *mut *mut SavgGenerator,
) -> SavgStatus {
    guard(|| {
        let m = &handle(model, "model")?.0;
        let s = &handle(simplex, "simplex")?.0;
        store(out, SavgGenerator(build_limit_generator(m, s)?))
    })
}

/// # Safety
/// `generator` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn savg_generator_free(generator: *mut SavgGenerator) {
    release(generator)
}

/// Number of states, or 0 for a null handle.
///
/// # Safety
/// `generator` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn savg_generator_size(generator: *const SavgGenerator) -> usize {
    generator.as_ref().map_or(0, |g| g.0.size())
}

fn write_matrix(m: &DMatrix<f64>, out: &mut [f64]) {
    let n = m.ncols();
    for (i, row) in out.chunks_mut(n).enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = m[(i, j)];
        }
    }
}

/// Copies the rate matrix into `out` (`size * size`, row-major).
///
/// # Safety
/// `out` must hold `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn savg_generator_rates(generator: *const SavgGenerator, out: *mut f64, out_len: usize) -> SavgStatus {
    guard(|| {
        let g = &handle(generator, "generator")?.0;
        let out = output(out, out_len, g.size() * g.size(), "rates output")?;
        write_matrix(g.rates(), out);
        Ok(())
    })
}

/// `exp(tQ)` into `out` (`size * size`, row-major).
///
/// # Safety
/// `out` must hold `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn savg_generator_transition(
    generator: *const SavgGenerator,
    t: f64,
    out: *mut f64,
    out_len: usize,
) -> SavgStatus {
    guard(|| {
        let g = &handle(generator, "generator")?.0;
        if !(t.is_finite() && t >= 0.0) {
            return Err(Failure::invalid(format!("t must be finite and non-negative, got {t}")));
        }
        let out = output(out, out_len, g.size() * g.size(), "transition output")?;
        write_matrix(&transition_matrix(g, t), out);
        Ok(())
    })
}

/// `P(X_{t_1} = z_{i_1}, …, X_{t_r} = z_{i_r})` for the chain started from
/// the law `initial` (length `size`).
///
/// # Safety
/// `times` and `indices` must hold `r` values; `value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn savg_fdd_expectation(
    generator: *const SavgGenerator,
    initial: *const f64,
    initial_len: usize,
    times: *const f64,
    indices: *const usize,
    r: usize,
    value: *mut f64,
) -> SavgStatus {
    guard(|| {
        let g = &handle(generator, "generator")?.0;
        let law = VertexLaw::new(input(initial, initial_len, "initial")?.to_vec())?;
        let times = input(times, r, "times")?;
        let indices = if r == 0 {
            &[][..]
        } else if indices.is_null() {
            return Err(null("indices"));
        } else {
            std::slice::from_raw_parts(indices, r)
        };
        let v = fdd_expectation(g, &law, times, indices)?;
        let value = value.as_mut().ok_or_else(|| null("value"))?;
        *value = v;
        Ok(())
    })
}

/// Simulates `n_paths` paths of the two-scale process at separation `gamma`
/// from `x0`, recorded on `t_grid`.
///
/// # Safety
/// `x0` must hold `dim` doubles, `t_grid` `n_times`; handles must be live.
#[no_mangle]
pub unsafe extern "C" fn savg_simulate(
    model: *const SavgModel,
    simplex: *const SavgSimplex,
    x0: *const f64,
    dim: usize,
    gamma: f64,
    dt: f64,
    n_paths: usize,
    seed: u64,
    t_grid: *const f64,
    n_times: usize,
    out: *mut *mut SavgBatch,
) -> SavgStatus {
    guard(|| {
        let m = &handle(model, "model")?.0;
        let s = &handle(simplex, "simplex")?.0;
        let x0 = input(x0, dim, "x0")?.to_vec();
        let config = IntegratorConfig::new(dt, n_paths, seed, input(t_grid, n_times, "t_grid")?.to_vec());
        let batch = simulate(m, s, &Initial::Point(x0), gamma, &config)?;
        store(out, SavgBatch(batch))
    })
}

/// # Safety
/// `batch` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn savg_batch_free(batch: *mut SavgBatch) {
    release(batch)
}

/// # Safety
/// `batch` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn savg_batch_n_paths(batch: *const SavgBatch) -> usize {
    batch.as_ref().map_or(0, |b| b.0.n_paths())
}

/// # Safety
/// `batch` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn savg_batch_n_times(batch: *const SavgBatch) -> usize {
    batch.as_ref().map_or(0, |b| b.0.n_times())
}

/// # Safety
/// `batch` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn savg_batch_dim(batch: *const SavgBatch) -> usize {
    batch.as_ref().map_or(0, |b| b.0.dim())
}

/// State of `path` at grid index `time_index` into `out` (length `dim`).
///
/// # Safety
/// `out` must hold `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn savg_batch_state(
    batch: *const SavgBatch,
    path: usize,
    time_index: usize,
    out: *mut f64,
    out_len: usize,
) -> SavgStatus {
    guard(|| {
        let b = &handle(batch, "batch")?.0;
        if path >= b.n_paths() || time_index >= b.n_times() {
            return Err(Failure::invalid(format!(
                "(path {path}, time index {time_index}) out of range for {} paths and {} times",
                b.n_paths(),
                b.n_times()
            )));
        }
        output(out, out_len, b.dim(), "state output")?.copy_from_slice(b.state(path, time_index));
        Ok(())
    })
}

/// Writes the batch as CSV (`path,t,x1,...,xn`).
///
/// # Safety
/// `path` must be a nul-terminated string.
#[no_mangle]
pub unsafe extern "C" fn savg_batch_write_csv(batch: *const SavgBatch, path: *const c_char) -> SavgStatus {
    guard(|| {
        let b = &handle(batch, "batch")?.0;
        let path = string(path, "path")?;
        let io = |e: std::io::Error| Failure::new(SavgStatus::Io, format!("{path}: {e}"));
        let mut w = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
        b.write_csv(&mut w).map_err(io)?;
        std::io::Write::flush(&mut w).map_err(io)
    })
}

/// Runs the suites of a scenario file and writes its CSV and JSON reports
/// into `out_dir`. `suite` names one of `validate`, `run`, `ergodic`, `fdd`,
/// `counterexample`; null runs every configured suite. `passed` receives 1
/// when every check passed, else 0.
///
/// # Safety
/// Strings must be nul-terminated; `passed` must be writable.
#[no_mangle]
pub unsafe extern "C" fn savg_run_scenario(
    config_path: *const c_char,
    out_dir: *const c_char,
    suite: *const c_char,
    passed: *mut i32,
) -> SavgStatus {
    guard(|| {
        let config = load_config(Path::new(string(config_path, "config_path")?))?;
        let out_dir = Path::new(string(out_dir, "out_dir")?);
        let (suites, suffix) = if suite.is_null() {
            (configured_suites(&config), "all")
        } else {
            let name = string(suite, "suite")?;
            let s = Suite::from_name(name).ok_or_else(|| Failure::invalid(format!("unknown suite {name:?}")))?;
            (vec![s], s.name())
        };
        let passed = passed.as_mut().ok_or_else(|| null("passed"))?;
        let report = run_suites(&config, &suites)?;
        report
            .emit(out_dir, suffix)
            .map_err(|e| Failure::new(SavgStatus::Io, format!("{}: {e}", out_dir.display())))?;
        *passed = i32::from(report.passed);
        Ok(())
    })
}
