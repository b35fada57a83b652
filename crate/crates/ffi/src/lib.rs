//! C ABI over the `lsvgd` library.
//!
//! Every fallible function returns an [`LsvgdStatus`]. On failure the message
//! is kept per thread and can be read with [`lsvgd_last_error`]. Objects are
//! handed out as opaque pointers and must be released with the matching
//! `*_free` function. Matrices cross the boundary as row-major `double`
//! arrays.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use lsvgd::experiment::{run_experiment, ExperimentConfig, RunOutput};
use lsvgd::kernel::median_bandwidth;
use lsvgd::metrics::mmd_to_reference;
use lsvgd::models::{DoubleBanana, ForwardModel, FractionalPdeModel, PdeConfig};
use lsvgd::surrogate::SurrogateParams;
use lsvgd::svgd::assemble_direction;
use lsvgd::{Error, Matrix};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LsvgdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    DegenerateBandwidth = 3,
    NonFiniteScore = 4,
    SingularInput = 5,
    InvalidCoefficient = 6,
    Numerical = 7,
    Config = 8,
    Io = 9,
    Parse = 10,
    BufferTooSmall = 11,
    Panic = 12,
}

/// Forward models with a built-in default setup.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LsvgdPdeKind {
    HeatSource = 0,
    Diffusion = 1,
}

/// A forward model `f: R^d -> R^n`.
pub struct LsvgdModel {
    inner: Box<dyn ForwardModel>,
}

/// A trained surrogate network.
pub struct LsvgdSurrogate {
    inner: SurrogateParams,
}

/// A resolved experiment configuration.
pub struct LsvgdConfig {
    inner: ExperimentConfig,
}

/// The outcome of a finished experiment.
pub struct LsvgdRun {
    inner: RunOutput,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> LsvgdStatus {
    match e {
        Error::InvalidInput(_) => LsvgdStatus::InvalidInput,
        Error::DegenerateBandwidth => LsvgdStatus::DegenerateBandwidth,
        Error::NonFiniteScore { .. } => LsvgdStatus::NonFiniteScore,
        Error::SingularInput(_) => LsvgdStatus::SingularInput,
        Error::InvalidCoefficient(_) => LsvgdStatus::InvalidCoefficient,
        Error::Numerical(_) => LsvgdStatus::Numerical,
        Error::Config(_) => LsvgdStatus::Config,
        Error::Io { .. } => LsvgdStatus::Io,
        Error::Json { .. } | Error::Csv(_) => LsvgdStatus::Parse,
    }
}

struct Fail(LsvgdStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null() -> Fail {
    Fail(LsvgdStatus::NullPointer, "null pointer argument".into())
}

/// Runs `f`, turning errors and panics into a status plus a stored message.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> LsvgdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            LsvgdStatus::Ok
        }
        Ok(Err(Fail(code, msg))) => {
            set_error(&msg);
            code
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(&format!("internal panic: {msg}"));
            LsvgdStatus::Panic
        }
    }
}

unsafe fn slice<'a>(p: *const f64, len: usize) -> Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null());
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn out_slice<'a>(p: *mut f64, len: usize, need: usize) -> Result<&'a mut [f64], Fail> {
    if len < need {
        return Err(Fail(
            LsvgdStatus::BufferTooSmall,
            format!("output buffer holds {len} values, {need} needed"),
        ));
    }
    if need == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null());
    }
    Ok(std::slice::from_raw_parts_mut(p, need))
}

unsafe fn matrix(p: *const f64, rows: usize, cols: usize) -> Result<Matrix, Fail> {
    let n = rows
        .checked_mul(cols)
        .ok_or_else(|| Fail(LsvgdStatus::InvalidInput, "matrix size overflows".into()))?;
    Ok(Matrix::from_vec(rows, cols, slice(p, n)?.to_vec())?)
}

unsafe fn text<'a>(p: *const c_char) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null());
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(LsvgdStatus::InvalidInput, "string is not UTF-8".into()))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null());
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn free<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Library version, as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn lsvgd_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr().cast()
}

/// Message of the last failed call on this thread, or an empty string.
/// The pointer stays valid until the next call into the library on the same
/// thread.
#[no_mangle]
pub extern "C" fn lsvgd_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Creates the analytic double banana model (`d = 2`, `n = 1`).
///
/// # Safety
/// `out` must be a valid pointer to writable storage.
#[no_mangle]
pub unsafe extern "C" fn lsvgd_model_double_banana(out: *mut *mut LsvgdModel) -> LsvgdStatus {
    guard(|| {
        put(
            out,
            LsvgdModel {
                inner: Box::new(DoubleBanana::new()),
            },
        )
    })
}

/// Creates a fractional PDE model with its default discretization and sensors.
///
/// # Safety
/// `out` must be a valid pointer to writable storage.
#[no_mangle]
pub unsafe extern "C" fn lsvgd_model_pde(kind: LsvgdPdeKind, out: *mut *mut LsvgdModel) -> LsvgdStatus {
    guard(|| {
        let config = match kind {
            LsvgdPdeKind::HeatSource => PdeConfig::heat_source(),
            LsvgdPdeKind::Diffusion => PdeConfig::diffusion(),
        };
        let model = FractionalPdeModel::new(config)?;
        put(
            out,
            LsvgdModel {
                inner: Box::new(model),
            },
        )
    })
}

/// # Safety
/// `model` must come from a model constructor and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn lsvgd_model_free(model: *mut LsvgdModel) {
    free(model)
}

/// Input dimension `d`, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lsvgd_model_input_dim(model: *const LsvgdModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.input_dim())
}

/// Output dimension `n`, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lsvgd_model_output_dim(model: *const LsvgdModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.output_dim())
}

/// Number of counted evaluations made through this handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lsvgd_model_eval_count(model: *const LsvgdModel) -> u64 {
    model.as_ref().map_or(0, |m| m.inner.eval_count())
}

/// Evaluates `f(x)` into `y`. Counted.
///
/// # Safety
/// `x` must hold `x_len` values and `y` room for `y_len`.
#[no_mangle]
pub unsafe extern "C" fn lsvgd_model_evaluate(
    model: *const LsvgdModel,
    x: *const f64,
    x_len: usize,
    y: *mut f64,
    y_len: usize,
) -> LsvgdStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(null)?;
        let x = slice(x, x_len)?;
        if x.len() != m.inner.input_dim() {
            return Err(Fail(LsvgdStatus::InvalidInput, "wrong input length".into()));
        }
        let out = out_slice(y, y_len, m.inner.output_dim())?;
        out.copy_from_slice(&m.inner.evaluate(x)?);
        Ok(())
    })
}

/// Exact Jacobian (`n x d`, row-major) into `jac`. Models without one
/// report `LSVGD_STATUS_INVALID_INPUT`.
///
/// # Safety
/// `x` must hold `x_len` values and `jac` room for `jac_len`.
#[no_mangle]
pub unsafe extern "C" fn lsvgd_model_jacobian(
    model: *const LsvgdModel,
    x: *const f64,
    x_len: usize,
    jac: *mut f64,
    jac_len: usize,
) -> LsvgdStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(null)?;
        let x = slice(x, x_len)?;
        if x.len() != m.inner.input_dim() {
            return Err(Fail(LsvgdStatus::InvalidInput, "wrong input length".into()));
        }
        let j = m.inner.jacobian(x).ok_or_else(|| {
            Fail(
                LsvgdStatus::InvalidInput,
                format!("{} has no exact Jacobian", m.inner.name()),
            )
        })??;
        let out = out_slice(jac, jac_len, j.rows() * j.cols())?;
        out.copy_from_slice(j.as_slice());
        Ok(())
    })
}

/// Loads a surrogate saved as JSON (for example a run's `surrogate.json`).
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lsvgd_surrogate_load(
    path: *const c_char,
    out: *mut *mut LsvgdSurrogate,
) -> LsvgdStatus {
    guard(|| {
        let params = SurrogateParams::load(Path::new(text(path)?))?;
        put(out, LsvgdSurrogate { inner: params })
    })
}

/// # Safety
/// `s` must come from [`lsvgd_surrogate_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn lsvgd_surrogate_free(s: *mut LsvgdSurrogate) {
    free(s)
}

/// # Safety
/// `s` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lsvgd_surrogate_input_dim(s: *const LsvgdSurrogate) -> usize {
    s.as_ref().map_or(0, |s| s.inner.input_dim())
}

/// # Safety
/// `s` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lsvgd_surrogate_output_dim(s: *const LsvgdSurrogate) -> usize {
    s.as_ref().map_or(0, |s| s.inner.output_dim())
}

/// Network prediction at `x`.
///
/// # Safety
/// `x` must hold `x_len` values and `y` room for `y_len`.
#[no_mangle]
pub unsafe extern "C" fn lsvgd_surrogate_predict(
    s: *const LsvgdSurrogate,
    x: *const f64,
    x_len: usize,
    y: *mut f64,
    y_len: usize,
) -> LsvgdStatus {
    guard(|| {
        let s = s.as_ref().ok_or_else(null)?;
        let v = s.inner.forward(slice(x, x_len)?)?;
        out_slice(y, y_len, v.len())?.copy_from_slice(&v);
        Ok(())
    })
}

/// Network Jacobian with respect to its input (`n x d`, row-major).
///
/// # Safety
/// `x` must hold `x_len` values and `jac` room for `jac_len`.
#[no_mangle]
pub unsafe extern "C" fn lsvgd_surrogate_input_jacobian(
    s: *const LsvgdSurrogate,
    x: *const f64,
    x_len: usize,
    jac: *mut f64,
    jac_len: usize,
) -> LsvgdStatus {
    guard(|| {
        let s = s.as_ref().ok_or_else(null)?;
        let j = s.inner.input_jacobian(slice(x, x_len)?)?;
        out_slice(jac, jac_len, j.rows() * j.cols())?.copy_from_slice(j.as_slice());
        Ok(())
    })
}

/// Median-heuristic kernel bandwidth of `n` points in `d` dimensions.
///
/// # Safety
/// `points` must hold `n * d` values; `h` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lsvgd_median_bandwidth(
    points: *const f64,
    n: usize,
    d: usize,
    h: *mut f64,
) -> LsvgdStatus {
    guard(|| {
        let p = matrix(points, n, d)?;
        let bw = median_bandwidth(&p)?;
        *h.as_mut().ok_or_else(null)? = bw.value();
        Ok(())
    })
}

/// SVGD update direction for `n` particles given their scores, with the
/// median bandwidth. All arrays are `n x d`.
///
/// # Safety
/// `points` and `scores` must hold `n * d` values, `out` room for `n * d`.
#[no_mangle]
pub unsafe extern "C" fn lsvgd_svgd_direction(
    points: *const f64,
    scores: *const f64,
    n: usize,
    d: usize,
    out: *mut f64,
) -> LsvgdStatus {
    guard(|| {
        let p = matrix(points, n, d)?;
        let s = matrix(scores, n, d)?;
        let h = median_bandwidth(&p)?;
        let dir = assemble_direction(&p, &s, h)?;
        out_slice(out, n * d, n * d)?.copy_from_slice(dir.as_slice());
        Ok(())
    })
}

/// MMD between `samples` (`n x d`) and `reference` (`m x d`), with the
/// bandwidth taken from the reference.
///
/// # Safety
/// The arrays must hold `n * d` and `m * d` values; `value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lsvgd_mmd(
    samples: *const f64,
    n: usize,
    reference: *const f64,
    m: usize,
    d: usize,
    value: *mut f64,
) -> LsvgdStatus {
    guard(|| {
        let a = matrix(samples, n, d)?;
        let b = matrix(reference, m, d)?;
        let v = mmd_to_reference(&a, &b)?;
        *value.as_mut().ok_or_else(null)? = v;
        Ok(())
    })
}

/// Parses a JSON experiment config. Missing fields take the defaults of the
/// named problem and method. The config is validated.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lsvgd_config_from_json(
    json: *const c_char,
    out: *mut *mut LsvgdConfig,
) -> LsvgdStatus {
    guard(|| {
        let value: serde_json::Value = serde_json::from_str(text(json)?)
            .map_err(|e| Fail(LsvgdStatus::Parse, e.to_string()))?;
        let cfg = ExperimentConfig::from_value(value)?;
        cfg.validate()?;
        put(out, LsvgdConfig { inner: cfg })
    })
}

/// # Safety
/// `cfg` must come from [`lsvgd_config_from_json`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn lsvgd_config_free(cfg: *mut LsvgdConfig) {
    free(cfg)
}

/// Runs the experiment and writes its output directory.
///
/// # Safety
/// `cfg` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lsvgd_run(cfg: *const LsvgdConfig, out: *mut *mut LsvgdRun) -> LsvgdStatus {
    guard(|| {
        let cfg = cfg.as_ref().ok_or_else(null)?;
        let result = run_experiment(&cfg.inner)?;
        put(out, LsvgdRun { inner: result })
    })
}

/// # Safety
/// `run` must come from [`lsvgd_run`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn lsvgd_run_free(run: *mut LsvgdRun) {
    free(run)
}

/// Number of particles in the final set.
///
/// # Safety
/// `run` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lsvgd_run_particle_count(run: *const LsvgdRun) -> usize {
    run.as_ref().map_or(0, |r| r.inner.particles.len())
}

/// # Safety
/// `run` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lsvgd_run_dim(run: *const LsvgdRun) -> usize {
    run.as_ref().map_or(0, |r| r.inner.particles.dim())
}

/// Online high-fidelity evaluations spent by the run.
///
/// # Safety
/// `run` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lsvgd_run_online_evals(run: *const LsvgdRun) -> u64 {
    run.as_ref().map_or(0, |r| r.inner.budget.online)
}

/// Offline (initial design) evaluations spent by the run.
///
/// # Safety
/// `run` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lsvgd_run_offline_evals(run: *const LsvgdRun) -> u64 {
    run.as_ref().map_or(0, |r| r.inner.budget.offline)
}

/// Copies the final particles (`count x dim`, row-major) into `buf`.
///
/// # Safety
/// `buf` must have room for `len` values.
#[no_mangle]
pub unsafe extern "C" fn lsvgd_run_particles(run: *const LsvgdRun, buf: *mut f64, len: usize) -> LsvgdStatus {
    guard(|| {
        let r = run.as_ref().ok_or_else(null)?;
        let p = r.inner.particles.points();
        out_slice(buf, len, p.rows() * p.cols())?.copy_from_slice(p.as_slice());
        Ok(())
    })
}

/// Copies the posterior mean (`dim` values) into `buf`.
///
/// # Safety
/// `buf` must have room for `len` values.
#[no_mangle]
pub unsafe extern "C" fn lsvgd_run_posterior_mean(run: *const LsvgdRun, buf: *mut f64, len: usize) -> LsvgdStatus {
    guard(|| {
        let r = run.as_ref().ok_or_else(null)?;
        let m = &r.inner.posterior_mean;
        out_slice(buf, len, m.len())?.copy_from_slice(m);
        Ok(())
    })
}
