//! C ABI over the qrex library.
//!
//! Objects cross the boundary as opaque handles that the caller releases
//! with the matching `*_free` function. Every fallible call returns a
//! [`QrexStatus`]; the message of the last failure on the calling thread is
//! available from [`qrex_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use qrex::harness::{emit_csv, run_experiment, AggregateResult, ExperimentConfig};
use qrex::{oracle, Error, TabularModel};

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QrexStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Config = 3,
    Model = 4,
    Runtime = 5,
    Io = 6,
    UnknownMetric = 7,
    BufferTooSmall = 8,
    Panic = 9,
}

/// A parsed experiment configuration.
pub struct QrexConfig(ExperimentConfig);

/// The outcome of running an experiment over all its seeds.
pub struct QrexResult(AggregateResult);

/// A finite MDP with its discount factor.
pub struct QrexModel(TabularModel);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

struct Failure(QrexStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::Config(_) | Error::Parse(_) | Error::Dimension { .. } => QrexStatus::Config,
            Error::Model(_) => QrexStatus::Model,
            Error::Io(_) => QrexStatus::Io,
            _ => QrexStatus::Runtime,
        };
        Failure(status, e.to_string())
    }
}

fn guard(body: impl FnOnce() -> Result<(), Failure>) -> QrexStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => QrexStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside qrex".into());
            QrexStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(QrexStatus::NullArgument, format!("{what} is null"))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(QrexStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn out_ptr<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

/// Message of the last failure on this thread, or null if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn qrex_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn qrex_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses a TOML configuration. On success `*out` owns a new handle.
///
/// # Safety
/// `toml` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qrex_config_parse(toml: *const c_char, out: *mut *mut QrexConfig) -> QrexStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let cfg = ExperimentConfig::parse(text(toml, "toml")?, &[])?;
        *out = Box::into_raw(Box::new(QrexConfig(cfg)));
        Ok(())
    })
}

/// Sets one configuration field, e.g. `("eta", "0.1")`. Keys are the full
/// field names as echoed by [`qrex_config_to_toml`]. The handle is left
/// unchanged on failure.
///
/// # Safety
/// `config` must be a live handle; `key` and `value` nul-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn qrex_config_set(
    config: *mut QrexConfig,
    key: *const c_char,
    value: *const c_char,
) -> QrexStatus {
    guard(|| {
        let cfg = out_ptr(config, "config")?;
        let item = format!("{}={}", text(key, "key")?, text(value, "value")?);
        let mut table = cfg.0.to_toml();
        let key = text(key, "key")?;
        // drop the echoed value so the override is not a duplicate
        table = table
            .lines()
            .filter(|l| l.split('=').next().map(str::trim) != Some(key))
            .collect::<Vec<_>>()
            .join("\n");
        cfg.0 = ExperimentConfig::parse(&table, &[item])?;
        Ok(())
    })
}

/// Writes the effective configuration as TOML into `buf` (nul-terminated).
/// `*needed` receives the required size including the terminator; when
/// `cap` is too small nothing is written and `BufferTooSmall` is returned.
///
/// # Safety
/// `config` must be a live handle, `buf` valid for `cap` bytes (or null when
/// `cap` is 0) and `needed` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qrex_config_to_toml(
    config: *const QrexConfig,
    buf: *mut c_char,
    cap: usize,
    needed: *mut usize,
) -> QrexStatus {
    guard(|| {
        let cfg = handle(config, "config")?;
        let needed = out_ptr(needed, "needed")?;
        let s = cfg.0.to_toml();
        *needed = s.len() + 1;
        if cap < *needed {
            return Err(Failure(QrexStatus::BufferTooSmall, format!("need {} bytes", *needed)));
        }
        if buf.is_null() {
            return Err(null("buf"));
        }
        ptr::copy_nonoverlapping(s.as_ptr(), buf.cast(), s.len());
        *buf.add(s.len()) = 0;
        Ok(())
    })
}

/// Releases a configuration. Null is ignored.
///
/// # Safety
/// `config` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn qrex_config_free(config: *mut QrexConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Runs every seed of the experiment on up to `jobs` threads.
///
/// # Safety
/// `config` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qrex_run(config: *const QrexConfig, jobs: usize, out: *mut *mut QrexResult) -> QrexStatus {
    guard(|| {
        let cfg = handle(config, "config")?;
        let out = out_ptr(out, "out")?;
        let result = run_experiment(&cfg.0, jobs)?;
        *out = Box::into_raw(Box::new(QrexResult(result)));
        Ok(())
    })
}

/// Number of seeds in the result.
///
/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qrex_result_num_seeds(result: *const QrexResult) -> usize {
    result.as_ref().map_or(0, |r| r.0.runs.len())
}

/// Number of seeds that diverged.
///
/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qrex_result_num_diverged(result: *const QrexResult) -> usize {
    result.as_ref().map_or(0, |r| r.0.diverged_seeds().len())
}

unsafe fn metric_of<'a>(result: &QrexResult, metric: *const c_char) -> Result<&'a str, Failure> {
    let name = text(metric, "metric")?;
    if result.0.metric_index(name).is_none() {
        return Err(Failure(
            QrexStatus::UnknownMetric,
            format!("metric `{name}` was not recorded"),
        ));
    }
    Ok(name)
}

/// Mean over seeds of `metric` at each seed's last checkpoint.
///
/// # Safety
/// `result` must be a live handle, `metric` nul-terminated and `mean` valid.
#[no_mangle]
pub unsafe extern "C" fn qrex_result_final_mean(
    result: *const QrexResult,
    metric: *const c_char,
    mean: *mut f64,
) -> QrexStatus {
    guard(|| {
        let r = handle(result, "result")?;
        let name = metric_of(r, metric)?;
        let mean = out_ptr(mean, "mean")?;
        let v = r.0.final_values(name);
        *mean = v.iter().sum::<f64>() / v.len() as f64;
        Ok(())
    })
}

/// Copies the mean curve of `metric` into caller arrays of length `cap`.
/// `*len` receives the number of points; when it exceeds `cap` nothing is
/// copied and `BufferTooSmall` is returned. `stderr` may be null.
///
/// # Safety
/// `result` must be a live handle, `metric` nul-terminated, `x` and `mean`
/// valid for `cap` elements, `stderr` null or valid for `cap` elements and
/// `len` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qrex_result_curve(
    result: *const QrexResult,
    metric: *const c_char,
    x: *mut u64,
    mean: *mut f64,
    stderr: *mut f64,
    cap: usize,
    len: *mut usize,
) -> QrexStatus {
    guard(|| {
        let r = handle(result, "result")?;
        let name = metric_of(r, metric)?;
        let len = out_ptr(len, "len")?;
        let curve = r.0.curve(name);
        *len = curve.len();
        if curve.len() > cap {
            return Err(Failure(
                QrexStatus::BufferTooSmall,
                format!("need {} points", curve.len()),
            ));
        }
        if curve.is_empty() {
            return Ok(());
        }
        if x.is_null() || mean.is_null() {
            return Err(null("x or mean"));
        }
        for (i, p) in curve.iter().enumerate() {
            *x.add(i) = p.x;
            *mean.add(i) = p.mean;
            if !stderr.is_null() {
                *stderr.add(i) = p.stderr;
            }
        }
        Ok(())
    })
}

/// Writes the result as CSV to `path`.
///
/// # Safety
/// `result` must be a live handle and `path` nul-terminated.
#[no_mangle]
pub unsafe extern "C" fn qrex_result_write_csv(result: *const QrexResult, path: *const c_char) -> QrexStatus {
    guard(|| {
        let r = handle(result, "result")?;
        emit_csv(&r.0, text(path, "path")?.as_ref())?;
        Ok(())
    })
}

/// Releases a result. Null is ignored.
///
/// # Safety
/// `result` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn qrex_result_free(result: *mut QrexResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// Parses a tabular model in the library's text format.
///
/// # Safety
/// `model_text` must be nul-terminated and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qrex_model_parse(model_text: *const c_char, out: *mut *mut QrexModel) -> QrexStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let model = TabularModel::parse(text(model_text, "text")?)?;
        *out = Box::into_raw(Box::new(QrexModel(model)));
        Ok(())
    })
}

/// Number of states, or 0 for null.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qrex_model_num_states(model: *const QrexModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.num_states())
}

/// Number of actions, or 0 for null.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qrex_model_num_actions(model: *const QrexModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.num_actions())
}

/// Optimal Q-values by value iteration, row-major over (state, action),
/// into `q` of length `cap` (at least states × actions).
///
/// # Safety
/// `model` must be a live handle and `q` valid for `cap` elements.
#[no_mangle]
pub unsafe extern "C" fn qrex_model_optimal_q(
    model: *const QrexModel,
    tol: f64,
    max_iters: usize,
    q: *mut f64,
    cap: usize,
) -> QrexStatus {
    guard(|| {
        let m = handle(model, "model")?;
        let n = m.0.num_states() * m.0.num_actions();
        if cap < n {
            return Err(Failure(QrexStatus::BufferTooSmall, format!("need {n} values")));
        }
        if q.is_null() {
            return Err(null("q"));
        }
        let values = oracle::value_iteration(&m.0, tol, max_iters)?;
        ptr::copy_nonoverlapping(values.as_ptr(), q, n);
        Ok(())
    })
}

/// Releases a model. Null is ignored.
///
/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn qrex_model_free(model: *mut QrexModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}
