//! C ABI over the `cnnlstm` library.
//!
//! Handles are opaque pointers owned by the caller and released with the
//! matching `*_free` function. Every fallible call returns a
//! [`CnnlstmStatus`]; the message of the last failure on the calling thread
//! is available from [`cnnlstm_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use cnnlstm::gradcheck::{self, GradCheckOptions};
use cnnlstm::harness;
use cnnlstm::pipeline::{cache, PreparedData, SplitKind, WindowedDataset};
use cnnlstm::{Checkpoint, Error, Tensor};

/// Mirrors the CLI exit statuses, plus codes that only arise across the ABI.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CnnlstmStatus {
    Ok = 0,
    InputError = 2,
    Diverged = 3,
    Incompatible = 4,
    VerificationFailed = 5,
    NullPointer = 10,
    InvalidArgument = 11,
    Panic = 12,
}

/// Split selector for [`cnnlstm_evaluate`].
pub const CNNLSTM_SPLIT_TRAIN: u32 = 0;
pub const CNNLSTM_SPLIT_VALIDATION: u32 = 1;
pub const CNNLSTM_SPLIT_TEST: u32 = 2;

/// Price-space metrics of one split.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CnnlstmMetrics {
    pub explained_variance: f64,
    pub r2: f64,
    pub max_error: f64,
    pub samples: usize,
}

/// A loaded checkpoint: model parameters and frozen preprocessing.
pub struct CnnlstmCheckpoint {
    inner: Checkpoint,
}

/// A loaded prepared dataset with its windows built.
pub struct CnnlstmDataset {
    data: PreparedData,
    windows: WindowedDataset,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> CnnlstmStatus {
    match e.exit_code() {
        3 => CnnlstmStatus::Diverged,
        4 => CnnlstmStatus::Incompatible,
        5 => CnnlstmStatus::VerificationFailed,
        _ => CnnlstmStatus::InputError,
    }
}

fn fail(status: CnnlstmStatus, msg: impl Into<String>) -> CnnlstmStatus {
    set_error(msg.into());
    status
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), CnnlstmStatus>) -> CnnlstmStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CnnlstmStatus::Ok,
        Ok(Err(status)) => status,
        Err(_) => fail(CnnlstmStatus::Panic, "internal panic"),
    }
}

fn lib_err(e: Error) -> CnnlstmStatus {
    fail(status_of(&e), e.to_string())
}

unsafe fn path_arg(path: *const c_char) -> Result<PathBuf, CnnlstmStatus> {
    if path.is_null() {
        return Err(fail(CnnlstmStatus::NullPointer, "path is null"));
    }
    let s = CStr::from_ptr(path)
        .to_str()
        .map_err(|_| fail(CnnlstmStatus::InvalidArgument, "path is not valid UTF-8"))?;
    Ok(PathBuf::from(s))
}

unsafe fn handle<'a, T>(ptr: *const T, what: &str) -> Result<&'a T, CnnlstmStatus> {
    ptr.as_ref()
        .ok_or_else(|| fail(CnnlstmStatus::NullPointer, format!("{what} handle is null")))
}

/// Loads a checkpoint file. On success `*out` receives a new handle.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cnnlstm_checkpoint_load(
    path: *const c_char,
    out: *mut *mut CnnlstmCheckpoint,
) -> CnnlstmStatus {
    guard(|| {
        if out.is_null() {
            return Err(fail(CnnlstmStatus::NullPointer, "out is null"));
        }
        let path = path_arg(path)?;
        let inner = Checkpoint::load(&path).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(CnnlstmCheckpoint { inner }));
        Ok(())
    })
}

/// Releases a checkpoint handle. Null is ignored.
///
/// # Safety
/// `ptr` must come from [`cnnlstm_checkpoint_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cnnlstm_checkpoint_free(ptr: *mut CnnlstmCheckpoint) {
    if !ptr.is_null() {
        drop(Box::from_raw(ptr));
    }
}

/// Window length the model expects, or 0 for a null handle.
///
/// # Safety
/// `ptr` must be null or a live checkpoint handle.
#[no_mangle]
pub unsafe extern "C" fn cnnlstm_checkpoint_lookback(ptr: *const CnnlstmCheckpoint) -> usize {
    ptr.as_ref().map_or(0, |c| c.inner.model.config().lookback)
}

/// Input features per time step, or 0 for a null handle.
///
/// # Safety
/// `ptr` must be null or a live checkpoint handle.
#[no_mangle]
pub unsafe extern "C" fn cnnlstm_checkpoint_features(ptr: *const CnnlstmCheckpoint) -> usize {
    ptr.as_ref().map_or(0, |c| c.inner.model.config().features)
}

unsafe fn predict_window(
    ptr: *const CnnlstmCheckpoint,
    window: *const f64,
    len: usize,
) -> Result<f64, CnnlstmStatus> {
    let ck = &handle(ptr, "checkpoint")?.inner;
    if window.is_null() {
        return Err(fail(CnnlstmStatus::NullPointer, "window is null"));
    }
    let cfg = ck.model.config();
    let want = cfg.lookback * cfg.features;
    if len != want {
        return Err(fail(
            CnnlstmStatus::Incompatible,
            format!("window has {len} values, model expects {} x {} = {want}", cfg.lookback, cfg.features),
        ));
    }
    let values = std::slice::from_raw_parts(window, len).to_vec();
    let x = Tensor::new(vec![1, cfg.lookback, cfg.features], values).map_err(lib_err)?;
    let y = ck.model.predict(&x).map_err(lib_err)?;
    Ok(y.data()[0])
}

/// Predicts the scaled target for one window of model inputs laid out
/// row-major as `[lookback][features]` (already preprocessed).
///
/// # Safety
/// `window` must point to `len` doubles and `out` to one writable double.
#[no_mangle]
pub unsafe extern "C" fn cnnlstm_predict_scaled(
    ptr: *const CnnlstmCheckpoint,
    window: *const f64,
    len: usize,
    out: *mut f64,
) -> CnnlstmStatus {
    guard(|| {
        if out.is_null() {
            return Err(fail(CnnlstmStatus::NullPointer, "out is null"));
        }
        *out = predict_window(ptr, window, len)?;
        Ok(())
    })
}

/// Like [`cnnlstm_predict_scaled`] but maps the output back to a price.
///
/// # Safety
/// `window` must point to `len` doubles and `out` to one writable double.
#[no_mangle]
pub unsafe extern "C" fn cnnlstm_predict_price(
    ptr: *const CnnlstmCheckpoint,
    window: *const f64,
    len: usize,
    out: *mut f64,
) -> CnnlstmStatus {
    guard(|| {
        if out.is_null() {
            return Err(fail(CnnlstmStatus::NullPointer, "out is null"));
        }
        let scaled = predict_window(ptr, window, len)?;
        *out = (*ptr).inner.state.unscale_target(scaled);
        Ok(())
    })
}

/// Loads a prepared dataset file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cnnlstm_dataset_load(path: *const c_char, out: *mut *mut CnnlstmDataset) -> CnnlstmStatus {
    guard(|| {
        if out.is_null() {
            return Err(fail(CnnlstmStatus::NullPointer, "out is null"));
        }
        let path = path_arg(path)?;
        let data = cache::load(&path).map_err(lib_err)?;
        let windows = data.windows().map_err(lib_err)?;
        *out = Box::into_raw(Box::new(CnnlstmDataset { data, windows }));
        Ok(())
    })
}

/// Releases a dataset handle. Null is ignored.
///
/// # Safety
/// `ptr` must come from [`cnnlstm_dataset_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cnnlstm_dataset_free(ptr: *mut CnnlstmDataset) {
    if !ptr.is_null() {
        drop(Box::from_raw(ptr));
    }
}

/// Number of windows in the dataset, or 0 for a null handle.
///
/// # Safety
/// `ptr` must be null or a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn cnnlstm_dataset_samples(ptr: *const CnnlstmDataset) -> usize {
    ptr.as_ref().map_or(0, |d| d.windows.len())
}

/// Copies sample `index`'s model inputs (`lookback * features` doubles) into `out`.
///
/// # Safety
/// `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn cnnlstm_dataset_window(
    ptr: *const CnnlstmDataset,
    index: usize,
    out: *mut f64,
    len: usize,
) -> CnnlstmStatus {
    guard(|| {
        let d = handle(ptr, "dataset")?;
        if out.is_null() {
            return Err(fail(CnnlstmStatus::NullPointer, "out is null"));
        }
        let (x, _) = d.windows.batch(&[index]).map_err(lib_err)?;
        if x.len() != len {
            return Err(fail(
                CnnlstmStatus::InvalidArgument,
                format!("buffer holds {len} values, window has {}", x.len()),
            ));
        }
        std::ptr::copy_nonoverlapping(x.data().as_ptr(), out, len);
        Ok(())
    })
}

/// Metrics for one split (`CNNLSTM_SPLIT_*`) in price space.
///
/// # Safety
/// Handles must be live and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cnnlstm_evaluate(
    checkpoint: *const CnnlstmCheckpoint,
    dataset: *const CnnlstmDataset,
    split: u32,
    out: *mut CnnlstmMetrics,
) -> CnnlstmStatus {
    guard(|| {
        let ck = &handle(checkpoint, "checkpoint")?.inner;
        let d = handle(dataset, "dataset")?;
        if out.is_null() {
            return Err(fail(CnnlstmStatus::NullPointer, "out is null"));
        }
        let kind = match split {
            CNNLSTM_SPLIT_TRAIN => SplitKind::Train,
            CNNLSTM_SPLIT_VALIDATION => SplitKind::Validation,
            CNNLSTM_SPLIT_TEST => SplitKind::Test,
            _ => return Err(fail(CnnlstmStatus::InvalidArgument, format!("unknown split {split}"))),
        };
        cnnlstm::cli::ensure_compatible(ck, &d.data).map_err(lib_err)?;
        let (m, _) = harness::evaluate(&ck.model, &d.windows, kind, &ck.state).map_err(lib_err)?;
        *out = CnnlstmMetrics {
            explained_variance: m.explained_variance,
            r2: m.r2,
            max_error: m.max_error,
            samples: m.samples,
        };
        Ok(())
    })
}

/// Runs the per-layer and full-stack gradient checks for `seed`. Writes the
/// worst relative error to `out_max_error` (may be null) and returns
/// `VerificationFailed` when it is not below 1e-5.
///
/// # Safety
/// `out_max_error` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn cnnlstm_gradcheck(seed: u64, out_max_error: *mut f64) -> CnnlstmStatus {
    guard(|| {
        let reports = gradcheck::run_all(seed, GradCheckOptions::default()).map_err(lib_err)?;
        let worst = reports.iter().map(|r| r.max_relative_error()).fold(0.0, f64::max);
        if !out_max_error.is_null() {
            *out_max_error = worst;
        }
        if worst < gradcheck::DEFAULT_TOLERANCE {
            Ok(())
        } else {
            Err(fail(
                CnnlstmStatus::VerificationFailed,
                format!("max relative error {worst:e}"),
            ))
        }
    })
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn cnnlstm_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cnnlstm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
