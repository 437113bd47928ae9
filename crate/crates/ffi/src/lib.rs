//! C interface to fitted appliance-detection classifiers.
//!
//! Models are opaque `AdModel` handles created by [`ad_fit`],
//! [`ad_model_load`] or [`ad_model_from_bytes`] and released with
//! [`ad_model_free`]. Every fallible call returns an [`AdStatus`]; on failure
//! [`ad_last_error`] describes the most recent error on the calling thread.
//! Panics never cross the boundary: they are reported as `AD_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use appliance_detect::harness::{fit_classifier, ClassifierParams};
use appliance_detect::{ClassifierKind, Deadline, Error, ExperimentSplit, FittedClassifier, LabeledInstance, TimeSeries};

/// Result codes of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AdStatus {
    AdOk = 0,
    AdNullPointer = 1,
    AdValidation = 2,
    AdDimension = 3,
    AdParse = 4,
    AdIo = 5,
    AdTimeout = 6,
    AdRuntime = 7,
    AdPanic = 8,
}

/// A fitted classifier.
pub struct AdModel {
    inner: FittedClassifier,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> AdStatus {
    match err {
        Error::Dimension { .. } => AdStatus::AdDimension,
        Error::Validation(_) => AdStatus::AdValidation,
        Error::Parse { .. } => AdStatus::AdParse,
        Error::Timeout { .. } => AdStatus::AdTimeout,
        Error::Runtime(_) => AdStatus::AdRuntime,
        Error::Io(_) => AdStatus::AdIo,
    }
}

enum Failure {
    Null(&'static str),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

/// Runs `f`, converting errors and panics into a status and a message.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> AdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            AdStatus::AdOk
        }
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("{what} must not be NULL"));
            AdStatus::AdNullPointer
        }
        Ok(Err(Failure::Core(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal panic: {msg}"));
            AdStatus::AdPanic
        }
    }
}

fn non_null<T>(p: *const T, what: &'static str) -> Result<*const T, Failure> {
    if p.is_null() {
        Err(Failure::Null(what))
    } else {
        Ok(p)
    }
}

unsafe fn fitted<'a>(model: *const AdModel) -> Result<&'a FittedClassifier, Failure> {
    Ok(&(*non_null(model, "model")?).inner)
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &'static str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    Ok(std::slice::from_raw_parts(non_null(p, what)?, len))
}

unsafe fn utf8_path<'a>(p: *const c_char) -> Result<&'a str, Failure> {
    CStr::from_ptr(non_null(p, "path")?)
        .to_str()
        .map_err(|_| Failure::Core(Error::Validation("path is not valid UTF-8".into())))
}

unsafe fn publish(out: *mut *mut AdModel, inner: FittedClassifier) -> Result<(), Failure> {
    *out = Box::into_raw(Box::new(AdModel { inner }));
    Ok(())
}

fn instances(values: &[f64], labels: &[u8], n: usize, len: usize, tag: &str) -> Result<Vec<LabeledInstance>, Error> {
    let start = chrono::DateTime::UNIX_EPOCH;
    (0..n)
        .map(|i| {
            let series = TimeSeries::from_dense(start, 60, values[i * len..(i + 1) * len].to_vec(), format!("{tag}{i}"))?;
            LabeledInstance::new(series, labels[i], "ffi")
        })
        .collect()
}

/// Fits a classifier with default hyperparameters.
///
/// `train_values` holds `n_train` series of `series_len` values each, row
/// after row; `train_labels` holds one 0/1 label per series. The validation
/// set is only used by the neural classifiers and may be empty otherwise.
/// `kind` is a classifier name such as `"rocket"` or `"knn-euclid"`.
///
/// # Safety
/// Pointers must be valid for the given lengths; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ad_fit(
    kind: *const c_char,
    train_values: *const f64,
    train_labels: *const u8,
    n_train: usize,
    series_len: usize,
    val_values: *const f64,
    val_labels: *const u8,
    n_val: usize,
    seed: u64,
    out: *mut *mut AdModel,
) -> AdStatus {
    guard(|| {
        non_null(out, "out")?;
        let kind: ClassifierKind = CStr::from_ptr(non_null(kind, "kind")?)
            .to_str()
            .map_err(|_| Error::Validation("classifier name is not valid UTF-8".into()))?
            .parse()?;
        let total = |n: usize| {
            n.checked_mul(series_len).ok_or_else(|| Error::Validation("series count times length overflows".into()))
        };
        let train = instances(
            slice(train_values, total(n_train)?, "train_values")?,
            slice(train_labels, n_train, "train_labels")?,
            n_train,
            series_len,
            "train",
        )?;
        let validation = instances(
            slice(val_values, total(n_val)?, "val_values")?,
            slice(val_labels, n_val, "val_labels")?,
            n_val,
            series_len,
            "validation",
        )?;
        let split = ExperimentSplit { train, validation, test: Vec::new(), seed };
        let fitted = fit_classifier(kind, &split, &ClassifierParams::default(), seed, &Deadline::none())?;
        publish(out, fitted)
    })
}

/// Loads a model written by [`ad_model_save`] or the Rust API.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ad_model_load(path: *const c_char, out: *mut *mut AdModel) -> AdStatus {
    guard(|| {
        non_null(out, "out")?;
        publish(out, FittedClassifier::load(utf8_path(path)?)?)
    })
}

/// Decodes a model from an in-memory record.
///
/// # Safety
/// `data` must be valid for `len` bytes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ad_model_from_bytes(data: *const u8, len: usize, out: *mut *mut AdModel) -> AdStatus {
    guard(|| {
        non_null(out, "out")?;
        publish(out, FittedClassifier::from_bytes(slice(data, len, "data")?)?)
    })
}

/// Writes the model to `path`.
///
/// # Safety
/// `model` must come from this library; `path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn ad_model_save(model: *const AdModel, path: *const c_char) -> AdStatus {
    guard(|| Ok(fitted(model)?.save(utf8_path(path)?)?))
}

/// Length every scored series must have.
///
/// # Safety
/// `model` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ad_model_series_len(model: *const AdModel, out: *mut usize) -> AdStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = fitted(model)?.series_len();
        Ok(())
    })
}

/// Classifier name of the model as a static NUL-terminated string.
///
/// # Safety
/// `model` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ad_model_kind(model: *const AdModel, out: *mut *const c_char) -> AdStatus {
    guard(|| {
        non_null(out, "out")?;
        let kind = fitted(model)?.kind();
        let i = ClassifierKind::ALL.iter().position(|k| *k == kind).expect("every kind is listed");
        *out = KIND_NAMES[i].as_ptr();
        Ok(())
    })
}

const KIND_NAMES: [&CStr; 13] = [
    c"knn-euclid",
    c"knn-dtw",
    c"tsf",
    c"rise",
    c"boss",
    c"boss-ensemble",
    c"cboss",
    c"rocket",
    c"minirocket",
    c"arsenal",
    c"convnet",
    c"resnet",
    c"inceptiontime",
];

/// Score in [0, 1] of one series; 0.5 and above means the appliance is
/// present.
///
/// # Safety
/// `values` must be valid for `len` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ad_model_score(model: *const AdModel, values: *const f64, len: usize, out: *mut f64) -> AdStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = fitted(model)?.score_values(slice(values, len, "values")?)?;
        Ok(())
    })
}

/// Predicted 0/1 label of one series.
///
/// # Safety
/// `values` must be valid for `len` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ad_model_predict(model: *const AdModel, values: *const f64, len: usize, out: *mut u8) -> AdStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = fitted(model)?.predict_values(slice(values, len, "values")?)?;
        Ok(())
    })
}

/// Scores `n_series` consecutive series of the model's length into
/// `out_scores`.
///
/// # Safety
/// `values` must hold `n_series * series_len` doubles and `out_scores`
/// room for `n_series`.
#[no_mangle]
pub unsafe extern "C" fn ad_model_score_batch(
    model: *const AdModel,
    values: *const f64,
    n_series: usize,
    out_scores: *mut f64,
) -> AdStatus {
    guard(|| {
        let fitted = fitted(model)?;
        let len = fitted.series_len();
        let total = n_series
            .checked_mul(len)
            .ok_or_else(|| Error::Validation("series count times length overflows".into()))?;
        let values = slice(values, total, "values")?;
        if n_series > 0 {
            non_null(out_scores, "out_scores")?;
        }
        for i in 0..n_series {
            *out_scores.add(i) = fitted.score_values(&values[i * len..(i + 1) * len])?;
        }
        Ok(())
    })
}

/// Releases a model. NULL is ignored.
///
/// # Safety
/// `model` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ad_model_free(model: *mut AdModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Message of the last failed call on this thread, or NULL. The pointer is
/// valid until the next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn ad_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ad_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
