//! C interface to tensorgen.
//!
//! Datasets and models cross the boundary as opaque handles that the caller
//! frees with the matching `*_free` function. Every entry point returns a
//! [`TgStatus`]; on failure a message is available from
//! [`tg_last_error_message`] on the same thread until the next failing call.
//! Panics are caught and reported as `TG_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use tensorgen::evaluate::{mmd_unbiased, Bandwidth, ForestSettings, DEFAULT_TEST_FRACTION};
use tensorgen::model::{fit_baseline, BaselineModel, NbmFile};
use tensorgen::{classifier_two_sample_test, fit_model, BinaryDataset, Error, FitOptions, NaiveBayesModel};

/// Binary data matrix with named features.
pub struct TgDataset(BinaryDataset);

/// Naive Bayes mixture model.
pub struct TgModel(NaiveBayesModel);

/// Independent-features baseline.
pub struct TgBaseline(BaselineModel);

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TgStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    DimensionMismatch = 5,
    RankDeficient = 6,
    Numerical = 7,
    Panic = 8,
}

/// Result of the classifier two-sample test. The positive class is the
/// synthetic sample.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TgEvalReport {
    pub accuracy: f64,
    pub recall: f64,
    pub precision: f64,
    pub specificity: f64,
    pub mmd: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> TgStatus {
    match e.root() {
        Error::Io { .. } => TgStatus::Io,
        Error::Parse { .. }
        | Error::RaggedRow { .. }
        | Error::NonBinaryToken { .. }
        | Error::EmptyBody
        | Error::DuplicateFeature(_)
        | Error::EmptyFeatureName(_)
        | Error::ModelFormat { .. } => TgStatus::Parse,
        Error::DimensionMismatch { .. } | Error::FeatureMismatch { .. } => TgStatus::DimensionMismatch,
        Error::RankDeficient { .. } => TgStatus::RankDeficient,
        Error::EigenFailure | Error::NonSymmetricTensor(_) | Error::DeflationFailure { .. } => TgStatus::Numerical,
        _ => TgStatus::InvalidArgument,
    }
}

struct Fail(TgStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(TgStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> TgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => TgStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            TgStatus::Panic
        }
    }
}

unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn c_path<'a>(p: *const c_char) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null("path"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(TgStatus::InvalidArgument, "path is not valid UTF-8".into()))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("output handle"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn copy_out(src: &[f64], out: *mut f64, len: usize) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("output buffer"));
    }
    if len != src.len() {
        return Err(Fail(
            TgStatus::InvalidArgument,
            format!("output buffer holds {len} values, {} needed", src.len()),
        ));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), out, len);
    Ok(())
}

/// Message describing the last failure on this thread, or null if none.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn tg_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Reads a headered 0/1 CSV file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn tg_dataset_load_csv(path: *const c_char, out: *mut *mut TgDataset) -> TgStatus {
    guard(|| {
        let data = tensorgen::dataset::load_csv(c_path(path)?)?;
        put(out, TgDataset(data))
    })
}

/// Builds a dataset from a row-major `rows` x `cols` array of 0/1 bytes.
/// Features are named `f0`, `f1`, ... Any other byte value is rejected.
///
/// # Safety
/// `values` must point to `rows * cols` readable bytes.
#[no_mangle]
pub unsafe extern "C" fn tg_dataset_from_rows(
    values: *const u8,
    rows: usize,
    cols: usize,
    out: *mut *mut TgDataset,
) -> TgStatus {
    guard(|| {
        if values.is_null() {
            return Err(null("values"));
        }
        let len = rows
            .checked_mul(cols)
            .ok_or_else(|| Fail(TgStatus::InvalidArgument, "rows * cols overflows".into()))?;
        let flat = std::slice::from_raw_parts(values, len);
        if let Some(pos) = flat.iter().position(|&v| v > 1) {
            return Err(Fail(
                TgStatus::InvalidArgument,
                format!("row {}, column {}: value {} is not 0 or 1", pos / cols, pos % cols, flat[pos]),
            ));
        }
        let chunks: Vec<&[u8]> = flat.chunks(cols.max(1)).take(rows).collect();
        let data = BinaryDataset::from_rows(BinaryDataset::default_names(cols), &chunks)?;
        put(out, TgDataset(data))
    })
}

/// # Safety
/// `data` must be a live dataset handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn tg_dataset_save_csv(data: *const TgDataset, path: *const c_char) -> TgStatus {
    guard(|| {
        borrow(data, "dataset")?.0.save_csv(c_path(path)?)?;
        Ok(())
    })
}

/// Number of rows, or 0 for a null handle.
///
/// # Safety
/// `data` must be null or a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn tg_dataset_rows(data: *const TgDataset) -> usize {
    data.as_ref().map_or(0, |d| d.0.n_rows())
}

/// Number of features, or 0 for a null handle.
///
/// # Safety
/// `data` must be null or a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn tg_dataset_cols(data: *const TgDataset) -> usize {
    data.as_ref().map_or(0, |d| d.0.n_cols())
}

/// # Safety
/// `data` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tg_dataset_free(data: *mut TgDataset) {
    if !data.is_null() {
        drop(Box::from_raw(data));
    }
}

/// Fits a `k`-component mixture: spectral initialisation then EM, with
/// default options.
///
/// # Safety
/// `data` must be a live dataset handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn tg_model_fit(data: *const TgDataset, k: usize, seed: u64, out: *mut *mut TgModel) -> TgStatus {
    guard(|| {
        let (model, _) = fit_model(&borrow(data, "dataset")?.0, k, &FitOptions::seeded(seed))?;
        put(out, TgModel(model))
    })
}

/// Reads a mixture `.nbm` file. Baseline files are rejected.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn tg_model_load(path: *const c_char, out: *mut *mut TgModel) -> TgStatus {
    guard(|| match NbmFile::load(c_path(path)?)? {
        NbmFile::Mixture(m) => put(out, TgModel(m)),
        NbmFile::Baseline(_) => Err(Fail(TgStatus::InvalidArgument, "file holds a baseline model".into())),
    })
}

/// # Safety
/// `model` must be a live model handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn tg_model_save(model: *const TgModel, path: *const c_char) -> TgStatus {
    guard(|| {
        NbmFile::Mixture(borrow(model, "model")?.0.clone()).save(c_path(path)?)?;
        Ok(())
    })
}

/// Number of components, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live model handle.
#[no_mangle]
pub unsafe extern "C" fn tg_model_k(model: *const TgModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.k())
}

/// Number of features, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live model handle.
#[no_mangle]
pub unsafe extern "C" fn tg_model_d(model: *const TgModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.d())
}

/// Copies the `k` mixing weights into `out`; `len` must equal `k`.
///
/// # Safety
/// `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn tg_model_weights(model: *const TgModel, out: *mut f64, len: usize) -> TgStatus {
    guard(|| copy_out(borrow(model, "model")?.0.weights(), out, len))
}

/// Copies the `d` x `k` conditional probabilities into `out`, row-major
/// (feature by feature); `len` must equal `d * k`.
///
/// # Safety
/// `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn tg_model_cond_probs(model: *const TgModel, out: *mut f64, len: usize) -> TgStatus {
    guard(|| {
        let p = borrow(model, "model")?.0.cond_probs();
        let flat: Vec<f64> = p.row_iter().flat_map(|r| r.iter().copied().collect::<Vec<_>>()).collect();
        copy_out(&flat, out, len)
    })
}

/// Draws `m` rows. The output depends only on the model, `m` and `seed`.
///
/// # Safety
/// `model` must be a live model handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn tg_model_sample(model: *const TgModel, m: usize, seed: u64, out: *mut *mut TgDataset) -> TgStatus {
    guard(|| {
        let data = borrow(model, "model")?.0.sample(m, seed)?;
        put(out, TgDataset(data))
    })
}

/// Total log-likelihood of `data` under `model`.
///
/// # Safety
/// Both handles must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tg_model_log_likelihood(model: *const TgModel, data: *const TgDataset, out: *mut f64) -> TgStatus {
    guard(|| {
        let ll = borrow(model, "model")?.0.log_likelihood(&borrow(data, "dataset")?.0)?;
        if out.is_null() {
            return Err(null("output"));
        }
        *out = ll;
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tg_model_free(model: *mut TgModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Fits the independent-features baseline (column frequencies).
///
/// # Safety
/// `data` must be a live dataset handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn tg_baseline_fit(data: *const TgDataset, out: *mut *mut TgBaseline) -> TgStatus {
    guard(|| {
        let b = fit_baseline(&borrow(data, "dataset")?.0);
        put(out, TgBaseline(b))
    })
}

/// # Safety
/// `baseline` must be a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn tg_baseline_sample(
    baseline: *const TgBaseline,
    m: usize,
    seed: u64,
    out: *mut *mut TgDataset,
) -> TgStatus {
    guard(|| {
        let data = borrow(baseline, "baseline")?.0.sample(m, seed)?;
        put(out, TgDataset(data))
    })
}

/// # Safety
/// `baseline` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tg_baseline_free(baseline: *mut TgBaseline) {
    if !baseline.is_null() {
        drop(Box::from_raw(baseline));
    }
}

/// Classifier two-sample test with the default 200-tree forest and a 0.3
/// test fraction. The positive class is `synth`.
///
/// # Safety
/// Both handles must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tg_evaluate(
    real: *const TgDataset,
    synth: *const TgDataset,
    seed: u64,
    out: *mut TgEvalReport,
) -> TgStatus {
    guard(|| {
        let r = classifier_two_sample_test(
            &borrow(real, "real")?.0,
            &borrow(synth, "synth")?.0,
            &ForestSettings::default(),
            DEFAULT_TEST_FRACTION,
            seed,
        )?;
        if out.is_null() {
            return Err(null("output"));
        }
        *out = TgEvalReport {
            accuracy: r.accuracy,
            recall: r.recall,
            precision: r.precision,
            specificity: r.specificity,
            mmd: r.mmd,
        };
        Ok(())
    })
}

/// Unbiased squared MMD with a Gaussian kernel. A `bandwidth` of zero or
/// less selects the median heuristic.
///
/// # Safety
/// Both handles must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tg_mmd_unbiased(a: *const TgDataset, b: *const TgDataset, bandwidth: f64, out: *mut f64) -> TgStatus {
    guard(|| {
        let bw = if bandwidth > 0.0 { Bandwidth::Fixed(bandwidth) } else { Bandwidth::Median };
        let v = mmd_unbiased(&borrow(a, "a")?.0, &borrow(b, "b")?.0, bw)?;
        if out.is_null() {
            return Err(null("output"));
        }
        *out = v;
        Ok(())
    })
}
