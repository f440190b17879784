//! C ABI over `gridscan`.
//!
//! Objects cross the boundary as opaque handles created by `gs_*_new`-style
//! functions and released with the matching `gs_*_free`. Every fallible call
//! returns a [`GsStatus`]; on failure `gs_last_error_message` describes the
//! most recent error on the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, c_void, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use gridscan::dataset::{
    generate_synthetic_year, load_csv, AttributeKind, OperatingPointSet, SyntheticYearConfig,
};
use gridscan::oracles::{OracleKind, StabilityModel, StabilityOracle};
use gridscan::scanning::{compare_full_vs_fast, fast_scan, OracleConfig, ScanConfig, ScanReport};
use gridscan::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidConfig = 3,
    InvalidData = 4,
    Io = 5,
    Oracle = 6,
    BufferTooSmall = 7,
    Panic = 8,
    Internal = 9,
}

/// Normalized operating points.
pub struct GsDataset {
    set: OperatingPointSet,
    informative: Option<Vec<usize>>,
}

/// A stability oracle with evaluation counting.
pub struct GsOracle {
    inner: StabilityOracle,
}

/// Result of a fast scan or a full-versus-fast comparison.
pub struct GsReport {
    inner: ScanReport,
}

/// Stability index callback. Writes the index of the `dim`-long normalized
/// point to `out` and returns 0, or returns non-zero on failure. May be
/// called concurrently from several threads.
pub type GsStabilityFn = Option<
    unsafe extern "C" fn(user_data: *mut c_void, point: *const f64, dim: usize, out: *mut f64) -> c_int,
>;

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(GsStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::InvalidConfig(_) | Error::Json(_) => GsStatus::InvalidConfig,
            Error::Io { .. } => GsStatus::Io,
            Error::Oracle(_) => GsStatus::Oracle,
            Error::Parse { .. }
            | Error::Csv(_)
            | Error::NonFinite { .. }
            | Error::InvalidData(_)
            | Error::DimensionMismatch { .. }
            | Error::TooManyClusters { .. }
            | Error::DegeneratePrediction(_)
            | Error::TrainingTooSmall { .. }
            | Error::NoPositiveWeight
            | Error::EmptyPoints
            | Error::EmptyCluster(_) => GsStatus::InvalidData,
        };
        Failure(status, e.to_string())
    }
}

fn fail(status: GsStatus, msg: impl Into<String>) -> Failure {
    Failure(status, msg.into())
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> GsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => GsStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(&format!("panic: {msg}"));
            GsStatus::Panic
        }
    }
}

unsafe fn non_null<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| fail(GsStatus::NullPointer, format!("{what} is null")))
}

unsafe fn opt_str<'a>(p: *const c_char, what: &str) -> Result<Option<&'a str>, Failure> {
    if p.is_null() {
        return Ok(None);
    }
    CStr::from_ptr(p)
        .to_str()
        .map(Some)
        .map_err(|_| fail(GsStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

fn parse_json<T: serde::de::DeserializeOwned + Default>(text: Option<&str>) -> Result<T, Failure> {
    match text {
        None => Ok(T::default()),
        Some(t) => serde_json::from_str(t).map_err(|e| fail(GsStatus::InvalidConfig, e.to_string())),
    }
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(fail(GsStatus::NullPointer, "output pointer is null"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn free<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Message of the last failed call on this thread, or NULL. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn gs_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn gs_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Release a string returned by this library.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn gs_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Generate a synthetic year. `config_json` may be NULL for the defaults.
///
/// # Safety
/// `config_json` is NULL or a NUL-terminated string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn gs_dataset_generate(config_json: *const c_char, out: *mut *mut GsDataset) -> GsStatus {
    guard(|| {
        let cfg: SyntheticYearConfig = parse_json(opt_str(config_json, "config_json")?)?;
        let year = generate_synthetic_year(&cfg)?;
        put(
            out,
            GsDataset {
                set: year.set,
                informative: Some(year.informative),
            },
        )
    })
}

/// Load `hour,<attr>...` CSV.
///
/// # Safety
/// `path` is a NUL-terminated string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn gs_dataset_load_csv(path: *const c_char, out: *mut *mut GsDataset) -> GsStatus {
    guard(|| {
        let path = opt_str(path, "path")?.ok_or_else(|| fail(GsStatus::NullPointer, "path is null"))?;
        put(
            out,
            GsDataset {
                set: load_csv(path)?,
                informative: None,
            },
        )
    })
}

/// Normalize a row-major `n_rows x n_cols` matrix of raw values. Rows are
/// hours `0..n_rows`; attributes are named `a0`, `a1`, ...
///
/// # Safety
/// `values` points to `n_rows * n_cols` doubles; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn gs_dataset_from_rows(
    values: *const f64,
    n_rows: usize,
    n_cols: usize,
    out: *mut *mut GsDataset,
) -> GsStatus {
    guard(|| {
        if values.is_null() {
            return Err(fail(GsStatus::NullPointer, "values is null"));
        }
        let len = n_rows
            .checked_mul(n_cols)
            .ok_or_else(|| fail(GsStatus::InvalidArgument, "matrix size overflows"))?;
        let flat = std::slice::from_raw_parts(values, len);
        let raw: Vec<Vec<f64>> = flat.chunks(n_cols.max(1)).map(<[f64]>::to_vec).collect();
        let columns = (0..n_cols).map(|j| (format!("a{j}"), AttributeKind::Other)).collect();
        put(
            out,
            GsDataset {
                set: OperatingPointSet::normalize(&raw, columns)?,
                informative: None,
            },
        )
    })
}

/// Number of hours, or 0 for NULL.
///
/// # Safety
/// `ds` is NULL or a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn gs_dataset_len(ds: *const GsDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.set.len())
}

/// Number of attributes, or 0 for NULL.
///
/// # Safety
/// `ds` is NULL or a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn gs_dataset_n_attributes(ds: *const GsDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.set.n_attributes())
}

/// Copy the normalized row `i` into `out` (`len >= n_attributes`).
///
/// # Safety
/// `ds` is a live handle; `out` points to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn gs_dataset_row(ds: *const GsDataset, i: usize, out: *mut f64, len: usize) -> GsStatus {
    guard(|| {
        let ds = non_null(ds, "dataset")?;
        if i >= ds.set.len() {
            return Err(fail(GsStatus::InvalidArgument, format!("row {i} out of range")));
        }
        copy_out(ds.set.row(i), out, len)
    })
}

/// # Safety
/// `ds` is NULL or a live handle not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn gs_dataset_free(ds: *mut GsDataset) {
    free(ds)
}

/// Build one of the analytic oracles from an oracle config document
/// (`{"model": {"kind": ...}, "delay_ms": ...}`); NULL selects the damping
/// surrogate over the dataset's informative attributes.
///
/// # Safety
/// `ds` is a live handle; `config_json` is NULL or NUL-terminated; `out` is
/// writable.
#[no_mangle]
pub unsafe extern "C" fn gs_oracle_new(
    ds: *const GsDataset,
    config_json: *const c_char,
    out: *mut *mut GsOracle,
) -> GsStatus {
    guard(|| {
        let ds = non_null(ds, "dataset")?;
        let cfg: OracleConfig = parse_json(opt_str(config_json, "config_json")?)?;
        let inner = cfg.build(&ds.set, ds.informative.as_deref())?;
        put(out, GsOracle { inner })
    })
}

struct Callback {
    f: unsafe extern "C" fn(*mut c_void, *const f64, usize, *mut f64) -> c_int,
    user_data: usize,
}

impl StabilityModel for Callback {
    fn kind(&self) -> OracleKind {
        OracleKind::External
    }

    fn index(&self, point: &[f64]) -> gridscan::Result<f64> {
        let mut value = f64::NAN;
        // SAFETY: the caller of `gs_oracle_from_callback` vouches for `f`
        // and `user_data` for the lifetime of the oracle.
        let rc = unsafe { (self.f)(self.user_data as *mut c_void, point.as_ptr(), point.len(), &mut value) };
        if rc == 0 {
            Ok(value)
        } else {
            Err(Error::Oracle(format!("callback returned {rc}")))
        }
    }
}

/// Wrap a caller-supplied stability function. `delay_ms` adds an artificial
/// cost per evaluation.
///
/// # Safety
/// `callback` and `user_data` must stay valid, and be safe to use from
/// several threads, until the oracle is freed.
#[no_mangle]
pub unsafe extern "C" fn gs_oracle_from_callback(
    callback: GsStabilityFn,
    user_data: *mut c_void,
    delay_ms: f64,
    out: *mut *mut GsOracle,
) -> GsStatus {
    guard(|| {
        let f = callback.ok_or_else(|| fail(GsStatus::NullPointer, "callback is null"))?;
        if !(delay_ms >= 0.0 && delay_ms.is_finite()) {
            return Err(fail(GsStatus::InvalidArgument, "delay_ms must be non-negative"));
        }
        let inner = StabilityOracle::new(Callback {
            f,
            user_data: user_data as usize,
        })
        .with_delay(std::time::Duration::from_secs_f64(delay_ms / 1000.0));
        put(out, GsOracle { inner })
    })
}

/// Evaluate the oracle at one normalized point.
///
/// # Safety
/// `oracle` is live; `point` holds `dim` doubles; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn gs_oracle_evaluate(
    oracle: *const GsOracle,
    point: *const f64,
    dim: usize,
    out: *mut f64,
) -> GsStatus {
    guard(|| {
        let oracle = non_null(oracle, "oracle")?;
        if point.is_null() || out.is_null() {
            return Err(fail(GsStatus::NullPointer, "point or out is null"));
        }
        *out = oracle.inner.evaluate(std::slice::from_raw_parts(point, dim))?;
        Ok(())
    })
}

/// Evaluations performed so far, or 0 for NULL.
///
/// # Safety
/// `oracle` is NULL or live.
#[no_mangle]
pub unsafe extern "C" fn gs_oracle_eval_count(oracle: *const GsOracle) -> u64 {
    oracle.as_ref().map_or(0, |o| o.inner.eval_count())
}

/// # Safety
/// `oracle` is NULL or a live handle not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn gs_oracle_free(oracle: *mut GsOracle) {
    free(oracle)
}

/// Feature selection, clustering and centroid evaluation. `config_json` is a
/// scan config document or NULL for the defaults; its `oracle` section is
/// ignored in favour of `oracle`.
///
/// # Safety
/// Handles are live; `config_json` is NULL or NUL-terminated; `out` is
/// writable.
#[no_mangle]
pub unsafe extern "C" fn gs_fast_scan(
    ds: *const GsDataset,
    oracle: *const GsOracle,
    config_json: *const c_char,
    out: *mut *mut GsReport,
) -> GsStatus {
    guard(|| {
        let ds = non_null(ds, "dataset")?;
        let oracle = non_null(oracle, "oracle")?;
        let cfg: ScanConfig = parse_json(opt_str(config_json, "config_json")?)?;
        let inner = fast_scan(&ds.set, &oracle.inner, &cfg)?;
        put(out, GsReport { inner })
    })
}

/// Full scan plus fast scan, validation and speed-up.
///
/// # Safety
/// As for [`gs_fast_scan`].
#[no_mangle]
pub unsafe extern "C" fn gs_compare(
    ds: *const GsDataset,
    oracle: *const GsOracle,
    config_json: *const c_char,
    out: *mut *mut GsReport,
) -> GsStatus {
    guard(|| {
        let ds = non_null(ds, "dataset")?;
        let oracle = non_null(oracle, "oracle")?;
        let cfg: ScanConfig = parse_json(opt_str(config_json, "config_json")?)?;
        let (inner, _) = compare_full_vs_fast(&ds.set, &oracle.inner, &cfg, None)?;
        put(out, GsReport { inner })
    })
}

unsafe fn copy_out<T: Copy>(src: &[T], out: *mut T, len: usize) -> Result<(), Failure> {
    if out.is_null() {
        return Err(fail(GsStatus::NullPointer, "output buffer is null"));
    }
    if len < src.len() {
        return Err(fail(
            GsStatus::BufferTooSmall,
            format!("buffer holds {len}, need {}", src.len()),
        ));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), out, src.len());
    Ok(())
}

/// Number of hours covered by the report, or 0 for NULL.
///
/// # Safety
/// `report` is NULL or live.
#[no_mangle]
pub unsafe extern "C" fn gs_report_len(report: *const GsReport) -> usize {
    report.as_ref().map_or(0, |r| r.inner.hours.len())
}

/// Number of clusters, or 0 for NULL.
///
/// # Safety
/// `report` is NULL or live.
#[no_mangle]
pub unsafe extern "C" fn gs_report_k_final(report: *const GsReport) -> usize {
    report.as_ref().map_or(0, |r| r.inner.k_final)
}

/// Whether feature selection and clustering both converged.
///
/// # Safety
/// `report` is NULL or live.
#[no_mangle]
pub unsafe extern "C" fn gs_report_converged(report: *const GsReport) -> bool {
    report.as_ref().is_some_and(|r| r.inner.converged())
}

/// Full-over-fast speed-up, or NaN when the report has no full scan.
///
/// # Safety
/// `report` is NULL or live.
#[no_mangle]
pub unsafe extern "C" fn gs_report_speedup(report: *const GsReport) -> f64 {
    report.as_ref().and_then(|r| r.inner.speedup).unwrap_or(f64::NAN)
}

/// Copy the per-hour estimates into `out` (`len >= gs_report_len`).
///
/// # Safety
/// `report` is live; `out` points to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn gs_report_lambda_hat(report: *const GsReport, out: *mut f64, len: usize) -> GsStatus {
    guard(|| copy_out(&non_null(report, "report")?.inner.lambda_hat, out, len))
}

/// Copy the per-hour cluster ids into `out` (`len >= gs_report_len`).
///
/// # Safety
/// `report` is live; `out` points to `len` writable elements.
#[no_mangle]
pub unsafe extern "C" fn gs_report_cluster_ids(report: *const GsReport, out: *mut usize, len: usize) -> GsStatus {
    guard(|| copy_out(&non_null(report, "report")?.inner.cluster_id, out, len))
}

/// The whole report as JSON; release with [`gs_string_free`]. NULL on
/// failure.
///
/// # Safety
/// `report` is NULL or live.
#[no_mangle]
pub unsafe extern "C" fn gs_report_to_json(report: *const GsReport) -> *mut c_char {
    let mut text = ptr::null_mut();
    let status = guard(|| {
        let r = non_null(report, "report")?;
        let json = serde_json::to_string(&r.inner).map_err(|e| fail(GsStatus::Internal, e.to_string()))?;
        text = CString::new(json)
            .map_err(|e| fail(GsStatus::Internal, e.to_string()))?
            .into_raw();
        Ok(())
    });
    if status == GsStatus::Ok {
        text
    } else {
        ptr::null_mut()
    }
}

/// # Safety
/// `report` is NULL or a live handle not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn gs_report_free(report: *mut GsReport) {
    free(report)
}
