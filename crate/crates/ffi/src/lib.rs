//! C ABI over corrkit.
//!
//! Every fallible function returns a [`CkStatus`] and writes its result
//! through an out-pointer. On failure a message is kept per thread and can be
//! read with [`ck_last_error_message`]. Objects behind [`CkDensity`] and
//! [`CkDataset`] handles are owned by the library and released with their
//! `_free` functions.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use corrkit::corr::{correlation_matrix, kendall_slices, pearson_slices, spearman_slices, KendallVariant};
use corrkit::exact::{self, NormalTheoryParams, RpDensity};
use corrkit::resample::{ingest_csv, IngestOptions, PopulationDataset};
use corrkit::{CorrelationKind, Error};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CkStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    Degenerate = 3,
    Domain = 4,
    Numeric = 5,
    Infeasible = 6,
    Unsupported = 7,
    Data = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CkKind {
    Pearson = 0,
    Spearman = 1,
    Kendall = 2,
}

impl From<CkKind> for CorrelationKind {
    fn from(k: CkKind) -> Self {
        match k {
            CkKind::Pearson => CorrelationKind::Pearson,
            CkKind::Spearman => CorrelationKind::Spearman,
            CkKind::Kendall => CorrelationKind::Kendall,
        }
    }
}

/// Exact density of Pearson's r for a bivariate normal population.
pub struct CkDensity {
    inner: RpDensity,
}

/// A numeric table held as a finite population.
pub struct CkDataset {
    inner: PopulationDataset,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> CkStatus {
    match e {
        Error::Input(_) => CkStatus::InvalidInput,
        Error::Degenerate { .. } => CkStatus::Degenerate,
        Error::Domain(_) => CkStatus::Domain,
        Error::Numeric(_) => CkStatus::Numeric,
        Error::Infeasible(_) => CkStatus::Infeasible,
        Error::Unsupported(_) => CkStatus::Unsupported,
        Error::Data(_) => CkStatus::Data,
    }
}

enum Fail {
    Null(&'static str),
    Core(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Core(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> CkStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CkStatus::Ok,
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            CkStatus::NullPointer
        }
        Ok(Err(Fail::Core(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            CkStatus::Panic
        }
    }
}

fn nonnull<T>(p: *const T, what: &'static str) -> Result<(), Fail> {
    if p.is_null() {
        Err(Fail::Null(what))
    } else {
        Ok(())
    }
}

unsafe fn slice<'a>(p: *const f64, n: usize, what: &'static str) -> Result<&'a [f64], Fail> {
    nonnull(p, what)?;
    // SAFETY: caller promises `p` points to `n` readable doubles.
    Ok(std::slice::from_raw_parts(p, n))
}

unsafe fn write<T>(out: *mut T, v: T) -> Result<(), Fail> {
    nonnull(out, "out")?;
    // SAFETY: checked non-null; caller promises it is writable.
    out.write(v);
    Ok(())
}

/// Message of the last failure on this thread, or NULL. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ck_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ck_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `x` and `y` must point to `n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ck_pearson(x: *const f64, y: *const f64, n: usize, out: *mut f64) -> CkStatus {
    guard(|| write(out, pearson_slices(slice(x, n, "x")?, slice(y, n, "y")?)?))
}

/// # Safety
/// As [`ck_pearson`].
#[no_mangle]
pub unsafe extern "C" fn ck_spearman(x: *const f64, y: *const f64, n: usize, out: *mut f64) -> CkStatus {
    guard(|| write(out, spearman_slices(slice(x, n, "x")?, slice(y, n, "y")?)?))
}

/// Kendall's tau-b.
///
/// # Safety
/// As [`ck_pearson`].
#[no_mangle]
pub unsafe extern "C" fn ck_kendall(x: *const f64, y: *const f64, n: usize, out: *mut f64) -> CkStatus {
    guard(|| write(out, kendall_slices(slice(x, n, "x")?, slice(y, n, "y")?, KendallVariant::TauB)?))
}

/// Expected sample r_p for a bivariate normal population.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ck_expected_rp(rho: f64, n: usize, out: *mut f64) -> CkStatus {
    guard(|| write(out, exact::expected_rp(NormalTheoryParams::new(rho, n))?))
}

/// Expected sample r_s for a bivariate normal population.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ck_expected_rs(rho: f64, n: usize, out: *mut f64) -> CkStatus {
    guard(|| write(out, exact::expected_rs(NormalTheoryParams::new(rho, n))?))
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ck_rs_from_rp(rp: f64, out: *mut f64) -> CkStatus {
    guard(|| write(out, exact::rs_from_rp(rp)?))
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ck_rt_from_rp(rp: f64, out: *mut f64) -> CkStatus {
    guard(|| write(out, exact::rt_from_rp(rp)?))
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ck_rp_from_rs(rs: f64, out: *mut f64) -> CkStatus {
    guard(|| write(out, exact::rp_from_rs(rs)?))
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ck_fisher_z(r: f64, out: *mut f64) -> CkStatus {
    guard(|| write(out, exact::fisher_z(r)?))
}

/// Fisher-z confidence interval for r_p at `level` (e.g. 0.95).
///
/// # Safety
/// `lower` and `upper` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ck_fisher_ci(r: f64, n: usize, level: f64, lower: *mut f64, upper: *mut f64) -> CkStatus {
    guard(|| {
        nonnull(lower, "lower")?;
        nonnull(upper, "upper")?;
        let ci = exact::fisher_ci(r, n, level)?;
        write(lower, ci.lower)?;
        write(upper, ci.upper)
    })
}

/// # Safety
/// `out` must be writable; on success `*out` owns a handle for [`ck_density_free`].
#[no_mangle]
pub unsafe extern "C" fn ck_density_new(rho: f64, n: usize, out: *mut *mut CkDensity) -> CkStatus {
    guard(|| {
        nonnull(out, "out")?;
        let d = RpDensity::new(NormalTheoryParams::new(rho, n))?;
        write(out, Box::into_raw(Box::new(CkDensity { inner: d })))
    })
}

/// # Safety
/// `d` must come from [`ck_density_new`]; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ck_density_pdf(d: *const CkDensity, r: f64, out: *mut f64) -> CkStatus {
    guard(|| {
        nonnull(d, "density")?;
        write(out, (*d).inner.pdf(r)?)
    })
}

/// Probability that r_p falls in [lo, hi].
///
/// # Safety
/// As [`ck_density_pdf`].
#[no_mangle]
pub unsafe extern "C" fn ck_density_probability(d: *const CkDensity, lo: f64, hi: f64, out: *mut f64) -> CkStatus {
    guard(|| {
        nonnull(d, "density")?;
        write(out, (*d).inner.probability(lo, hi)?)
    })
}

/// # Safety
/// `d` must come from [`ck_density_new`] and not be used afterwards. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn ck_density_free(d: *mut CkDensity) {
    if !d.is_null() {
        drop(Box::from_raw(d));
    }
}

/// Loads a comma-separated file with a header row. Rows with missing or
/// non-numeric cells are dropped; their count goes to `dropped` if non-NULL.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ck_dataset_from_csv(path: *const c_char, out: *mut *mut CkDataset, dropped: *mut usize) -> CkStatus {
    guard(|| {
        nonnull(path, "path")?;
        nonnull(out, "out")?;
        let p = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| Error::Input("path is not valid UTF-8".into()))?;
        let got = ingest_csv(p, &IngestOptions::default())?;
        if !dropped.is_null() {
            dropped.write(got.dropped_rows);
        }
        write(out, Box::into_raw(Box::new(CkDataset { inner: got.dataset })))
    })
}

/// Builds a dataset from column-major values (`n_cols` runs of `n_rows`).
/// Columns are named c1, c2, ...
///
/// # Safety
/// `values` must point to `n_rows * n_cols` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ck_dataset_from_columns(
    values: *const f64,
    n_rows: usize,
    n_cols: usize,
    out: *mut *mut CkDataset,
) -> CkStatus {
    guard(|| {
        nonnull(out, "out")?;
        let total = n_rows
            .checked_mul(n_cols)
            .ok_or_else(|| Error::Input("dataset size overflows".into()))?;
        let v = slice(values, total, "values")?;
        let cols: Vec<Vec<f64>> = if n_rows == 0 {
            vec![Vec::new(); n_cols]
        } else {
            v.chunks(n_rows).map(<[f64]>::to_vec).collect()
        };
        let names = (1..=n_cols).map(|j| format!("c{j}")).collect();
        let d = PopulationDataset::new(names, cols)?;
        write(out, Box::into_raw(Box::new(CkDataset { inner: d })))
    })
}

/// # Safety
/// `d` must come from a `ck_dataset_*` constructor; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn ck_dataset_shape(d: *const CkDataset, n_rows: *mut usize, n_cols: *mut usize) -> CkStatus {
    guard(|| {
        nonnull(d, "dataset")?;
        nonnull(n_rows, "n_rows")?;
        write(n_rows, (*d).inner.n_rows())?;
        write(n_cols, (*d).inner.n_cols())
    })
}

/// Writes the n_cols × n_cols correlation matrix, row-major, to `out`.
///
/// # Safety
/// `d` must be a live dataset handle; `out` must hold n_cols² doubles.
#[no_mangle]
pub unsafe extern "C" fn ck_dataset_correlation_matrix(d: *const CkDataset, kind: CkKind, out: *mut f64) -> CkStatus {
    guard(|| {
        nonnull(d, "dataset")?;
        nonnull(out, "out")?;
        let ds = &(*d).inner;
        let m = correlation_matrix(ds.columns(), ds.column_names(), kind.into())?;
        let p = m.dim();
        for i in 0..p {
            for j in 0..p {
                out.add(i * p + j).write(m.get(i, j));
            }
        }
        Ok(())
    })
}

/// # Safety
/// `d` must come from a `ck_dataset_*` constructor and not be used afterwards. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn ck_dataset_free(d: *mut CkDataset) {
    if !d.is_null() {
        drop(Box::from_raw(d));
    }
}
