//! C interface to `desmooth`.
//!
//! Every function returns a [`DsStatus`]. On failure the message is kept in
//! thread-local storage and can be read with [`ds_last_error`]. Panics are
//! caught at the boundary and reported as [`DsStatus::Panic`].
//!
//! Datasets and fits are opaque handles created by this library and
//! released with their matching `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use desmooth::bandwidth::{loocv_select, optimal_bandwidth, BandwidthGrid, OptimalBandwidthInputs};
use desmooth::parametric::{fit_exponential_nls, NlsOptions};
use desmooth::{fit_method, Dataset, Error, ErrorClass, Estimator, Fit, Kernel, Method};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DsStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    Config = 2,
    Data = 3,
    Numerical = 4,
    Panic = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DsKernel {
    Gaussian = 0,
    Epanechnikov = 1,
}

impl From<DsKernel> for Kernel {
    fn from(k: DsKernel) -> Self {
        match k {
            DsKernel::Gaussian => Kernel::Gaussian,
            DsKernel::Epanechnikov => Kernel::Epanechnikov,
        }
    }
}

/// Opaque dataset handle.
pub struct DsDataset(Dataset);

/// Opaque fit handle.
pub struct DsFit(Fit);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

enum Failure {
    Null(&'static str),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

type Outcome = Result<(), Failure>;

fn guard(f: impl FnOnce() -> Outcome) -> DsStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DsStatus::Ok,
        Ok(Err(Failure::Null(name))) => {
            set_error(format!("`{name}` must not be null"));
            DsStatus::NullPointer
        }
        Ok(Err(Failure::Lib(e))) => {
            set_error(e.to_string());
            match e.class() {
                ErrorClass::Config => DsStatus::Config,
                ErrorClass::Data => DsStatus::Data,
                ErrorClass::Numerical => DsStatus::Numerical,
            }
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            DsStatus::Panic
        }
    }
}

unsafe fn slice<'a>(p: *const f64, len: usize, name: &'static str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::Null(name));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn reference<'a, T>(p: *const T, name: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(name))
}

unsafe fn out_ptr<'a, T>(p: *mut T, name: &'static str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or(Failure::Null(name))
}

unsafe fn method_arg(p: *const c_char) -> Result<Method, Failure> {
    if p.is_null() {
        return Err(Failure::Null("method"));
    }
    let text = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Error::Config("method name is not UTF-8".into()))?;
    Ok(text.parse()?)
}

/// NaN means "not supplied".
fn optional(v: f64) -> Option<f64> {
    (!v.is_nan()).then_some(v)
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next library call on the same thread.
#[no_mangle]
pub extern "C" fn ds_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ds_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies `n` observations into a new dataset, sorted by x.
///
/// # Safety
/// `xs` and `ys` must point to `n` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ds_dataset_new(
    xs: *const f64,
    ys: *const f64,
    n: usize,
    out: *mut *mut DsDataset,
) -> DsStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let data = Dataset::new(slice(xs, n, "xs")?.to_vec(), slice(ys, n, "ys")?.to_vec())?;
        *out = Box::into_raw(Box::new(DsDataset(data)));
        Ok(())
    })
}

/// # Safety
/// `dataset` must come from [`ds_dataset_new`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn ds_dataset_free(dataset: *mut DsDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// # Safety
/// `dataset` must be a live handle or null; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ds_dataset_len(dataset: *const DsDataset, out: *mut usize) -> DsStatus {
    guard(|| {
        *out_ptr(out, "out")? = reference(dataset, "dataset")?.0.len();
        Ok(())
    })
}

/// Half the median spacing of the sorted design.
///
/// # Safety
/// `dataset` must be a live handle or null; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ds_reference_bandwidth(
    dataset: *const DsDataset,
    out: *mut f64,
) -> DsStatus {
    guard(|| {
        *out_ptr(out, "out")? = reference(dataset, "dataset")?.0.reference_bandwidth();
        Ok(())
    })
}

/// Fits `method` (for example `"de1-2"` or `"ll"`) on `grid`.
///
/// Pass NaN for `lambda` when the method does not use it. Parametric
/// methods ignore `kernel` and `h`.
///
/// # Safety
/// `method` must be a NUL-terminated string, `grid` must point to
/// `grid_len` doubles and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ds_fit(
    dataset: *const DsDataset,
    method: *const c_char,
    lambda: f64,
    kernel: DsKernel,
    h: f64,
    grid: *const f64,
    grid_len: usize,
    out: *mut *mut DsFit,
) -> DsStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let data = &reference(dataset, "dataset")?.0;
        let method = method_arg(method)?;
        let grid = slice(grid, grid_len, "grid")?;
        let fit = fit_method(data, method, optional(lambda), kernel.into(), h, grid)?;
        *out = Box::into_raw(Box::new(DsFit(fit)));
        Ok(())
    })
}

/// # Safety
/// `fit` must come from [`ds_fit`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn ds_fit_free(fit: *mut DsFit) {
    if !fit.is_null() {
        drop(Box::from_raw(fit));
    }
}

/// # Safety
/// `fit` must be a live handle or null; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ds_fit_len(fit: *const DsFit, out: *mut usize) -> DsStatus {
    guard(|| {
        *out_ptr(out, "out")? = reference(fit, "fit")?.0.len();
        Ok(())
    })
}

/// Copies fitted values (NaN where degenerate) and degeneracy flags.
/// `degenerate` may be null.
///
/// # Safety
/// `values` must hold `len` doubles and `degenerate`, when not null, `len`
/// bytes; `len` must equal the fit length.
#[no_mangle]
pub unsafe extern "C" fn ds_fit_values(
    fit: *const DsFit,
    values: *mut f64,
    degenerate: *mut u8,
    len: usize,
) -> DsStatus {
    guard(|| {
        let fit = &reference(fit, "fit")?.0;
        if len != fit.len() {
            return Err(Error::Config(format!(
                "buffer length {len} does not match fit length {}",
                fit.len()
            ))
            .into());
        }
        if len == 0 {
            return Ok(());
        }
        if values.is_null() {
            return Err(Failure::Null("values"));
        }
        std::slice::from_raw_parts_mut(values, len).copy_from_slice(&fit.values);
        if !degenerate.is_null() {
            let flags = std::slice::from_raw_parts_mut(degenerate, len);
            for (f, d) in flags.iter_mut().zip(&fit.degenerate) {
                *f = u8::from(*d);
            }
        }
        Ok(())
    })
}

/// Leave-one-out CV over `grid`; writes the selected bandwidth and, when
/// `scores` is not null, the score of every candidate.
///
/// # Safety
/// `grid` must hold `grid_len` doubles, `scores` (if not null) room for
/// `grid_len` doubles, and `h_star` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ds_loocv_select(
    dataset: *const DsDataset,
    method: *const c_char,
    lambda: f64,
    kernel: DsKernel,
    grid: *const f64,
    grid_len: usize,
    scores: *mut f64,
    h_star: *mut f64,
) -> DsStatus {
    guard(|| {
        let h_star = out_ptr(h_star, "h_star")?;
        let data = &reference(dataset, "dataset")?.0;
        let estimator = match method_arg(method)? {
            Method::LocalPoly { degree } => Estimator::LocalPoly { degree },
            Method::De1 { k } => Estimator::De1Exponential {
                lambda: optional(lambda)
                    .ok_or_else(|| Error::Config(format!("de1-{k} needs lambda")))?,
                k,
            },
            other => {
                return Err(Error::Config(format!(
                    "cross-validation is not available for `{other}`"
                ))
                .into())
            }
        };
        let candidates = BandwidthGrid::new(slice(grid, grid_len, "grid")?.to_vec())?;
        let selection = loocv_select(data, &estimator, kernel.into(), &candidates)?;
        if !scores.is_null() {
            std::slice::from_raw_parts_mut(scores, grid_len).copy_from_slice(&selection.scores);
        }
        *h_star = selection.h_star;
        Ok(())
    })
}

/// Asymptotically optimal DE1-k bandwidth under `g(x) = g0 e^{λx}`.
/// Pass NaN for `fprime_x0` when unknown (odd k do not use it).
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ds_optimal_bandwidth(
    k: usize,
    sigma2: f64,
    n: usize,
    f_x0: f64,
    fprime_x0: f64,
    lambda: f64,
    x0: f64,
    g0: f64,
    kernel: DsKernel,
    out: *mut f64,
) -> DsStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = optimal_bandwidth(
            k,
            &OptimalBandwidthInputs {
                sigma2,
                n,
                f_x0,
                fprime_x0: optional(fprime_x0),
                lambda,
                x0,
                g0,
                kernel: kernel.into(),
            },
        )?;
        Ok(())
    })
}

/// Nonlinear least squares for `g(x) = g(a) e^{λ(x − a)}` with `a` the
/// smallest x. Writes `g(a)`, `λ` and whether the iteration converged.
///
/// # Safety
/// The output pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn ds_nls_fit(
    dataset: *const DsDataset,
    g_a: *mut f64,
    lambda: *mut f64,
    converged: *mut bool,
) -> DsStatus {
    guard(|| {
        let data = &reference(dataset, "dataset")?.0;
        let (g_a, lambda, converged) = (
            out_ptr(g_a, "g_a")?,
            out_ptr(lambda, "lambda")?,
            out_ptr(converged, "converged")?,
        );
        let fit = fit_exponential_nls(data, &NlsOptions::default())?;
        *g_a = fit.g_a;
        *lambda = fit.lambda;
        *converged = fit.converged;
        Ok(())
    })
}
