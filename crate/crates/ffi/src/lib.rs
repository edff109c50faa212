//! C ABI over `glasskit`.
//!
//! Objects are opaque handles created by `gk_*_new` (or a computation) and
//! released with the matching `gk_*_free`. Every fallible call returns a
//! [`GkStatus`] and writes its result through an out-pointer; the message of
//! the most recent failure on the calling thread is available from
//! [`gk_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use glasskit::bounds::{self, ExclusionVerdict};
use glasskit::parisi::{self, Form};
use glasskit::{Error, ModelSpec, OverlapMatrix};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GkStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    Domain = 3,
    NonSymmetric = 4,
    NoConvergence = 5,
    NoRoot = 6,
    TrivialPhase = 7,
    ChainTooShort = 8,
    Panic = 9,
}

impl From<&Error> for GkStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::NonSymmetric(_) => GkStatus::NonSymmetric,
            Error::NoConvergence { .. } => GkStatus::NoConvergence,
            Error::Domain(_) => GkStatus::Domain,
            Error::InvalidInput(_) | Error::BothFieldsZero => GkStatus::InvalidInput,
            Error::TrivialPhase => GkStatus::TrivialPhase,
            Error::MultipleRoots(_) | Error::NoRoot(_) => GkStatus::NoRoot,
            Error::ChainTooShort { .. } => GkStatus::ChainTooShort,
        }
    }
}

/// A single p-spin system.
pub struct GkModel(ModelSpec);

/// A validated overlap constraint matrix.
pub struct GkOverlap(OverlapMatrix);

/// Outcome of an exclusion test.
pub struct GkVerdict(ExclusionVerdict);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

/// Runs `f`, recording failures and converting panics.
fn guard(f: impl FnOnce() -> Result<(), (GkStatus, String)>) -> GkStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => GkStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            GkStatus::Panic
        }
    }
}

fn lift<T>(r: glasskit::Result<T>) -> Result<T, (GkStatus, String)> {
    r.map_err(|e| (GkStatus::from(&e), e.to_string()))
}

fn null(what: &str) -> (GkStatus, String) {
    (GkStatus::NullPointer, format!("{what} is null"))
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, (GkStatus, String)> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn write<T>(out: *mut T, value: T, what: &str) -> Result<(), (GkStatus, String)> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], (GkStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

/// Copies the last error message into `buf` (NUL-terminated, truncated to
/// `len`) and returns the full message length excluding the NUL, or 0 when
/// there is none. Pass a null `buf` to query the length.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn gk_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else {
            return 0;
        };
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn gk_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// # Safety
/// `out` must be valid for writes. Release the handle with [`gk_model_free`].
#[no_mangle]
pub unsafe extern "C" fn gk_model_new(p: u32, beta: f64, h: f64, out: *mut *mut GkModel) -> GkStatus {
    guard(|| {
        let m = lift(ModelSpec::new(p, beta, h))?;
        write(out, Box::into_raw(Box::new(GkModel(m))), "out")
    })
}

/// # Safety
/// `model` must be null or a handle from [`gk_model_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn gk_model_free(model: *mut GkModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// `ξ(q) = q^p/p` of the model (β not included).
///
/// # Safety
/// `model` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn gk_model_xi(model: *const GkModel, q: f64, out: *mut f64) -> GkStatus {
    guard(|| write(out, deref(model, "model")?.0.xi(q), "out"))
}

/// `θ(q) = qξ'(q) − ξ(q)`.
///
/// # Safety
/// `model` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn gk_model_theta(model: *const GkModel, q: f64, out: *mut f64) -> GkStatus {
    guard(|| write(out, deref(model, "model")?.0.theta(q), "out"))
}

/// Limiting free energy P(β, h).
///
/// # Safety
/// `model` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn gk_free_energy(model: *const GkModel, out: *mut f64) -> GkStatus {
    guard(|| {
        let v = lift(parisi::free_energy(&deref(model, "model")?.0))?;
        write(out, v, "out")
    })
}

/// Minimizes the k-level functional; `form` is 0 for the Parisi form and 1
/// for the Crisanti–Sommers form. `grad_norm` may be null.
///
/// # Safety
/// `model` must be a live handle, `value` valid for writes, `grad_norm`
/// null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn gk_minimize_parisi(
    model: *const GkModel,
    k: usize,
    form: u32,
    value: *mut f64,
    grad_norm: *mut f64,
) -> GkStatus {
    guard(|| {
        let form = match form {
            0 => Form::Parisi,
            1 => Form::CrisantiSommers,
            other => return Err((GkStatus::InvalidInput, format!("unknown form {other}"))),
        };
        let min = lift(parisi::minimize_parisi(&deref(model, "model")?.0, k, form))?;
        write(value, min.value, "value")?;
        if !grad_norm.is_null() {
            grad_norm.write(min.grad_norm);
        }
        Ok(())
    })
}

/// Positive root of the x equation for even `p`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn gk_solve_x(p: u32, out: *mut f64) -> GkStatus {
    guard(|| write(out, lift(parisi::solve_x(p))?, "out"))
}

/// Predicted cross overlap of two 2-spin systems.
///
/// # Safety
/// Both models must be live handles and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn gk_chaos_u0(model1: *const GkModel, model2: *const GkModel, out: *mut f64) -> GkStatus {
    guard(|| {
        let v = lift(bounds::chaos_u0(&deref(model1, "model1")?.0, &deref(model2, "model2")?.0))?;
        write(out, v, "out")
    })
}

/// Builds an `n × n` overlap matrix from `len = n²` row-major entries.
///
/// # Safety
/// `values` must be valid for `len` reads and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn gk_overlap_new(values: *const f64, len: usize, out: *mut *mut GkOverlap) -> GkStatus {
    guard(|| {
        let q = lift(OverlapMatrix::from_row_major(slice(values, len, "values")?))?;
        write(out, Box::into_raw(Box::new(GkOverlap(q))), "out")
    })
}

/// # Safety
/// `q` must be null or a handle from [`gk_overlap_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn gk_overlap_free(q: *mut GkOverlap) {
    if !q.is_null() {
        drop(Box::from_raw(q));
    }
}

/// Dimension of the constraint.
///
/// # Safety
/// `q` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn gk_overlap_dim(q: *const GkOverlap) -> usize {
    q.as_ref().map_or(0, |q| q.0.n())
}

/// Eigenvalue bound for 2-spin replicas at temperatures `betas[0..n]`.
///
/// # Safety
/// `q` must be a live handle, `betas` valid for `n` reads, `out` valid for
/// writes. Release the verdict with [`gk_verdict_free`].
#[no_mangle]
pub unsafe extern "C" fn gk_bound_theorem1(
    q: *const GkOverlap,
    betas: *const f64,
    n: usize,
    out: *mut *mut GkVerdict,
) -> GkStatus {
    guard(|| {
        let v = lift(bounds::bound_theorem1(&deref(q, "q")?.0, slice(betas, n, "betas")?))?;
        write(out, Box::into_raw(Box::new(GkVerdict(v))), "out")
    })
}

/// Verdict on the non-ultrametric triple at `q = 1 − 1/β`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn gk_ultrametricity_verdict(beta: f64, out: *mut *mut GkVerdict) -> GkStatus {
    guard(|| {
        let v = lift(bounds::ultrametricity_verdict(beta))?;
        write(out, Box::into_raw(Box::new(GkVerdict(v))), "out")
    })
}

/// # Safety
/// `v` must be null or a verdict handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn gk_verdict_free(v: *mut GkVerdict) {
    if !v.is_null() {
        drop(Box::from_raw(v));
    }
}

/// # Safety
/// `v` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn gk_verdict_excluded(v: *const GkVerdict) -> bool {
    v.as_ref().is_some_and(|v| v.0.excluded)
}

/// Writes the bound; returns `GK_STATUS_DOMAIN` when it is undefined.
///
/// # Safety
/// `v` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn gk_verdict_bound(v: *const GkVerdict, out: *mut f64) -> GkStatus {
    guard(|| match deref(v, "verdict")?.0.bound {
        Some(b) => write(out, b, "out"),
        None => Err((GkStatus::Domain, "bound is undefined for this constraint".into())),
    })
}

/// # Safety
/// `v` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn gk_verdict_trivial_sum(v: *const GkVerdict, out: *mut f64) -> GkStatus {
    guard(|| write(out, deref(v, "verdict")?.0.trivial_sum, "out"))
}

/// Number of rescaled eigenvalues.
///
/// # Safety
/// `v` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn gk_verdict_eigenvalue_count(v: *const GkVerdict) -> usize {
    v.as_ref().map_or(0, |v| v.0.eigenvalues.len())
}

/// Copies up to `len` ascending eigenvalues into `out`; returns the count copied.
///
/// # Safety
/// `v` must be a live handle and `out` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn gk_verdict_eigenvalues(v: *const GkVerdict, out: *mut f64, len: usize) -> usize {
    let (Some(v), false) = (v.as_ref(), out.is_null()) else {
        return 0;
    };
    let n = v.0.eigenvalues.len().min(len);
    ptr::copy_nonoverlapping(v.0.eigenvalues.as_ptr(), out, n);
    n
}
