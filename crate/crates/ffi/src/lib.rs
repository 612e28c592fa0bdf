//! C interface to `frgauss`.
//!
//! Matrices cross the boundary as dense row-major `double` buffers of
//! `dim * dim` entries. Positive-definite matrices are held in opaque
//! `FrSpd` handles. Every fallible call returns an `FrStatus`; on failure the
//! message is kept per thread and can be fetched with
//! `fr_last_error_message`.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use frgauss::fisherrao::kl_divergence;
use frgauss::gaussmodel::Provenance;
use frgauss::manifold::{fisher_rao_distance, geodesic, sectional_curvature};
use frgauss::unitized::{daihs_distance, UnitizedOperator};
use frgauss::{CovarianceModel, Error, GaussianMeasure, SpdMatrix, SymMatrix};

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    NotPositiveDefinite = 4,
    Numerical = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

/// Opaque symmetric positive-definite matrix.
pub struct FrSpd {
    inner: SpdMatrix,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(FrStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::DimensionMismatch { .. } | Error::NotSquare { .. } => FrStatus::DimensionMismatch,
            Error::NotPositiveDefinite { .. } => FrStatus::NotPositiveDefinite,
            Error::InvalidArgument(_) | Error::Empty(_) | Error::NonFinite { .. } => FrStatus::InvalidArgument,
            _ => FrStatus::Numerical,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(FrStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> FrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => FrStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            FrStatus::Panic
        }
    }
}

unsafe fn handle<'a>(p: *const FrSpd, what: &str) -> Result<&'a SpdMatrix, Failure> {
    p.as_ref().map(|h| &h.inner).ok_or_else(|| null(what))
}

unsafe fn out_ref<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn read_sym(data: *const f64, dim: usize, what: &str) -> Result<SymMatrix, Failure> {
    if data.is_null() {
        return Err(null(what));
    }
    if dim == 0 {
        return Err(Failure(FrStatus::InvalidArgument, format!("{what}: dimension is zero")));
    }
    let len = dim
        .checked_mul(dim)
        .ok_or_else(|| Failure(FrStatus::InvalidArgument, format!("{what}: dimension overflows")))?;
    let slice = std::slice::from_raw_parts(data, len);
    Ok(SymMatrix::from_row_slice(dim, slice)?)
}

fn boxed(inner: SpdMatrix, out: &mut *mut FrSpd) {
    *out = Box::into_raw(Box::new(FrSpd { inner }));
}

fn centered(m: &SpdMatrix) -> Result<GaussianMeasure, Failure> {
    Ok(GaussianMeasure::centered(CovarianceModel::from_spd(m, Provenance::Explicit)?))
}

/// Builds a handle from `dim * dim` row-major entries. Only the symmetric
/// part `(M + Mᵀ)/2` is kept, and it must be positive definite.
///
/// # Safety
/// `data` must point to `dim * dim` readable doubles and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fr_spd_new(data: *const f64, dim: usize, out: *mut *mut FrSpd) -> FrStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = ptr::null_mut();
        let spd = SpdMatrix::new(read_sym(data, dim, "data")?)?;
        boxed(spd, out);
        Ok(())
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `spd` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn fr_spd_free(spd: *mut FrSpd) {
    if !spd.is_null() {
        drop(Box::from_raw(spd));
    }
}

/// Dimension of the handle, or 0 for null.
///
/// # Safety
/// `spd` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fr_spd_dim(spd: *const FrSpd) -> usize {
    spd.as_ref().map_or(0, |h| h.inner.dim())
}

/// Copies the entries row-major into `buf`, which holds `len` doubles.
///
/// # Safety
/// `spd` must be a live handle and `buf` must hold `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn fr_spd_copy(spd: *const FrSpd, buf: *mut f64, len: usize) -> FrStatus {
    guard(|| {
        let m = handle(spd, "spd")?;
        if buf.is_null() {
            return Err(null("buf"));
        }
        let data = m.as_sym().to_row_major();
        if len < data.len() {
            return Err(Failure(
                FrStatus::BufferTooSmall,
                format!("buffer holds {len} entries, need {}", data.len()),
            ));
        }
        std::slice::from_raw_parts_mut(buf, data.len()).copy_from_slice(&data);
        Ok(())
    })
}

/// Fisher–Rao distance between two covariances.
///
/// # Safety
/// `a`, `b` must be live handles and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fr_distance(a: *const FrSpd, b: *const FrSpd, out: *mut f64) -> FrStatus {
    guard(|| {
        let (a, b, out) = (handle(a, "a")?, handle(b, "b")?, out_ref(out, "out")?);
        *out = fisher_rao_distance(a, b)?;
        Ok(())
    })
}

/// Point at parameter `t` on the geodesic from `a` to `b`, as a new handle.
///
/// # Safety
/// `a`, `b` must be live handles and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fr_geodesic(a: *const FrSpd, b: *const FrSpd, t: f64, out: *mut *mut FrSpd) -> FrStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = ptr::null_mut();
        let (a, b) = (handle(a, "a")?, handle(b, "b")?);
        if !t.is_finite() {
            return Err(Failure(FrStatus::InvalidArgument, format!("t = {t} is not finite")));
        }
        boxed(geodesic(a, b, t)?, out);
        Ok(())
    })
}

/// `KL(N(0, nu) ‖ N(0, mu))`.
///
/// # Safety
/// `nu`, `mu` must be live handles and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fr_kl_divergence(nu: *const FrSpd, mu: *const FrSpd, out: *mut f64) -> FrStatus {
    guard(|| {
        let (nu, mu, out) = (handle(nu, "nu")?, handle(mu, "mu")?, out_ref(out, "out")?);
        *out = kl_divergence(&centered(nu)?, &centered(mu)?)?;
        Ok(())
    })
}

/// Distance between the unitized operators `a + gamma_a I` and `b + gamma_b I`,
/// where `a`, `b` are `dim * dim` row-major symmetric blocks.
///
/// # Safety
/// `a`, `b` must point to `dim * dim` readable doubles and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn fr_daihs_distance(
    a: *const f64,
    gamma_a: f64,
    b: *const f64,
    gamma_b: f64,
    dim: usize,
    out: *mut f64,
) -> FrStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let u = UnitizedOperator::new(read_sym(a, dim, "a")?, gamma_a)?;
        let w = UnitizedOperator::new(read_sym(b, dim, "b")?, gamma_b)?;
        *out = daihs_distance(&u, &w)?;
        Ok(())
    })
}

/// Sectional curvature at `p` of the plane spanned by the symmetric
/// directions `x`, `y` (row-major, same dimension as `p`).
///
/// # Safety
/// `p` must be a live handle, `x`, `y` must hold `dim(p)^2` doubles and `out`
/// be writable.
#[no_mangle]
pub unsafe extern "C" fn fr_sectional_curvature(
    p: *const FrSpd,
    x: *const f64,
    y: *const f64,
    out: *mut f64,
) -> FrStatus {
    guard(|| {
        let p = handle(p, "p")?;
        let out = out_ref(out, "out")?;
        let x = read_sym(x, p.dim(), "x")?;
        let y = read_sym(y, p.dim(), "y")?;
        *out = sectional_curvature(p, &x, &y)?;
        Ok(())
    })
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len - 1` bytes). Returns the full message length in bytes,
/// 0 when there is none. `buf` may be null to query the length.
///
/// # Safety
/// `buf` must be null or hold `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn fr_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else {
            if !buf.is_null() && len > 0 {
                *buf = 0;
            }
            return 0;
        };
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}
