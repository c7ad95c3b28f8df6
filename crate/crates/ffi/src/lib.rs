//! C interface. Potentials and band structures are opaque heap handles
//! released with their `_free` function; every fallible call returns an
//! `LhStatus` and writes results through out-pointers. The message of the
//! last failure on the calling thread is available from
//! `lh_last_error_message`.

use std::cell::RefCell;
use std::ffi::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};

use logholder::{ExactIds, PeriodicPotential};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LhStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    BudgetExceeded = 3,
    InvariantViolation = 4,
    BandIsolationFailure = 5,
    QuadratureFailure = 6,
    IndexOutOfRange = 7,
    Panic = 8,
}

/// A periodic potential.
pub struct LhPotential(PeriodicPotential);

/// Band edges of a potential together with its exact IDS.
pub struct LhBands(ExactIds);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn fail(status: LhStatus, msg: String) -> LhStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
    status
}

fn from_error(e: logholder::Error) -> LhStatus {
    use logholder::Error::*;
    let status = match &e {
        InvalidInput(_) => LhStatus::InvalidInput,
        BandIsolationFailure { .. } => LhStatus::BandIsolationFailure,
        QuadratureFailure { .. } => LhStatus::QuadratureFailure,
        ConstructionBudgetExceeded { .. } => LhStatus::BudgetExceeded,
        InvariantViolation(_) => LhStatus::InvariantViolation,
    };
    fail(status, e.to_string())
}

fn guard(f: impl FnOnce() -> LhStatus) -> LhStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(LhStatus::Panic, "internal panic".into()),
    }
}

macro_rules! non_null {
    ($($p:ident),+) => {
        $(if $p.is_null() {
            return fail(LhStatus::NullPointer, concat!(stringify!($p), " is null").into());
        })+
    };
}

/// Copies `len` values into a new potential handle stored in `*out`.
///
/// # Safety
/// `values` must point to `len` readable doubles and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lh_potential_new(values: *const f64, len: usize, out: *mut *mut LhPotential) -> LhStatus {
    guard(|| {
        non_null!(values, out);
        let v = std::slice::from_raw_parts(values, len).to_vec();
        match PeriodicPotential::new(v) {
            Ok(p) => {
                *out = Box::into_raw(Box::new(LhPotential(p)));
                LhStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `pot` must come from `lh_potential_new` and not be freed twice. Null is
/// ignored.
#[no_mangle]
pub unsafe extern "C" fn lh_potential_free(pot: *mut LhPotential) {
    if !pot.is_null() {
        drop(Box::from_raw(pot));
    }
}

/// Period of the potential, or 0 for a null handle.
///
/// # Safety
/// `pot` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lh_potential_period(pot: *const LhPotential) -> usize {
    pot.as_ref().map_or(0, |p| p.0.period())
}

/// Discriminant and its energy derivative.
///
/// # Safety
/// `pot` must be a live handle; `d` and `d_prime` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lh_discriminant(
    pot: *const LhPotential,
    energy: f64,
    d: *mut f64,
    d_prime: *mut f64,
) -> LhStatus {
    guard(|| {
        non_null!(pot, d, d_prime);
        match logholder::discriminant(&(*pot).0, energy) {
            Ok((v, dv)) => {
                *d = v;
                *d_prime = dv;
                LhStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `pot` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lh_lyapunov(pot: *const LhPotential, energy: f64, out: *mut f64) -> LhStatus {
    guard(|| {
        non_null!(pot, out);
        match logholder::lyapunov_periodic(&(*pot).0, energy) {
            Ok(l) => {
                *out = l;
                LhStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Computes the band structure of `pot` into a new handle.
///
/// # Safety
/// `pot` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lh_bands_new(pot: *const LhPotential, out: *mut *mut LhBands) -> LhStatus {
    guard(|| {
        non_null!(pot, out);
        match ExactIds::new((*pot).0.clone()) {
            Ok(ids) => {
                *out = Box::into_raw(Box::new(LhBands(ids)));
                LhStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `bands` must come from `lh_bands_new` and not be freed twice. Null is
/// ignored.
#[no_mangle]
pub unsafe extern "C" fn lh_bands_free(bands: *mut LhBands) {
    if !bands.is_null() {
        drop(Box::from_raw(bands));
    }
}

/// Number of bands, or 0 for a null handle.
///
/// # Safety
/// `bands` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lh_bands_count(bands: *const LhBands) -> usize {
    bands.as_ref().map_or(0, |b| b.0.bands().bands.len())
}

/// Edges of band `index` (from 0, ascending).
///
/// # Safety
/// `bands` must be a live handle; `lower` and `upper` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lh_bands_get(
    bands: *const LhBands,
    index: usize,
    lower: *mut f64,
    upper: *mut f64,
) -> LhStatus {
    guard(|| {
        non_null!(bands, lower, upper);
        let list = &(*bands).0.bands().bands;
        match list.get(index) {
            Some(b) => {
                *lower = b.lower;
                *upper = b.upper;
                LhStatus::Ok
            }
            None => fail(LhStatus::IndexOutOfRange, format!("band {index} of {}", list.len())),
        }
    })
}

/// Lebesgue measure of the spectrum.
///
/// # Safety
/// `bands` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lh_bands_measure(bands: *const LhBands, out: *mut f64) -> LhStatus {
    guard(|| {
        non_null!(bands, out);
        *out = (*bands).0.bands().measure;
        LhStatus::Ok
    })
}

/// Integrated density of states at `energy`.
///
/// # Safety
/// `bands` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lh_ids(bands: *const LhBands, energy: f64, out: *mut f64) -> LhStatus {
    guard(|| {
        non_null!(bands, out);
        if !energy.is_finite() {
            return fail(LhStatus::InvalidInput, format!("energy must be finite, got {energy}"));
        }
        *out = (*bands).0.at(energy);
        LhStatus::Ok
    })
}

/// Copies the last error message of this thread into `buf` as a
/// NUL-terminated string, truncated to `cap - 1` bytes. Returns the full
/// message length in bytes, excluding the terminator.
///
/// # Safety
/// `buf` must be null or point to `cap` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn lh_last_error_message(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && cap > 0 {
            let n = msg.len().min(cap - 1);
            std::ptr::copy_nonoverlapping(msg.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}
