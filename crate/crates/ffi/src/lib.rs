//! C ABI for the `rdrop` library.
//!
//! A model is created once per parameter set with `rdrop_model_new` and
//! released with `rdrop_model_free`. Every other call writes its result
//! through an out-pointer and returns an `RdropStatus`; on failure the
//! message is available from `rdrop_last_error_message` on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use rdrop::ballmodel::single_ball_energy;
use rdrop::landscape::{mglob_upper_bound, optimal_partition};
use rdrop::stability::{
    critical_mass, critical_radius, first_unstable_degree, mode_eigenvalue, monotonicity_switch_degree,
    stability_verdict,
};
use rdrop::{Error, ModelParams, RieszCoefficients, Verdict};

/// Result codes. Zero is success.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RdropStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidParams = 2,
    Domain = 3,
    NonConvergence = 4,
    Overlap = 5,
    CapExceeded = 6,
    Other = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RdropVerdict {
    StrictlyStable = 0,
    Unstable = 1,
    Marginal = 2,
}

/// Perimeter, Riesz energy and total `perimeter + gamma * nonlocal`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RdropEnergy {
    pub perimeter: f64,
    pub nonlocal: f64,
    pub total: f64,
}

/// Opaque handle: parameters plus their precomputed coefficient table.
pub struct RdropModel {
    coeffs: RieszCoefficients,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> RdropStatus {
    match e {
        Error::InvalidParams(_) => RdropStatus::InvalidParams,
        Error::Domain(_) | Error::Schema(_) => RdropStatus::Domain,
        Error::NonConvergence { .. } | Error::GridResolution(_) => RdropStatus::NonConvergence,
        Error::Overlap { .. } => RdropStatus::Overlap,
        Error::CapExceeded { .. } => RdropStatus::CapExceeded,
        _ => RdropStatus::Other,
    }
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), Error>) -> RdropStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            RdropStatus::Ok
        }
        Ok(Err(e)) => {
            set_error(&e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic");
            RdropStatus::Panic
        }
    }
}

fn null(what: &str) -> RdropStatus {
    set_error(&format!("null pointer: {what}"));
    RdropStatus::NullPointer
}

macro_rules! model_query {
    ($model:expr, $out:expr, |$c:ident| $body:expr) => {{
        let (Some(m), false) = (unsafe { $model.as_ref() }, $out.is_null()) else {
            return null(if $model.is_null() { "model" } else { "out" });
        };
        guard(|| {
            let $c = &m.coeffs;
            let value = $body?;
            unsafe { $out.write(value) };
            Ok(())
        })
    }};
}

/// Creates a model for dimension `dim`, exponent `alpha` and coupling
/// `gamma`. On success `*out` owns a handle to pass to `rdrop_model_free`.
///
/// # Safety
/// `out` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rdrop_model_new(dim: u32, alpha: f64, gamma: f64, out: *mut *mut RdropModel) -> RdropStatus {
    if out.is_null() {
        return null("out");
    }
    unsafe { out.write(ptr::null_mut()) };
    guard(|| {
        let params = ModelParams::new(dim, alpha, gamma)?;
        let coeffs = RieszCoefficients::compute(params)?;
        unsafe { out.write(Box::into_raw(Box::new(RdropModel { coeffs }))) };
        Ok(())
    })
}

/// Releases a handle; null is ignored.
///
/// # Safety
/// `model` must be null or a handle from `rdrop_model_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rdrop_model_free(model: *mut RdropModel) {
    if !model.is_null() {
        drop(unsafe { Box::from_raw(model) });
    }
}

/// Funk-Hecke eigenvalue `mu_d`.
///
/// # Safety
/// `model` must be a live handle or null; `out` null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rdrop_mu(model: *const RdropModel, d: usize, out: *mut f64) -> RdropStatus {
    model_query!(model, out, |c| Ok::<_, Error>(c.mu(d)))
}

/// The confinement coefficient `I`.
///
/// # Safety
/// As for `rdrop_mu`.
#[no_mangle]
pub unsafe extern "C" fn rdrop_i_coefficient(model: *const RdropModel, out: *mut f64) -> RdropStatus {
    model_query!(model, out, |c| Ok::<_, Error>(c.i_coeff))
}

/// Riesz energy of the unit ball.
///
/// # Safety
/// As for `rdrop_mu`.
#[no_mangle]
pub unsafe extern "C" fn rdrop_ball_self_energy(model: *const RdropModel, out: *mut f64) -> RdropStatus {
    model_query!(model, out, |c| Ok::<_, Error>(c.c_alpha))
}

/// Second-variation eigenvalue `lambda_d(R)`.
///
/// # Safety
/// As for `rdrop_mu`.
#[no_mangle]
pub unsafe extern "C" fn rdrop_mode_eigenvalue(
    model: *const RdropModel,
    radius: f64,
    d: usize,
    out: *mut f64,
) -> RdropStatus {
    model_query!(model, out, |c| Ok::<_, Error>(mode_eigenvalue(c, radius, d)))
}

/// `d_A`, the first degree with `mu_d < alpha I`.
///
/// # Safety
/// As for `rdrop_mu`.
#[no_mangle]
pub unsafe extern "C" fn rdrop_first_unstable_degree(model: *const RdropModel, out: *mut usize) -> RdropStatus {
    model_query!(model, out, |c| first_unstable_degree(c))
}

/// `d_I`, the degree from which the neutral radius increases.
///
/// # Safety
/// As for `rdrop_mu`.
#[no_mangle]
pub unsafe extern "C" fn rdrop_monotonicity_switch_degree(model: *const RdropModel, out: *mut usize) -> RdropStatus {
    model_query!(model, out, |c| monotonicity_switch_degree(c))
}

/// Critical radius `R_bar`.
///
/// # Safety
/// As for `rdrop_mu`.
#[no_mangle]
pub unsafe extern "C" fn rdrop_critical_radius(model: *const RdropModel, out: *mut f64) -> RdropStatus {
    model_query!(model, out, |c| critical_radius(c))
}

/// Critical mass `m_loc = w_N R_bar^N`.
///
/// # Safety
/// As for `rdrop_mu`.
#[no_mangle]
pub unsafe extern "C" fn rdrop_critical_mass(model: *const RdropModel, out: *mut f64) -> RdropStatus {
    model_query!(model, out, |c| critical_mass(c))
}

/// Stability of the ball of radius `radius`.
///
/// # Safety
/// As for `rdrop_mu`.
#[no_mangle]
pub unsafe extern "C" fn rdrop_stability_verdict(
    model: *const RdropModel,
    radius: f64,
    out: *mut RdropVerdict,
) -> RdropStatus {
    model_query!(model, out, |c| stability_verdict(c, radius).map(|r| match r.verdict {
        Verdict::StrictlyStable => RdropVerdict::StrictlyStable,
        Verdict::Unstable => RdropVerdict::Unstable,
        Verdict::Marginal => RdropVerdict::Marginal,
    }))
}

/// Energy of a single ball of volume `m`.
///
/// # Safety
/// As for `rdrop_mu`.
#[no_mangle]
pub unsafe extern "C" fn rdrop_single_ball_energy(model: *const RdropModel, m: f64, out: *mut RdropEnergy) -> RdropStatus {
    model_query!(model, out, |c| {
        if !(m >= 0.0) {
            Err(Error::Domain(format!("mass must be non-negative, got {m}")))
        } else {
            let e = single_ball_energy(&c.params, m, c);
            Ok(RdropEnergy { perimeter: e.perimeter, nonlocal: e.nonlocal, total: e.total })
        }
    })
}

/// Explicit upper bound for the global-minimality mass threshold.
///
/// # Safety
/// As for `rdrop_mu`.
#[no_mangle]
pub unsafe extern "C" fn rdrop_mglob_upper_bound(model: *const RdropModel, out: *mut f64) -> RdropStatus {
    model_query!(model, out, |c| Ok::<_, Error>(mglob_upper_bound(&c.params)))
}

/// Best split of mass `m` into at most `k` balls. Writes `k` masses in
/// decreasing order (zeros for unused balls) and the energy `f_k(m)`.
///
/// # Safety
/// `model` as for `rdrop_mu`; `masses` null or valid for `k` writes;
/// `value` null or valid for one write.
#[no_mangle]
pub unsafe extern "C" fn rdrop_optimal_partition(
    model: *const RdropModel,
    m: f64,
    k: usize,
    masses: *mut f64,
    value: *mut f64,
) -> RdropStatus {
    let Some(model) = (unsafe { model.as_ref() }) else { return null("model") };
    if masses.is_null() || value.is_null() {
        return null("output buffer");
    }
    guard(|| {
        let p = optimal_partition(&model.coeffs, m, k)?;
        let dst = unsafe { std::slice::from_raw_parts_mut(masses, k) };
        dst.copy_from_slice(&p.masses);
        unsafe { value.write(p.value) };
        Ok(())
    })
}

/// Message of the last failed call on this thread, empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn rdrop_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn rdrop_version() -> *const c_char {
    static VERSION: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
        Ok(v) => v,
        Err(_) => c"",
    };
    VERSION.as_ptr()
}
