//! C ABI over `coalescent-core`.
//!
//! Every entry point returns a [`CoalescentStatus`]; results go through out
//! pointers. On failure the message is kept per thread and can be read with
//! [`coalescent_last_error`]. Mechanisms are opaque handles that must be
//! released with [`coalescent_mechanism_free`].

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use coalescent_core::coalescent::merger_rate;
use coalescent_core::experiments::{execute, ExperimentConfig};
use coalescent_core::laplace::solve_u;
use coalescent_core::poissonize::mrca_probability;
use coalescent_core::quadrature::Tolerance;
use coalescent_core::{BranchingMechanism, Error, MultiIndex};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoalescentStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    /// Malformed JSON or an unusable configuration.
    InvalidInput = 3,
    /// Arguments outside the domain of the function.
    Domain = 4,
    /// Quadrature or ODE integration did not reach its tolerance.
    Numerical = 5,
    /// An enumeration or simulation hit its size cap.
    SizeCap = 6,
    Io = 7,
    Panic = 8,
    /// The run completed but a verification band was missed.
    VerificationFailed = 9,
}

/// Opaque branching mechanism.
pub struct CoalescentMechanism {
    inner: BranchingMechanism,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes were replaced");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> CoalescentStatus {
    match e {
        Error::Domain(_) | Error::Contract(_) => CoalescentStatus::Domain,
        Error::Quadrature { .. } | Error::Integration { .. } => CoalescentStatus::Numerical,
        Error::SizeCap { .. } | Error::Explosion { .. } => CoalescentStatus::SizeCap,
        Error::Config(_) | Error::Json(_) => CoalescentStatus::InvalidInput,
        Error::Io(_) => CoalescentStatus::Io,
    }
}

struct Fail(CoalescentStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn guard<F>(f: F) -> CoalescentStatus
where
    F: FnOnce() -> Result<(), Fail>,
{
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            CoalescentStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            CoalescentStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(CoalescentStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(CoalescentStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn mech_arg<'a>(m: *const CoalescentMechanism) -> Result<&'a BranchingMechanism, Fail> {
    m.as_ref().map(|m| &m.inner).ok_or_else(|| null("mechanism"))
}

fn check_len(len: usize, d: usize, what: &str) -> Result<(), Fail> {
    if len != d {
        return Err(Fail(
            CoalescentStatus::Domain,
            format!("{what} has {len} entries, the mechanism has {d} types"),
        ));
    }
    Ok(())
}

/// Message for the most recent failure on this thread, or null. The pointer
/// stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn coalescent_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Parses a mechanism from its JSON form.
///
/// # Safety
/// `json` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn coalescent_mechanism_from_json(
    json: *const c_char,
    out: *mut *mut CoalescentMechanism,
) -> CoalescentStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let text = str_arg(json, "json")?;
        let inner = BranchingMechanism::from_json(text)?;
        *out = Box::into_raw(Box::new(CoalescentMechanism { inner }));
        Ok(())
    })
}

/// Feller mechanism `β λ²` in one type.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn coalescent_mechanism_feller(beta: f64, out: *mut *mut CoalescentMechanism) -> CoalescentStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let inner = BranchingMechanism::feller(beta)?;
        *out = Box::into_raw(Box::new(CoalescentMechanism { inner }));
        Ok(())
    })
}

/// # Safety
/// `m` must come from one of the constructors and not be freed twice. Null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn coalescent_mechanism_free(m: *mut CoalescentMechanism) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Number of types, or 0 for a null handle.
///
/// # Safety
/// `m` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn coalescent_mechanism_dim(m: *const CoalescentMechanism) -> usize {
    m.as_ref().map_or(0, |m| m.inner.dim())
}

/// `ψ(λ)`, written to `out[0..d]`.
///
/// # Safety
/// `lambda` and `out` must point to `d` doubles.
#[no_mangle]
pub unsafe extern "C" fn coalescent_psi(
    m: *const CoalescentMechanism,
    lambda: *const f64,
    d: usize,
    out: *mut f64,
) -> CoalescentStatus {
    guard(|| {
        let mech = mech_arg(m)?;
        check_len(d, mech.dim(), "lambda")?;
        let lambda = slice_arg(lambda, d, "lambda")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let v = mech.psi(lambda)?;
        ptr::copy_nonoverlapping(v.as_ptr(), out, d);
        Ok(())
    })
}

/// `u(t, λ)`, written to `out[0..d]`.
///
/// # Safety
/// `lambda` and `out` must point to `d` doubles.
#[no_mangle]
pub unsafe extern "C" fn coalescent_solve_u(
    m: *const CoalescentMechanism,
    t: f64,
    lambda: *const f64,
    d: usize,
    out: *mut f64,
) -> CoalescentStatus {
    guard(|| {
        let mech = mech_arg(m)?;
        check_len(d, mech.dim(), "lambda")?;
        let lambda = slice_arg(lambda, d, "lambda")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let v = solve_u(mech, t, lambda, 0)?.value();
        ptr::copy_nonoverlapping(v.as_ptr(), out, d);
        Ok(())
    })
}

/// Local merger rate at population `x` for `k` lineages: `alpha` of them,
/// carried by a type-`c` parent (0-based), merge into one.
///
/// # Safety
/// `x`, `k` and `alpha` must point to `d` values; `out` to one double.
#[no_mangle]
pub unsafe extern "C" fn coalescent_merger_rate(
    m: *const CoalescentMechanism,
    x: *const f64,
    k: *const u32,
    alpha: *const u32,
    d: usize,
    c: usize,
    out: *mut f64,
) -> CoalescentStatus {
    guard(|| {
        let mech = mech_arg(m)?;
        check_len(d, mech.dim(), "x")?;
        let x = slice_arg(x, d, "x")?;
        let k = MultiIndex::from(slice_arg(k, d, "k")?.to_vec());
        let alpha = MultiIndex::from(slice_arg(alpha, d, "alpha")?.to_vec());
        if out.is_null() {
            return Err(null("out"));
        }
        *out = merger_rate(mech, x, &k, &alpha, c)?;
        Ok(())
    })
}

/// Probability that `k` individuals sampled at `horizon` from a one-type
/// population started at `x` share one ancestor at time 0.
///
/// # Safety
/// `out` must point to one double.
#[no_mangle]
pub unsafe extern "C" fn coalescent_mrca_probability(
    m: *const CoalescentMechanism,
    k: u32,
    horizon: f64,
    x: f64,
    out: *mut f64,
) -> CoalescentStatus {
    guard(|| {
        let mech = mech_arg(m)?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = mrca_probability(mech, k, horizon, x, &Tolerance::new(1e-12, 1e-10))?.value;
        Ok(())
    })
}

/// Runs a JSON experiment config and returns the rendered table in `*out`,
/// to be released with [`coalescent_string_free`]. A missed verification
/// band still fills `*out` and returns `VerificationFailed`.
///
/// # Safety
/// `config` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn coalescent_run_config(config: *const c_char, out: *mut *mut c_char) -> CoalescentStatus {
    let mut failed_band = false;
    let status = guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let cfg = ExperimentConfig::from_json(str_arg(config, "config")?)?;
        let (text, passed) = execute(&cfg)?;
        failed_band = passed == Some(false);
        let c = CString::new(text).map_err(|_| Fail(CoalescentStatus::Panic, "output contains a nul byte".into()))?;
        *out = c.into_raw();
        Ok(())
    });
    if status == CoalescentStatus::Ok && failed_band {
        set_error("verification failed".into());
        return CoalescentStatus::VerificationFailed;
    }
    status
}

/// # Safety
/// `s` must come from this library and not be freed twice. Null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn coalescent_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn coalescent_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// `1` when the status is `Ok`.
#[no_mangle]
pub extern "C" fn coalescent_status_ok(status: CoalescentStatus) -> c_int {
    c_int::from(status == CoalescentStatus::Ok)
}
