//! C ABI for the `mplhmc` sampler.
//!
//! Every function returns an [`MplhmcStatus`]; on failure a message is
//! available from [`mplhmc_last_error`] on the calling thread. Handles are
//! opaque and must be released with their `_free` function. Arrays are passed
//! as pointer plus length; multi-chain inputs are contiguous, chain-major.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use mplhmc::diagnostics::{ess_imse, rhat};
use mplhmc::integrator::mpl_step;
use mplhmc::sampler::{run_chain, ChainResult, ChainSettings};
use mplhmc::targets::by_name;
use mplhmc::{Error, MassMatrix, MplParameters, PhaseState, Target};

/// Result code of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MplhmcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    NonFinite = 4,
    UnknownTarget = 5,
    Degenerate = 6,
    Panic = 7,
    Internal = 8,
}

/// A target distribution.
pub struct MplhmcTarget {
    inner: Box<dyn Target>,
}

/// Output of one sampling chain.
pub struct MplhmcChain {
    inner: ChainResult,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> MplhmcStatus {
    match e {
        Error::DimensionMismatch { .. } => MplhmcStatus::DimensionMismatch,
        Error::NonFinite(_) => MplhmcStatus::NonFinite,
        Error::UnknownTarget(_) => MplhmcStatus::UnknownTarget,
        Error::DegenerateSeries | Error::DegenerateChains | Error::NonPdHessian(_) => MplhmcStatus::Degenerate,
        Error::Chain { source, .. } | Error::Metric { source, .. } => status_of(source),
        Error::InvalidParameter(_)
        | Error::NotPositiveDefinite(_)
        | Error::ConfigParse { .. }
        | Error::ConfigValidation { .. } => MplhmcStatus::InvalidArgument,
        _ => MplhmcStatus::Internal,
    }
}

struct Fail(MplhmcStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(MplhmcStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, converting errors and panics into a status.
fn guard<F: FnOnce() -> Result<(), Fail>>(f: F) -> MplhmcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            MplhmcStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {msg}"));
            MplhmcStatus::Panic
        }
    }
}

/// # Safety
/// `ptr` must be null or point to `len` readable values.
unsafe fn slice<'a>(ptr: *const f64, len: usize, what: &str) -> Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

/// # Safety
/// `ptr` must be null or point to `len` writable values.
unsafe fn slice_mut<'a>(ptr: *mut f64, len: usize, what: &str) -> Result<&'a mut [f64], Fail> {
    if len == 0 {
        return Ok(&mut []);
    }
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(ptr, len))
}

unsafe fn target_ref<'a>(t: *const MplhmcTarget) -> Result<&'a dyn Target, Fail> {
    t.as_ref().map(|t| t.inner.as_ref()).ok_or_else(|| null("target"))
}

fn check_dim(expected: usize, got: usize) -> Result<(), Fail> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got }.into());
    }
    Ok(())
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next call on the same thread.
#[no_mangle]
pub extern "C" fn mplhmc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mplhmc_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr().cast()
}

/// Creates a target by name (`isotropic10`, `anisotropic6`, `banana2`,
/// `mixture3_sep3`, `mixture3_sep8`, `funnel10`, or `gaussian` with a
/// precision diagonal).
///
/// # Safety
/// `name` must be a NUL-terminated string; `precision` must hold
/// `precision_len` values when non-null; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mplhmc_target_new(
    name: *const c_char,
    precision: *const f64,
    precision_len: usize,
    out: *mut *mut MplhmcTarget,
) -> MplhmcStatus {
    guard(|| {
        if name.is_null() {
            return Err(null("name"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let name = CStr::from_ptr(name)
            .to_str()
            .map_err(|_| Fail(MplhmcStatus::InvalidArgument, "name is not UTF-8".into()))?;
        let precision = if precision.is_null() { None } else { Some(slice(precision, precision_len, "precision")?) };
        let inner = by_name(name, precision)?;
        *out = Box::into_raw(Box::new(MplhmcTarget { inner }));
        Ok(())
    })
}

/// Releases a target; null is ignored.
///
/// # Safety
/// `t` must come from [`mplhmc_target_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn mplhmc_target_free(t: *mut MplhmcTarget) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

/// Dimension of the target, or 0 for null.
///
/// # Safety
/// `t` must be null or a live target.
#[no_mangle]
pub unsafe extern "C" fn mplhmc_target_dim(t: *const MplhmcTarget) -> usize {
    t.as_ref().map_or(0, |t| t.inner.dim())
}

/// `U(q)`.
///
/// # Safety
/// `q` must hold `dim` values and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mplhmc_target_potential(
    t: *const MplhmcTarget,
    q: *const f64,
    dim: usize,
    out: *mut f64,
) -> MplhmcStatus {
    guard(|| {
        let model = target_ref(t)?;
        check_dim(model.dim(), dim)?;
        let q = slice(q, dim, "q")?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = mplhmc::targets::potential(model, q)?;
        Ok(())
    })
}

/// `∇U(q)` written to `grad`.
///
/// # Safety
/// `q` and `grad` must each hold `dim` values.
#[no_mangle]
pub unsafe extern "C" fn mplhmc_target_gradient(
    t: *const MplhmcTarget,
    q: *const f64,
    dim: usize,
    grad: *mut f64,
) -> MplhmcStatus {
    guard(|| {
        let model = target_ref(t)?;
        check_dim(model.dim(), dim)?;
        let q = slice(q, dim, "q")?;
        let g = mplhmc::targets::gradient(model, q)?;
        slice_mut(grad, dim, "grad")?.copy_from_slice(&g);
        Ok(())
    })
}

/// One MPL step with identity mass, in place on `q` and `p`.
///
/// # Safety
/// `q` and `p` must each hold `dim` writable values.
#[no_mangle]
pub unsafe extern "C" fn mplhmc_mpl_step(
    t: *const MplhmcTarget,
    q: *mut f64,
    p: *mut f64,
    dim: usize,
    dt: f64,
    alpha2: f64,
    beta2: f64,
) -> MplhmcStatus {
    guard(|| {
        let model = target_ref(t)?;
        check_dim(model.dim(), dim)?;
        let (q, p) = (slice_mut(q, dim, "q")?, slice_mut(p, dim, "p")?);
        let params = MplParameters::new(dt, 1, alpha2, beta2)?;
        let mass = MassMatrix::identity(dim)?;
        let state = PhaseState::new(q.to_vec(), p.to_vec())?;
        let (next, _) = mpl_step(&state, &params, model, &mass, None)?;
        let (nq, np) = next.into_parts();
        q.copy_from_slice(&nq);
        p.copy_from_slice(&np);
        Ok(())
    })
}

/// Runs one MPL-HMC chain with identity mass from `q0`.
///
/// # Safety
/// `q0` must hold `dim` values and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mplhmc_run_chain(
    t: *const MplhmcTarget,
    dt: f64,
    steps: usize,
    alpha2: f64,
    beta2: f64,
    n_samples: usize,
    burn_in: usize,
    seed: u64,
    q0: *const f64,
    dim: usize,
    out: *mut *mut MplhmcChain,
) -> MplhmcStatus {
    guard(|| {
        let model = target_ref(t)?;
        check_dim(model.dim(), dim)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let q0 = slice(q0, dim, "q0")?.to_vec();
        let params = MplParameters::new(dt, steps, alpha2, beta2)?;
        let mass = MassMatrix::identity(dim)?;
        let inner = run_chain(model, &params, &mass, &ChainSettings::new(n_samples, burn_in, seed, q0))?;
        *out = Box::into_raw(Box::new(MplhmcChain { inner }));
        Ok(())
    })
}

/// Releases a chain; null is ignored.
///
/// # Safety
/// `c` must come from [`mplhmc_run_chain`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn mplhmc_chain_free(c: *mut MplhmcChain) {
    if !c.is_null() {
        drop(Box::from_raw(c));
    }
}

/// Number of stored samples, or 0 for null.
///
/// # Safety
/// `c` must be null or a live chain.
#[no_mangle]
pub unsafe extern "C" fn mplhmc_chain_n_samples(c: *const MplhmcChain) -> usize {
    c.as_ref().map_or(0, |c| c.inner.n_samples())
}

/// Sample dimension, or 0 for null.
///
/// # Safety
/// `c` must be null or a live chain.
#[no_mangle]
pub unsafe extern "C" fn mplhmc_chain_dim(c: *const MplhmcChain) -> usize {
    c.as_ref().map_or(0, |c| c.inner.dim())
}

/// Acceptance rate over all iterations, or NaN for null.
///
/// # Safety
/// `c` must be null or a live chain.
#[no_mangle]
pub unsafe extern "C" fn mplhmc_chain_acceptance_rate(c: *const MplhmcChain) -> f64 {
    c.as_ref().map_or(f64::NAN, |c| c.inner.acceptance_rate())
}

/// Gradient evaluations spent by the chain, or 0 for null.
///
/// # Safety
/// `c` must be null or a live chain.
#[no_mangle]
pub unsafe extern "C" fn mplhmc_chain_grad_evals(c: *const MplhmcChain) -> usize {
    c.as_ref().map_or(0, |c| c.inner.grad_evals)
}

/// Copies the samples row-major (`n_samples × dim`) into `buf`.
///
/// # Safety
/// `buf` must hold `len` writable values.
#[no_mangle]
pub unsafe extern "C" fn mplhmc_chain_copy_samples(c: *const MplhmcChain, buf: *mut f64, len: usize) -> MplhmcStatus {
    guard(|| {
        let chain = c.as_ref().ok_or_else(|| null("chain"))?;
        let flat = chain.inner.flat_samples();
        check_dim(flat.len(), len)?;
        slice_mut(buf, len, "buf")?.copy_from_slice(flat);
        Ok(())
    })
}

unsafe fn chains<'a>(data: *const f64, n_chains: usize, n: usize) -> Result<Vec<&'a [f64]>, Fail> {
    let total = n_chains.checked_mul(n).ok_or_else(|| Fail(MplhmcStatus::InvalidArgument, "size overflow".into()))?;
    let all = slice(data, total, "data")?;
    Ok(if n == 0 { vec![&[][..]; n_chains] } else { all.chunks(n).collect() })
}

/// Initial-monotone-sequence ESS of `n_chains` scalar series of length `n`.
///
/// # Safety
/// `data` must hold `n_chains * n` values and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mplhmc_ess(data: *const f64, n_chains: usize, n: usize, out: *mut f64) -> MplhmcStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = ess_imse(&chains(data, n_chains, n)?)?;
        Ok(())
    })
}

/// Gelman–Rubin R-hat of `n_chains` scalar series of length `n`.
///
/// # Safety
/// `data` must hold `n_chains * n` values and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mplhmc_rhat(data: *const f64, n_chains: usize, n: usize, out: *mut f64) -> MplhmcStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = rhat(&chains(data, n_chains, n)?)?;
        Ok(())
    })
}
