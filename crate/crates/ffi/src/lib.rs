//! C ABI over `hierbayes`.
//!
//! Every object lives behind an opaque pointer created by a `*_new`/`*_run`
//! function and released by the matching `*_free`. Fallible functions return
//! an [`HbStatus`]; on failure the message is available from
//! [`hb_last_error_message`] on the same thread. Array outputs are copied into
//! caller buffers whose required length can be queried first.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use hierbayes::forward::build_problem;
use hierbayes::hypermodel::{lambda_update, match_hyperparameters};
use hierbayes::ias::hybrid_run;
use hierbayes::sampler::{run_chain, to_reparam, PosteriorPotential};
use hierbayes::{
    ChainConfig, DeconvolutionConfig, Error, GroundTruth, HybridSchedule, Hypermodel, IasResult,
    InverseProblem, KernelKind, SampleSet,
};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HbStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Domain = 3,
    BufferTooSmall = 4,
    Io = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HbKernel {
    Pcn = 0,
    RadialPcn = 1,
}

/// Whitened deconvolution problem with its ground truth.
pub struct HbProblem {
    problem: InverseProblem,
    truth: GroundTruth,
}

pub struct HbHypermodel(Hypermodel);

/// Final IAS result of a (possibly two-phase) MAP run.
pub struct HbMapResult {
    result: IasResult,
    converged: bool,
}

pub struct HbChain(SampleSet);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn status_of(err: &Error) -> HbStatus {
    match err {
        Error::Domain { .. } | Error::InfiniteMean(_) | Error::MatchingInfeasible { .. } => {
            HbStatus::Domain
        }
        Error::Io { .. } | Error::MissingArtifact { .. } => HbStatus::Io,
        _ => HbStatus::InvalidArgument,
    }
}

/// Run `f`, translating errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), (HbStatus, String)>) -> HbStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => HbStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            HbStatus::Panic
        }
    }
}

fn lib<T>(r: hierbayes::Result<T>) -> Result<T, (HbStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(name: &str) -> (HbStatus, String) {
    (HbStatus::NullPointer, format!("{name} is null"))
}

unsafe fn deref<'a, T>(p: *const T, name: &str) -> Result<&'a T, (HbStatus, String)> {
    p.as_ref().ok_or_else(|| null(name))
}

unsafe fn write_out<T>(out: *mut *mut T, value: T) -> Result<(), (HbStatus, String)> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Copy `src` into `buf[..len]`; always stores the required length in
/// `needed` when it is non-null.
unsafe fn copy_out(
    src: &[f64],
    buf: *mut f64,
    len: usize,
    needed: *mut usize,
) -> Result<(), (HbStatus, String)> {
    if !needed.is_null() {
        *needed = src.len();
    }
    if buf.is_null() {
        return if len == 0 { Ok(()) } else { Err(null("buf")) };
    }
    if len < src.len() {
        return Err((
            HbStatus::BufferTooSmall,
            format!("buffer holds {len} values, {} needed", src.len()),
        ));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len());
    Ok(())
}

/// Copy the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length without the NUL.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn hb_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Build the deconvolution benchmark. `config_json` may be null for the
/// default configuration.
///
/// # Safety
/// `config_json` must be null or a NUL-terminated string; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn hb_problem_new(
    config_json: *const c_char,
    out: *mut *mut HbProblem,
) -> HbStatus {
    guard(|| {
        let cfg = if config_json.is_null() {
            DeconvolutionConfig::default()
        } else {
            let text = CStr::from_ptr(config_json)
                .to_str()
                .map_err(|e| (HbStatus::InvalidArgument, e.to_string()))?;
            serde_json::from_str(text).map_err(|e| (HbStatus::InvalidArgument, e.to_string()))?
        };
        let (problem, truth) = lib(build_problem(&cfg))?;
        write_out(out, HbProblem { problem, truth })
    })
}

/// # Safety
/// `p` must be null or a pointer returned by `hb_problem_new`.
#[no_mangle]
pub unsafe extern "C" fn hb_problem_free(p: *mut HbProblem) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn hb_problem_dims(
    p: *const HbProblem,
    m: *mut usize,
    n: *mut usize,
) -> HbStatus {
    guard(|| {
        let p = deref(p, "problem")?;
        if m.is_null() || n.is_null() {
            return Err(null("m/n"));
        }
        *m = p.problem.m();
        *n = p.problem.n();
        Ok(())
    })
}

/// Whitened data b̂ (length m).
///
/// # Safety
/// `buf` must be valid for `len` values; `needed` may be null.
#[no_mangle]
pub unsafe extern "C" fn hb_problem_copy_b_hat(
    p: *const HbProblem,
    buf: *mut f64,
    len: usize,
    needed: *mut usize,
) -> HbStatus {
    guard(|| {
        let p = deref(p, "problem")?;
        copy_out(p.problem.b_hat().as_slice(), buf, len, needed)
    })
}

/// Ground-truth signal z on the coarse grid (length n).
///
/// # Safety
/// `buf` must be valid for `len` values; `needed` may be null.
#[no_mangle]
pub unsafe extern "C" fn hb_problem_copy_truth(
    p: *const HbProblem,
    buf: *mut f64,
    len: usize,
    needed: *mut usize,
) -> HbStatus {
    guard(|| {
        let p = deref(p, "problem")?;
        copy_out(&p.truth.z_true, buf, len, needed)
    })
}

/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn hb_hypermodel_new(
    r: f64,
    beta: f64,
    vartheta: f64,
    out: *mut *mut HbHypermodel,
) -> HbStatus {
    guard(|| write_out(out, HbHypermodel(lib(Hypermodel::new(r, beta, vartheta))?)))
}

/// Hypermodel with exponent `r_target` matched to the gamma model
/// `(1, beta1, vartheta1)`.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn hb_hypermodel_match(
    r_target: f64,
    beta1: f64,
    vartheta1: f64,
    out: *mut *mut HbHypermodel,
) -> HbStatus {
    guard(|| {
        write_out(
            out,
            HbHypermodel(lib(match_hyperparameters(r_target, beta1, vartheta1))?),
        )
    })
}

/// # Safety
/// `h` must be null or a pointer from `hb_hypermodel_new`/`hb_hypermodel_match`.
#[no_mangle]
pub unsafe extern "C" fn hb_hypermodel_free(h: *mut HbHypermodel) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn hb_hypermodel_params(
    h: *const HbHypermodel,
    r: *mut f64,
    beta: *mut f64,
    vartheta: *mut f64,
) -> HbStatus {
    guard(|| {
        let h = &deref(h, "hypermodel")?.0;
        if r.is_null() || beta.is_null() || vartheta.is_null() {
            return Err(null("r/beta/vartheta"));
        }
        *r = h.r();
        *beta = h.beta();
        *vartheta = h.vartheta(0);
        Ok(())
    })
}

/// Componentwise λ-update for `xi[..n]`, written to `out[..n]`.
///
/// # Safety
/// `xi` and `out` must be valid for `n` values.
#[no_mangle]
pub unsafe extern "C" fn hb_lambda_update(
    h: *const HbHypermodel,
    xi: *const f64,
    n: usize,
    out: *mut f64,
) -> HbStatus {
    guard(|| {
        let h = &deref(h, "hypermodel")?.0;
        if xi.is_null() || out.is_null() {
            return Err(null("xi/out"));
        }
        let xi = std::slice::from_raw_parts(xi, n);
        let lam = lib(lambda_update(xi, h))?;
        ptr::copy_nonoverlapping(lam.as_ptr(), out, n);
        Ok(())
    })
}

/// Hybrid IAS MAP estimate. `phase1` must have r = 1; `phase2` may be null.
/// Reaching `max_iter` is not an error; query [`hb_map_converged`].
///
/// # Safety
/// Pointers must be valid (`phase2` may be null).
#[no_mangle]
pub unsafe extern "C" fn hb_map_run(
    p: *const HbProblem,
    phase1: *const HbHypermodel,
    phase2: *const HbHypermodel,
    tol: f64,
    max_iter: usize,
    out: *mut *mut HbMapResult,
) -> HbStatus {
    guard(|| {
        let p = deref(p, "problem")?;
        let phase1 = deref(phase1, "phase1")?.0.clone();
        let phase2 = phase2.as_ref().map(|h| h.0.clone());
        let schedule = HybridSchedule {
            phase1,
            phase2,
            tol,
            max_iter,
        };
        let res = lib(hybrid_run(&p.problem, &schedule))?;
        let converged = res.converged();
        let result = match res.phase2 {
            Some(r) => r,
            None => res.phase1,
        };
        write_out(out, HbMapResult { result, converged })
    })
}

/// # Safety
/// `m` must be null or a pointer from `hb_map_run`.
#[no_mangle]
pub unsafe extern "C" fn hb_map_free(m: *mut HbMapResult) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// 1 if every phase met the stopping criterion, 0 otherwise (or on null).
///
/// # Safety
/// `m` must be null or valid.
#[no_mangle]
pub unsafe extern "C" fn hb_map_converged(m: *const HbMapResult) -> i32 {
    m.as_ref().map_or(0, |m| m.converged as i32)
}

/// Iterations of the final phase; 0 on null.
///
/// # Safety
/// `m` must be null or valid.
#[no_mangle]
pub unsafe extern "C" fn hb_map_iterations(m: *const HbMapResult) -> usize {
    m.as_ref().map_or(0, |m| m.result.iterations())
}

/// MAP increments x (length n).
///
/// # Safety
/// `buf` must be valid for `len` values; `needed` may be null.
#[no_mangle]
pub unsafe extern "C" fn hb_map_copy_x(
    m: *const HbMapResult,
    buf: *mut f64,
    len: usize,
    needed: *mut usize,
) -> HbStatus {
    guard(|| copy_out(&deref(m, "map")?.result.x(), buf, len, needed))
}

/// MAP variances θ (length n).
///
/// # Safety
/// `buf` must be valid for `len` values; `needed` may be null.
#[no_mangle]
pub unsafe extern "C" fn hb_map_copy_theta(
    m: *const HbMapResult,
    buf: *mut f64,
    len: usize,
    needed: *mut usize,
) -> HbStatus {
    guard(|| copy_out(&deref(m, "map")?.result.theta(), buf, len, needed))
}

/// Run a chain for `hm` started at the MAP point `map`. `k` is ignored for
/// plain pCN.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn hb_chain_run(
    p: *const HbProblem,
    hm: *const HbHypermodel,
    map: *const HbMapResult,
    kernel: HbKernel,
    h: f64,
    k: f64,
    total_steps: u64,
    thin: u64,
    seed: u64,
    out: *mut *mut HbChain,
) -> HbStatus {
    guard(|| {
        let p = deref(p, "problem")?;
        let hm = &deref(hm, "hypermodel")?.0;
        let last = deref(map, "map")?.result.last();
        let init = lib(to_reparam(&last.xi, &last.lambda, hm.r()))?;
        let pot = lib(PosteriorPotential::new(&p.problem, hm))?;
        let (kernel, k) = match kernel {
            HbKernel::Pcn => (KernelKind::Pcn, None),
            HbKernel::RadialPcn => (KernelKind::RadialPcn, Some(k)),
        };
        let cfg = ChainConfig {
            kernel,
            h,
            k,
            total_steps,
            thin,
            seed,
        };
        write_out(out, HbChain(lib(run_chain(&init, &cfg, &pot))?))
    })
}

/// # Safety
/// `c` must be null or a pointer from `hb_chain_run`.
#[no_mangle]
pub unsafe extern "C" fn hb_chain_free(c: *mut HbChain) {
    if !c.is_null() {
        drop(Box::from_raw(c));
    }
}

/// Fraction of accepted proposals; NaN on null.
///
/// # Safety
/// `c` must be null or valid.
#[no_mangle]
pub unsafe extern "C" fn hb_chain_acceptance_rate(c: *const HbChain) -> f64 {
    c.as_ref().map_or(f64::NAN, |c| c.0.acceptance_rate())
}

/// Number of stored draws; 0 on null.
///
/// # Safety
/// `c` must be null or valid.
#[no_mangle]
pub unsafe extern "C" fn hb_chain_stored(c: *const HbChain) -> usize {
    c.as_ref().map_or(0, |c| c.0.stored())
}

/// Stored draws, row-major, each row `(v_1..v_n, τ_1..τ_n)`.
///
/// # Safety
/// `buf` must be valid for `len` values; `needed` may be null.
#[no_mangle]
pub unsafe extern "C" fn hb_chain_copy_draws(
    c: *const HbChain,
    buf: *mut f64,
    len: usize,
    needed: *mut usize,
) -> HbStatus {
    guard(|| copy_out(&deref(c, "chain")?.0.draws, buf, len, needed))
}
