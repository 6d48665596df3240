//! C ABI for the scaling-law toolkit.
//!
//! Conventions:
//! - every fallible call returns an [`SlStatus`] code and writes results
//!   through out-pointers; `SL_STATUS_OK` is 0;
//! - laws and fit reports are opaque handles created by `sl_*_new`/`sl_fit_*`
//!   and released with the matching `sl_*_free`; freeing NULL is a no-op;
//! - on any non-OK status, `sl_last_error_message` returns a thread-local,
//!   NUL-terminated description valid until the next failing call on the
//!   same thread;
//! - all pointers must be valid for the stated lengths; functions never take
//!   ownership of caller memory.
//!
//! The C header is generated into `include/scalelaws.h` at build time.

use std::cell::RefCell;
use std::ffi::CString;
use std::panic::{catch_unwind, AssertUnwindSafe};

use libc::{c_char, c_int, size_t};

use scalelaws::allocate;
use scalelaws::error::Error;
use scalelaws::fit::{self, FitConfig, FitReport, ResidualSpace, RobustLoss};
use scalelaws::model::{Axis, JointLaw, LossToLossLaw, MarginalLaw};
use scalelaws::transfer::{self, LossPair, TransferPoint};

/// Status code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlStatus {
    Ok = 0,
    /// A required pointer argument was NULL.
    NullPointer = 1,
    /// An argument lies outside the mathematical domain of the operation.
    DomainError = 2,
    /// Too few points, or too little variation, to run a fit.
    InsufficientData = 3,
    /// The data admits no identifiable fit.
    DegenerateFit = 4,
    /// The regression design matrix is rank-deficient.
    CollinearDesign = 5,
    /// A numerical routine failed to produce a usable result.
    NumericalError = 6,
    /// An out-buffer was too small; see the written count for the need.
    BufferTooSmall = 7,
    /// The library panicked; state is unchanged but the call failed.
    Panic = 8,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(message: &str) {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn status_of(err: &Error) -> SlStatus {
    match err {
        Error::Domain(_) => SlStatus::DomainError,
        Error::InsufficientData(_) => SlStatus::InsufficientData,
        Error::DegenerateFit(_) | Error::DegenerateStatistic(_) => SlStatus::DegenerateFit,
        Error::Collinear { .. } => SlStatus::CollinearDesign,
        _ => SlStatus::NumericalError,
    }
}

fn fail(err: &Error) -> SlStatus {
    set_last_error(&err.to_string());
    status_of(err)
}

/// Runs a closure, converting panics into `SL_STATUS_PANIC` instead of
/// unwinding across the FFI boundary.
fn guarded(body: impl FnOnce() -> SlStatus) -> SlStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => {
            set_last_error("internal panic");
            SlStatus::Panic
        }
    }
}

/// Last error description for this thread; empty until a call fails.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn sl_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

// ---------------------------------------------------------------------------
// Joint law handle
// ---------------------------------------------------------------------------

/// Opaque joint scaling law `L(N, D) = E + A*N^-alpha + B*D^-beta`.
pub struct SlJointLaw(JointLaw);

/// Creates a joint-law handle; fails on invalid parameters.
///
/// # Safety
/// `out` must be a valid pointer to an `SlJointLaw*` slot.
#[no_mangle]
pub unsafe extern "C" fn sl_joint_law_new(
    e: f64,
    a: f64,
    alpha: f64,
    b: f64,
    beta: f64,
    out: *mut *mut SlJointLaw,
) -> SlStatus {
    guarded(|| {
        if out.is_null() {
            set_last_error("out pointer is NULL");
            return SlStatus::NullPointer;
        }
        match JointLaw::new(e, a, alpha, b, beta) {
            Ok(law) => {
                unsafe { *out = Box::into_raw(Box::new(SlJointLaw(law))) };
                SlStatus::Ok
            }
            Err(err) => fail(&err),
        }
    })
}

/// Releases a joint-law handle. NULL is a no-op.
///
/// # Safety
/// `law` must be NULL or a pointer returned by this library and not yet
/// freed.
#[no_mangle]
pub unsafe extern "C" fn sl_joint_law_free(law: *mut SlJointLaw) {
    if !law.is_null() {
        drop(unsafe { Box::from_raw(law) });
    }
}

unsafe fn borrow_law<'a>(law: *const SlJointLaw) -> Option<&'a JointLaw> {
    unsafe { law.as_ref() }.map(|l| &l.0)
}

/// Reads the five parameters back out of a handle.
///
/// # Safety
/// All pointers must be valid; `law` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn sl_joint_law_params(
    law: *const SlJointLaw,
    e: *mut f64,
    a: *mut f64,
    alpha: *mut f64,
    b: *mut f64,
    beta: *mut f64,
) -> SlStatus {
    guarded(|| {
        let Some(l) = (unsafe { borrow_law(law) }) else {
            set_last_error("law handle is NULL");
            return SlStatus::NullPointer;
        };
        if [e, a, alpha, b, beta].iter().any(|p| p.is_null()) {
            set_last_error("NULL out pointer");
            return SlStatus::NullPointer;
        }
        unsafe {
            *e = l.e;
            *a = l.a;
            *alpha = l.alpha;
            *b = l.b;
            *beta = l.beta;
        }
        SlStatus::Ok
    })
}

/// Predicted loss at model size `n` and data size `d`.
///
/// # Safety
/// `law` must be a live handle; `out_loss` must be valid.
#[no_mangle]
pub unsafe extern "C" fn sl_joint_eval(
    law: *const SlJointLaw,
    n: f64,
    d: f64,
    out_loss: *mut f64,
) -> SlStatus {
    guarded(|| {
        let Some(l) = (unsafe { borrow_law(law) }) else {
            set_last_error("law handle is NULL");
            return SlStatus::NullPointer;
        };
        if out_loss.is_null() {
            set_last_error("out_loss is NULL");
            return SlStatus::NullPointer;
        }
        match l.eval(n, d) {
            Ok(v) => {
                unsafe { *out_loss = v };
                SlStatus::Ok
            }
            Err(err) => fail(&err),
        }
    })
}

// ---------------------------------------------------------------------------
// Closed-form analytics
// ---------------------------------------------------------------------------

/// Excess loss over a floor: `loss - floor` (may be negative).
#[no_mangle]
pub extern "C" fn sl_excess_loss(floor: f64, loss: f64) -> f64 {
    scalelaws::model::excess_loss(floor, loss)
}

/// Factor by which excess loss shrinks under a k-fold scale-up:
/// `k^-exponent`.
///
/// # Safety
/// `out_ratio` must be valid.
#[no_mangle]
pub unsafe extern "C" fn sl_reduction_ratio(
    exponent: f64,
    k: f64,
    out_ratio: *mut f64,
) -> SlStatus {
    guarded(|| {
        if out_ratio.is_null() {
            set_last_error("out_ratio is NULL");
            return SlStatus::NullPointer;
        }
        match scalelaws::model::reduction_ratio(exponent, k) {
            Ok(v) => {
                unsafe { *out_ratio = v };
                SlStatus::Ok
            }
            Err(err) => fail(&err),
        }
    })
}

/// Total training compute in FLOPs: `6 * macs_fwd * batch * steps`.
///
/// # Safety
/// `out_flops` must be valid.
#[no_mangle]
pub unsafe extern "C" fn sl_compute_budget(
    macs_fwd: f64,
    batch: u64,
    steps: u64,
    out_flops: *mut f64,
) -> SlStatus {
    guarded(|| {
        if out_flops.is_null() {
            set_last_error("out_flops is NULL");
            return SlStatus::NullPointer;
        }
        match allocate::compute_budget(macs_fwd, batch, steps) {
            Ok(v) => {
                unsafe { *out_flops = v };
                SlStatus::Ok
            }
            Err(err) => fail(&err),
        }
    })
}

/// Compute-optimal allocation of one budget.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SlAllocation {
    pub n_star: f64,
    pub d_star: f64,
    pub loss_at_opt: f64,
    pub exponent_n: f64,
    pub exponent_d: f64,
    pub gamma: f64,
}

/// Growth exponents of the compute-optimal allocation and the compute
/// efficiency gamma.
///
/// # Safety
/// Out-pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn sl_allocation_exponents(
    alpha: f64,
    beta: f64,
    out_exponent_n: *mut f64,
    out_exponent_d: *mut f64,
    out_gamma: *mut f64,
) -> SlStatus {
    guarded(|| {
        if out_exponent_n.is_null() || out_exponent_d.is_null() || out_gamma.is_null() {
            set_last_error("NULL out pointer");
            return SlStatus::NullPointer;
        }
        match allocate::allocation_exponents(alpha, beta) {
            Ok((en, ed, g)) => {
                unsafe {
                    *out_exponent_n = en;
                    *out_exponent_d = ed;
                    *out_gamma = g;
                }
                SlStatus::Ok
            }
            Err(err) => fail(&err),
        }
    })
}

/// Allocation exponents under the generalized constraint `C ~ N^a * D^b`.
///
/// # Safety
/// Out-pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn sl_generalized_allocation_exponents(
    alpha: f64,
    beta: f64,
    a: f64,
    b: f64,
    out_exponent_n: *mut f64,
    out_exponent_d: *mut f64,
) -> SlStatus {
    guarded(|| {
        if out_exponent_n.is_null() || out_exponent_d.is_null() {
            set_last_error("NULL out pointer");
            return SlStatus::NullPointer;
        }
        match allocate::generalized_allocation_exponents(alpha, beta, a, b) {
            Ok((en, ed)) => {
                unsafe {
                    *out_exponent_n = en;
                    *out_exponent_d = ed;
                }
                SlStatus::Ok
            }
            Err(err) => fail(&err),
        }
    })
}

/// Closed-form compute-optimal `(N*, D*)` for a budget under
/// `C = kappa_const * N * D`.
///
/// # Safety
/// `law` must be a live handle; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn sl_optimal_allocation(
    law: *const SlJointLaw,
    c: f64,
    kappa_const: f64,
    out: *mut SlAllocation,
) -> SlStatus {
    guarded(|| {
        let Some(l) = (unsafe { borrow_law(law) }) else {
            set_last_error("law handle is NULL");
            return SlStatus::NullPointer;
        };
        if out.is_null() {
            set_last_error("out is NULL");
            return SlStatus::NullPointer;
        }
        match allocate::optimal_allocation(l, c, kappa_const) {
            Ok(al) => {
                unsafe {
                    *out = SlAllocation {
                        n_star: al.n_star,
                        d_star: al.d_star,
                        loss_at_opt: al.loss_at_opt,
                        exponent_n: al.exponent_n,
                        exponent_d: al.exponent_d,
                        gamma: al.gamma,
                    };
                }
                SlStatus::Ok
            }
            Err(err) => fail(&err),
        }
    })
}

/// Relative loss inflation from finite data over the infinite-data floor.
///
/// # Safety
/// `law` must be a live handle; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn sl_overfit_extent(
    law: *const SlJointLaw,
    n: f64,
    d: f64,
    out: *mut f64,
) -> SlStatus {
    guarded(|| {
        let Some(l) = (unsafe { borrow_law(law) }) else {
            set_last_error("law handle is NULL");
            return SlStatus::NullPointer;
        };
        if out.is_null() {
            set_last_error("out is NULL");
            return SlStatus::NullPointer;
        }
        match allocate::overfit_extent(l, n, d) {
            Ok(v) => {
                unsafe { *out = v };
                SlStatus::Ok
            }
            Err(err) => fail(&err),
        }
    })
}

/// Minimum unique data size keeping the overfitting extent at or below
/// `epsilon`.
///
/// # Safety
/// `law` must be a live handle; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn sl_min_data_for_tolerance(
    law: *const SlJointLaw,
    n: f64,
    epsilon: f64,
    out: *mut f64,
) -> SlStatus {
    guarded(|| {
        let Some(l) = (unsafe { borrow_law(law) }) else {
            set_last_error("law handle is NULL");
            return SlStatus::NullPointer;
        };
        if out.is_null() {
            set_last_error("out is NULL");
            return SlStatus::NullPointer;
        }
        match allocate::min_data_for_tolerance(l, n, epsilon) {
            Ok(v) => {
                unsafe { *out = v };
                SlStatus::Ok
            }
            Err(err) => fail(&err),
        }
    })
}

// ---------------------------------------------------------------------------
// Fitting
// ---------------------------------------------------------------------------

/// Fit-engine configuration mirrored as a plain C struct. Obtain defaults
/// from `sl_fit_config_default` and override fields as needed.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SlFitConfig {
    /// 0 = linear residuals, 1 = log residuals.
    pub residual_space: c_int,
    /// 0 = least squares, 1 = Huber with automatic threshold, 2 = Huber
    /// with `huber_delta`.
    pub robust: c_int,
    pub huber_delta: f64,
    pub max_iterations: u64,
    pub rel_tolerance: f64,
    pub n_starts: u64,
    pub seed: u64,
    /// Nonzero rejects constant-loss inputs instead of a flat fit.
    pub error_on_constant: c_int,
}

/// Writes the default fit configuration.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn sl_fit_config_default(out: *mut SlFitConfig) -> SlStatus {
    guarded(|| {
        if out.is_null() {
            set_last_error("out is NULL");
            return SlStatus::NullPointer;
        }
        let d = FitConfig::default();
        unsafe {
            *out = SlFitConfig {
                residual_space: 0,
                robust: 0,
                huber_delta: 0.0,
                max_iterations: d.max_iterations as u64,
                rel_tolerance: d.rel_tolerance,
                n_starts: d.n_starts as u64,
                seed: d.seed,
                error_on_constant: 0,
            };
        }
        SlStatus::Ok
    })
}

fn config_from(c: Option<&SlFitConfig>) -> Result<FitConfig, Error> {
    let Some(c) = c else {
        return Ok(FitConfig::default());
    };
    let residual_space = match c.residual_space {
        0 => ResidualSpace::Linear,
        1 => ResidualSpace::Log,
        other => {
            return Err(Error::Domain(format!(
                "residual_space must be 0 (linear) or 1 (log), got {other}"
            )))
        }
    };
    let robust = match c.robust {
        0 => RobustLoss::LeastSquares,
        1 => RobustLoss::HuberAuto,
        2 => RobustLoss::Huber(c.huber_delta),
        other => {
            return Err(Error::Domain(format!(
                "robust must be 0, 1, or 2, got {other}"
            )))
        }
    };
    Ok(FitConfig {
        residual_space,
        robust,
        max_iterations: c.max_iterations as usize,
        rel_tolerance: c.rel_tolerance,
        n_starts: c.n_starts as usize,
        seed: c.seed,
        error_on_constant: c.error_on_constant != 0,
    })
}

unsafe fn slice_arg<'a>(ptr: *const f64, len: size_t) -> Option<&'a [f64]> {
    if ptr.is_null() {
        None
    } else {
        Some(unsafe { std::slice::from_raw_parts(ptr, len) })
    }
}

/// Opaque joint-fit result.
pub struct SlJointFit(FitReport<JointLaw>);

/// Fits the joint law to parallel arrays of `(n, d, loss)` points.
/// `config` may be NULL for defaults. The returned handle must be freed
/// with `sl_joint_fit_free`.
///
/// # Safety
/// `n`, `d`, `loss` must each point to `len` doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn sl_fit_joint(
    n: *const f64,
    d: *const f64,
    loss: *const f64,
    len: size_t,
    config: *const SlFitConfig,
    out: *mut *mut SlJointFit,
) -> SlStatus {
    guarded(|| {
        let (Some(n), Some(d), Some(loss)) = (
            unsafe { slice_arg(n, len) },
            unsafe { slice_arg(d, len) },
            unsafe { slice_arg(loss, len) },
        ) else {
            set_last_error("point array is NULL");
            return SlStatus::NullPointer;
        };
        if out.is_null() {
            set_last_error("out is NULL");
            return SlStatus::NullPointer;
        }
        let cfg = match config_from(unsafe { config.as_ref() }) {
            Ok(c) => c,
            Err(err) => return fail(&err),
        };
        let points: Vec<(f64, f64, f64)> = (0..len).map(|i| (n[i], d[i], loss[i])).collect();
        match fit::fit_joint(&points, &cfg) {
            Ok(report) => {
                unsafe { *out = Box::into_raw(Box::new(SlJointFit(report))) };
                SlStatus::Ok
            }
            Err(err) => fail(&err),
        }
    })
}

/// Releases a joint-fit handle. NULL is a no-op.
///
/// # Safety
/// `fit` must be NULL or a pointer returned by `sl_fit_joint`, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sl_joint_fit_free(fit: *mut SlJointFit) {
    if !fit.is_null() {
        drop(unsafe { Box::from_raw(fit) });
    }
}

/// Copies the fitted law out of a fit result into a fresh law handle.
///
/// # Safety
/// `fit` must be a live handle; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn sl_joint_fit_law(
    fit: *const SlJointFit,
    out: *mut *mut SlJointLaw,
) -> SlStatus {
    guarded(|| {
        let Some(f) = (unsafe { fit.as_ref() }) else {
            set_last_error("fit handle is NULL");
            return SlStatus::NullPointer;
        };
        if out.is_null() {
            set_last_error("out is NULL");
            return SlStatus::NullPointer;
        }
        unsafe { *out = Box::into_raw(Box::new(SlJointLaw(f.0.params))) };
        SlStatus::Ok
    })
}

/// Fit diagnostics of a joint fit: R^2, objective value, convergence flag,
/// and the winning start index. Any out-pointer may be NULL to skip it.
///
/// # Safety
/// `fit` must be a live handle; non-NULL out-pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn sl_joint_fit_stats(
    fit: *const SlJointFit,
    out_r_squared: *mut f64,
    out_sse: *mut f64,
    out_converged: *mut c_int,
    out_start_index: *mut u64,
) -> SlStatus {
    guarded(|| {
        let Some(f) = (unsafe { fit.as_ref() }) else {
            set_last_error("fit handle is NULL");
            return SlStatus::NullPointer;
        };
        unsafe {
            if !out_r_squared.is_null() {
                *out_r_squared = f.0.r_squared;
            }
            if !out_sse.is_null() {
                *out_sse = f.0.sse;
            }
            if !out_converged.is_null() {
                *out_converged = c_int::from(f.0.converged);
            }
            if !out_start_index.is_null() {
                *out_start_index = f.0.start_index as u64;
            }
        }
        SlStatus::Ok
    })
}

/// Fits a single-axis law `L(x) = E + coeff * x^-exponent`.
/// `config` may be NULL for defaults.
///
/// # Safety
/// `x` and `loss` must point to `len` doubles; out-pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn sl_fit_marginal(
    x: *const f64,
    loss: *const f64,
    len: size_t,
    config: *const SlFitConfig,
    out_e: *mut f64,
    out_coeff: *mut f64,
    out_exponent: *mut f64,
    out_r_squared: *mut f64,
) -> SlStatus {
    guarded(|| {
        let (Some(x), Some(loss)) = (unsafe { slice_arg(x, len) }, unsafe {
            slice_arg(loss, len)
        }) else {
            set_last_error("point array is NULL");
            return SlStatus::NullPointer;
        };
        if out_e.is_null() || out_coeff.is_null() || out_exponent.is_null() {
            set_last_error("NULL out pointer");
            return SlStatus::NullPointer;
        }
        let cfg = match config_from(unsafe { config.as_ref() }) {
            Ok(c) => c,
            Err(err) => return fail(&err),
        };
        let points: Vec<(f64, f64)> = x.iter().cloned().zip(loss.iter().cloned()).collect();
        match fit::fit_marginal(&points, Axis::Params, &cfg) {
            Ok(report) => {
                unsafe {
                    *out_e = report.params.e;
                    *out_coeff = report.params.coeff;
                    *out_exponent = report.params.exponent;
                    if !out_r_squared.is_null() {
                        *out_r_squared = report.r_squared;
                    }
                }
                SlStatus::Ok
            }
            Err(err) => fail(&err),
        }
    })
}

/// Fits the compute frontier `L(C) = a*(C+c)^-b + d`.
/// `config` may be NULL for defaults.
///
/// # Safety
/// `compute` and `loss` must point to `len` doubles; out-pointers must be
/// valid.
#[no_mangle]
pub unsafe extern "C" fn sl_fit_frontier(
    compute: *const f64,
    loss: *const f64,
    len: size_t,
    config: *const SlFitConfig,
    out_a: *mut f64,
    out_b: *mut f64,
    out_c: *mut f64,
    out_d: *mut f64,
    out_r_squared: *mut f64,
) -> SlStatus {
    guarded(|| {
        let (Some(compute), Some(loss)) = (unsafe { slice_arg(compute, len) }, unsafe {
            slice_arg(loss, len)
        }) else {
            set_last_error("point array is NULL");
            return SlStatus::NullPointer;
        };
        if out_a.is_null() || out_b.is_null() || out_c.is_null() || out_d.is_null() {
            set_last_error("NULL out pointer");
            return SlStatus::NullPointer;
        }
        let cfg = match config_from(unsafe { config.as_ref() }) {
            Ok(c) => c,
            Err(err) => return fail(&err),
        };
        let points: Vec<(f64, f64)> = compute.iter().cloned().zip(loss.iter().cloned()).collect();
        match fit::fit_frontier(&points, &cfg) {
            Ok(report) => {
                unsafe {
                    *out_a = report.params.a;
                    *out_b = report.params.b;
                    *out_c = report.params.c;
                    *out_d = report.params.d;
                    if !out_r_squared.is_null() {
                        *out_r_squared = report.r_squared;
                    }
                }
                SlStatus::Ok
            }
            Err(err) => fail(&err),
        }
    })
}

/// Fits the loss-to-loss transfer law on paired `(l_id, l_ood)` arrays with
/// fixed floors. Pass NaN for `kappa_floor` to disable the floor. Pairs with
/// non-positive excess are dropped; the count lands in `out_n_dropped`.
///
/// # Safety
/// `l_id` and `l_ood` must point to `len` doubles; out-pointers must be
/// valid (`out_r_squared` and `out_n_dropped` may be NULL).
#[no_mangle]
pub unsafe extern "C" fn sl_fit_loss_to_loss(
    l_id: *const f64,
    l_ood: *const f64,
    len: size_t,
    e_id: f64,
    e_ood: f64,
    kappa_floor: f64,
    out_k: *mut f64,
    out_kappa: *mut f64,
    out_r_squared: *mut f64,
    out_n_dropped: *mut u64,
) -> SlStatus {
    guarded(|| {
        let (Some(l_id), Some(l_ood)) = (unsafe { slice_arg(l_id, len) }, unsafe {
            slice_arg(l_ood, len)
        }) else {
            set_last_error("loss array is NULL");
            return SlStatus::NullPointer;
        };
        if out_k.is_null() || out_kappa.is_null() {
            set_last_error("NULL out pointer");
            return SlStatus::NullPointer;
        }
        let pairs: Vec<LossPair> = l_id
            .iter()
            .zip(l_ood)
            .enumerate()
            .map(|(i, (&a, &b))| LossPair {
                l_id: a,
                l_ood: b,
                n_params: i as u64 + 1,
                n_samples: 1,
            })
            .collect();
        let floor = if kappa_floor.is_nan() {
            None
        } else {
            Some(kappa_floor)
        };
        match transfer::fit_loss_to_loss(&pairs, e_id, e_ood, floor) {
            Ok(report) => {
                unsafe {
                    *out_k = report.params.k;
                    *out_kappa = report.params.kappa;
                    if !out_r_squared.is_null() {
                        *out_r_squared = report.r_squared;
                    }
                    if !out_n_dropped.is_null() {
                        *out_n_dropped = report.n_dropped as u64;
                    }
                }
                SlStatus::Ok
            }
            Err(err) => fail(&err),
        }
    })
}

/// Predicted OOD loss at an ID loss: `e_ood + k*(l_id - e_id)^kappa`.
///
/// # Safety
/// `out_l_ood` must be valid.
#[no_mangle]
pub unsafe extern "C" fn sl_predict_ood(
    k: f64,
    kappa: f64,
    e_id: f64,
    e_ood: f64,
    l_id: f64,
    out_l_ood: *mut f64,
) -> SlStatus {
    guarded(|| {
        if out_l_ood.is_null() {
            set_last_error("out_l_ood is NULL");
            return SlStatus::NullPointer;
        }
        let law = match LossToLossLaw::new(k, kappa, e_id, e_ood) {
            Ok(law) => law,
            Err(err) => return fail(&err),
        };
        match transfer::predict_ood(&law, l_id) {
            Ok(v) => {
                unsafe { *out_l_ood = v };
                SlStatus::Ok
            }
            Err(err) => fail(&err),
        }
    })
}

/// Fits the fine-tuning transfer law `d_t = k * d_f^g1 * n^g2` by OLS in
/// log space.
///
/// # Safety
/// `d_f` and `n_params` must point to `len` u64 values, `d_t` to `len`
/// doubles; out-pointers must be valid (`out_r_squared` may be NULL).
#[no_mangle]
pub unsafe extern "C" fn sl_fit_transfer(
    d_f: *const u64,
    n_params: *const u64,
    d_t: *const f64,
    len: size_t,
    out_k: *mut f64,
    out_gamma1: *mut f64,
    out_gamma2: *mut f64,
    out_r_squared: *mut f64,
) -> SlStatus {
    guarded(|| {
        if d_f.is_null() || n_params.is_null() || d_t.is_null() {
            set_last_error("point array is NULL");
            return SlStatus::NullPointer;
        }
        if out_k.is_null() || out_gamma1.is_null() || out_gamma2.is_null() {
            set_last_error("NULL out pointer");
            return SlStatus::NullPointer;
        }
        let d_f = unsafe { std::slice::from_raw_parts(d_f, len) };
        let n_params = unsafe { std::slice::from_raw_parts(n_params, len) };
        let d_t = unsafe { std::slice::from_raw_parts(d_t, len) };
        let points: Vec<TransferPoint> = (0..len)
            .map(|i| TransferPoint {
                d_f: d_f[i],
                n_params: n_params[i],
                d_t: d_t[i],
            })
            .collect();
        match transfer::fit_transfer(&points) {
            Ok(report) => {
                unsafe {
                    *out_k = report.params.k;
                    *out_gamma1 = report.params.gamma1;
                    *out_gamma2 = report.params.gamma2;
                    if !out_r_squared.is_null() {
                        *out_r_squared = report.r_squared;
                    }
                }
                SlStatus::Ok
            }
            Err(err) => fail(&err),
        }
    })
}

/// Finds crossings of two single-axis curves inside `[x_lo, x_hi]`.
/// Roots are written into the caller's buffer; if more roots exist than
/// `capacity`, `SL_STATUS_BUFFER_TOO_SMALL` is returned with the required
/// count in `out_count`. `out_coincident` is nonzero when the curves agree
/// everywhere in range.
///
/// # Safety
/// `out_roots` must point to `capacity` doubles; `out_count` and
/// `out_coincident` must be valid.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn sl_crossover(
    e1: f64,
    coeff1: f64,
    exponent1: f64,
    e2: f64,
    coeff2: f64,
    exponent2: f64,
    x_lo: f64,
    x_hi: f64,
    out_roots: *mut f64,
    capacity: size_t,
    out_count: *mut size_t,
    out_coincident: *mut c_int,
) -> SlStatus {
    guarded(|| {
        if out_count.is_null() || out_coincident.is_null() || (capacity > 0 && out_roots.is_null())
        {
            set_last_error("NULL out pointer");
            return SlStatus::NullPointer;
        }
        let curve_a = match MarginalLaw::new(e1, coeff1, exponent1, Axis::Params) {
            Ok(c) => c,
            Err(err) => return fail(&err),
        };
        let curve_b = match MarginalLaw::new(e2, coeff2, exponent2, Axis::Params) {
            Ok(c) => c,
            Err(err) => return fail(&err),
        };
        match allocate::crossover(&curve_a, &curve_b, (x_lo, x_hi)) {
            Ok(scan) => {
                unsafe {
                    *out_count = scan.roots.len();
                    *out_coincident = c_int::from(scan.coincident);
                }
                if scan.roots.len() > capacity {
                    set_last_error("root buffer too small");
                    return SlStatus::BufferTooSmall;
                }
                for (i, root) in scan.roots.iter().enumerate() {
                    unsafe { *out_roots.add(i) = *root };
                }
                SlStatus::Ok
            }
            Err(err) => fail(&err),
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ffi::CStr;
    use std::ptr;

    #[test]
    fn law_handle_lifecycle_and_eval() {
        unsafe {
            let mut law: *mut SlJointLaw = ptr::null_mut();
            let status = sl_joint_law_new(0.1, 5.0, 0.5, 10.0, 1.0, &mut law);
            assert_eq!(status, SlStatus::Ok);
            let mut loss = 0.0;
            assert_eq!(sl_joint_eval(law, 100.0, 1000.0, &mut loss), SlStatus::Ok);
            assert!((loss - 0.61).abs() < 1e-12);

            // Domain error surfaces as a code plus a readable message.
            assert_eq!(
                sl_joint_eval(law, -1.0, 10.0, &mut loss),
                SlStatus::DomainError
            );
            let msg = CStr::from_ptr(sl_last_error_message());
            assert!(msg.to_str().unwrap().contains("positive"));

            let (mut e, mut a, mut al, mut b, mut be) = (0.0, 0.0, 0.0, 0.0, 0.0);
            assert_eq!(
                sl_joint_law_params(law, &mut e, &mut a, &mut al, &mut b, &mut be),
                SlStatus::Ok
            );
            assert_eq!((e, a, al, b, be), (0.1, 5.0, 0.5, 10.0, 1.0));
            sl_joint_law_free(law);
        }
    }

    #[test]
    fn invalid_law_is_rejected() {
        unsafe {
            let mut law: *mut SlJointLaw = ptr::null_mut();
            assert_eq!(
                sl_joint_law_new(-0.1, 5.0, 0.5, 10.0, 1.0, &mut law),
                SlStatus::DomainError
            );
            assert!(law.is_null());
            assert_eq!(
                sl_joint_law_new(0.1, 5.0, 0.5, 10.0, 1.0, ptr::null_mut()),
                SlStatus::NullPointer
            );
        }
    }

    #[test]
    fn allocation_through_the_abi() {
        unsafe {
            let mut law: *mut SlJointLaw = ptr::null_mut();
            sl_joint_law_new(0.1, 2.0, 0.4, 2.0, 0.4, &mut law);
            let mut al = SlAllocation {
                n_star: 0.0,
                d_star: 0.0,
                loss_at_opt: 0.0,
                exponent_n: 0.0,
                exponent_d: 0.0,
                gamma: 0.0,
            };
            assert_eq!(sl_optimal_allocation(law, 1e8, 1.0, &mut al), SlStatus::Ok);
            assert!((al.n_star - 1e4).abs() <= 1e-6 * 1e4);
            assert!((al.d_star - 1e4).abs() <= 1e-6 * 1e4);
            assert_eq!(al.exponent_n + al.exponent_d, 1.0);
            sl_joint_law_free(law);

            let (mut en, mut ed, mut g) = (0.0, 0.0, 0.0);
            assert_eq!(
                sl_allocation_exponents(0.4, 0.1, &mut en, &mut ed, &mut g),
                SlStatus::Ok
            );
            assert!((en - 0.2).abs() <= 1e-12 && (ed - 0.8).abs() <= 1e-12);
        }
    }

    #[test]
    fn scalar_helpers() {
        unsafe {
            let mut ratio = 0.0;
            assert_eq!(sl_reduction_ratio(0.3, 10.0, &mut ratio), SlStatus::Ok);
            assert!((0.500..=0.502).contains(&ratio));
            assert_eq!(
                sl_reduction_ratio(0.3, 0.0, &mut ratio),
                SlStatus::DomainError
            );

            assert!((sl_excess_loss(0.2, 0.61) - 0.41).abs() < 1e-15);

            let mut flops = 0.0;
            assert_eq!(
                sl_compute_budget(1e9, 128, 1_500_000, &mut flops),
                SlStatus::Ok
            );
            assert!((flops - 1.152e18).abs() <= 1e-3);

            let mut l_ood = 0.0;
            assert_eq!(
                sl_predict_ood(0.2, 0.5, 0.1, 0.05, 0.35, &mut l_ood),
                SlStatus::Ok
            );
            assert!((l_ood - 0.15).abs() < 1e-15);
        }
    }

    #[test]
    fn joint_fit_through_the_abi() {
        let truth = JointLaw::new(0.05, 3.0, 0.35, 8.0, 0.12).unwrap();
        let mut n = Vec::new();
        let mut d = Vec::new();
        let mut loss = Vec::new();
        for i in 0..6 {
            for j in 0..6 {
                let nv = 10f64.powf(4.0 + 0.8 * i as f64);
                let dv = 10f64.powf(3.0 + 0.6 * j as f64);
                n.push(nv);
                d.push(dv);
                loss.push(truth.eval(nv, dv).unwrap());
            }
        }
        unsafe {
            let mut fit: *mut SlJointFit = ptr::null_mut();
            let status = sl_fit_joint(
                n.as_ptr(),
                d.as_ptr(),
                loss.as_ptr(),
                n.len(),
                ptr::null(),
                &mut fit,
            );
            assert_eq!(status, SlStatus::Ok);

            let mut law: *mut SlJointLaw = ptr::null_mut();
            assert_eq!(sl_joint_fit_law(fit, &mut law), SlStatus::Ok);
            let (mut e, mut a, mut al, mut b, mut be) = (0.0, 0.0, 0.0, 0.0, 0.0);
            sl_joint_law_params(law, &mut e, &mut a, &mut al, &mut b, &mut be);
            assert!((al - 0.35).abs() <= 1e-4 * 0.35, "alpha={al}");
            assert!((be - 0.12).abs() <= 1e-4 * 0.12, "beta={be}");

            let mut r2 = 0.0;
            let mut converged = 0;
            assert_eq!(
                sl_joint_fit_stats(
                    fit,
                    &mut r2,
                    ptr::null_mut(),
                    &mut converged,
                    ptr::null_mut()
                ),
                SlStatus::Ok
            );
            assert!(r2 >= 1.0 - 1e-8);
            assert_eq!(converged, 1);

            sl_joint_law_free(law);
            sl_joint_fit_free(fit);
        }
    }

    #[test]
    fn thin_fit_data_is_reported() {
        unsafe {
            let n = [1e4, 1e5];
            let d = [1e3, 1e4];
            let loss = [0.5, 0.4];
            let mut fit: *mut SlJointFit = ptr::null_mut();
            assert_eq!(
                sl_fit_joint(
                    n.as_ptr(),
                    d.as_ptr(),
                    loss.as_ptr(),
                    2,
                    ptr::null(),
                    &mut fit
                ),
                SlStatus::InsufficientData
            );
        }
    }

    #[test]
    fn loss_to_loss_and_transfer_through_the_abi() {
        unsafe {
            let l_id: Vec<f64> = (1..=10).map(|i| 0.05 * i as f64).collect();
            let l_ood: Vec<f64> = l_id.iter().map(|&x| 0.486 * x.powf(0.174)).collect();
            let (mut k, mut kappa, mut r2, mut dropped) = (0.0, 0.0, 0.0, 0u64);
            let status = sl_fit_loss_to_loss(
                l_id.as_ptr(),
                l_ood.as_ptr(),
                l_id.len(),
                0.0,
                0.0,
                f64::NAN,
                &mut k,
                &mut kappa,
                &mut r2,
                &mut dropped,
            );
            assert_eq!(status, SlStatus::Ok);
            assert!((k - 0.486).abs() <= 1e-10);
            assert!((kappa - 0.174).abs() <= 1e-10);
            assert_eq!(dropped, 0);

            // The same data under a binding floor pins the exponent.
            let shallow: Vec<f64> = l_id.iter().map(|&x| 0.3 * x.powf(0.02)).collect();
            sl_fit_loss_to_loss(
                l_id.as_ptr(),
                shallow.as_ptr(),
                l_id.len(),
                0.0,
                0.0,
                0.05,
                &mut k,
                &mut kappa,
                &mut r2,
                &mut dropped,
            );
            assert_eq!(kappa, 0.05);

            let d_f = [100u64, 1000, 10_000, 100_000, 100, 1000, 10_000, 100_000];
            let n_params = [
                10_000u64, 10_000, 10_000, 10_000, 1_000_000, 1_000_000, 1_000_000, 1_000_000,
            ];
            let d_t: Vec<f64> = d_f
                .iter()
                .zip(&n_params)
                .map(|(&df, &np)| 2.0 * (df as f64).powf(1.78) * (np as f64).powf(-0.3))
                .collect();
            let (mut k, mut g1, mut g2) = (0.0, 0.0, 0.0);
            let status = sl_fit_transfer(
                d_f.as_ptr(),
                n_params.as_ptr(),
                d_t.as_ptr(),
                d_f.len(),
                &mut k,
                &mut g1,
                &mut g2,
                ptr::null_mut(),
            );
            assert_eq!(status, SlStatus::Ok);
            assert!((g1 - 1.78).abs() <= 1e-10);
            assert!((g2 + 0.3).abs() <= 1e-10);

            // Collinear design: a single model size.
            let one_n = [50_000u64; 8];
            let status = sl_fit_transfer(
                d_f.as_ptr(),
                one_n.as_ptr(),
                d_t.as_ptr(),
                d_f.len(),
                &mut k,
                &mut g1,
                &mut g2,
                ptr::null_mut(),
            );
            assert_eq!(status, SlStatus::CollinearDesign);
        }
    }

    #[test]
    fn crossover_buffer_protocol() {
        unsafe {
            // Construction crossing at exactly 1e5 (see core allocate tests).
            let a_at = 0.2 + 10.0 * 1e5f64.powf(-0.3);
            let c2 = (a_at - 0.25) * 1e5f64.powf(0.5);
            let mut roots = [0.0f64; 4];
            let mut count = 0usize;
            let mut coincident = 0;
            let status = sl_crossover(
                0.2,
                10.0,
                0.3,
                0.25,
                c2,
                0.5,
                1e4,
                1e6,
                roots.as_mut_ptr(),
                roots.len(),
                &mut count,
                &mut coincident,
            );
            assert_eq!(status, SlStatus::Ok);
            assert_eq!(count, 1);
            assert_eq!(coincident, 0);
            assert!((roots[0] - 1e5).abs() <= 1e-6 * 1e5);

            // Zero-capacity buffer reports the required count.
            let status = sl_crossover(
                0.2,
                10.0,
                0.3,
                0.25,
                c2,
                0.5,
                1e4,
                1e6,
                ptr::null_mut(),
                0,
                &mut count,
                &mut coincident,
            );
            assert_eq!(status, SlStatus::BufferTooSmall);
            assert_eq!(count, 1);

            // Identical curves are coincident, not rooted.
            let status = sl_crossover(
                0.2,
                10.0,
                0.3,
                0.2,
                10.0,
                0.3,
                1e4,
                1e6,
                roots.as_mut_ptr(),
                roots.len(),
                &mut count,
                &mut coincident,
            );
            assert_eq!(status, SlStatus::Ok);
            assert_eq!(count, 0);
            assert_eq!(coincident, 1);
        }
    }

    #[test]
    fn marginal_and_frontier_through_the_abi() {
        unsafe {
            let x: Vec<f64> = (0..8).map(|i| 10f64.powf(3.0 + 0.5 * i as f64)).collect();
            let loss: Vec<f64> = x.iter().map(|&v| 0.2 + 4.0 * v.powf(-0.9)).collect();
            let (mut e, mut coeff, mut exponent, mut r2) = (0.0, 0.0, 0.0, 0.0);
            let status = sl_fit_marginal(
                x.as_ptr(),
                loss.as_ptr(),
                x.len(),
                ptr::null(),
                &mut e,
                &mut coeff,
                &mut exponent,
                &mut r2,
            );
            assert_eq!(status, SlStatus::Ok);
            assert!((exponent - 0.9).abs() <= 1e-5 * 0.9);

            let mut config = SlFitConfig {
                residual_space: 0,
                robust: 0,
                huber_delta: 0.0,
                max_iterations: 0,
                rel_tolerance: 0.0,
                n_starts: 0,
                seed: 0,
                error_on_constant: 0,
            };
            assert_eq!(sl_fit_config_default(&mut config), SlStatus::Ok);
            assert_eq!(config.n_starts, 64);

            let compute: Vec<f64> = (0..24)
                .map(|i| 10f64.powf(11.0 + 7.0 * i as f64 / 23.0))
                .collect();
            let closs: Vec<f64> = compute
                .iter()
                .map(|&c| 2.0 * (c + 1e12).powf(-0.15) + 0.18)
                .collect();
            let (mut fa, mut fb, mut fc, mut fd) = (0.0, 0.0, 0.0, 0.0);
            let status = sl_fit_frontier(
                compute.as_ptr(),
                closs.as_ptr(),
                compute.len(),
                &config,
                &mut fa,
                &mut fb,
                &mut fc,
                &mut fd,
                ptr::null_mut(),
            );
            assert_eq!(status, SlStatus::Ok);
            assert!((fb - 0.15).abs() <= 1e-3 * 0.15, "b={fb}");
        }
    }
}
