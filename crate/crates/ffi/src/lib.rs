//! C interface to the robsub solvers.
//!
//! Problems are opaque handles created from caller-owned arrays (copied on
//! creation) and released with the matching `_free` function. Every fallible
//! call returns a [`RobsubStatus`]; on failure a description is available
//! from [`robsub_last_error_message`] on the same thread.
//!
//! Matrices are passed row-major. A low-rank problem takes its measurements
//! stacked as an `n × (d1·d2)` array, each row a row-major flattened `d1×d2`
//! matrix.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use robsub::init::{spectral_init, Covariance};
use robsub::{
    hard_threshold, iht_solve, loss_subgrad, loss_value, rsgrad_solve, Error, IhtConfig, LossSpec, Matrix,
    MatrixProblem, Mode, RsGradConfig, SolveOutput, Vector, VectorProblem,
};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RobsubStatus {
    Ok = 0,
    NullPointer = 1,
    Parameter = 2,
    Input = 3,
    State = 4,
    Diverged = 5,
    Io = 6,
    Parse = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RobsubLoss {
    Absolute = 0,
    Huber = 1,
    Quantile = 2,
    Square = 3,
}

/// Solver options. Obtain defaults from [`robsub_default_options`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct RobsubSolveOptions {
    /// Sparsity for IHT, rank for RsGrad.
    pub level: usize,
    pub loss: RobsubLoss,
    /// Huber threshold or quantile level; ignored by the other losses.
    pub delta: f64,
    /// Nonzero: never switch to the constant phase-two stepsize.
    pub decay_only: i32,
    /// Zero keeps the solver default.
    pub max_iters_phase1: usize,
    /// Zero keeps the solver default.
    pub max_iters_phase2: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct RobsubSolveInfo {
    pub iterations: usize,
    /// Nonzero when phase two was entered.
    pub switched: i32,
    /// Phase-one steps taken before the switch.
    pub switch_iter: usize,
    pub eta0: f64,
    pub final_objective: f64,
}

pub struct RobsubSparseProblem {
    inner: VectorProblem,
}

pub struct RobsubLowrankProblem {
    inner: MatrixProblem,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> RobsubStatus {
    match e {
        Error::Parameter(_) => RobsubStatus::Parameter,
        Error::Input(_) => RobsubStatus::Input,
        Error::State(_) => RobsubStatus::State,
        Error::Diverged { .. } => RobsubStatus::Diverged,
        Error::Parse { .. } => RobsubStatus::Parse,
        Error::Io { .. } => RobsubStatus::Io,
    }
}

/// Runs `f`, translating errors and panics into status codes.
fn guard<F: FnOnce() -> Result<(), (RobsubStatus, String)>>(f: F) -> RobsubStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RobsubStatus::Ok,
        Ok(Err((status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            RobsubStatus::Panic
        }
    }
}

fn lift<T>(r: robsub::Result<T>) -> Result<T, (RobsubStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (RobsubStatus, String) {
    (RobsubStatus::NullPointer, format!("{what} is null"))
}

/// # Safety
/// `p` must be null or point to `len` readable doubles.
unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], (RobsubStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

/// # Safety
/// `p` must be null or point to `len` writable doubles.
unsafe fn slice_mut<'a>(p: *mut f64, len: usize, what: &str) -> Result<&'a mut [f64], (RobsubStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

fn checked_len(a: usize, b: usize) -> Result<usize, (RobsubStatus, String)> {
    a.checked_mul(b)
        .ok_or((RobsubStatus::Parameter, "array size overflows".to_string()))
}

fn loss_spec(loss: RobsubLoss, delta: f64) -> robsub::Result<LossSpec> {
    let spec = match loss {
        RobsubLoss::Absolute => LossSpec::Absolute,
        RobsubLoss::Square => LossSpec::Square,
        RobsubLoss::Huber => LossSpec::Huber { delta },
        RobsubLoss::Quantile => LossSpec::Quantile { delta },
    };
    spec.validate()?;
    Ok(spec)
}

/// Message for the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn robsub_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn robsub_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Defaults: absolute loss, two-phase schedule, solver iteration budgets.
#[no_mangle]
pub extern "C" fn robsub_default_options(level: usize) -> RobsubSolveOptions {
    RobsubSolveOptions {
        level,
        loss: RobsubLoss::Absolute,
        delta: 1.0,
        decay_only: 0,
        max_iters_phase1: 0,
        max_iters_phase2: 0,
    }
}

/// Copies an `n × d` row-major design and `n` responses into a new problem.
///
/// # Safety
/// `design` must point to `n*d` doubles, `responses` to `n` doubles and
/// `out` to writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn robsub_sparse_problem_new(
    design: *const f64,
    responses: *const f64,
    n: usize,
    d: usize,
    out: *mut *mut RobsubSparseProblem,
) -> RobsubStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let x = slice(design, checked_len(n, d)?, "design")?;
        let y = slice(responses, n, "responses")?;
        let p = lift(VectorProblem::new(
            Matrix::from_row_slice(n, d, x),
            Vector::from_column_slice(y),
            None,
        ))?;
        *out = Box::into_raw(Box::new(RobsubSparseProblem { inner: p }));
        Ok(())
    })
}

/// # Safety
/// `problem` must be null or a handle from [`robsub_sparse_problem_new`]
/// that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn robsub_sparse_problem_free(problem: *mut RobsubSparseProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Copies `n` stacked `d1×d2` measurements and `n` responses into a new
/// problem.
///
/// # Safety
/// `measurements` must point to `n*d1*d2` doubles, `responses` to `n`
/// doubles and `out` to writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn robsub_lowrank_problem_new(
    measurements: *const f64,
    responses: *const f64,
    n: usize,
    d1: usize,
    d2: usize,
    out: *mut *mut RobsubLowrankProblem,
) -> RobsubStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let width = checked_len(d1, d2)?;
        let x = slice(measurements, checked_len(n, width)?, "measurements")?;
        let y = slice(responses, n, "responses")?;
        let p = lift(MatrixProblem::from_stacked(
            d1,
            d2,
            Matrix::from_row_slice(n, width, x),
            Vector::from_column_slice(y),
            None,
        ))?;
        *out = Box::into_raw(Box::new(RobsubLowrankProblem { inner: p }));
        Ok(())
    })
}

/// # Safety
/// `problem` must be null or a handle from [`robsub_lowrank_problem_new`]
/// that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn robsub_lowrank_problem_free(problem: *mut RobsubLowrankProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

fn fill_info<P>(info: *mut RobsubSolveInfo, out: &SolveOutput<P>) {
    if info.is_null() {
        return;
    }
    let value = RobsubSolveInfo {
        iterations: out.trace.len(),
        switched: out.switch_iter.is_some() as i32,
        switch_iter: out.switch_iter.unwrap_or(0),
        eta0: out.eta0,
        final_objective: out.trace.last().map_or(f64::NAN, |t| t.objective),
    };
    // SAFETY: checked non-null; the caller promises it is writable.
    unsafe { *info = value };
}

fn apply_budget(s: &mut robsub::Schedule, o: &RobsubSolveOptions) {
    if o.decay_only != 0 {
        s.mode = Mode::DecayOnly;
    }
    if o.max_iters_phase1 > 0 {
        s.max_iters_phase1 = o.max_iters_phase1;
    }
    if o.max_iters_phase2 > 0 {
        s.max_iters_phase2 = o.max_iters_phase2;
    }
}

/// Fits a sparse vector from zero by IHT; writes `d` coefficients to
/// `beta_out`. `info` may be null.
///
/// # Safety
/// `problem` and `options` must be valid; `beta_out` must hold `d` doubles.
#[no_mangle]
pub unsafe extern "C" fn robsub_iht_solve(
    problem: *const RobsubSparseProblem,
    options: *const RobsubSolveOptions,
    beta_out: *mut f64,
    info: *mut RobsubSolveInfo,
) -> RobsubStatus {
    guard(|| {
        let p = &problem.as_ref().ok_or_else(|| null("problem"))?.inner;
        let o = options.as_ref().ok_or_else(|| null("options"))?;
        let beta = slice_mut(beta_out, p.dim(), "beta_out")?;
        let mut cfg = IhtConfig::new(o.level).with_loss(lift(loss_spec(o.loss, o.delta))?);
        apply_budget(&mut cfg.schedule, o);
        let out = lift(iht_solve(p, &cfg, &Vector::zeros(p.dim())))?;
        beta.copy_from_slice(out.estimate.as_slice());
        fill_info(info, &out);
        Ok(())
    })
}

/// Fits a rank-`level` matrix by RsGrad from a spectral initialization
/// (identity design covariance); writes the `d1×d2` estimate row-major to
/// `m_out`. `info` may be null.
///
/// # Safety
/// `problem` and `options` must be valid; `m_out` must hold `d1*d2` doubles.
#[no_mangle]
pub unsafe extern "C" fn robsub_rsgrad_solve(
    problem: *const RobsubLowrankProblem,
    options: *const RobsubSolveOptions,
    m_out: *mut f64,
    info: *mut RobsubSolveInfo,
) -> RobsubStatus {
    guard(|| {
        let p = &problem.as_ref().ok_or_else(|| null("problem"))?.inner;
        let o = options.as_ref().ok_or_else(|| null("options"))?;
        let (d1, d2) = p.shape();
        let m = slice_mut(m_out, d1 * d2, "m_out")?;
        let mut cfg = RsGradConfig::new(o.level).with_loss(lift(loss_spec(o.loss, o.delta))?);
        apply_budget(&mut cfg.schedule, o);
        lift(cfg.validate(d1, d2))?;
        let m0 = lift(spectral_init(p, Some(&Covariance::Identity), o.level))?;
        let out = lift(rsgrad_solve(p, &cfg, &m0))?;
        let est = out.estimate.reconstruct();
        for i in 0..d1 {
            for j in 0..d2 {
                m[i * d2 + j] = est[(i, j)];
            }
        }
        fill_info(info, &out);
        Ok(())
    })
}

/// Keeps the `k` largest-magnitude entries of `v` (ties to the lower index)
/// and zeroes the rest. `out` may alias `v`.
///
/// # Safety
/// `v` and `out` must each hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn robsub_hard_threshold(v: *const f64, len: usize, k: usize, out: *mut f64) -> RobsubStatus {
    guard(|| {
        let input = Vector::from_column_slice(slice(v, len, "v")?);
        let kept = lift(hard_threshold(&input, k))?;
        slice_mut(out, len, "out")?.copy_from_slice(kept.as_slice());
        Ok(())
    })
}

/// `ρ(u)` for the given loss.
///
/// # Safety
/// `out` must point to one writable double.
#[no_mangle]
pub unsafe extern "C" fn robsub_loss_value(loss: RobsubLoss, delta: f64, u: f64, out: *mut f64) -> RobsubStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let spec = lift(loss_spec(loss, delta))?;
        *out = lift(loss_value(&spec, u))?;
        Ok(())
    })
}

/// The subgradient `ψ(u)` used by the solvers (zero at kinks).
///
/// # Safety
/// `out` must point to one writable double.
#[no_mangle]
pub unsafe extern "C" fn robsub_loss_subgrad(loss: RobsubLoss, delta: f64, u: f64, out: *mut f64) -> RobsubStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let spec = lift(loss_spec(loss, delta))?;
        *out = lift(loss_subgrad(&spec, u))?;
        Ok(())
    })
}
