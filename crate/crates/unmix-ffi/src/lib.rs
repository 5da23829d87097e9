//! C ABI for the unmixing toolkit.
//!
//! Conventions:
//! - Every fallible function returns an `UnmixStatus`; `Ok` (0) means success.
//! - Complex arrays cross the boundary as interleaved doubles
//!   `[re0, im0, re1, im1, ...]`, row-major for matrices.
//! - Abundance vectors are stacked material-major: entry `m * n_pixels + p`
//!   is the fraction of material `m` at pixel `p`.
//! - On failure a thread-local message is set; fetch it with
//!   `unmix_last_error`.
//!
//! The C header is generated into `include/unmix.h` at build time.

use std::cell::RefCell;
use std::os::raw::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};

use num_complex::Complex64;
use unmix_core::operator::DenseOperator;
use unmix_core::prox::{project_l2_ball, project_nonneg, project_sum_one, soft_threshold};
use unmix_core::solver::{estimate_ric, solve, SolverOptions, UnmixProblem};
use unmix_core::stack::StackShape;
use unmix_core::UnmixError;

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum UnmixStatus {
    /// Success.
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// Arguments or configuration failed validation.
    InvalidInput = 2,
    /// A numerical or I/O failure occurred while computing.
    RuntimeFailure = 3,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn status_of(err: &UnmixError) -> UnmixStatus {
    match err.exit_code() {
        2 => UnmixStatus::InvalidInput,
        _ => UnmixStatus::RuntimeFailure,
    }
}

fn fail(err: UnmixError) -> UnmixStatus {
    let status = status_of(&err);
    set_error(err.to_string());
    status
}

/// Copy the message for the most recent failure on this thread into `buf`
/// (NUL-terminated, truncated to `cap` bytes). Returns the full message
/// length in bytes, excluding the terminator. `buf` may be null to query
/// the length.
#[no_mangle]
pub unsafe extern "C" fn unmix_last_error(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && cap > 0 {
            let n = msg.len().min(cap - 1);
            std::ptr::copy_nonoverlapping(msg.as_ptr(), buf as *mut u8, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Run `body`, converting panics into `RuntimeFailure` so they never unwind
/// across the ABI.
fn guarded(body: impl FnOnce() -> UnmixStatus) -> UnmixStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic");
            UnmixStatus::RuntimeFailure
        }
    }
}

unsafe fn reals<'a>(ptr: *const f64, len: usize) -> Option<&'a [f64]> {
    if ptr.is_null() && len > 0 {
        None
    } else {
        Some(std::slice::from_raw_parts(ptr, len))
    }
}

unsafe fn complexes(ptr: *const f64, n: usize) -> Option<Vec<Complex64>> {
    let raw = reals(ptr, 2 * n)?;
    Some(raw.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect())
}

unsafe fn write_reals(out: *mut f64, values: &[f64]) -> UnmixStatus {
    if out.is_null() {
        set_error("output pointer is null");
        return UnmixStatus::NullArgument;
    }
    std::ptr::copy_nonoverlapping(values.as_ptr(), out, values.len());
    UnmixStatus::Ok
}

unsafe fn write_complexes(out: *mut f64, values: &[Complex64]) -> UnmixStatus {
    if out.is_null() {
        set_error("output pointer is null");
        return UnmixStatus::NullArgument;
    }
    for (i, v) in values.iter().enumerate() {
        *out.add(2 * i) = v.re;
        *out.add(2 * i + 1) = v.im;
    }
    UnmixStatus::Ok
}

/// Soft-thresholding: `out[i] = sign(x[i]) * max(|x[i]| - lambda, 0)`.
/// `x` and `out` hold `len` doubles and may alias.
#[no_mangle]
pub unsafe extern "C" fn unmix_soft_threshold(
    x: *const f64,
    len: usize,
    lambda: f64,
    out: *mut f64,
) -> UnmixStatus {
    guarded(|| {
        let Some(x) = reals(x, len) else {
            set_error("input pointer is null");
            return UnmixStatus::NullArgument;
        };
        match soft_threshold(x, lambda) {
            Ok(w) => write_reals(out, &w),
            Err(e) => fail(e),
        }
    })
}

/// Euclidean projection of a complex vector onto the l2 ball of radius
/// `delta`. `x` and `out` hold `n_complex` interleaved complex doubles
/// (`2 * n_complex` doubles) and may alias.
#[no_mangle]
pub unsafe extern "C" fn unmix_project_l2_ball(
    x: *const f64,
    n_complex: usize,
    delta: f64,
    out: *mut f64,
) -> UnmixStatus {
    guarded(|| {
        let Some(x) = complexes(x, n_complex) else {
            set_error("input pointer is null");
            return UnmixStatus::NullArgument;
        };
        match project_l2_ball(&x, delta) {
            Ok(w) => write_complexes(out, &w),
            Err(e) => fail(e),
        }
    })
}

/// Projection onto the nonnegative orthant: `out[i] = max(x[i], 0)`.
#[no_mangle]
pub unsafe extern "C" fn unmix_project_nonneg(
    x: *const f64,
    len: usize,
    out: *mut f64,
) -> UnmixStatus {
    guarded(|| {
        let Some(x) = reals(x, len) else {
            set_error("input pointer is null");
            return UnmixStatus::NullArgument;
        };
        write_reals(out, &project_nonneg(x))
    })
}

/// Projection onto the affine set "per-pixel material fractions sum to one".
/// `x` and `out` hold `n_pixels * n_materials` doubles, stacked
/// material-major.
#[no_mangle]
pub unsafe extern "C" fn unmix_project_sum_one(
    x: *const f64,
    n_pixels: usize,
    n_materials: usize,
    out: *mut f64,
) -> UnmixStatus {
    guarded(|| {
        let shape = match StackShape::new(n_pixels, n_materials) {
            Ok(s) => s,
            Err(e) => return fail(e),
        };
        let Some(x) = reals(x, shape.len()) else {
            set_error("input pointer is null");
            return UnmixStatus::NullArgument;
        };
        match project_sum_one(x, shape) {
            Ok(w) => write_reals(out, &w),
            Err(e) => fail(e),
        }
    })
}

/// An unmixing problem instance with a dense sensing matrix. Opaque;
/// create with `unmix_problem_new`, free with `unmix_problem_free`.
pub struct UnmixDenseProblem {
    operator: DenseOperator,
    y_hat: Vec<Complex64>,
    prior: Vec<f64>,
    delta: f64,
    shape: StackShape,
}

/// Solver options for `unmix_problem_solve`. Zero-initialize and overwrite
/// selected fields, or pass null to use the defaults; any field that is
/// zero (or negative) falls back to its default.
#[repr(C)]
#[derive(Clone, Copy)]
pub struct UnmixSolverOptions {
    /// Augmented Lagrangian penalty weight (default 1.0).
    pub rho: f64,
    /// Maximum outer (multiplier) iterations (default 100).
    pub max_outer: usize,
    /// Maximum inner (proximal gradient) iterations (default 200).
    pub max_inner: usize,
    /// Outer stopping tolerance on constraint residuals (default 1e-6).
    pub outer_tol: f64,
    /// Inner stopping tolerance on the objective decrease (default 1e-6).
    pub inner_tol: f64,
}

/// Scalar results of a solve. The abundance vector itself is written to the
/// `z_out` argument of `unmix_problem_solve`.
#[repr(C)]
pub struct UnmixSolveStats {
    /// `||y_hat - A z||_2` at the returned point.
    pub residual_norm: f64,
    /// `||z - prior||_1` at the returned point.
    pub objective_l1: f64,
    /// Largest per-pixel deviation of the material sum from one.
    pub max_sum_violation: f64,
    /// Most negative abundance entry (0 if all nonnegative).
    pub max_negative_entry: f64,
    /// Outer iterations performed.
    pub outer_iterations: usize,
    /// 1 if the constraint residuals met the outer tolerance.
    pub converged: i32,
    /// 1 if the residual stalled above delta (likely infeasible problem).
    pub infeasible_suspected: i32,
}

/// Create a dense unmixing problem.
///
/// `a` is the `n_measurements x (n_pixels * n_materials)` sensing matrix,
/// row-major interleaved complex; `y_hat` holds `n_measurements` interleaved
/// complex measurements; `prior` holds `n_pixels * n_materials` doubles
/// (material-major). Returns null on invalid input (see `unmix_last_error`).
#[no_mangle]
pub unsafe extern "C" fn unmix_problem_new(
    n_measurements: usize,
    n_pixels: usize,
    n_materials: usize,
    a: *const f64,
    y_hat: *const f64,
    prior: *const f64,
    delta: f64,
) -> *mut UnmixDenseProblem {
    let built = catch_unwind(AssertUnwindSafe(|| {
        let shape = StackShape::new(n_pixels, n_materials)?;
        let entries = complexes(a, n_measurements * shape.len())
            .ok_or_else(|| UnmixError::InvalidArgument("matrix pointer is null".into()))?;
        let operator = DenseOperator::new(n_measurements, shape.len(), entries)?;
        let y_hat = complexes(y_hat, n_measurements)
            .ok_or_else(|| UnmixError::InvalidArgument("y_hat pointer is null".into()))?;
        let prior = reals(prior, shape.len())
            .ok_or_else(|| UnmixError::InvalidArgument("prior pointer is null".into()))?
            .to_vec();
        let problem = UnmixDenseProblem { operator, y_hat, prior, delta, shape };
        problem.as_problem().validate()?;
        Ok::<_, UnmixError>(problem)
    }));
    match built {
        Ok(Ok(problem)) => Box::into_raw(Box::new(problem)),
        Ok(Err(e)) => {
            set_error(e.to_string());
            std::ptr::null_mut()
        }
        Err(_) => {
            set_error("internal panic");
            std::ptr::null_mut()
        }
    }
}

impl UnmixDenseProblem {
    fn as_problem(&self) -> UnmixProblem<'_> {
        UnmixProblem {
            operator: &self.operator,
            y_hat: self.y_hat.clone(),
            prior: self.prior.clone(),
            delta: self.delta,
            shape: self.shape,
        }
    }
}

/// Solve a problem created by `unmix_problem_new`.
///
/// `options` may be null for defaults. `z_out` must hold
/// `n_pixels * n_materials` doubles and receives the abundances
/// (material-major). `stats_out` may be null.
#[no_mangle]
pub unsafe extern "C" fn unmix_problem_solve(
    problem: *const UnmixDenseProblem,
    options: *const UnmixSolverOptions,
    z_out: *mut f64,
    stats_out: *mut UnmixSolveStats,
) -> UnmixStatus {
    guarded(|| {
        let Some(problem) = problem.as_ref() else {
            set_error("problem handle is null");
            return UnmixStatus::NullArgument;
        };
        let mut opts = SolverOptions::default();
        if let Some(o) = options.as_ref() {
            if o.rho > 0.0 {
                opts.rho = o.rho;
            }
            if o.max_outer > 0 {
                opts.max_outer = o.max_outer;
            }
            if o.max_inner > 0 {
                opts.max_inner = o.max_inner;
            }
            if o.outer_tol > 0.0 {
                opts.outer_tol = o.outer_tol;
            }
            if o.inner_tol > 0.0 {
                opts.inner_tol = o.inner_tol;
            }
        }
        let report = match solve(&problem.as_problem(), &opts) {
            Ok(r) => r,
            Err(e) => return fail(e),
        };
        let status = write_reals(z_out, &report.z_final);
        if status != UnmixStatus::Ok {
            return status;
        }
        if let Some(stats) = stats_out.as_mut() {
            *stats = UnmixSolveStats {
                residual_norm: report.residual_norm,
                objective_l1: report.objective_l1,
                max_sum_violation: report.max_sum_violation,
                max_negative_entry: report.max_negative_entry,
                outer_iterations: report.outer_iterations,
                converged: report.converged as i32,
                infeasible_suspected: report.infeasible_suspected as i32,
            };
        }
        UnmixStatus::Ok
    })
}

/// Free a problem created by `unmix_problem_new`. Passing null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn unmix_problem_free(problem: *mut UnmixDenseProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Exact restricted isometry constant of order `s` for a dense
/// `rows x cols` complex matrix (row-major interleaved), by enumerating all
/// `s`-column submatrices. Fails if the subset count exceeds `cap`.
#[no_mangle]
pub unsafe extern "C" fn unmix_estimate_ric(
    a: *const f64,
    rows: usize,
    cols: usize,
    s: usize,
    cap: u64,
    out: *mut f64,
) -> UnmixStatus {
    guarded(|| {
        let Some(entries) = complexes(a, rows * cols) else {
            set_error("matrix pointer is null");
            return UnmixStatus::NullArgument;
        };
        if out.is_null() {
            set_error("output pointer is null");
            return UnmixStatus::NullArgument;
        }
        let operator = match DenseOperator::new(rows, cols, entries) {
            Ok(op) => op,
            Err(e) => return fail(e),
        };
        match estimate_ric(&operator, s, cap) {
            Ok(delta) => {
                *out = delta;
                UnmixStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}
