//! Augmented Lagrangian solver for the constrained sparse unmixing program
//!
//! ```text
//! minimize   ||z - v||_1
//! subject to ||y_hat - A z||_2 <= delta,   z >= 0,   D z = 1_N
//! ```
//!
//! The constraints are split onto auxiliary variables w_1..w_4, the augmented
//! Lagrangian in (z, w) is minimized jointly with FISTA (momentum coefficient
//! (k-2)/(k+1), backtracking line search), and the scaled dual variables are
//! updated by one multiplier-method step per outer iteration.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::operator::{ScaledOperator, SensingOperator};
use crate::prox::{
    l2_norm_complex, l2_norm_real, project_l2_ball, project_nonneg, project_simplex,
    project_sum_one, soft_threshold,
};
use crate::stack::StackShape;
use crate::{Result, UnmixError};

/// Problem data for one unmixing solve.
pub struct UnmixProblem<'a> {
    pub operator: &'a dyn SensingOperator,
    /// Adjusted measurements y_hat = y - y_prior + A v.
    pub y_hat: Vec<Complex64>,
    /// Stacked prior v = (v_1^T, ..., v_R^T)^T.
    pub prior: Vec<f64>,
    /// Residual budget delta for ||y_hat - A z||_2.
    pub delta: f64,
    pub shape: StackShape,
}

impl UnmixProblem<'_> {
    pub fn validate(&self) -> Result<()> {
        let n = self.shape.len();
        if self.operator.cols() != n {
            return Err(UnmixError::InvalidArgument(format!(
                "operator has {} columns, stacked length is {}",
                self.operator.cols(),
                n
            )));
        }
        if self.operator.rows() != self.y_hat.len() {
            return Err(UnmixError::InvalidArgument(format!(
                "operator has {} rows, y_hat length is {}",
                self.operator.rows(),
                self.y_hat.len()
            )));
        }
        if self.prior.len() != n {
            return Err(UnmixError::InvalidArgument(format!(
                "prior length {} does not match stacked length {}",
                self.prior.len(),
                n
            )));
        }
        if !(self.delta >= 0.0) || !self.delta.is_finite() {
            return Err(UnmixError::InvalidArgument(format!("delta must be >= 0, got {}", self.delta)));
        }
        Ok(())
    }
}

/// Backtracking line-search parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LineSearchOptions {
    pub initial_t: f64,
    pub backtrack_factor: f64,
}

impl Default for LineSearchOptions {
    fn default() -> Self {
        Self { initial_t: 1.0, backtrack_factor: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    pub rho: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    /// Relative change of the augmented Lagrangian value that stops the inner loop.
    pub inner_tol: f64,
    /// Outer stop: max constraint-residual norm below outer_tol * (1 + ||v||_2).
    pub outer_tol: f64,
    pub line_search: LineSearchOptions,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            rho: 1.0,
            max_outer: 100,
            max_inner: 200,
            inner_tol: 1e-6,
            outer_tol: 1e-6,
            line_search: LineSearchOptions::default(),
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0) {
            return Err(UnmixError::InvalidArgument("rho must be positive".into()));
        }
        if self.max_outer == 0 || self.max_inner == 0 {
            return Err(UnmixError::InvalidArgument("iteration limits must be positive".into()));
        }
        if !(self.inner_tol >= 0.0) || !(self.outer_tol >= 0.0) {
            return Err(UnmixError::InvalidArgument("tolerances must be nonnegative".into()));
        }
        if !(self.line_search.initial_t > 0.0) {
            return Err(UnmixError::InvalidArgument("initial_t must be positive".into()));
        }
        let b = self.line_search.backtrack_factor;
        if !(b > 0.0 && b < 1.0) {
            return Err(UnmixError::InvalidArgument("backtrack_factor must be in (0,1)".into()));
        }
        Ok(())
    }
}

/// Primal, auxiliary, and dual iterates, plus the two-deep momentum history.
#[derive(Debug, Clone)]
pub struct SolverState {
    pub z: Vec<f64>,
    pub w1: Vec<f64>,
    pub w2: Vec<Complex64>,
    pub w3: Vec<f64>,
    pub w4: Vec<f64>,
    pub u1: Vec<f64>,
    pub u2: Vec<Complex64>,
    pub u3: Vec<f64>,
    pub u4: Vec<f64>,
    pub rho: f64,
    pub t: f64,
    prev: MomentumSnapshot,
    prev2: MomentumSnapshot,
}

#[derive(Debug, Clone)]
struct MomentumSnapshot {
    z: Vec<f64>,
    w1: Vec<f64>,
    w2: Vec<Complex64>,
    w3: Vec<f64>,
    w4: Vec<f64>,
}

impl SolverState {
    /// Initial state: z = v, w_r at their feasible projections, duals zero.
    /// When v itself is feasible for all constraints this is a fixed point of
    /// the iteration, so a problem whose optimum is v converges immediately.
    pub fn initialize(problem: &UnmixProblem, opts: &SolverOptions) -> Result<Self> {
        problem.validate()?;
        opts.validate()?;
        let v = problem.prior.clone();
        let m = problem.y_hat.len();
        let n = v.len();
        let av = problem.operator.apply(&v);
        let res: Vec<Complex64> = av.iter().zip(&problem.y_hat).map(|(a, y)| a - y).collect();
        let w2 = project_l2_ball(&res, problem.delta)?;
        let w3 = project_nonneg(&v);
        let w4 = project_sum_one(&v, problem.shape)?;
        let state = SolverState {
            z: v.clone(),
            w1: vec![0.0; n],
            w2: w2.clone(),
            w3: w3.clone(),
            w4: w4.clone(),
            u1: vec![0.0; n],
            u2: vec![Complex64::new(0.0, 0.0); m],
            u3: vec![0.0; n],
            u4: vec![0.0; n],
            rho: opts.rho,
            t: opts.line_search.initial_t,
            prev: MomentumSnapshot { z: v.clone(), w1: vec![0.0; n], w2: w2.clone(), w3: w3.clone(), w4: w4.clone() },
            prev2: MomentumSnapshot { z: v, w1: vec![0.0; n], w2, w3, w4 },
        };
        Ok(state)
    }

    fn reset_momentum(&mut self) {
        self.prev = MomentumSnapshot {
            z: self.z.clone(),
            w1: self.w1.clone(),
            w2: self.w2.clone(),
            w3: self.w3.clone(),
            w4: self.w4.clone(),
        };
        self.prev2 = self.prev.clone();
    }
}

/// Constraint residuals of the augmented Lagrangian at a given point.
struct Residuals {
    r1: Vec<f64>,
    r2: Vec<Complex64>,
    r3: Vec<f64>,
    r4: Vec<f64>,
}

impl Residuals {
    fn compute(
        z: &[f64],
        az: &[Complex64],
        w1: &[f64],
        w2: &[Complex64],
        w3: &[f64],
        w4: &[f64],
        u: (&[f64], &[Complex64], &[f64], &[f64]),
        v: &[f64],
        y_hat: &[Complex64],
    ) -> Self {
        let r1 = w1.iter().zip(z).zip(v).zip(u.0).map(|(((w, z), v), u)| w - z + v + u).collect();
        let r2 = w2
            .iter()
            .zip(y_hat)
            .zip(az)
            .zip(u.1)
            .map(|(((w, y), a), u)| w + y - a + u)
            .collect();
        let r3 = w3.iter().zip(z).zip(u.2).map(|((w, z), u)| w - z + u).collect();
        let r4 = w4.iter().zip(z).zip(u.3).map(|((w, z), u)| w - z + u).collect();
        Residuals { r1, r2, r3, r4 }
    }

    /// Smooth part of the augmented Lagrangian: (rho/2) * sum of squared norms.
    fn smooth_value(&self, rho: f64) -> f64 {
        let q = self.r1.iter().map(|v| v * v).sum::<f64>()
            + self.r2.iter().map(|v| v.norm_sqr()).sum::<f64>()
            + self.r3.iter().map(|v| v * v).sum::<f64>()
            + self.r4.iter().map(|v| v * v).sum::<f64>();
        0.5 * rho * q
    }
}

/// Gradients of the quadratic penalty terms with respect to each primal block.
pub struct SmoothGradient {
    pub gz: Vec<f64>,
    pub gw1: Vec<f64>,
    pub gw2: Vec<Complex64>,
    pub gw3: Vec<f64>,
    pub gw4: Vec<f64>,
}

fn gradient_from_residuals(
    res: &Residuals,
    at_r2: &[Complex64],
    rho: f64,
) -> SmoothGradient {
    let n = res.r1.len();
    let mut gz = vec![0.0; n];
    for i in 0..n {
        gz[i] = -rho * (res.r1[i] + at_r2[i].re + res.r3[i] + res.r4[i]);
    }
    SmoothGradient {
        gz,
        gw1: res.r1.iter().map(|r| rho * r).collect(),
        gw2: res.r2.iter().map(|r| rho * r).collect(),
        gw3: res.r3.iter().map(|r| rho * r).collect(),
        gw4: res.r4.iter().map(|r| rho * r).collect(),
    }
}

/// Gradient of the augmented Lagrangian's quadratic terms at the state's
/// current iterates. `gz` includes the real part of A^H applied to the data
/// residual, since z is real-valued.
pub fn smooth_gradient(state: &SolverState, problem: &UnmixProblem) -> Result<SmoothGradient> {
    problem.validate()?;
    if state.z.len() != problem.shape.len() || state.w2.len() != problem.y_hat.len() {
        return Err(UnmixError::InvalidArgument("state dimensions do not match problem".into()));
    }
    let az = problem.operator.apply(&state.z);
    let res = Residuals::compute(
        &state.z,
        &az,
        &state.w1,
        &state.w2,
        &state.w3,
        &state.w4,
        (&state.u1, &state.u2, &state.u3, &state.u4),
        &problem.prior,
        &problem.y_hat,
    );
    let at_r2 = problem.operator.adjoint(&res.r2);
    Ok(gradient_from_residuals(&res, &at_r2, state.rho))
}

/// Line-search failure after 60 backtracking halvings; carries the last state.
#[derive(Debug)]
pub struct SolverStall {
    pub state: SolverState,
}

impl std::fmt::Display for SolverStall {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "line search failed to find a finite-decrease step after 60 backtracks")
    }
}

impl std::error::Error for SolverStall {}

const MAX_BACKTRACKS: usize = 60;

/// Outcome of one inner FISTA run.
pub struct InnerRun {
    pub state: SolverState,
    pub iterations: usize,
    /// Augmented Lagrangian value per inner iteration (indicator terms are
    /// zero at post-prox iterates, so this is ||w1||_1 plus the quadratic part).
    pub al_trace: Vec<f64>,
}

/// Minimize the augmented Lagrangian jointly over (z, w_1..w_4) with FISTA.
/// Duals are held fixed; stops on `max_inner` or when the relative change of
/// the AL value falls below `inner_tol`.
pub fn fista_inner(
    mut state: SolverState,
    problem: &UnmixProblem,
    opts: &SolverOptions,
) -> std::result::Result<InnerRun, SolverStall> {
    let rho = state.rho;
    let delta = problem.delta;
    let v = &problem.prior;
    let y_hat = &problem.y_hat;
    let op = problem.operator;
    state.reset_momentum();

    let mut al_trace = Vec::new();
    let mut last_al = f64::INFINITY;
    let mut iterations = 0;

    for k in 1..=opts.max_inner {
        iterations = k;
        let beta = (k as f64 - 2.0) / (k as f64 + 1.0);
        let extrap_r = |cur: &[f64], old: &[f64]| -> Vec<f64> {
            cur.iter().zip(old).map(|(c, o)| c + beta * (c - o)).collect()
        };
        let extrap_c = |cur: &[Complex64], old: &[Complex64]| -> Vec<Complex64> {
            cur.iter().zip(old).map(|(c, o)| c + beta * (c - o)).collect()
        };
        let zh = extrap_r(&state.prev.z, &state.prev2.z);
        let w1h = extrap_r(&state.prev.w1, &state.prev2.w1);
        let w2h = extrap_c(&state.prev.w2, &state.prev2.w2);
        let w3h = extrap_r(&state.prev.w3, &state.prev2.w3);
        let w4h = extrap_r(&state.prev.w4, &state.prev2.w4);

        let azh = op.apply(&zh);
        let res_hat = Residuals::compute(
            &zh,
            &azh,
            &w1h,
            &w2h,
            &w3h,
            &w4h,
            (&state.u1, &state.u2, &state.u3, &state.u4),
            v,
            y_hat,
        );
        let f_hat = res_hat.smooth_value(rho);
        let at_r2 = op.adjoint(&res_hat.r2);
        let grad = gradient_from_residuals(&res_hat, &at_r2, rho);

        let mut t = state.t;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let z_new: Vec<f64> = zh.iter().zip(&grad.gz).map(|(z, g)| z - t * g).collect();
            let w1_new = soft_threshold(
                &w1h.iter().zip(&grad.gw1).map(|(w, g)| w - t * g).collect::<Vec<_>>(),
                t,
            )
            .expect("t is nonnegative");
            let w2_new = project_l2_ball(
                &w2h.iter().zip(&grad.gw2).map(|(w, g)| w - t * g).collect::<Vec<_>>(),
                delta,
            )
            .expect("delta validated");
            let w3_new = project_nonneg(
                &w3h.iter().zip(&grad.gw3).map(|(w, g)| w - t * g).collect::<Vec<_>>(),
            );
            let w4_new = project_sum_one(
                &w4h.iter().zip(&grad.gw4).map(|(w, g)| w - t * g).collect::<Vec<_>>(),
                problem.shape,
            )
            .expect("shape validated");

            let az_new = op.apply(&z_new);
            let res_new = Residuals::compute(
                &z_new,
                &az_new,
                &w1_new,
                &w2_new,
                &w3_new,
                &w4_new,
                (&state.u1, &state.u2, &state.u3, &state.u4),
                v,
                y_hat,
            );
            let f_new = res_new.smooth_value(rho);

            // Quadratic upper-bound acceptance for the joint variable.
            let mut inner_prod = 0.0;
            let mut dist_sqr = 0.0;
            let mut acc_r = |new: &[f64], hat: &[f64], g: &[f64]| {
                for i in 0..new.len() {
                    let d = new[i] - hat[i];
                    inner_prod += g[i] * d;
                    dist_sqr += d * d;
                }
            };
            acc_r(&z_new, &zh, &grad.gz);
            acc_r(&w1_new, &w1h, &grad.gw1);
            acc_r(&w3_new, &w3h, &grad.gw3);
            acc_r(&w4_new, &w4h, &grad.gw4);
            for i in 0..w2_new.len() {
                let d = w2_new[i] - w2h[i];
                inner_prod += (grad.gw2[i].conj() * d).re;
                dist_sqr += d.norm_sqr();
            }
            let bound = f_hat + inner_prod + dist_sqr / (2.0 * t);
            if f_new.is_finite() && f_new <= bound + 1e-12 * (1.0 + f_hat.abs()) {
                accepted = Some((z_new, w1_new, w2_new, w3_new, w4_new, f_new));
                break;
            }
            t *= opts.line_search.backtrack_factor;
        }
        let Some((z_new, w1_new, w2_new, w3_new, w4_new, f_new)) = accepted else {
            return Err(SolverStall { state });
        };
        state.t = t;

        state.prev2 = std::mem::replace(
            &mut state.prev,
            MomentumSnapshot {
                z: z_new.clone(),
                w1: w1_new.clone(),
                w2: w2_new.clone(),
                w3: w3_new.clone(),
                w4: w4_new.clone(),
            },
        );
        state.z = z_new;
        state.w1 = w1_new;
        state.w2 = w2_new;
        state.w3 = w3_new;
        state.w4 = w4_new;

        let al = state.w1.iter().map(|v| v.abs()).sum::<f64>() + f_new;
        al_trace.push(al);
        if (al - last_al).abs() <= opts.inner_tol * last_al.abs().max(1.0) {
            break;
        }
        last_al = al;
    }

    Ok(InnerRun { state, iterations, al_trace })
}

/// One multiplier-method step on the scaled duals:
/// u1 += w1 - z + v, u2 += w2 + y_hat - A z, u3 += w3 - z, u4 += w4 - z.
pub fn dual_update(mut state: SolverState, problem: &UnmixProblem) -> SolverState {
    let az = problem.operator.apply(&state.z);
    for i in 0..state.z.len() {
        state.u1[i] += state.w1[i] - state.z[i] + problem.prior[i];
        state.u3[i] += state.w3[i] - state.z[i];
        state.u4[i] += state.w4[i] - state.z[i];
    }
    for i in 0..state.w2.len() {
        state.u2[i] += state.w2[i] + problem.y_hat[i] - az[i];
    }
    state
}

/// Per-outer-iteration trace entry; residual and objective are in the
/// caller's (unnormalized) units.
#[derive(Debug, Clone, Serialize)]
pub struct OuterTrace {
    pub objective_l1: f64,
    pub residual_norm: f64,
    pub max_constraint_residual: f64,
    pub inner_iterations: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub z_final: Vec<f64>,
    pub outer_iterations: usize,
    pub total_inner_iterations: usize,
    /// ||y_hat - A z_final||_2.
    pub residual_norm: f64,
    /// ||z_final - v||_1.
    pub objective_l1: f64,
    /// max_n |sum_r z[n,r] - 1| evaluated on z_final.
    pub max_sum_violation: f64,
    /// Most negative entry of z_final (0 if all nonnegative).
    pub max_negative_entry: f64,
    pub converged: bool,
    pub infeasible_suspected: bool,
    pub trace: Vec<OuterTrace>,
}

/// Solve the unmixing program with the augmented Lagrangian outer loop.
///
/// The problem is internally normalized by ||y_hat||_2, so scaling
/// (A, y_hat, delta) by a common positive factor leaves the iterates
/// unchanged. The returned z is polished by an exact per-pixel simplex
/// projection, making the sum-to-one and nonnegativity gaps zero to roundoff.
/// Non-convergence is reported through the `converged` flag, not an error.
pub fn solve(problem: &UnmixProblem, opts: &SolverOptions) -> Result<SolveReport> {
    problem.validate()?;
    opts.validate()?;

    let scale = {
        let n = l2_norm_complex(&problem.y_hat);
        if n > 0.0 {
            n
        } else {
            1.0
        }
    };
    let scaled_op = ScaledOperator { inner: problem.operator, factor: 1.0 / scale };
    let norm_problem = UnmixProblem {
        operator: &scaled_op,
        y_hat: problem.y_hat.iter().map(|y| y / scale).collect(),
        prior: problem.prior.clone(),
        delta: problem.delta / scale,
        shape: problem.shape,
    };

    let mut state = SolverState::initialize(&norm_problem, opts)?;
    let v_norm = l2_norm_real(&problem.prior);
    let stop_level = opts.outer_tol * (1.0 + v_norm);

    let mut trace = Vec::new();
    let mut total_inner = 0;
    let mut converged = false;
    let mut outer_done = 0;
    let mut residual_window: Vec<f64> = Vec::new();

    for _ in 0..opts.max_outer {
        outer_done += 1;
        let run = fista_inner(state, &norm_problem, opts)
            .map_err(|stall| UnmixError::NumericalFailure(stall.to_string()))?;
        state = run.state;
        total_inner += run.iterations;

        let az = norm_problem.operator.apply(&state.z);
        let data_residual: f64 = az
            .iter()
            .zip(&norm_problem.y_hat)
            .map(|(a, y)| (a - y).norm_sqr())
            .sum::<f64>()
            .sqrt();
        let c1 = l2_norm_real(
            &state
                .w1
                .iter()
                .zip(&state.z)
                .zip(&norm_problem.prior)
                .map(|((w, z), v)| w - z + v)
                .collect::<Vec<_>>(),
        );
        let c2 = l2_norm_complex(
            &state
                .w2
                .iter()
                .zip(&norm_problem.y_hat)
                .zip(&az)
                .map(|((w, y), a)| w + y - a)
                .collect::<Vec<_>>(),
        );
        let c3 = l2_norm_real(
            &state.w3.iter().zip(&state.z).map(|(w, z)| w - z).collect::<Vec<_>>(),
        );
        let c4 = l2_norm_real(
            &state.w4.iter().zip(&state.z).map(|(w, z)| w - z).collect::<Vec<_>>(),
        );
        let max_residual = c1.max(c2).max(c3).max(c4);

        let objective: f64 =
            state.z.iter().zip(&problem.prior).map(|(z, v)| (z - v).abs()).sum();
        trace.push(OuterTrace {
            objective_l1: objective,
            residual_norm: data_residual * scale,
            max_constraint_residual: max_residual,
            inner_iterations: run.iterations,
        });

        if max_residual <= stop_level {
            converged = true;
            state = dual_update(state, &norm_problem);
            break;
        }

        residual_window.push(data_residual);
        if residual_window.len() > 5 {
            residual_window.remove(0);
        }

        state = dual_update(state, &norm_problem);
    }

    // Infeasibility heuristic: the data residual floor stays above delta and
    // has stalled over the trailing window while duals keep pushing.
    let infeasible_suspected = !converged
        && residual_window.len() == 5
        && residual_window.iter().all(|&r| r > norm_problem.delta * 1.05 + 1e-15)
        && {
            let max = residual_window.iter().cloned().fold(f64::MIN, f64::max);
            let min = residual_window.iter().cloned().fold(f64::MAX, f64::min);
            (max - min) <= 1e-9 * max.abs().max(1e-300)
        };

    // Feasibility polish: exact per-pixel projection onto the simplex.
    let shape = problem.shape;
    let mut z_final = state.z.clone();
    let mut pixel = vec![0.0; shape.n_materials];
    for p in 0..shape.n_pixels {
        for r in 0..shape.n_materials {
            pixel[r] = state.z[shape.idx(p, r)];
        }
        let proj = project_simplex(&pixel);
        for r in 0..shape.n_materials {
            z_final[shape.idx(p, r)] = proj[r];
        }
    }

    let az_final = problem.operator.apply(&z_final);
    let residual_norm = az_final
        .iter()
        .zip(&problem.y_hat)
        .map(|(a, y)| (a - y).norm_sqr())
        .sum::<f64>()
        .sqrt();
    let objective_l1: f64 =
        z_final.iter().zip(&problem.prior).map(|(z, v)| (z - v).abs()).sum();
    let sums = shape.pixel_sums(&z_final);
    let max_sum_violation =
        sums.iter().map(|s| (s - 1.0).abs()).fold(0.0f64, f64::max);
    let max_negative_entry = z_final.iter().cloned().fold(0.0f64, f64::min);

    Ok(SolveReport {
        z_final,
        outer_iterations: outer_done,
        total_inner_iterations: total_inner,
        residual_norm,
        objective_l1,
        max_sum_violation,
        max_negative_entry,
        converged,
        infeasible_suspected,
        trace,
    })
}

/// Exact restricted isometry constant delta_S by brute-force enumeration of
/// all S-column submatrices. Columns are l2-normalized before the sweep.
/// Refuses to run if the number of subsets exceeds `cap`.
pub fn estimate_ric(a: &dyn SensingOperator, s: usize, cap: u64) -> Result<f64> {
    let k = a.cols();
    if s == 0 || s > k {
        return Err(UnmixError::InvalidArgument(format!(
            "sparsity level {s} out of range for {k} columns"
        )));
    }
    let n_subsets = binomial(k as u64, s as u64)
        .ok_or_else(|| UnmixError::TooLarge("binomial coefficient overflow".into()))?;
    if n_subsets > cap {
        return Err(UnmixError::TooLarge(format!(
            "C({k}, {s}) = {n_subsets} subsets exceeds cap {cap}"
        )));
    }

    let columns: Vec<Vec<Complex64>> = (0..k)
        .map(|j| {
            let col = a.column(j);
            let norm = l2_norm_complex(&col);
            if norm == 0.0 {
                col
            } else {
                col.iter().map(|v| v / norm).collect()
            }
        })
        .collect();

    let mut delta_s = 0.0f64;
    let mut subset: Vec<usize> = (0..s).collect();
    loop {
        // Gram matrix of the selected (normalized) columns.
        let mut gram = nalgebra::DMatrix::<Complex64>::zeros(s, s);
        for (i, &ci) in subset.iter().enumerate() {
            for (j, &cj) in subset.iter().enumerate() {
                let g: Complex64 = columns[ci]
                    .iter()
                    .zip(&columns[cj])
                    .map(|(x, y)| x.conj() * y)
                    .sum();
                gram[(i, j)] = g;
            }
        }
        let eig = gram.symmetric_eigen();
        for lambda in eig.eigenvalues.iter() {
            delta_s = delta_s.max((lambda - 1.0).abs());
        }

        // Advance to the next combination in lexicographic order.
        let mut i = s;
        loop {
            if i == 0 {
                return Ok(delta_s);
            }
            i -= 1;
            if subset[i] != i + k - s {
                subset[i] += 1;
                for j in i + 1..s {
                    subset[j] = subset[j - 1] + 1;
                }
                break;
            }
        }
    }
}

fn binomial(n: u64, k: u64) -> Option<u64> {
    let k = k.min(n - k);
    let mut acc: u64 = 1;
    for i in 0..k {
        acc = acc.checked_mul(n - i)?;
        acc /= i + 1;
    }
    Some(acc)
}
