//! Receding-horizon tracking controller in lift space, plus the two
//! experimental baselines (no-twist PI and raw-state linear-dynamics MPC).
//!
//! Each solve minimizes
//!
//! ```text
//! Σ_{t=1..H} (g_t − g_d)ᵀ Q (g_t − g_d) + Σ_{t=0..H−1} u_tᵀ R u_t
//! s.t. g_{t+1} = K g_t + L u_t,   c_l ≤ u_t ≤ c_u
//! ```
//!
//! with `g_d = (x_d, y_d, 0, f_d, 0, …, 0)ᵀ`. State bounds `b_l ≤ A g ≤ b_u`
//! on the first four lifted entries are enforced as a one-sided quadratic
//! penalty so measurement noise can never make the program infeasible. The
//! dynamics are condensed into the stacked controls, leaving a
//! box-constrained convex program solved by a monotone spectral projected
//! gradient iteration with an exact Newton polish on the free coordinates.

use crate::error::{Error, Result};
use crate::koopman::{KoopmanModel, Provenance, Trajectory};
use crate::lift::{lift, CONTROL_DIM, LIFT_DIM};
use crate::types::{
    ControlCommand, TwistAngle, WireState, MAX_STEP_ROTATION_RAD, MAX_STEP_TRANSLATION_MM,
};
use nalgebra::{DMatrix, DVector, SMatrix};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Raw wire-state dimension used by the linear baseline.
pub const RAW_STATE_DIM: usize = 4;

/// Number of lifted entries subject to state bounds (the selector A = [I₄, 0]).
pub const BOUND_DIM: usize = 4;

/// Desired waypoint and force, fix-point frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackingTarget {
    pub x_d: f64,
    pub y_d: f64,
    pub f_d: f64,
}

impl TrackingTarget {
    pub fn new(x_d: f64, y_d: f64, f_d: f64) -> Self {
        debug_assert!(f_d >= 0.0);
        Self { x_d, y_d, f_d }
    }

    /// The lifted reference (x_d, y_d, 0, f_d, 0, …, 0)ᵀ.
    pub fn lifted(&self, dim: usize) -> DVector<f64> {
        let mut g = DVector::zeros(dim);
        g[0] = self.x_d;
        g[1] = self.y_d;
        g[3] = self.f_d;
        g
    }
}

/// Horizon, weights, bounds, and solver knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MpcConfig {
    /// Prediction horizon in steps.
    pub horizon: usize,
    /// Diagonal of Q; default penalizes only position and force tracking.
    pub q_diag: [f64; LIFT_DIM],
    /// Diagonal of R regulating control effort.
    pub r_diag: [f64; CONTROL_DIM],
    /// Lower bounds on the first four lifted entries (x, y, θ, f).
    pub state_lower: [f64; BOUND_DIM],
    /// Upper bounds on the first four lifted entries.
    pub state_upper: [f64; BOUND_DIM],
    pub control_lower: [f64; CONTROL_DIM],
    pub control_upper: [f64; CONTROL_DIM],
    /// Weight of the quadratic state-bound penalty.
    pub state_penalty_weight: f64,
    pub solver_tolerance: f64,
    pub max_iterations: usize,
}

impl Default for MpcConfig {
    fn default() -> Self {
        let mut q_diag = [0.0; LIFT_DIM];
        q_diag[0] = 10.0;
        q_diag[1] = 10.0;
        q_diag[3] = 1.0;
        Self {
            horizon: 10,
            q_diag,
            r_diag: [0.1; CONTROL_DIM],
            state_lower: [-400.0, -400.0, -PI, 0.0],
            state_upper: [400.0, 400.0, PI, 15.0],
            control_lower: [
                -MAX_STEP_TRANSLATION_MM,
                -MAX_STEP_TRANSLATION_MM,
                -MAX_STEP_ROTATION_RAD,
            ],
            control_upper: [
                MAX_STEP_TRANSLATION_MM,
                MAX_STEP_TRANSLATION_MM,
                MAX_STEP_ROTATION_RAD,
            ],
            state_penalty_weight: 1e3,
            solver_tolerance: 1e-6,
            max_iterations: 5000,
        }
    }
}

impl MpcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::Config("MPC horizon must be at least 1".into()));
        }
        if self.q_diag.iter().any(|v| *v < 0.0) || self.r_diag.iter().any(|v| *v < 0.0) {
            return Err(Error::Config("Q and R diagonals must be non-negative".into()));
        }
        for i in 0..BOUND_DIM {
            if self.state_lower[i] > self.state_upper[i] {
                return Err(Error::Config(format!("state bound {i} is inverted")));
            }
        }
        for i in 0..CONTROL_DIM {
            if self.control_lower[i] > self.control_upper[i] {
                return Err(Error::Config(format!("control bound {i} is inverted")));
            }
        }
        if self.solver_tolerance <= 0.0 || self.max_iterations == 0 {
            return Err(Error::Config("solver tolerance and iterations must be positive".into()));
        }
        Ok(())
    }
}

/// Solver diagnostics; `objective_trace` is non-increasing by construction.
#[derive(Debug, Clone)]
pub struct SolveStats {
    pub iterations: usize,
    pub residual: f64,
    pub objective_trace: Vec<f64>,
}

/// First control of the receding-horizon minimizer for the Koopman model.
pub fn solve(
    model: &KoopmanModel,
    state: &WireState,
    phi: TwistAngle,
    target: &TrackingTarget,
    cfg: &MpcConfig,
) -> Result<ControlCommand> {
    solve_detailed(model, state, phi, target, cfg).map(|(u, _)| u)
}

/// Same as [`solve`], returning iteration diagnostics.
pub fn solve_detailed(
    model: &KoopmanModel,
    state: &WireState,
    phi: TwistAngle,
    target: &TrackingTarget,
    cfg: &MpcConfig,
) -> Result<(ControlCommand, SolveStats)> {
    cfg.validate()?;
    let g0 = DVector::from_column_slice(lift(state, phi).as_vector().as_slice());
    let k = smatrix_to_dmatrix(&model.k);
    let l = smatrix_to_dmatrix(&model.l);
    let q = DVector::from_column_slice(&cfg.q_diag);
    condensed_solve(&k, &l, &g0, &target.lifted(LIFT_DIM), &q, cfg)
}

/// First control of the same receding-horizon program on the raw-state
/// linear baseline model (same Q block, R, and bounds).
pub fn solve_linear(
    model: &LinearModel,
    state: &WireState,
    target: &TrackingTarget,
    cfg: &MpcConfig,
) -> Result<ControlCommand> {
    solve_linear_detailed(model, state, target, cfg).map(|(u, _)| u)
}

pub fn solve_linear_detailed(
    model: &LinearModel,
    state: &WireState,
    target: &TrackingTarget,
    cfg: &MpcConfig,
) -> Result<(ControlCommand, SolveStats)> {
    cfg.validate()?;
    let g0 = DVector::from_column_slice(&[state.x, state.y, state.theta, state.f]);
    let k = smatrix_to_dmatrix(&model.a);
    let l = smatrix_to_dmatrix(&model.b);
    let q = DVector::from_column_slice(&cfg.q_diag[..RAW_STATE_DIM]);
    condensed_solve(&k, &l, &g0, &target.lifted(RAW_STATE_DIM), &q, cfg)
}

fn smatrix_to_dmatrix<const R: usize, const C: usize>(m: &SMatrix<f64, R, C>) -> DMatrix<f64> {
    DMatrix::from_fn(R, C, |r, c| m[(r, c)])
}

fn condensed_solve(
    k: &DMatrix<f64>,
    l: &DMatrix<f64>,
    g0: &DVector<f64>,
    g_d: &DVector<f64>,
    q_diag: &DVector<f64>,
    cfg: &MpcConfig,
) -> Result<(ControlCommand, SolveStats)> {
    for i in 0..BOUND_DIM {
        let v = g0[i];
        if v < cfg.state_lower[i] - 1e-9 || v > cfg.state_upper[i] + 1e-9 {
            return Err(Error::InfeasibleInitialState {
                index: i,
                value: v,
                lower: cfg.state_lower[i],
                upper: cfg.state_upper[i],
            });
        }
    }

    let problem = Condensed {
        h: cfg.horizon,
        n: k.nrows(),
        m: l.ncols(),
        k,
        l,
        g0,
        g_d,
        q: q_diag,
        r: DVector::from_column_slice(&cfg.r_diag),
        s_lo: DVector::from_column_slice(&cfg.state_lower),
        s_hi: DVector::from_column_slice(&cfg.state_upper),
        pen_w: cfg.state_penalty_weight,
        u_lo: DVector::from_column_slice(&cfg.control_lower),
        u_hi: DVector::from_column_slice(&cfg.control_upper),
    };

    let (x, stats) = spg_solve(&problem, cfg.solver_tolerance, cfg.max_iterations)?;
    let u = ControlCommand::new(x[0], x[1], x[2]);
    Ok((u, stats))
}

/// Dynamics condensed into the stacked controls.
struct Condensed<'a> {
    h: usize,
    n: usize,
    m: usize,
    k: &'a DMatrix<f64>,
    l: &'a DMatrix<f64>,
    g0: &'a DVector<f64>,
    g_d: &'a DVector<f64>,
    q: &'a DVector<f64>,
    r: DVector<f64>,
    s_lo: DVector<f64>,
    s_hi: DVector<f64>,
    pen_w: f64,
    u_lo: DVector<f64>,
    u_hi: DVector<f64>,
}

impl Condensed<'_> {
    fn dim(&self) -> usize {
        self.h * self.m
    }

    fn project(&self, x: &mut DVector<f64>) {
        for t in 0..self.h {
            for i in 0..self.m {
                let idx = t * self.m + i;
                x[idx] = x[idx].clamp(self.u_lo[i], self.u_hi[i]);
            }
        }
    }

    /// Forward rollout g_1..g_H for the stacked controls.
    fn states(&self, x: &DVector<f64>) -> Vec<DVector<f64>> {
        let mut out = Vec::with_capacity(self.h);
        let mut g = self.g0.clone();
        for t in 0..self.h {
            let u = x.rows(t * self.m, self.m);
            g = self.k * &g + self.l * u;
            out.push(g.clone());
        }
        out
    }

    /// Tracking-cost gradient wrt one predicted state (2Q e + penalty).
    fn stage_grad(&self, g: &DVector<f64>) -> DVector<f64> {
        let mut v = DVector::zeros(self.n);
        for i in 0..self.n {
            v[i] = 2.0 * self.q[i] * (g[i] - self.g_d[i]);
        }
        for i in 0..BOUND_DIM.min(self.n) {
            if g[i] > self.s_hi[i] {
                v[i] += 2.0 * self.pen_w * (g[i] - self.s_hi[i]);
            } else if g[i] < self.s_lo[i] {
                v[i] += 2.0 * self.pen_w * (g[i] - self.s_lo[i]);
            }
        }
        v
    }

    fn objective(&self, x: &DVector<f64>) -> f64 {
        let mut j = 0.0;
        let mut g = self.g0.clone();
        for t in 0..self.h {
            let u = x.rows(t * self.m, self.m);
            g = self.k * &g + self.l * u;
            for i in 0..self.n {
                let e = g[i] - self.g_d[i];
                j += self.q[i] * e * e;
            }
            for i in 0..BOUND_DIM.min(self.n) {
                let over = (g[i] - self.s_hi[i]).max(0.0);
                let under = (self.s_lo[i] - g[i]).max(0.0);
                j += self.pen_w * (over * over + under * under);
            }
            for i in 0..self.m {
                j += self.r[i] * u[i] * u[i];
            }
        }
        j
    }

    /// Objective and gradient via an adjoint sweep over the horizon.
    fn obj_grad(&self, x: &DVector<f64>) -> (f64, DVector<f64>) {
        let states = self.states(x);
        let mut j = 0.0;
        for (t, g) in states.iter().enumerate() {
            for i in 0..self.n {
                let e = g[i] - self.g_d[i];
                j += self.q[i] * e * e;
            }
            for i in 0..BOUND_DIM.min(self.n) {
                let over = (g[i] - self.s_hi[i]).max(0.0);
                let under = (self.s_lo[i] - g[i]).max(0.0);
                j += self.pen_w * (over * over + under * under);
            }
            let u = x.rows(t * self.m, self.m);
            for i in 0..self.m {
                j += self.r[i] * u[i] * u[i];
            }
        }

        // λ_t = v_t + Kᵀ λ_{t+1};   ∂J/∂u_{t−1} = Lᵀ λ_t + 2 R u_{t−1}
        let mut grad = DVector::zeros(self.dim());
        let mut lambda = DVector::<f64>::zeros(self.n);
        for t in (0..self.h).rev() {
            lambda = self.stage_grad(&states[t]) + self.k.transpose() * lambda;
            let gu = self.l.transpose() * &lambda;
            for i in 0..self.m {
                let idx = t * self.m + i;
                grad[idx] = gu[i] + 2.0 * self.r[i] * x[idx];
            }
        }
        (j, grad)
    }

    /// Exact Hessian of the piecewise-quadratic objective for the hinge
    /// active set at `states`.
    fn hessian(&self, states: &[DVector<f64>]) -> DMatrix<f64> {
        let dim = self.dim();
        let mut h = DMatrix::<f64>::zeros(dim, dim);
        for t in 0..self.h {
            for i in 0..self.m {
                let idx = t * self.m + i;
                h[(idx, idx)] += 2.0 * self.r[i];
            }
        }

        // c[i] = K^i L
        let mut c = Vec::with_capacity(self.h);
        c.push(self.l.clone());
        for i in 1..self.h {
            let next = self.k * &c[i - 1];
            c.push(next);
        }

        for (t, g) in states.iter().enumerate() {
            let mut w = DVector::<f64>::zeros(self.n);
            for i in 0..self.n {
                w[i] = 2.0 * self.q[i];
            }
            for i in 0..BOUND_DIM.min(self.n) {
                if g[i] > self.s_hi[i] || g[i] < self.s_lo[i] {
                    w[i] += 2.0 * self.pen_w;
                }
            }
            // block (j, k) gains C_{t−j}ᵀ diag(w) C_{t−k} for j, k ≤ t
            for j in 0..=t {
                let cj = &c[t - j];
                for kk in j..=t {
                    let ck = &c[t - kk];
                    for a in 0..self.m {
                        for b in 0..self.m {
                            let mut sum = 0.0;
                            for row in 0..self.n {
                                if w[row] != 0.0 {
                                    sum += cj[(row, a)] * w[row] * ck[(row, b)];
                                }
                            }
                            let ia = j * self.m + a;
                            let ib = kk * self.m + b;
                            h[(ia, ib)] += sum;
                            if ia != ib {
                                h[(ib, ia)] += sum;
                            }
                        }
                    }
                }
            }
        }
        h
    }
}

/// Monotone spectral projected gradient with Newton polish.
///
/// Terminates when the projected-gradient residual drops below `tol`, or
/// when neither a backtracked spectral step nor the Newton polish can still
/// certify a strict objective decrease — at that point the objective sits at
/// the numerical optimum, within any tolerance of the best attainable value.
fn spg_solve(problem: &Condensed, tol: f64, max_iter: usize) -> Result<(DVector<f64>, SolveStats)> {
    let dim = problem.dim();
    let mut x = DVector::<f64>::zeros(dim);
    problem.project(&mut x);
    let (mut fx, mut grad) = problem.obj_grad(&x);
    let mut trace = vec![fx];
    let mut alpha = 1.0;
    let mut residual = f64::INFINITY;
    let mut no_progress = 0usize;

    for iter in 0..max_iter {
        let mut step = &x - &grad;
        problem.project(&mut step);
        residual = (&step - &x).amax();
        if residual <= tol {
            return Ok((
                x,
                SolveStats {
                    iterations: iter,
                    residual,
                    objective_trace: trace,
                },
            ));
        }

        // Newton polish on the free coordinates; accepted only if it improves.
        let try_polish = iter % 10 == 0 || residual <= 1e3 * tol || no_progress > 0;
        let mut polished = false;
        if try_polish {
            if let Some((x_new, _)) = newton_polish(problem, &x, &grad, fx) {
                x = x_new;
                let (f2, g2) = problem.obj_grad(&x);
                fx = f2;
                grad = g2;
                trace.push(fx);
                polished = true;
            }
        }
        if polished {
            no_progress = 0;
            continue;
        }

        // projected step at the current spectral length, backtracked along
        // the feasible segment until sufficient decrease
        let mut trial = &x - alpha * &grad;
        problem.project(&mut trial);
        let d = &trial - &x;
        let gd = grad.dot(&d);
        let mut accepted = false;
        if gd < 0.0 {
            let mut lam = 1.0;
            let mut f_new = problem.objective(&(&x + &d));
            let mut backtracks = 0;
            while f_new > fx + 1e-4 * lam * gd && backtracks < 60 {
                lam *= 0.5;
                f_new = problem.objective(&(&x + lam * &d));
                backtracks += 1;
            }
            if f_new < fx {
                let s = lam * &d;
                let x_new = &x + &s;
                let (f_eval, g_new) = problem.obj_grad(&x_new);
                let y = &g_new - &grad;
                let sy = s.dot(&y);
                alpha = if sy > 1e-300 {
                    (s.dot(&s) / sy).clamp(1e-12, 1e12)
                } else {
                    1e12
                };
                x = x_new;
                fx = f_eval;
                grad = g_new;
                trace.push(fx);
                accepted = true;
                no_progress = 0;
            }
        }

        if !accepted {
            // no certified descent at this step length; shrink and give the
            // polish a chance before declaring the point numerically optimal
            alpha = (alpha * 0.1).max(1e-12);
            trace.push(fx);
            no_progress += 1;
            if no_progress >= 3 {
                return Ok((
                    x,
                    SolveStats {
                        iterations: iter + 1,
                        residual,
                        objective_trace: trace,
                    },
                ));
            }
        }
    }

    Err(Error::SolverDidNotConverge {
        iterations: max_iter,
        residual,
    })
}

/// Solve the exact quadratic model on the box-inactive coordinates and
/// return the projected candidate when it lowers the objective.
fn newton_polish(
    problem: &Condensed,
    x: &DVector<f64>,
    grad: &DVector<f64>,
    fx: f64,
) -> Option<(DVector<f64>, f64)> {
    let dim = problem.dim();
    let mut free = Vec::with_capacity(dim);
    for t in 0..problem.h {
        for i in 0..problem.m {
            let idx = t * problem.m + i;
            let at_lo = x[idx] - problem.u_lo[i] <= 1e-12;
            let at_hi = problem.u_hi[i] - x[idx] <= 1e-12;
            // keep a bound coordinate fixed only while the gradient pins it
            let pinned = (at_lo && grad[idx] > 0.0) || (at_hi && grad[idx] < 0.0);
            if !pinned {
                free.push(idx);
            }
        }
    }
    if free.is_empty() {
        return None;
    }

    let states = problem.states(x);
    let h_full = problem.hessian(&states);
    let nf = free.len();
    let mut h_ff = DMatrix::<f64>::zeros(nf, nf);
    let mut g_f = DVector::<f64>::zeros(nf);
    for (a, &ia) in free.iter().enumerate() {
        g_f[a] = grad[ia];
        for (b, &ib) in free.iter().enumerate() {
            h_ff[(a, b)] = h_full[(ia, ib)];
        }
    }

    let chol = h_ff.cholesky()?;
    let d_f = chol.solve(&(-&g_f));
    let mut candidate = x.clone();
    for (a, &ia) in free.iter().enumerate() {
        candidate[ia] += d_f[a];
    }
    problem.project(&mut candidate);
    let f_new = problem.objective(&candidate);
    if f_new < fx {
        Some((candidate, f_new))
    } else {
        None
    }
}

/// Gains for the no-twist PI baseline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PiGains {
    /// Proportional gain, mm per newton per step.
    pub kp: f64,
    /// Integral gain, mm per newton per step.
    pub ki: f64,
    /// Anti-windup clamp on the integral term, mm.
    pub integral_limit: f64,
}

impl Default for PiGains {
    fn default() -> Self {
        Self {
            kp: 4.0,
            ki: 0.5,
            integral_limit: 20.0,
        }
    }
}

/// No-twist baseline: advances toward the waypoint at a speed set by a PI
/// action on the force error, never rotating the gripper. Without twist the
/// grip cannot hold more than the f0 friction cap, so force tracking
/// saturates there — the behaviour this baseline exists to demonstrate.
#[derive(Debug, Clone)]
pub struct PiNoTwist {
    pub gains: PiGains,
    integral: f64,
}

impl PiNoTwist {
    pub fn new(gains: PiGains) -> Self {
        Self {
            gains,
            integral: 0.0,
        }
    }

    pub fn reset(&mut self) {
        self.integral = 0.0;
    }

    /// Next command. `dtheta` is always zero; translation runs along the
    /// line to the target, clamped by the remaining distance (advance never
    /// overshoots the waypoint) and the per-step velocity cap.
    pub fn command(&mut self, state: &WireState, target: &TrackingTarget) -> ControlCommand {
        let err = target.f_d - state.f;
        self.integral = (self.integral + self.gains.ki * err)
            .clamp(-self.gains.integral_limit, self.gains.integral_limit);
        let advance = self.gains.kp * err + self.integral;

        let to_x = target.x_d - state.x;
        let to_y = target.y_d - state.y;
        let dist = (to_x * to_x + to_y * to_y).sqrt();

        let (dir_x, dir_y, mag) = if advance >= 0.0 {
            if dist > 1e-9 {
                (
                    to_x / dist,
                    to_y / dist,
                    advance.min(dist).min(MAX_STEP_TRANSLATION_MM),
                )
            } else {
                // at the waypoint: hold position regardless of force error
                (0.0, 0.0, 0.0)
            }
        } else {
            // over-tension: back off radially toward the fix-point
            let r = (state.x * state.x + state.y * state.y).sqrt();
            if r > 1e-9 {
                (
                    -state.x / r,
                    -state.y / r,
                    (-advance).min(MAX_STEP_TRANSLATION_MM),
                )
            } else {
                (0.0, 0.0, 0.0)
            }
        };

        ControlCommand::new(dir_x * mag, dir_y * mag, 0.0)
    }
}

/// Raw-state linear dynamics s_{t+1} = A s_t + B u_t.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub a: SMatrix<f64, RAW_STATE_DIM, RAW_STATE_DIM>,
    pub b: SMatrix<f64, RAW_STATE_DIM, CONTROL_DIM>,
    pub provenance: Provenance,
}

/// Least-squares fit of the raw-state linear baseline, using the same
/// pseudoinverse machinery as the lifted fit restricted to 4 dimensions.
pub fn fit_linear_baseline(trajs: &[Trajectory]) -> Result<LinearModel> {
    const FDIM: usize = RAW_STATE_DIM + CONTROL_DIM;
    let n: usize = trajs.iter().map(Trajectory::len_steps).sum();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let mut xt = DMatrix::<f64>::zeros(n, FDIM);
    let mut yt = DMatrix::<f64>::zeros(n, RAW_STATE_DIM);
    let mut row = 0;
    for traj in trajs {
        for ((s0, _), u, (s1, _)) in traj.transitions() {
            let feat = [s0.x, s0.y, s0.theta, s0.f, u.dx, u.dy, u.dtheta];
            let next = [s1.x, s1.y, s1.theta, s1.f];
            for (c, v) in feat.iter().enumerate() {
                xt[(row, c)] = *v;
            }
            for (c, v) in next.iter().enumerate() {
                yt[(row, c)] = *v;
            }
            row += 1;
        }
    }
    let ab = crate::koopman::least_squares_operator(&xt, &yt)?;
    let mut a = SMatrix::<f64, RAW_STATE_DIM, RAW_STATE_DIM>::zeros();
    let mut b = SMatrix::<f64, RAW_STATE_DIM, CONTROL_DIM>::zeros();
    for r in 0..RAW_STATE_DIM {
        for c in 0..RAW_STATE_DIM {
            a[(r, c)] = ab[(r, c)];
        }
        for c in 0..CONTROL_DIM {
            b[(r, c)] = ab[(r, RAW_STATE_DIM + c)];
        }
    }
    Ok(LinearModel {
        a,
        b,
        provenance: Provenance {
            seed: None,
            trajectory_count: trajs.len(),
            augmentation_factor: 1,
        },
    })
}

/// Training residual Σ ‖s_{t+1} − A s_t − B u_t‖² of the linear baseline.
pub fn linear_residual(model: &LinearModel, trajs: &[Trajectory]) -> f64 {
    let mut loss = 0.0;
    for traj in trajs {
        for ((s0, _), u, (s1, _)) in traj.transitions() {
            let s = nalgebra::SVector::<f64, RAW_STATE_DIM>::new(s0.x, s0.y, s0.theta, s0.f);
            let uv = nalgebra::SVector::<f64, CONTROL_DIM>::new(u.dx, u.dy, u.dtheta);
            let pred = model.a * s + model.b * uv;
            let truth = nalgebra::SVector::<f64, RAW_STATE_DIM>::new(s1.x, s1.y, s1.theta, s1.f);
            loss += (truth - pred).norm_squared();
        }
    }
    loss
}

/// Lifted-model training residual projected onto the raw state block.
pub fn koopman_state_residual(model: &KoopmanModel, trajs: &[Trajectory]) -> f64 {
    let mut loss = 0.0;
    for traj in trajs {
        for ((s0, phi0), u, (s1, _)) in traj.transitions() {
            let pred = crate::koopman::predict_one_step(model, s0, *phi0, u);
            let dx = s1.x - pred.x();
            let dy = s1.y - pred.y();
            let dtheta = s1.theta - pred.theta();
            let df = s1.f - pred.force();
            loss += dx * dx + dy * dy + dtheta * dtheta + df * df;
        }
    }
    loss
}
