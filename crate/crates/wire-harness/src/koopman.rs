//! Lift-space system identification: geometric data augmentation, closed-form
//! least-squares fitting of the lifted linear dynamics, and rollout
//! prediction.
//!
//! The fit solves
//!
//! ```text
//! [K, L] = P G†,   P = (1/N) Σ g(s_{i+1}) g'(s_i, u_i)ᵀ,
//!                  G = (1/N) Σ g'(s_i, u_i) g'(s_i, u_i)ᵀ,
//! ```
//!
//! where g'(s, u) stacks the lifted state over the control and † is the
//! Moore–Penrose pseudoinverse (rank-revealing SVD, singular values below
//! 1e−10 · σ_max dropped). Transitions never cross trajectory boundaries.
//! The 1/N factors cancel in P G† and are kept only for conditioning.

use crate::error::{Error, Result};
use crate::lift::{lift, LiftedState, CONTROL_DIM, LIFT_DIM, LIFT_SPEC};
use crate::types::{wrap_angle, ControlCommand, TwistAngle, WireState};
use nalgebra::{DMatrix, SMatrix, SVector};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Stacked feature dimension: lifted state over control.
pub const FEATURE_DIM: usize = LIFT_DIM + CONTROL_DIM;

/// A recorded rollout: states (with twist) and the controls between them.
/// Always holds exactly one more state than controls.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    states: Vec<(WireState, TwistAngle)>,
    controls: Vec<ControlCommand>,
}

impl Trajectory {
    /// Validate shape (≥ 2 states, |states| = |controls| + 1), command
    /// bounds, and finiteness.
    pub fn new(states: Vec<(WireState, TwistAngle)>, controls: Vec<ControlCommand>) -> Result<Self> {
        if states.len() < 2 || states.len() != controls.len() + 1 {
            return Err(Error::TrajectoryShape {
                states: states.len(),
                controls: controls.len(),
            });
        }
        for (s, phi) in &states {
            if !s.is_finite() || !phi.0.is_finite() {
                return Err(Error::NonFiniteData);
            }
        }
        for u in &controls {
            if !u.in_bounds() {
                return Err(Error::CommandOutOfBounds {
                    dx: u.dx,
                    dy: u.dy,
                    dtheta: u.dtheta,
                    max_mm: crate::types::MAX_STEP_TRANSLATION_MM,
                    max_rad: crate::types::MAX_STEP_ROTATION_RAD,
                });
            }
        }
        Ok(Self { states, controls })
    }

    pub fn states(&self) -> &[(WireState, TwistAngle)] {
        &self.states
    }

    pub fn controls(&self) -> &[ControlCommand] {
        &self.controls
    }

    /// Number of transitions (= controls).
    pub fn len_steps(&self) -> usize {
        self.controls.len()
    }

    /// Iterate (state, control, next state) triples within this trajectory.
    pub fn transitions(
        &self,
    ) -> impl Iterator<Item = (&(WireState, TwistAngle), &ControlCommand, &(WireState, TwistAngle))>
    {
        self.controls
            .iter()
            .enumerate()
            .map(move |(i, u)| (&self.states[i], u, &self.states[i + 1]))
    }
}

/// Rotate a trajectory by `psi` about the fix-point origin.
///
/// Positions and planar controls rotate, θ shifts by ψ (re-wrapped), and f,
/// φ, Δθ are copied verbatim — the tension field is rotation-symmetric about
/// the fix-point, so the rotated rollout is as physical as the original.
pub fn augment(traj: &Trajectory, psi: f64) -> Trajectory {
    let (s, c) = psi.sin_cos();
    let states = traj
        .states
        .iter()
        .map(|(w, phi)| {
            (
                WireState {
                    x: c * w.x - s * w.y,
                    y: s * w.x + c * w.y,
                    theta: wrap_angle(w.theta + psi),
                    f: w.f,
                },
                *phi,
            )
        })
        .collect();
    let controls = traj
        .controls
        .iter()
        .map(|u| ControlCommand {
            dx: c * u.dx - s * u.dy,
            dy: s * u.dx + c * u.dy,
            dtheta: u.dtheta,
        })
        .collect();
    Trajectory { states, controls }
}

/// The ten rotation angles used for augmentation: −π + k·π/5, k = 0..9.
pub fn augmentation_angles() -> [f64; 10] {
    std::array::from_fn(|k| -PI + k as f64 * PI / 5.0)
}

/// Expand a dataset tenfold by rotating every trajectory through
/// [`augmentation_angles`] (ψ = 0 reproduces the original bit-for-bit).
pub fn augment_dataset(trajs: &[Trajectory]) -> Vec<Trajectory> {
    let angles = augmentation_angles();
    trajs
        .iter()
        .flat_map(|t| angles.iter().map(move |psi| augment(t, *psi)))
        .collect()
}

/// Dataset provenance carried inside model files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Provenance {
    /// Seed of the collection run, when known.
    pub seed: Option<u64>,
    /// Number of trajectories the fit actually consumed.
    pub trajectory_count: usize,
    /// Rotation copies per source trajectory (1 = no augmentation).
    pub augmentation_factor: usize,
}

/// Fitted lifted linear dynamics g_{t+1} = K g_t + L u_t.
#[derive(Debug, Clone, PartialEq)]
pub struct KoopmanModel {
    pub k: SMatrix<f64, LIFT_DIM, LIFT_DIM>,
    pub l: SMatrix<f64, LIFT_DIM, CONTROL_DIM>,
    /// Identifier of the monomial ordering the matrices assume.
    pub lift_spec: String,
    pub provenance: Provenance,
}

impl KoopmanModel {
    pub fn is_finite(&self) -> bool {
        self.k.iter().all(|v| v.is_finite()) && self.l.iter().all(|v| v.is_finite())
    }
}

/// Stack a lifted state over a control into one feature vector.
pub fn stacked_feature(
    state: &WireState,
    phi: TwistAngle,
    u: &ControlCommand,
) -> SVector<f64, FEATURE_DIM> {
    let g = lift(state, phi);
    let mut v = SVector::<f64, FEATURE_DIM>::zeros();
    v.fixed_rows_mut::<LIFT_DIM>(0).copy_from(g.as_vector());
    v[LIFT_DIM] = u.dx;
    v[LIFT_DIM + 1] = u.dy;
    v[LIFT_DIM + 2] = u.dtheta;
    v
}

/// Accumulate the cross-moment matrices P (next-lift × feature) and
/// G (feature × feature) over all within-trajectory transitions.
fn moments(trajs: &[Trajectory]) -> Result<(DMatrix<f64>, DMatrix<f64>, usize)> {
    let mut p = DMatrix::<f64>::zeros(LIFT_DIM, FEATURE_DIM);
    let mut g = DMatrix::<f64>::zeros(FEATURE_DIM, FEATURE_DIM);
    let mut n = 0usize;
    for traj in trajs {
        for ((s0, phi0), u, (s1, phi1)) in traj.transitions() {
            let feat = stacked_feature(s0, *phi0, u);
            let next = lift(s1, *phi1);
            for r in 0..LIFT_DIM {
                for c in 0..FEATURE_DIM {
                    p[(r, c)] += next.0[r] * feat[c];
                }
            }
            for r in 0..FEATURE_DIM {
                for c in 0..FEATURE_DIM {
                    g[(r, c)] += feat[r] * feat[c];
                }
            }
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let scale = 1.0 / n as f64;
    p.scale_mut(scale);
    g.scale_mut(scale);
    if !p.iter().all(|v| v.is_finite()) || !g.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFiniteData);
    }
    Ok((p, g, n))
}

/// Closed-form least-squares fit of [K, L] = P G†.
///
/// Minimizes the one-step prediction loss Σ ‖g(s_{i+1}) − [K,L] g'(s_i,u_i)‖²
/// over every within-trajectory transition. P G† is evaluated through a thin
/// SVD of the feature data matrix rather than the moment matrices, which
/// yields the same least-norm solution with the square root of the condition
/// number. Samples are assembled sequentially in dataset order, so identical
/// inputs produce identical models.
pub fn fit(trajs: &[Trajectory]) -> Result<KoopmanModel> {
    let transitions: usize = trajs.iter().map(Trajectory::len_steps).sum();
    if transitions == 0 {
        return Err(Error::EmptyDataset);
    }
    let mut xt = DMatrix::<f64>::zeros(transitions, FEATURE_DIM);
    let mut yt = DMatrix::<f64>::zeros(transitions, LIFT_DIM);
    let mut row = 0;
    for traj in trajs {
        for ((s0, phi0), u, (s1, phi1)) in traj.transitions() {
            let feat = stacked_feature(s0, *phi0, u);
            let next = lift(s1, *phi1);
            for c in 0..FEATURE_DIM {
                xt[(row, c)] = feat[c];
            }
            for c in 0..LIFT_DIM {
                yt[(row, c)] = next.0[c];
            }
            row += 1;
        }
    }
    let kl = least_squares_operator(&xt, &yt)?;
    let mut k = SMatrix::<f64, LIFT_DIM, LIFT_DIM>::zeros();
    let mut l = SMatrix::<f64, LIFT_DIM, CONTROL_DIM>::zeros();
    for r in 0..LIFT_DIM {
        for c in 0..LIFT_DIM {
            k[(r, c)] = kl[(r, c)];
        }
        for c in 0..CONTROL_DIM {
            l[(r, c)] = kl[(r, LIFT_DIM + c)];
        }
    }
    Ok(KoopmanModel {
        k,
        l,
        lift_spec: LIFT_SPEC.to_string(),
        provenance: Provenance {
            seed: None,
            trajectory_count: trajs.len(),
            augmentation_factor: 1,
        },
    })
}

/// Least-norm W minimizing Σᵢ ‖yᵢ − W xᵢ‖² over row-stacked samples
/// (`xt`: N × fd, `yt`: N × td), via a thin SVD of the feature matrix with
/// singular values below 1e−10 · σ_max dropped.
pub(crate) fn least_squares_operator(
    xt: &DMatrix<f64>,
    yt: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    if !xt.iter().all(|v| v.is_finite()) || !yt.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFiniteData);
    }
    let svd = xt.clone().svd(true, true);
    let u = svd.u.as_ref().expect("svd with u");
    let v_t = svd.v_t.as_ref().expect("svd with v_t");
    let smax = svd.singular_values.max();
    let cutoff = 1e-10 * smax;

    // X = xtᵀ has SVD v_tᵀ Σ uᵀ, so W = Y X† = (ytᵀ u) Σ† v_t
    let mut yu = yt.transpose() * u;
    for (j, sigma) in svd.singular_values.iter().enumerate() {
        let inv = if *sigma > cutoff { 1.0 / sigma } else { 0.0 };
        for r in 0..yu.nrows() {
            yu[(r, j)] *= inv;
        }
    }
    let w = yu * v_t;
    if w.iter().all(|v| v.is_finite()) {
        Ok(w)
    } else {
        Err(Error::NonFiniteData)
    }
}

/// One-step prediction: K · g(s, φ) + L · u.
pub fn predict_one_step(
    model: &KoopmanModel,
    state: &WireState,
    phi: TwistAngle,
    u: &ControlCommand,
) -> LiftedState {
    let g = lift(state, phi);
    let uv = SVector::<f64, CONTROL_DIM>::new(u.dx, u.dy, u.dtheta);
    LiftedState(model.k * g.0 + model.l * uv)
}

/// Linear rollout: lift only the initial state, then propagate
/// g_{t+1} = K g_t + L u_t without re-lifting. Returns H+1 lifted states
/// including the initial one.
pub fn predict_rollout(
    model: &KoopmanModel,
    initial: (&WireState, TwistAngle),
    controls: &[ControlCommand],
) -> Vec<LiftedState> {
    let mut out = Vec::with_capacity(controls.len() + 1);
    let mut g = lift(initial.0, initial.1).0;
    out.push(LiftedState(g));
    for u in controls {
        let uv = SVector::<f64, CONTROL_DIM>::new(u.dx, u.dy, u.dtheta);
        g = model.k * g + model.l * uv;
        out.push(LiftedState(g));
    }
    out
}

/// One-step training loss Σ ‖g(s_{i+1}) − [K,L] g'(s_i, u_i)‖².
pub fn training_loss(model: &KoopmanModel, trajs: &[Trajectory]) -> f64 {
    let mut loss = 0.0;
    for traj in trajs {
        for ((s0, phi0), u, (s1, phi1)) in traj.transitions() {
            let pred = predict_one_step(model, s0, *phi0, u);
            let diff = lift(s1, *phi1).0 - pred.0;
            loss += diff.norm_squared();
        }
    }
    loss
}

/// Relative Frobenius residual of the normal equations, ‖[K,L]·G − P‖ / ‖P‖.
pub fn normal_equation_residual(model: &KoopmanModel, trajs: &[Trajectory]) -> Result<f64> {
    let (p, g, _) = moments(trajs)?;
    let mut kl = DMatrix::<f64>::zeros(LIFT_DIM, FEATURE_DIM);
    for r in 0..LIFT_DIM {
        for c in 0..LIFT_DIM {
            kl[(r, c)] = model.k[(r, c)];
        }
        for c in 0..CONTROL_DIM {
            kl[(r, LIFT_DIM + c)] = model.l[(r, c)];
        }
    }
    let resid = (&kl * &g - &p).norm();
    let scale = p.norm().max(f64::MIN_POSITIVE);
    Ok(resid / scale)
}
