//! Quasi-static wire/gripper physics standing in for the robot.
//!
//! The wire is hybrid: slack below its rest length (zero tension, shape
//! ignored) and linearly elastic once taut. The gripper holds the wire
//! through grooved fingers, so the wire slides through the grip whenever the
//! elastic tension exceeds the twist-dependent capstan limit; sliding pays
//! out rest length until the tension sits exactly at the limit. Twisting the
//! gripper therefore sets the tension the wire sustains while being paid
//! out, which is the mechanism the controller exploits.
//!
//! Twisting also twines the wire onto the grooved finger: positive twist
//! winds wire in (shortening the free rest length and raising tension at a
//! fixed pose), negative twist pays it back out. This is the mechanism that
//! lets a parked gripper adjust tension, while the capstan limit grows
//! exponentially and keeps the wound wire from slipping.
//!
//! With `noise_sigma = 0` every operation here is a pure function of its
//! inputs; otherwise measurement noise is drawn from a counter-based RNG
//! seeded per simulation, so runs are reproducible bit-for-bit.

use crate::error::{Error, Result};
use crate::koopman::Trajectory;
use crate::types::{wrap_angle, ControlCommand, Pose2D, TwistAngle, WireState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use std::f64::consts::PI;

/// Shortest admissible rest length after re-anchoring, millimetres.
pub const MIN_REST_LENGTH_MM: f64 = 1.0;

/// Physical parameters of the simulated wire and grip.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct SimParams {
    /// Elastic stiffness of the taut wire, newtons per millimetre.
    pub k_wire: f64,
    /// Grip friction cap at zero twist, newtons.
    pub f0: f64,
    /// Capstan exponent, per radian.
    pub mu: f64,
    /// Wire length wound onto the finger per radian of positive twist,
    /// millimetres per radian.
    pub wind_ratio: f64,
    /// Standard deviation of Gaussian tension measurement noise, newtons.
    pub noise_sigma: f64,
    /// Control period, seconds.
    pub dt: f64,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            k_wire: 0.2,
            f0: 4.0,
            // one half-turn of twist triples the grip cap (4 N → 12 N)
            mu: 3.0f64.ln() / PI,
            wind_ratio: 13.0,
            noise_sigma: 0.05,
            dt: 0.5,
        }
    }
}

impl SimParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.k_wire > 0.0
            && self.f0 > 0.0
            && self.mu > 0.0
            && self.wind_ratio >= 0.0
            && self.noise_sigma >= 0.0
            && self.dt > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(
                "sim parameters must be positive (noise_sigma and wind_ratio may be zero)".into(),
            ))
        }
    }
}

/// Grip friction limit at twist `phi`: f0 · exp(mu · |φ|).
///
/// Strictly increasing in |φ|; at φ = 0 this is the 4 N no-twist ceiling.
pub fn capstan_limit(phi: TwistAngle, params: &SimParams) -> f64 {
    params.f0 * (params.mu * phi.0.abs()).exp()
}

/// Full simulation state. A value type: `step` consumes and returns it.
#[derive(Debug, Clone)]
pub struct SimState {
    /// Gripper position, world frame.
    pub gripper: Pose2D,
    /// Gripper rotation about Z, radians, wrapped.
    pub theta: f64,
    /// Twist between wire and gripper.
    pub phi: TwistAngle,
    /// Current wire anchor, world frame.
    pub fixpoint: Pose2D,
    /// Unstretched wire length from fix-point to gripper, millimetres.
    pub rest_length: f64,
    /// Cumulative length paid out through the gripper, millimetres.
    pub slip_total: f64,
    rng: ChaCha8Rng,
}

impl SimState {
    pub fn new(
        gripper: Pose2D,
        theta: f64,
        phi: TwistAngle,
        fixpoint: Pose2D,
        rest_length: f64,
        seed: u64,
    ) -> Self {
        assert!(rest_length > 0.0, "rest length must be positive");
        Self {
            gripper,
            theta: wrap_angle(theta),
            phi,
            fixpoint,
            rest_length,
            slip_total: 0.0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Taut distance minus rest length, clamped at zero.
    pub fn stretch(&self) -> f64 {
        (self.gripper.distance(&self.fixpoint) - self.rest_length).max(0.0)
    }

    /// Measure the wire state in the fix-point frame, adding tension noise.
    pub fn observe(&mut self, params: &SimParams) -> WireState {
        let f = tension(self, params);
        let noisy = f + self.draw_noise(params);
        WireState::new(
            self.gripper.x - self.fixpoint.x,
            self.gripper.y - self.fixpoint.y,
            self.theta,
            noisy.max(0.0),
        )
    }

    /// Move the wire anchor to a new fix-point (a clamp that just engaged),
    /// preserving the instantaneous tension: the force in the wire does not
    /// change at the moment the clamp takes over. When the gripper is too
    /// close to the new anchor to store the same strain, the rest length
    /// floors at [`MIN_REST_LENGTH_MM`] and the tension drops.
    pub fn reanchor(&mut self, new_fixpoint: Pose2D, params: &SimParams) {
        let f = tension(self, params);
        let d_new = self.gripper.distance(&new_fixpoint);
        self.fixpoint = new_fixpoint;
        self.rest_length = (d_new - f / params.k_wire).max(MIN_REST_LENGTH_MM);
    }

    /// Execute one command over a control period.
    ///
    /// The gripper translates and rotates, the twist angle picks up the
    /// rotation minus the change in wire bearing, and the grip slips
    /// (lengthening `rest_length`) whenever the elastic tension would exceed
    /// the capstan limit. Returns the new state and the noisy observation.
    pub fn step(mut self, u: &ControlCommand, params: &SimParams) -> Result<(SimState, WireState)> {
        if !u.in_bounds() {
            return Err(Error::CommandOutOfBounds {
                dx: u.dx,
                dy: u.dy,
                dtheta: u.dtheta,
                max_mm: crate::types::MAX_STEP_TRANSLATION_MM,
                max_rad: crate::types::MAX_STEP_ROTATION_RAD,
            });
        }

        let old_bearing = self.bearing();
        self.gripper = self.gripper.translated(u.dx, u.dy);
        self.theta = wrap_angle(self.theta + u.dtheta);
        let dbeta = wrap_angle(self.bearing() - old_bearing);
        let dphi = u.dtheta - dbeta;
        self.phi = TwistAngle(self.phi.0 + dphi);

        // twining: positive twist winds wire onto the finger, shortening the
        // free length; negative twist pays it back out
        self.rest_length = (self.rest_length - params.wind_ratio * dphi).max(MIN_REST_LENGTH_MM);

        // quasi-static slip: pay out wire until tension sits at the cap
        let d = self.gripper.distance(&self.fixpoint);
        let elastic = params.k_wire * (d - self.rest_length);
        let cap = capstan_limit(self.phi, params);
        if elastic > cap {
            let new_rest = d - cap / params.k_wire;
            self.slip_total += new_rest - self.rest_length;
            self.rest_length = new_rest;
        }

        let obs = self.observe(params);
        Ok((self, obs))
    }

    /// In-place variant of [`SimState::step`] for control loops.
    pub fn step_mut(&mut self, u: &ControlCommand, params: &SimParams) -> Result<WireState> {
        let (next, obs) = self.clone().step(u, params)?;
        *self = next;
        Ok(obs)
    }

    fn bearing(&self) -> f64 {
        (self.gripper.y - self.fixpoint.y).atan2(self.gripper.x - self.fixpoint.x)
    }

    fn draw_noise(&mut self, params: &SimParams) -> f64 {
        if params.noise_sigma > 0.0 {
            let normal = Normal::new(0.0, params.noise_sigma).expect("valid sigma");
            normal.sample(&mut self.rng)
        } else {
            0.0
        }
    }
}

/// Hybrid slack/taut tension with the capstan cap applied.
///
/// Zero exactly when the anchor–gripper distance is at or below the rest
/// length, otherwise the elastic force clipped at the grip limit.
pub fn tension(state: &SimState, params: &SimParams) -> f64 {
    let d = state.gripper.distance(&state.fixpoint);
    let stretch = d - state.rest_length;
    if stretch <= 0.0 {
        0.0
    } else {
        (params.k_wire * stretch).min(capstan_limit(state.phi, params))
    }
}

/// Scripted data-collection motions: alternating stretch, twist, spiral
/// (twist while pulling), retract, and lateral segments from randomized
/// initial states. Deterministic given the seed.
///
/// Planar commands are capped by vector norm (≤ 50 mm per step), which is
/// stricter than the per-component box and keeps rotated copies of the data
/// within bounds.
pub fn scripted_collect(
    n_trajectories: usize,
    horizon: usize,
    seed: u64,
    params: &SimParams,
) -> Result<Vec<Trajectory>> {
    if n_trajectories == 0 {
        return Err(Error::Config("need at least one trajectory".into()));
    }
    if horizon == 0 {
        return Err(Error::Config("horizon must be at least one step".into()));
    }
    params.validate()?;

    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n_trajectories);
    for i in 0..n_trajectories {
        let traj_seed: u64 = master.random();
        out.push(scripted_trajectory(i, horizon, traj_seed, params)?);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy)]
enum Segment {
    /// Pull radially outward; rides the grip cap once taut.
    Stretch,
    /// Rotate the gripper in place (signed), tiny outward drift.
    Twist(f64),
    /// Twist while pulling outward, the tension-raising motion.
    Spiral(f64),
    /// Move back toward the anchor into slack.
    Retract,
    /// Move tangentially (signed), changing the wire bearing.
    Lateral(f64),
    /// Station-keeping with zero-mean twist and small jitter: the regime
    /// the controller regulates in, sampled in every trajectory.
    Regulate,
    /// Unwind in place, dropping the tension below the grip cap so the
    /// following station-keeping samples the symmetric below-cap response.
    Unwind,
    /// Max twist with no translation: the parked tension-climbing motion.
    Climb,
}

fn scripted_trajectory(
    index: usize,
    horizon: usize,
    seed: u64,
    params: &SimParams,
) -> Result<Trajectory> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // stratified initial conditions: consecutive trajectories tile the twist
    // and rest-length ranges, so every dataset covers the operating envelope;
    // dwell trajectories start right on the regulation twist levels
    let dwell = index % 3 == 0;
    let phi0 = if dwell {
        let levels = [0.5, 0.9, 1.5, 1.9, 2.4, 2.7];
        levels[(index / 3) % levels.len()] + rng.random_range(0.0..0.25)
    } else {
        -0.7 + 0.45 * (index % 8) as f64 + rng.random_range(0.0..0.45)
    };
    let rest_stratum = 130.0 + 45.0 * (index % 5) as f64;
    let rest = rest_stratum + rng.random_range(0.0..45.0);
    let bearing = rng.random_range(-PI..PI);
    let d0 = rest * rng.random_range(0.7..1.05);
    let gripper = Pose2D::new(d0 * bearing.cos(), d0 * bearing.sin());
    let theta0 = bearing + phi0;

    let mut sim = SimState::new(
        gripper,
        theta0,
        TwistAngle(phi0),
        Pose2D::ORIGIN,
        rest,
        seed ^ 0x9e37_79b9_7f4a_7c15,
    );

    let mut states = Vec::with_capacity(horizon + 1);
    let mut controls = Vec::with_capacity(horizon);
    states.push((sim.observe(params), sim.phi));

    // stretch taut, then cycle climb / station-keeping / exploration so every
    // trajectory covers the regulation regime on and below the grip cap as
    // well as the transients between waypoints
    let mut schedule: Vec<(Segment, usize)> = vec![(Segment::Stretch, rng.random_range(4..=8))];
    let mut filled = schedule[0].1;
    let mut phase = 0usize;
    // dwell trajectories stay at their starting twist, pinning the
    // station-keeping dynamics there; the rest mix climbs and transients
    while filled < horizon {
        let (seg, len) = if dwell {
            match phase % 3 {
                0 => (Segment::Regulate, rng.random_range(12..=20)),
                1 => (
                    if rng.random_bool(0.5) {
                        Segment::Climb
                    } else {
                        Segment::Unwind
                    },
                    rng.random_range(1..=3),
                ),
                _ => (next_segment(&mut rng), rng.random_range(2..=5)),
            }
        } else {
            match phase % 4 {
            // half the climbs start below the grip cap (after an unwind),
            // half ride the cap boundary; the controller lives in both
            0 => {
                if rng.random_bool(0.5) {
                    (Segment::Unwind, rng.random_range(2..=4))
                } else {
                    (Segment::Climb, rng.random_range(2..=4))
                }
            }
            1 => (Segment::Climb, rng.random_range(4..=8)),
            2 => (Segment::Regulate, rng.random_range(10..=18)),
            _ => (next_segment(&mut rng), rng.random_range(5..=10)),
            }
        };
        phase += 1;
        schedule.push((seg, len));
        filled += len;
    }

    let mut steps = schedule
        .iter()
        .flat_map(|(seg, len)| std::iter::repeat_n(*seg, *len));
    for _ in 0..horizon {
        let segment = steps.next().expect("schedule covers the horizon");
        let u = segment_command(segment, &sim, &mut rng).clamped();
        let (next, obs) = sim.step(&u, params)?;
        sim = next;
        controls.push(u);
        states.push((obs, sim.phi));
    }

    Trajectory::new(states, controls)
}

fn next_segment(rng: &mut ChaCha8Rng) -> Segment {
    let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    match rng.random_range(0..100u32) {
        0..=22 => Segment::Stretch,
        23..=44 => Segment::Retract,
        45..=69 => Segment::Spiral(sign),
        70..=84 => Segment::Twist(sign),
        _ => Segment::Lateral(sign),
    }
}

fn segment_command(segment: Segment, sim: &SimState, rng: &mut ChaCha8Rng) -> ControlCommand {
    let max_rot = crate::types::MAX_STEP_ROTATION_RAD;
    let (radial, tangential) = radial_frame(sim);
    match segment {
        Segment::Stretch => {
            let mag = rng.random_range(25.0..50.0);
            ControlCommand::new(radial.0 * mag, radial.1 * mag, 0.0)
        }
        Segment::Twist(sign) => {
            // mostly parked, the steady-state tension-adjustment motion
            let mag = rng.random_range(-2.0..6.0);
            let rot = sign * max_rot * rng.random_range(0.2..1.0);
            ControlCommand::new(radial.0 * mag, radial.1 * mag, rot)
        }
        Segment::Spiral(sign) => {
            let mag = rng.random_range(8.0..25.0);
            let rot = sign * max_rot * rng.random_range(0.85..1.0);
            ControlCommand::new(radial.0 * mag, radial.1 * mag, rot)
        }
        Segment::Retract => {
            // magnitude-matched to Stretch so taut radial moves are
            // zero-mean and the unmodelled bilinear response cancels
            let mag = rng.random_range(25.0..50.0);
            ControlCommand::new(-radial.0 * mag, -radial.1 * mag, 0.0)
        }
        Segment::Lateral(sign) => {
            // gentler sweeps while taut: the bearing-coupled tension response
            // is outside the model class, so keep its leverage small
            let taut = sim.stretch() > 0.0;
            let mag = sign * if taut {
                rng.random_range(6.0..18.0)
            } else {
                rng.random_range(15.0..40.0)
            };
            ControlCommand::new(tangential.0 * mag, tangential.1 * mag, 0.0)
        }
        Segment::Regulate => {
            if rng.random_bool(0.75) {
                // exact holds teach tension persistence at every visited state
                ControlCommand::ZERO
            } else {
                // zero-mean twist random walk with small positional jitter
                let rot = max_rot * rng.random_range(-1.0..1.0);
                let mag = rng.random_range(-1.5..1.5);
                let tan = if rng.random_bool(0.1) {
                    rng.random_range(-6.0..6.0)
                } else {
                    0.0
                };
                ControlCommand::new(
                    radial.0 * mag + tangential.0 * tan,
                    radial.1 * mag + tangential.1 * tan,
                    rot,
                )
            }
        }
        Segment::Unwind => ControlCommand::new(0.0, 0.0, -max_rot * rng.random_range(0.7..1.0)),
        Segment::Climb => ControlCommand::new(0.0, 0.0, max_rot * rng.random_range(0.9..1.0)),
    }
}

fn radial_frame(sim: &SimState) -> ((f64, f64), (f64, f64)) {
    let dx = sim.gripper.x - sim.fixpoint.x;
    let dy = sim.gripper.y - sim.fixpoint.y;
    let d = (dx * dx + dy * dy).sqrt();
    if d < 1e-9 {
        ((1.0, 0.0), (0.0, 1.0))
    } else {
        ((dx / d, dy / d), (-dy / d, dx / d))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn quiet(params: &mut SimParams) {
        params.noise_sigma = 0.0;
    }

    #[test]
    fn capstan_limit_anchors() {
        let params = SimParams::default();
        assert_relative_eq!(capstan_limit(TwistAngle::ZERO, &params), 4.0);
        // 4 · e^{ln 3} = 12
        assert_relative_eq!(capstan_limit(TwistAngle(PI), &params), 12.0, epsilon = 1e-12);
        assert_relative_eq!(capstan_limit(TwistAngle(-PI), &params), 12.0, epsilon = 1e-12);
    }

    #[test]
    fn capstan_limit_monotone_in_twist() {
        let params = SimParams::default();
        let mut prev = 0.0;
        for i in 0..50 {
            let phi = i as f64 * 0.2;
            let cap = capstan_limit(TwistAngle(phi), &params);
            assert!(cap >= prev);
            prev = cap;
        }
    }

    fn taut_state(d: f64, rest: f64, phi: f64) -> SimState {
        SimState::new(
            Pose2D::new(d, 0.0),
            0.0,
            TwistAngle(phi),
            Pose2D::ORIGIN,
            rest,
            0,
        )
    }

    #[test]
    fn tension_cases() {
        let params = SimParams::default();
        // slack: 5 mm short of rest
        assert_eq!(tension(&taut_state(95.0, 100.0, 0.0), &params), 0.0);
        // elastic below the cap: 0.2 · 10 = 2 N (cap lifted by twist)
        assert_relative_eq!(tension(&taut_state(110.0, 100.0, 6.0), &params), 2.0);
        // elastic 0.2 · 100 = 20 N clipped at the 4 N no-twist cap
        assert_relative_eq!(tension(&taut_state(200.0, 100.0, 0.0), &params), 4.0);
    }

    #[test]
    fn noop_step_on_slack_wire() {
        let mut params = SimParams::default();
        quiet(&mut params);
        let sim = taut_state(80.0, 100.0, 0.1);
        let (next, obs) = sim.step(&ControlCommand::ZERO, &params).unwrap();
        assert_eq!(obs.f, 0.0);
        assert_eq!(next.rest_length, 100.0);
        assert_eq!(next.phi.0, 0.1);
        assert_eq!(next.slip_total, 0.0);
    }

    #[test]
    fn stretch_past_no_twist_cap_slips_at_four_newtons() {
        let mut params = SimParams::default();
        quiet(&mut params);
        let mut sim = taut_state(95.0, 100.0, 0.0);
        let mut last = 0.0;
        for _ in 0..5 {
            let (next, obs) = sim.step(&ControlCommand::new(50.0, 0.0, 0.0), &params).unwrap();
            sim = next;
            last = obs.f;
        }
        assert_relative_eq!(last, 4.0, epsilon = 1e-9);
        assert!(sim.rest_length > 100.0);
        assert!(sim.slip_total > 0.0);
    }

    #[test]
    fn twisted_wire_holds_ten_newtons_without_slip() {
        let mut params = SimParams::default();
        quiet(&mut params);
        // elastic tension 0.2 · 50 = 10 N, below the 12 N cap at φ = π
        let sim = taut_state(150.0, 100.0, PI);
        let (next, obs) = sim.step(&ControlCommand::ZERO, &params).unwrap();
        assert_relative_eq!(obs.f, 10.0, epsilon = 1e-9);
        assert_eq!(next.slip_total, 0.0);
        assert_eq!(next.rest_length, 100.0);
    }

    #[test]
    fn out_of_bounds_command_rejected() {
        let params = SimParams::default();
        let sim = taut_state(100.0, 100.0, 0.0);
        let err = sim.step(&ControlCommand::new(51.0, 0.0, 0.0), &params);
        assert!(matches!(err, Err(Error::CommandOutOfBounds { .. })));
    }

    #[test]
    fn twist_couples_rotation_and_bearing_change() {
        let mut params = SimParams::default();
        quiet(&mut params);
        // pure rotation: φ follows θ exactly
        let sim = taut_state(100.0, 100.0, 0.0);
        let (sim, _) = sim.step(&ControlCommand::new(0.0, 0.0, 0.05), &params).unwrap();
        assert_relative_eq!(sim.phi.0, 0.05, epsilon = 1e-12);

        // pure tangential motion: bearing change unwinds φ with no rotation
        let sim2 = taut_state(100.0, 100.0, 0.0);
        let (sim2, _) = sim2.step(&ControlCommand::new(0.0, 10.0, 0.0), &params).unwrap();
        let dbeta = (10.0f64 / 100.0).atan();
        assert_relative_eq!(sim2.phi.0, -dbeta, epsilon = 1e-12);
    }

    #[test]
    fn free_plus_wound_length_never_decreases_and_tension_respects_cap() {
        // rest_length itself moves both ways (twist winds wire in and out),
        // but slip is the only source of new length: rest + wind·φ only grows
        let params = SimParams::default();
        let mut sim = taut_state(90.0, 100.0, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut prev_total = sim.rest_length + params.wind_ratio * sim.phi.0;
        for _ in 0..200 {
            let u = ControlCommand::new(
                rng.random_range(-50.0..50.0),
                rng.random_range(-50.0..50.0),
                rng.random_range(-0.05..0.05),
            );
            let (next, _) = sim.step(&u, &params).unwrap();
            sim = next;
            let total = sim.rest_length + params.wind_ratio * sim.phi.0;
            assert!(total >= prev_total - 1e-9);
            prev_total = total;
            let f = tension(&sim, &params);
            assert!(f >= 0.0);
            assert!(f <= capstan_limit(sim.phi, &params) + 1e-9);
        }
    }

    #[test]
    fn parked_twist_raises_tension_through_winding() {
        let mut params = SimParams::default();
        quiet(&mut params);
        // taut at 2 N; twisting in place must wind wire in and raise tension
        let mut sim = taut_state(110.0, 100.0, 0.0);
        let mut f_prev = tension(&sim, &params);
        for _ in 0..20 {
            let (next, obs) = sim
                .step(&ControlCommand::new(0.0, 0.0, 0.05), &params)
                .unwrap();
            sim = next;
            assert!(obs.f >= f_prev - 1e-9, "tension dropped while winding");
            f_prev = obs.f;
        }
        // 20 steps · 0.05 rad · 13 mm/rad = 13 mm wound → +2.6 N
        assert_relative_eq!(f_prev, 4.6, epsilon = 1e-9);
        // and unwinding pays the wire back out
        let rest_before = sim.rest_length;
        let (next, obs) = sim
            .step(&ControlCommand::new(0.0, 0.0, -0.05), &params)
            .unwrap();
        assert!(obs.f < f_prev);
        assert!(next.rest_length > rest_before);
    }

    #[test]
    fn reanchor_preserves_tension() {
        let mut params = SimParams::default();
        quiet(&mut params);
        // 7 N at the old anchor, plenty of room at the new one
        let mut sim = taut_state(135.0, 100.0, 2.0);
        let before = tension(&sim, &params);
        assert_relative_eq!(before, 7.0, epsilon = 1e-9);
        sim.reanchor(Pose2D::new(60.0, 0.0), &params);
        assert_relative_eq!(tension(&sim, &params), 7.0, epsilon = 1e-9);

        // too close: rest floors and the tension drops instead of spiking
        let mut near = taut_state(135.0, 100.0, 2.0);
        near.reanchor(Pose2D::new(125.0, 0.0), &params);
        assert_eq!(near.rest_length, MIN_REST_LENGTH_MM);
        assert!(tension(&near, &params) < 7.0);
    }

    #[test]
    fn scripted_collect_shapes_and_determinism() {
        let params = SimParams::default();
        let a = scripted_collect(5, 60, 42, &params).unwrap();
        let b = scripted_collect(5, 60, 42, &params).unwrap();
        assert_eq!(a.len(), 5);
        for traj in &a {
            assert_eq!(traj.states().len(), 61);
            assert_eq!(traj.controls().len(), 60);
            for (s, _) in traj.states() {
                assert!(s.f >= 0.0);
            }
            for u in traj.controls() {
                assert!(u.in_bounds());
                // planar speed capped by vector norm so rotations stay in bounds
                assert!((u.dx * u.dx + u.dy * u.dy).sqrt() <= 50.0 + 1e-9);
            }
        }
        assert_eq!(a, b);
    }

    #[test]
    fn zero_noise_step_is_deterministic_function() {
        let mut params = SimParams::default();
        quiet(&mut params);
        let s1 = taut_state(120.0, 100.0, 0.3);
        let s2 = taut_state(120.0, 100.0, 0.3);
        let u = ControlCommand::new(10.0, -5.0, 0.02);
        let (a, oa) = s1.step(&u, &params).unwrap();
        let (b, ob) = s2.step(&u, &params).unwrap();
        assert_eq!(oa, ob);
        assert_eq!(a.rest_length, b.rest_length);
        assert_eq!(a.phi.0, b.phi.0);
    }
}
