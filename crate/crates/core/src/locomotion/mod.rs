//! Quasi-static tumbling locomotion.
//!
//! The robot is an `L × h` rectangle in its tumbling plane that pivots end
//! over end about its front bottom edge. Inertia is neglected: at every step
//! the tumble angle is the torque-balance equilibrium between the magnetic
//! torque `|m||B| sin(lag)` and the gravity torque about the pivot edge.
//!
//! Pivot `k` spans tumble angles `[kπ/2, (k+1)π/2]`. Even pivots start lying
//! on the long face, odd pivots standing on the end face. When a pivot
//! completes, the pivot edge advances by `slip · footprint`, so a full
//! revolution advances the robot by `slip · 2(L + h)`.

mod trials;
mod trajectory;

pub use trajectory::{average_velocity, Trajectory, TrajectorySample};
pub use trials::{
    climb_feasible, climb_feasible_for_weight, incline_ladder, nine_panel_velocity, simulate, trial_seed, PanelResult,
    TrialOptions, INCLINE_LADDER_FREQUENCY, LADDER_CLIMB, LADDER_STEP_DEG, LADDER_TIME_LIMIT, ROBOTS_PER_PANEL,
    TRIALS_PER_ROBOT,
};

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{Rotation3, UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::magnetics::{actuator_field_with, magnetic_force, ActuatorState, RotatingActuator};
use crate::microrobot::{robot_mass, MicrorobotDesign, PayloadSpec, GRAVITY};
use crate::scene::{Anchor, LocomotionParams, Scene, SceneError, SurfaceFrame, WORKSPACE_RADIUS};

pub const DEFAULT_DT: f64 = 1e-3;
pub const MAX_DT: f64 = 1e-2;

#[derive(Debug, Error)]
pub enum LocomotionError {
    #[error("timestep {0} s outside (0, 0.01]")]
    InvalidTimestep(f64),
    #[error("robot left the 75 mm workspace at ({x:.4}, {y:.4}) m")]
    OutOfWorkspace { x: f64, y: f64 },
    #[error("robot is not in contact with the substrate")]
    NoContact,
    #[error("trajectory needs at least 2 samples")]
    TooFewSamples,
    #[error("invalid actuator: {0}")]
    Actuator(#[from] crate::magnetics::MagneticsError),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Design(#[from] crate::microrobot::DesignError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Contact {
    /// Resting on a long face.
    FaceL,
    /// Standing on an end face.
    FaceH,
    Pivoting,
    Free,
}

/// Pose and tumbling bookkeeping of one robot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    pub time: f64,
    /// Geometric center.
    pub position: Vector3<f64>,
    pub orientation: UnitQuaternion<f64>,
    /// Rotation about the width axis, `pivot_index·π/2 + pivot_angle`.
    pub tumble_phase: f64,
    pub contact: Contact,
    pub synchronized: bool,
    pub pivot_index: i64,
    pub pivot_angle: f64,
    pub anchor: Anchor,
    pub heading: f64,
    /// Unwrapped field angle the robot is following; revolutions lost to
    /// step-out are subtracted.
    pub drive_phase: f64,
}

/// Tumbling dynamics of one robot design in one scene.
#[derive(Debug, Clone)]
pub struct Tumbler {
    scene: Scene,
    design: MicrorobotDesign,
    params: LocomotionParams,
    mass: f64,
    noise_seed: u64,
    actuator: RotatingActuator,
    include_magnetic_force: bool,
}

#[derive(Debug, Clone, Copy)]
struct PivotGeometry {
    /// Side lying on the surface at the start of the pivot.
    base: f64,
    /// Side standing up at the start of the pivot; also the footprint advance.
    rise: f64,
}

impl Tumbler {
    pub fn new(scene: &Scene, design: &MicrorobotDesign, payload: Option<&PayloadSpec>) -> Result<Self, LocomotionError> {
        design.validate()?;
        if let Some(p) = payload {
            p.validate(design)?;
        }
        scene.validate_for(design)?;
        Ok(Self {
            scene: scene.clone(),
            design: *design,
            params: scene.locomotion_params.clone(),
            mass: robot_mass(design, payload),
            noise_seed: 0,
            actuator: RotatingActuator::default(),
            include_magnetic_force: false,
        })
    }

    pub fn with_params(mut self, params: LocomotionParams) -> Self {
        self.params = params;
        self
    }

    pub fn with_noise_seed(mut self, seed: u64) -> Self {
        self.noise_seed = seed;
        self
    }

    /// Adds `(m·∇)B` from the actuator dipole to the load on the pivot.
    pub fn with_magnetic_force(mut self, actuator: RotatingActuator) -> Self {
        self.actuator = actuator;
        self.include_magnetic_force = true;
        self
    }

    pub fn scene(&self) -> &Scene {
        &self.scene
    }

    pub fn design(&self) -> &MicrorobotDesign {
        &self.design
    }

    pub fn params(&self) -> &LocomotionParams {
        &self.params
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn weight(&self) -> f64 {
        self.mass * GRAVITY
    }

    fn geometry(&self, pivot: i64) -> PivotGeometry {
        if pivot.rem_euclid(2) == 0 {
            PivotGeometry {
                base: self.design.length,
                rise: self.design.height,
            }
        } else {
            PivotGeometry {
                base: self.design.height,
                rise: self.design.length,
            }
        }
    }

    /// Center of mass relative to the pivot edge, in (forward, normal) coordinates.
    fn com_offset(&self, pivot: i64, angle: f64) -> (f64, f64) {
        let g = self.geometry(pivot);
        let (s, c) = angle.sin_cos();
        (-0.5 * g.base * c + 0.5 * g.rise * s, 0.5 * g.base * s + 0.5 * g.rise * c)
    }

    fn orientation(&self, frame: &SurfaceFrame, tumble_phase: f64) -> UnitQuaternion<f64> {
        let base = Rotation3::from_basis_unchecked(&[frame.forward, frame.axis(), frame.normal]);
        UnitQuaternion::from_rotation_matrix(&base) * UnitQuaternion::from_axis_angle(&Vector3::y_axis(), tumble_phase)
    }

    fn load(&self, orientation: &UnitQuaternion<f64>, field_angle: f64, actuator: &ActuatorState) -> Vector3<f64> {
        let mut f = Vector3::new(0.0, 0.0, -self.weight());
        if self.include_magnetic_force {
            let st = ActuatorState {
                phase: field_angle,
                heading: actuator.heading,
                rotation_frequency: 0.0,
                field_magnitude_at_workspace: actuator.field_magnitude_at_workspace,
            };
            let sample = actuator_field_with(&self.actuator, &st, 0.0);
            let m = orientation * self.design.magnet.moment_direction_body * self.design.magnet.moment();
            f += magnetic_force(&m, &sample.grad);
        }
        f
    }

    /// Gravity (plus optional magnetic force) torque about the pivot edge,
    /// signed so that positive opposes forward tumbling.
    fn resisting_torque(&self, frame: &SurfaceFrame, pivot: i64, angle: f64, load: &Vector3<f64>) -> f64 {
        let (x, z) = self.com_offset(pivot, angle);
        let r = frame.forward * x + frame.normal * z;
        -r.cross(load).dot(&frame.axis())
    }

    fn max_torque(&self, actuator: &ActuatorState) -> f64 {
        self.design.magnet.moment() * actuator.field_magnitude_at_workspace
    }

    /// Field angle at which the robot sits in equilibrium at `(pivot, angle)`.
    /// The field angle is measured from world vertical while the tumble angle
    /// is measured from the surface normal, hence the slope correction.
    fn drive_angle(&self, frame: &SurfaceFrame, pivot: i64, angle: f64, load: &Vector3<f64>, tau_max: f64) -> f64 {
        let g = self.resisting_torque(frame, pivot, angle, load) / tau_max;
        pivot as f64 * FRAC_PI_2 + angle - self.scene.slope_along(frame) + g.clamp(-1.0, 1.0).asin()
    }

    /// First angle in the pivot where the resisting torque reaches the
    /// magnetic maximum, if any.
    fn stall_angle(&self, frame: &SurfaceFrame, pivot: i64, load: &Vector3<f64>, tau_max: f64) -> Option<f64> {
        let g = self.geometry(pivot);
        let bound = load.norm() * 0.5 * g.base.hypot(g.rise);
        if bound < tau_max {
            return None;
        }
        const SAMPLES: usize = 512;
        let over = |a: f64| self.resisting_torque(frame, pivot, a, load) >= tau_max;
        if over(0.0) {
            return Some(0.0);
        }
        let mut prev = 0.0;
        for i in 1..=SAMPLES {
            let a = FRAC_PI_2 * i as f64 / SAMPLES as f64;
            if over(a) {
                let (mut lo, mut hi) = (prev, a);
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if over(mid) {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                return Some(lo);
            }
            prev = a;
        }
        None
    }

    /// Slip factor applied when pivot `k` lands.
    fn pivot_slip(&self, frame: &SurfaceFrame, pivot: i64, freq: f64) -> f64 {
        let slope = self.scene.slope_along(frame);
        if slope > 0.0 && !climb_feasible_for_weight(slope, &self.params, self.weight(), self.design.contact_area()) {
            return 0.0;
        }
        let base = self.params.slip.at(freq);
        let amp = self.params.slip_noise;
        if amp == 0.0 {
            return base;
        }
        let u = pivot_noise(self.noise_seed, pivot);
        (base * (1.0 + amp * u)).clamp(0.0, 1.0)
    }

    /// Robot at rest on its long face, pivot edge at `anchor`, following a
    /// field at angle `field_angle`.
    pub fn initial_state(&self, anchor: Anchor, actuator: &ActuatorState) -> RobotState {
        let mut state = RobotState {
            time: 0.0,
            position: Vector3::zeros(),
            orientation: UnitQuaternion::identity(),
            tumble_phase: 0.0,
            contact: Contact::FaceL,
            synchronized: true,
            pivot_index: 0,
            pivot_angle: 0.0,
            anchor,
            heading: actuator.heading,
            drive_phase: actuator.phase,
        };
        self.settle(&mut state, actuator);
        state
    }

    /// Starting state at the scene's standard trial start.
    pub fn start_state(&self, actuator: &ActuatorState, offset: f64) -> RobotState {
        self.initial_state(self.scene.start_anchor(actuator.heading, offset), actuator)
    }

    fn settle(&self, state: &mut RobotState, actuator: &ActuatorState) {
        let frame = self.scene.frame(&state.anchor, state.heading);
        let tau_max = self.max_torque(actuator);
        let orient = self.orientation(&frame, state.tumble_phase);
        let load = self.load(&orient, state.drive_phase, actuator);
        let k = state.pivot_index;
        let phi = state.drive_phase;
        let limit = self.stall_angle(&frame, k, &load, tau_max).unwrap_or(FRAC_PI_2);
        let angle = if phi <= self.drive_angle(&frame, k, 0.0, &load, tau_max) {
            0.0
        } else {
            self.solve_angle(&frame, k, phi, &load, tau_max, limit)
        };
        self.place(state, &frame, k, angle);
    }

    fn solve_angle(&self, frame: &SurfaceFrame, pivot: i64, phi: f64, load: &Vector3<f64>, tau_max: f64, limit: f64) -> f64 {
        let (mut lo, mut hi) = (0.0, limit);
        for _ in 0..64 {
            let mid = 0.5 * (lo + hi);
            if self.drive_angle(frame, pivot, mid, load, tau_max) <= phi {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= f64::EPSILON * hi.max(1.0) {
                break;
            }
        }
        lo
    }

    fn place(&self, state: &mut RobotState, frame: &SurfaceFrame, pivot: i64, angle: f64) {
        let (x, z) = self.com_offset(pivot, angle);
        state.pivot_index = pivot;
        state.pivot_angle = angle;
        state.tumble_phase = pivot as f64 * FRAC_PI_2 + angle;
        state.position = frame.origin + frame.forward * x + frame.normal * z;
        state.orientation = self.orientation(frame, state.tumble_phase);
        state.contact = if angle > 0.0 {
            Contact::Pivoting
        } else if pivot.rem_euclid(2) == 0 {
            Contact::FaceL
        } else {
            Contact::FaceH
        };
    }

    /// Advances the robot by one fixed timestep.
    pub fn step(&self, state: &RobotState, actuator: &ActuatorState, dt: f64) -> Result<RobotState, LocomotionError> {
        if !(dt > 0.0 && dt <= MAX_DT) {
            return Err(LocomotionError::InvalidTimestep(dt));
        }
        actuator.validate()?;
        let mut next = state.clone();
        next.time += dt;
        let freq = actuator.rotation_frequency;
        if freq == 0.0 {
            return Ok(next);
        }
        next.heading = actuator.heading;
        let tau_max = self.max_torque(actuator);
        let mut phi = state.drive_phase + 2.0 * PI * freq * dt;
        let mut k = state.pivot_index;
        let mut anchor = state.anchor;
        let mut stepped_out = !state.synchronized;

        let angle = loop {
            let frame = self.scene.frame(&anchor, next.heading);
            let orient = self.orientation(&frame, k as f64 * FRAC_PI_2);
            let load = self.load(&orient, phi, actuator);
            let stall = self.stall_angle(&frame, k, &load, tau_max);
            match stall {
                Some(limit) => {
                    let top = k as f64 * FRAC_PI_2 + limit + FRAC_PI_2 - self.scene.slope_along(&frame);
                    if phi >= top {
                        // Field outran the robot: it drops back and waits a turn.
                        phi -= 2.0 * PI;
                        stepped_out = true;
                    }
                    if phi <= self.drive_angle(&frame, k, 0.0, &load, tau_max) {
                        break 0.0;
                    }
                    break self.solve_angle(&frame, k, phi, &load, tau_max, limit);
                }
                None => {
                    stepped_out = false;
                    let done = self.drive_angle(&frame, k, FRAC_PI_2, &load, tau_max);
                    if phi >= done - 1e-12 {
                        let slip = self.pivot_slip(&frame, k, freq);
                        let rise = self.geometry(k).rise;
                        anchor = self.scene.advance(&anchor, next.heading, slip * rise);
                        k += 1;
                        continue;
                    }
                    if phi <= self.drive_angle(&frame, k, 0.0, &load, tau_max) {
                        break 0.0;
                    }
                    break self.solve_angle(&frame, k, phi, &load, tau_max, FRAC_PI_2);
                }
            }
        };

        next.drive_phase = phi;
        next.anchor = anchor;
        next.synchronized = !stepped_out;
        let frame = self.scene.frame(&anchor, next.heading);
        self.place(&mut next, &frame, k, angle);
        if self.include_magnetic_force && self.load(&next.orientation, phi, actuator).dot(&frame.normal) > 0.0 {
            next.contact = Contact::Free;
        }

        let horizontal = Vector3::new(next.position.x, next.position.y, 0.0).norm();
        if horizontal > WORKSPACE_RADIUS {
            return Err(LocomotionError::OutOfWorkspace {
                x: next.position.x,
                y: next.position.y,
            });
        }
        Ok(next)
    }

    /// Gravity torque about the current pivot edge (positive opposes tumbling).
    pub fn required_pivot_torque(&self, state: &RobotState) -> Result<f64, LocomotionError> {
        if state.contact == Contact::Free {
            return Err(LocomotionError::NoContact);
        }
        let frame = self.scene.frame(&state.anchor, state.heading);
        let load = Vector3::new(0.0, 0.0, -self.weight());
        Ok(self.resisting_torque(&frame, state.pivot_index, state.pivot_angle, &load))
    }

    /// Upper bound of the gravity torque over every pivot phase: `W·√(L²+h²)/2`.
    pub fn worst_case_pivot_torque(&self) -> f64 {
        self.weight() * self.design.half_diagonal()
    }

    /// Lowest point of the robot measured along the local surface normal.
    pub fn clearance(&self, state: &RobotState) -> f64 {
        let frame = self.scene.frame(&state.anchor, state.heading);
        let (hl, hw, hh) = (0.5 * self.design.length, 0.5 * self.design.width, 0.5 * self.design.height);
        let mut lowest = f64::INFINITY;
        for sx in [-1.0, 1.0] {
            for sy in [-1.0, 1.0] {
                for sz in [-1.0, 1.0] {
                    let corner = state.position + state.orientation * Vector3::new(sx * hl, sy * hw, sz * hh);
                    lowest = lowest.min((corner - frame.origin).dot(&frame.normal));
                }
            }
        }
        lowest
    }
}

/// Gravity torque about the pivot of a robot at `state` in `scene`.
pub fn required_pivot_torque(
    state: &RobotState,
    scene: &Scene,
    design: &MicrorobotDesign,
    payload: Option<&PayloadSpec>,
) -> Result<f64, LocomotionError> {
    Tumbler::new(scene, design, payload)?.required_pivot_torque(state)
}

/// Zero-mean noise in `[-1, 1)` for one pivot, reproducible from the seed.
fn pivot_noise(seed: u64, pivot: i64) -> f64 {
    let key = seed ^ (pivot as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    ChaCha8Rng::seed_from_u64(key).random_range(-1.0..1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::magnetics::RobotMagnet;
    use crate::microrobot::{distance_per_revolution, DesignKind};
    use crate::scene::{Fluid, SceneKind, SlipTable};
    use approx::assert_relative_eq;

    fn actuator(freq: f64) -> ActuatorState {
        ActuatorState {
            rotation_frequency: freq,
            ..ActuatorState::default()
        }
    }

    fn flat_tumbler(slip: f64) -> Tumbler {
        let mut scene = Scene::flat(SceneKind::FlatDry);
        scene.locomotion_params.slip = SlipTable::constant(slip);
        scene.locomotion_params.slip_noise = 0.0;
        Tumbler::new(&scene, &MicrorobotDesign::stock(DesignKind::TopPorts), None).unwrap()
    }

    fn run(t: &Tumbler, act: &ActuatorState, steps: usize) -> (RobotState, RobotState) {
        let start = t.start_state(act, 0.02);
        let mut s = start.clone();
        for _ in 0..steps {
            s = t.step(&s, act, DEFAULT_DT).unwrap();
        }
        (start, s)
    }

    #[test]
    fn one_second_at_two_hertz_advances_two_revolutions() {
        let t = flat_tumbler(1.0);
        let act = actuator(2.0);
        let (a, b) = run(&t, &act, 1000);
        let d = (b.position - a.position).dot(&Vector3::x());
        let oracle = 2.0 * distance_per_revolution(t.design());
        assert_relative_eq!(d, oracle, max_relative = 1e-9);
        assert_relative_eq!(d, 8.8e-3 * 2.0, max_relative = 1e-9);
        assert!(b.synchronized);
    }

    #[test]
    fn zero_frequency_only_advances_time() {
        let t = flat_tumbler(1.0);
        let act = actuator(0.0);
        let s0 = t.start_state(&act, 0.0);
        let s1 = t.step(&s0, &act, 1e-3).unwrap();
        let mut expect = s0.clone();
        expect.time = 1e-3;
        assert_eq!(s1, expect);
    }

    #[test]
    fn invalid_timestep_rejected() {
        let t = flat_tumbler(1.0);
        let act = actuator(2.0);
        let s0 = t.start_state(&act, 0.0);
        assert!(matches!(t.step(&s0, &act, 0.0), Err(LocomotionError::InvalidTimestep(_))));
        assert!(matches!(t.step(&s0, &act, 0.02), Err(LocomotionError::InvalidTimestep(_))));
    }

    #[test]
    fn tumble_phase_tracks_field_within_lag() {
        let t = flat_tumbler(1.0);
        let act = actuator(3.0);
        let tau_max = t.max_torque(&act);
        let max_lag = (t.worst_case_pivot_torque() / tau_max).asin();
        let mut s = t.start_state(&act, 0.02);
        for _ in 0..700 {
            s = t.step(&s, &act, DEFAULT_DT).unwrap();
            let lag = s.drive_phase - s.tumble_phase;
            assert!(lag.abs() <= max_lag + 1e-12, "lag {lag}");
        }
    }

    #[test]
    fn robot_stays_on_the_substrate() {
        let t = flat_tumbler(0.8);
        let act = actuator(5.0);
        let mut s = t.start_state(&act, 0.02);
        for _ in 0..400 {
            s = t.step(&s, &act, DEFAULT_DT).unwrap();
            let c = t.clearance(&s);
            assert!(c.abs() < 1e-9, "clearance {c}");
            assert!((s.orientation.norm() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn pivot_torque_examples() {
        let t = flat_tumbler(1.0);
        let act = actuator(0.0);
        let mut s = t.start_state(&act, 0.0);
        // Balanced on the pivot edge: CoM straight above it.
        let (l, h) = (t.design().length, t.design().height);
        s.pivot_angle = (l / h).atan();
        assert!(t.required_pivot_torque(&s).unwrap().abs() < 1e-20);

        // Worst case for a 5.0e-6 kg robot: W·√(L²+h²)/2 ≈ 8.1e-8 N·m.
        let worst_oracle = 5.0e-6 * GRAVITY * 0.5 * (3.0e-3f64.powi(2) + 1.4e-3f64.powi(2)).sqrt();
        assert!((worst_oracle - 8.1e-8).abs() < 0.05e-8);
        let heavy_design = MicrorobotDesign::stock(DesignKind::TopPorts);
        let mut payload = PayloadSpec::bsa(&heavy_design, 100.0);
        payload.solution_density = (5.0e-6 - robot_mass(&heavy_design, None)) / payload.loaded_volume;
        let heavy = Tumbler::new(&Scene::flat(SceneKind::FlatDry), &heavy_design, Some(&payload)).unwrap();
        assert_relative_eq!(heavy.worst_case_pivot_torque(), worst_oracle, max_relative = 1e-12);
        for i in 0..=90 {
            s.pivot_angle = (i as f64).to_radians();
            for k in 0..2 {
                s.pivot_index = k;
                assert!(heavy.required_pivot_torque(&s).unwrap().abs() <= worst_oracle * (1.0 + 1e-12));
            }
        }
        // Available magnetic torque exceeds it by a wide margin.
        let tau = RobotMagnet::default().moment() * 0.020;
        assert!((tau - 2.59e-6).abs() < 1e-8);
        assert!(tau > 10.0 * worst_oracle);
    }

    #[test]
    fn free_robot_has_no_pivot_torque() {
        let t = flat_tumbler(1.0);
        let mut s = t.start_state(&actuator(0.0), 0.0);
        s.contact = Contact::Free;
        assert!(matches!(t.required_pivot_torque(&s), Err(LocomotionError::NoContact)));
    }

    fn weak_magnet_tumbler() -> Tumbler {
        let mut design = MicrorobotDesign::stock(DesignKind::TopPorts);
        design.magnet = RobotMagnet::new(500e-6, 0.01, Vector3::z()).unwrap();
        let mut scene = Scene::flat(SceneKind::FlatDry);
        scene.locomotion_params.slip_noise = 0.0;
        Tumbler::new(&scene, &design, None).unwrap()
    }

    #[test]
    fn torque_deficit_steps_out_and_stays_in_place() {
        let t = weak_magnet_tumbler();
        let act = actuator(2.0);
        assert!(t.worst_case_pivot_torque() > t.max_torque(&act));
        let start = t.start_state(&act, 0.0);
        let mut s = start.clone();
        let mut saw_out = false;
        for _ in 0..2000 {
            s = t.step(&s, &act, DEFAULT_DT).unwrap();
            if !s.synchronized {
                saw_out = true;
                // Only allowed when the pivot demands more than |m||B| somewhere.
                let frame = t.scene().frame(&s.anchor, s.heading);
                let load = Vector3::new(0.0, 0.0, -t.weight());
                assert!(t.stall_angle(&frame, s.pivot_index, &load, t.max_torque(&act)).is_some());
            }
            assert_eq!(s.pivot_index, 0);
            assert!(s.drive_phase - s.tumble_phase < 2.0 * PI);
        }
        assert!(saw_out);
        assert_eq!(s.anchor, start.anchor);
        assert!((s.position - start.position).norm() < 1e-15);
    }

    #[test]
    fn synchronized_robot_never_reports_step_out() {
        let t = flat_tumbler(0.9);
        let act = actuator(5.0);
        let mut s = t.start_state(&act, 0.02);
        for _ in 0..500 {
            s = t.step(&s, &act, DEFAULT_DT).unwrap();
            assert!(s.synchronized);
        }
    }

    #[test]
    fn infeasible_climb_makes_no_progress() {
        let scene = Scene::incline(60.0, Fluid::DiWater, LocomotionParams::wet().without_noise()).unwrap();
        let t = Tumbler::new(&scene, &MicrorobotDesign::stock(DesignKind::TopPorts), None).unwrap();
        let act = actuator(5.0);
        let start = t.start_state(&act, 0.0);
        let mut s = start.clone();
        for _ in 0..1000 {
            s = t.step(&s, &act, DEFAULT_DT).unwrap();
        }
        assert!(s.synchronized);
        let up = crate::scene::incline_surface(60f64.to_radians()).unwrap().uphill;
        assert!((s.position - start.position).dot(&up) <= 1e-12);
    }

    #[test]
    fn leaving_the_workspace_is_an_error() {
        let t = flat_tumbler(1.0);
        let act = actuator(5.0);
        let mut s = t.start_state(&act, -0.03);
        let mut result = Ok(());
        for _ in 0..1000 {
            match t.step(&s, &act, DEFAULT_DT) {
                Ok(n) => s = n,
                Err(e) => {
                    result = Err(e);
                    break;
                }
            }
        }
        assert!(matches!(result, Err(LocomotionError::OutOfWorkspace { .. })));
    }

    #[test]
    fn pivot_noise_is_zero_mean_and_bounded() {
        let n = 20000;
        let mean: f64 = (0..n).map(|k| pivot_noise(7, k)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.02, "mean {mean}");
        assert!((0..n).all(|k| (-1.0..1.0).contains(&pivot_noise(7, k))));
        assert_eq!(pivot_noise(3, 11), pivot_noise(3, 11));
    }

    #[test]
    fn magnetic_force_term_is_optional() {
        let scene = Scene::flat(SceneKind::FlatDry);
        let design = MicrorobotDesign::stock(DesignKind::TopPorts);
        let plain = Tumbler::new(&scene, &design, None).unwrap();
        let forced = plain.clone().with_magnetic_force(RotatingActuator::with_standoff(0.2));
        let act = actuator(2.0);
        let s = plain.start_state(&act, 0.0);
        let l_plain = plain.load(&s.orientation, 0.0, &act);
        let l_forced = forced.load(&s.orientation, 0.0, &act);
        assert_eq!(l_plain, Vector3::new(0.0, 0.0, -plain.weight()));
        assert!((l_forced - l_plain).norm() > 0.0);
    }
}
