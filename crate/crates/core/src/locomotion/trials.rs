use serde::{Deserialize, Serialize};

use super::{average_velocity, LocomotionError, RobotState, Trajectory, Tumbler, DEFAULT_DT};
use crate::magnetics::ActuatorState;
use crate::microrobot::{robot_mass, MicrorobotDesign, PayloadSpec, GRAVITY};
use crate::scene::{LocomotionParams, Scene};

/// The incline protocol holds the field at this frequency.
pub const INCLINE_LADDER_FREQUENCY: f64 = 5.0;
pub const LADDER_STEP_DEG: f64 = 5.0;
/// Distance the robot has to climb for a ladder rung to count.
pub const LADDER_CLIMB: f64 = 10e-3;
pub const LADDER_TIME_LIMIT: f64 = 2.0;

pub const ROBOTS_PER_PANEL: usize = 3;
pub const TRIALS_PER_ROBOT: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOptions {
    pub duration: f64,
    pub dt: f64,
    pub field_magnitude: f64,
    pub heading: f64,
    /// Distance behind the origin (planes) or into the lumen (arc length).
    /// `None` picks 20 mm on planes and 5 mm in a lumen.
    pub start_offset: Option<f64>,
    pub payload: Option<PayloadSpec>,
}

impl Default for TrialOptions {
    fn default() -> Self {
        Self {
            duration: 1.0,
            dt: DEFAULT_DT,
            field_magnitude: 0.020,
            heading: 0.0,
            start_offset: None,
            payload: None,
        }
    }
}

impl TrialOptions {
    fn offset_for(&self, scene: &Scene) -> f64 {
        self.start_offset
            .unwrap_or(if scene.lumen.is_some() { 5e-3 } else { 20e-3 })
    }

    fn actuator(&self, freq: f64) -> ActuatorState {
        ActuatorState {
            rotation_frequency: freq,
            heading: self.heading,
            phase: 0.0,
            field_magnitude_at_workspace: self.field_magnitude,
        }
    }
}

/// Steps `start` for `duration` seconds and records every state, the initial
/// one included.
pub fn simulate(
    tumbler: &Tumbler,
    start: RobotState,
    actuator: &ActuatorState,
    duration: f64,
    dt: f64,
) -> Result<Trajectory, LocomotionError> {
    if !(dt > 0.0 && dt <= super::MAX_DT) {
        return Err(LocomotionError::InvalidTimestep(dt));
    }
    let steps = (duration / dt).round() as usize;
    let mut traj = Trajectory::new(dt, start.time);
    traj.samples.reserve(steps + 1);
    let mut state = start;
    for _ in 0..steps {
        let next = tumbler.step(&state, actuator, dt)?;
        traj.push(std::mem::replace(&mut state, next));
    }
    traj.push(state);
    Ok(traj)
}

/// Velocity statistics of one (design, environment, frequency) panel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelResult {
    pub frequency: f64,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    /// Per-trial velocities, robot-major.
    pub trials: Vec<f64>,
}

impl PanelResult {
    pub fn spread(&self) -> f64 {
        self.max - self.min
    }
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seed of one trial, mixed from everything that identifies it.
pub fn trial_seed(seed: u64, design: &MicrorobotDesign, freq: f64, robot: usize, trial: usize) -> u64 {
    let mut h = splitmix(seed);
    for word in [design.kind as u64, freq.to_bits(), robot as u64, trial as u64] {
        h = splitmix(h ^ word);
    }
    h
}

/// Three robots, three trials each, with seeded per-pivot slip noise.
pub fn nine_panel_velocity(
    design: &MicrorobotDesign,
    scene: &Scene,
    freq: f64,
    seed: u64,
    options: &TrialOptions,
) -> Result<PanelResult, LocomotionError> {
    let base = Tumbler::new(scene, design, options.payload.as_ref())?;
    let actuator = options.actuator(freq);
    actuator.validate()?;
    let offset = options.offset_for(scene);
    let mut trials = Vec::with_capacity(ROBOTS_PER_PANEL * TRIALS_PER_ROBOT);
    for robot in 0..ROBOTS_PER_PANEL {
        for trial in 0..TRIALS_PER_ROBOT {
            let tumbler = base.clone().with_noise_seed(trial_seed(seed, design, freq, robot, trial));
            let start = tumbler.start_state(&actuator, offset);
            let traj = simulate(&tumbler, start, &actuator, options.duration, options.dt)?;
            trials.push(average_velocity(&traj)?);
        }
    }
    let mean = trials.iter().sum::<f64>() / trials.len() as f64;
    let min = trials.iter().copied().fold(f64::INFINITY, f64::min);
    let max = trials.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(PanelResult {
        frequency: freq,
        mean,
        min,
        max,
        trials,
    })
}

/// No-slip pivot condition `tan θ ≤ μ + σ·A/W` for a robot of weight `weight`
/// with contact area `area`.
pub fn climb_feasible_for_weight(theta: f64, params: &LocomotionParams, weight: f64, area: f64) -> bool {
    if theta <= 0.0 {
        return true;
    }
    theta.tan() <= params.mu + params.adhesion_pa * area / weight + 1e-12
}

/// Climb feasibility of the empty robot.
pub fn climb_feasible(theta: f64, params: &LocomotionParams, design: &MicrorobotDesign) -> bool {
    let weight = robot_mass(design, None) * GRAVITY;
    climb_feasible_for_weight(theta, params, weight, design.contact_area())
}

/// Steepest rung of the 5° ladder the robot climbs by 10 mm. The ladder
/// stops at the first failed rung.
pub fn incline_ladder(design: &MicrorobotDesign, environment: &Scene, freq: f64) -> Result<f64, LocomotionError> {
    let options = TrialOptions::default();
    let actuator = options.actuator(freq);
    actuator.validate()?;
    let mut best = 0.0;
    let rungs = (crate::scene::MAX_INCLINE_DEG / LADDER_STEP_DEG).round() as usize;
    for i in 0..=rungs {
        let deg = i as f64 * LADDER_STEP_DEG;
        if !climb_feasible(deg.to_radians(), &environment.locomotion_params, design) {
            break;
        }
        let scene = environment.with_incline(deg)?;
        let tumbler = Tumbler::new(&scene, design, None)?;
        if !climbs(&tumbler, &actuator, options.offset_for(&scene), options.dt)? {
            break;
        }
        best = deg;
    }
    Ok(best)
}

fn climbs(tumbler: &Tumbler, actuator: &ActuatorState, offset: f64, dt: f64) -> Result<bool, LocomotionError> {
    let mut state = tumbler.start_state(actuator, offset);
    let scene = tumbler.scene();
    let start = scene.arc_length(&state.anchor, actuator.heading);
    let steps = (LADDER_TIME_LIMIT / dt).round() as usize;
    for _ in 0..steps {
        state = tumbler.step(&state, actuator, dt)?;
        if scene.arc_length(&state.anchor, actuator.heading) - start >= LADDER_CLIMB {
            return Ok(true);
        }
    }
    Ok(false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::microrobot::{distance_per_revolution, DesignKind};
    use crate::scene::{Fluid, SceneKind};

    fn tp() -> MicrorobotDesign {
        MicrorobotDesign::stock(DesignKind::TopPorts)
    }

    #[test]
    fn flat_ground_is_always_climbable() {
        let params = LocomotionParams { mu: 0.0, adhesion_pa: 0.0, ..LocomotionParams::dry() };
        assert!(climb_feasible(0.0, &params, &tp()));
        assert!(!climb_feasible(1f64.to_radians(), &params, &tp()));
    }

    #[test]
    fn frictionless_ladder_stops_at_zero() {
        let params = LocomotionParams { mu: 0.0, adhesion_pa: 0.0, ..LocomotionParams::dry() };
        let env = Scene::incline(0.0, Fluid::Air, params).unwrap();
        assert_eq!(incline_ladder(&tp(), &env, INCLINE_LADDER_FREQUENCY).unwrap(), 0.0);
    }

    #[test]
    fn noiseless_panel_has_no_spread() {
        let mut scene = Scene::flat(SceneKind::FlatDry);
        scene.locomotion_params = scene.locomotion_params.without_noise();
        let r = nine_panel_velocity(&tp(), &scene, 3.0, 7, &TrialOptions::default()).unwrap();
        assert_eq!(r.trials.len(), 9);
        assert_eq!(r.spread(), 0.0);
        let ideal = scene.locomotion_params.slip.at(3.0) * distance_per_revolution(&tp()) * 3.0;
        assert!((r.mean - ideal).abs() <= 1e-9 * ideal);
    }

    #[test]
    fn seeded_panel_is_reproducible_and_varied() {
        let scene = Scene::flat(SceneKind::FlatWet);
        let a = nine_panel_velocity(&tp(), &scene, 4.0, 11, &TrialOptions::default()).unwrap();
        let b = nine_panel_velocity(&tp(), &scene, 4.0, 11, &TrialOptions::default()).unwrap();
        assert_eq!(a, b);
        assert!(a.spread() > 0.0);
        let c = nine_panel_velocity(&tp(), &scene, 4.0, 12, &TrialOptions::default()).unwrap();
        assert_ne!(a.trials, c.trials);
    }

    #[test]
    fn trial_seeds_differ() {
        let d = tp();
        let mut seen = std::collections::HashSet::new();
        for r in 0..3 {
            for t in 0..3 {
                assert!(seen.insert(trial_seed(1, &d, 2.0, r, t)));
            }
        }
    }

    #[test]
    fn simulate_records_fixed_spacing() {
        let scene = Scene::flat(SceneKind::FlatDry);
        let tumbler = Tumbler::new(&scene, &tp(), None).unwrap();
        let act = TrialOptions::default().actuator(2.0);
        let traj = simulate(&tumbler, tumbler.start_state(&act, 0.02), &act, 0.1, 1e-3).unwrap();
        assert_eq!(traj.len(), 101);
        for w in traj.samples.windows(2) {
            assert!(w[1].t > w[0].t);
        }
    }
}
