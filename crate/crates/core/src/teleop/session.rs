use std::io::Write;

use serde::{Deserialize, Serialize};

use super::log::{LogEntry, LogHeader};
use super::protocol::{Command, CommandKind, Snapshot};
use super::TeleopError;
use crate::locomotion::{RobotState, Tumbler};
use crate::magnetics::ActuatorState;
use crate::microrobot::{DesignKind, MicrorobotDesign, PayloadSpec};
use crate::scene::{bundled_scene, Scene};
use crate::thermics::{heat_step, CapPreset, FusConfig, MeltCurve, PayloadState, ThermalState};

pub const DEFAULT_TICK_RATE: u32 = 100;
pub const DEFAULT_SUBSTEPS: u32 = 10;
pub const DEFAULT_SNAPSHOT_RATE: u32 = 30;
pub const DEFAULT_SCENE: &str = "phantom_rat";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SessionConfig {
    /// Bundled scene name.
    pub scene: String,
    pub design: DesignKind,
    pub tick_rate: u32,
    /// Locomotion substeps per tick.
    pub substeps: u32,
    pub snapshot_rate: u32,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            scene: DEFAULT_SCENE.into(),
            design: DesignKind::TopPorts,
            tick_rate: DEFAULT_TICK_RATE,
            substeps: DEFAULT_SUBSTEPS,
            snapshot_rate: DEFAULT_SNAPSHOT_RATE,
        }
    }
}

impl SessionConfig {
    pub fn validate(&self) -> Result<(), TeleopError> {
        if self.tick_rate == 0 || self.substeps == 0 || self.snapshot_rate == 0 {
            return Err(TeleopError::InvalidConfig("rates and substeps must be positive".into()));
        }
        if self.snapshot_rate > self.tick_rate {
            return Err(TeleopError::InvalidConfig("snapshot rate cannot exceed the tick rate".into()));
        }
        let dt = self.substep_dt();
        if dt > crate::locomotion::MAX_DT {
            return Err(TeleopError::InvalidConfig(format!("locomotion step {dt} s is too coarse")));
        }
        Ok(())
    }

    pub fn tick_dt(&self) -> f64 {
        1.0 / self.tick_rate as f64
    }

    pub fn substep_dt(&self) -> f64 {
        1.0 / (self.tick_rate as f64 * self.substeps as f64)
    }
}

/// Everything `Reset` restores.
#[derive(Debug, Clone)]
struct World {
    scene_name: String,
    scene: Scene,
    tumbler: Tumbler,
    robot: RobotState,
    actuator: ActuatorState,
    target_frequency: f64,
    rotating: bool,
    thermal: ThermalState,
    payload: PayloadState,
    fus: Option<(f64, FusConfig)>,
    fault: Option<String>,
}

impl World {
    fn new(scene_name: &str, design: DesignKind) -> Result<Self, TeleopError> {
        let scene = bundled_scene(scene_name)?;
        let design = MicrorobotDesign::stock(design);
        let spec = PayloadSpec::bsa(&design, 300.0);
        let tumbler = Tumbler::new(&scene, &design, Some(&spec))?;
        let actuator = ActuatorState::default();
        let robot = tumbler.start_state(&actuator, if scene.lumen.is_some() { 5e-3 } else { 0.0 });
        let cap = CapPreset::Nominal.cap(&MeltCurve::default(), 0.6)?;
        Ok(Self {
            scene_name: scene_name.to_string(),
            thermal: ThermalState::calibrated(scene.temperature_ambient_c),
            payload: PayloadState::new(&design, &spec, cap)?,
            scene,
            tumbler,
            robot,
            actuator,
            target_frequency: 0.0,
            rotating: false,
            fus: None,
            fault: None,
        })
    }
}

enum Recorder {
    Memory(Vec<String>),
    Writer(Box<dyn Write + Send>),
}

/// One teleoperation session: a fixed-rate simulation loop fed by commands.
/// Commands queued between ticks are applied, in order, at the start of the
/// next tick.
pub struct Session {
    config: SessionConfig,
    world: World,
    tick: u64,
    last_seq: Option<u64>,
    last_applied: Option<u64>,
    pending: Vec<Command>,
    recorder: Option<Recorder>,
}

impl std::fmt::Debug for Session {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Session")
            .field("config", &self.config)
            .field("tick", &self.tick)
            .field("last_seq", &self.last_seq)
            .finish_non_exhaustive()
    }
}

impl Session {
    pub fn new(config: SessionConfig) -> Result<Self, TeleopError> {
        config.validate()?;
        let world = World::new(&config.scene, config.design)?;
        Ok(Self {
            config,
            world,
            tick: 0,
            last_seq: None,
            last_applied: None,
            pending: Vec::new(),
            recorder: None,
        })
    }

    /// Records into memory; read back with [`Session::recorded_log`].
    pub fn record_in_memory(&mut self) -> Result<(), TeleopError> {
        self.start_recording(Recorder::Memory(Vec::new()))
    }

    /// Streams the session log to `writer` as JSON lines.
    pub fn record_to(&mut self, writer: impl Write + Send + 'static) -> Result<(), TeleopError> {
        self.start_recording(Recorder::Writer(Box::new(writer)))
    }

    fn start_recording(&mut self, recorder: Recorder) -> Result<(), TeleopError> {
        if self.tick != 0 {
            return Err(TeleopError::InvalidConfig("recording must start before the first tick".into()));
        }
        self.recorder = Some(recorder);
        self.emit(&LogEntry::Header(LogHeader::new(&self.config)))
    }

    fn emit(&mut self, entry: &LogEntry) -> Result<(), TeleopError> {
        let line = entry.to_line();
        match &mut self.recorder {
            None => Ok(()),
            Some(Recorder::Memory(lines)) => {
                lines.push(line);
                Ok(())
            }
            Some(Recorder::Writer(w)) => writeln!(w, "{line}").and_then(|_| w.flush()).map_err(TeleopError::Io),
        }
    }

    pub fn recorded_log(&self) -> Option<String> {
        match &self.recorder {
            Some(Recorder::Memory(lines)) => Some(lines.iter().map(|l| format!("{l}\n")).collect()),
            _ => None,
        }
    }

    /// Writes the end marker and flushes.
    pub fn finish_recording(&mut self) -> Result<(), TeleopError> {
        let end = LogEntry::End { ticks: self.tick };
        self.emit(&end)
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn tick_count(&self) -> u64 {
        self.tick
    }

    pub fn time(&self) -> f64 {
        self.tick as f64 / self.config.tick_rate as f64
    }

    pub fn robot(&self) -> &RobotState {
        &self.world.robot
    }

    pub fn scene(&self) -> &Scene {
        &self.world.scene
    }

    pub fn last_applied(&self) -> Option<u64> {
        self.last_applied
    }

    /// Queues a command for the next tick. Rejected commands leave the
    /// session untouched.
    pub fn submit(&mut self, cmd: Command) -> Result<(), TeleopError> {
        cmd.validate()?;
        if let Some(last) = self.last_seq {
            if cmd.seq <= last {
                return Err(TeleopError::MalformedCommand(format!(
                    "sequence number {} does not follow {last}",
                    cmd.seq
                )));
            }
        }
        if let CommandKind::LoadScene { name } = &cmd.kind {
            bundled_scene(name)?;
        }
        self.last_seq = Some(cmd.seq);
        self.pending.push(cmd);
        Ok(())
    }

    fn apply(&mut self, cmd: &Command) -> Result<(), TeleopError> {
        let w = &mut self.world;
        match &cmd.kind {
            CommandKind::SetFrequency { hz } => w.target_frequency = *hz,
            CommandKind::SetHeading { rad } => w.actuator.heading = *rad,
            CommandKind::StartRotation => w.rotating = true,
            CommandKind::StopRotation => w.rotating = false,
            CommandKind::TriggerFus { duration_s } => {
                w.fus = Some((self.tick as f64 * self.config.tick_dt(), FusConfig::default().with_duration(*duration_s)));
            }
            CommandKind::Reset => *w = World::new(&w.scene_name, self.config.design)?,
            CommandKind::LoadScene { name } => *w = World::new(name, self.config.design)?,
        }
        Ok(())
    }

    /// Advances one tick and returns a snapshot when one is due.
    pub fn tick(&mut self) -> Result<Option<Snapshot>, TeleopError> {
        let t0 = self.tick as f64 * self.config.tick_dt();
        self.tick += 1;
        for cmd in std::mem::take(&mut self.pending) {
            self.emit(&LogEntry::Command {
                tick: self.tick,
                command: cmd.clone(),
            })?;
            self.apply(&cmd)?;
            self.last_applied = Some(cmd.seq);
        }
        self.step_physics(t0);
        let due = |k: u64| k * self.config.snapshot_rate as u64 / self.config.tick_rate as u64;
        if due(self.tick) > due(self.tick - 1) {
            let snap = self.snapshot();
            self.emit(&LogEntry::Snapshot {
                tick: self.tick,
                snapshot: snap.clone(),
            })?;
            Ok(Some(snap))
        } else {
            Ok(None)
        }
    }

    fn step_physics(&mut self, t0: f64) {
        let dt = self.config.tick_dt();
        let sub = self.config.substep_dt();
        let w = &mut self.world;
        w.actuator.rotation_frequency = if w.rotating { w.target_frequency } else { 0.0 };
        if w.fault.is_none() {
            for _ in 0..self.config.substeps {
                match w.tumbler.step(&w.robot, &w.actuator, sub) {
                    Ok(next) => w.robot = next,
                    Err(e) => {
                        w.fault = Some(e.to_string());
                        w.rotating = false;
                        break;
                    }
                }
            }
        }
        let fus = w.fus.as_ref().map(|(start, f)| (t0 - start, f));
        w.thermal = match fus {
            Some((t, f)) => heat_step(&w.thermal, Some(f), t, dt),
            None => heat_step(&w.thermal, None, 0.0, dt),
        };
        w.payload = w.payload.advance(w.thermal.temperature, dt);
    }

    pub fn snapshot(&self) -> Snapshot {
        let w = &self.world;
        let t = self.time();
        Snapshot {
            t,
            pos: [w.robot.position.x, w.robot.position.y, w.robot.position.z],
            phase: w.robot.tumble_phase,
            sync: w.robot.synchronized,
            arc: w.scene.arc_length(&w.robot.anchor, w.robot.heading),
            temp_c: w.thermal.temperature,
            released: w.payload.released_fraction(),
            freq: w.target_frequency,
            heading: w.actuator.heading,
            rotating: w.rotating,
            fus_active: w.fus.as_ref().is_some_and(|(start, f)| t - start < f.duration),
            ack: self.last_applied,
            dropped: 0,
            scene: w.scene_name.clone(),
            fault: w.fault.clone(),
        }
    }

    /// Ticks for `seconds` of simulated time, collecting snapshots.
    pub fn run_for(&mut self, seconds: f64) -> Result<Vec<Snapshot>, TeleopError> {
        let ticks = (seconds * self.config.tick_rate as f64).round() as u64;
        let mut out = Vec::new();
        for _ in 0..ticks {
            out.extend(self.tick()?);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::microrobot::distance_per_revolution;

    fn session(scene: &str) -> Session {
        Session::new(SessionConfig {
            scene: scene.into(),
            ..SessionConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn idle_second_emits_thirty_snapshots() {
        let mut s = session("phantom_rat");
        let start = s.robot().clone();
        let snaps = s.run_for(1.0).unwrap();
        assert_eq!(snaps.len(), 30);
        assert!(snaps.windows(2).all(|w| w[1].t > w[0].t));
        assert_eq!(s.robot().position, start.position);
        assert_eq!(s.tick_count(), 100);
    }

    #[test]
    fn rotation_advances_along_the_lumen() {
        let mut s = session("phantom_rat");
        s.submit(Command::new(1, CommandKind::SetFrequency { hz: 3.0 })).unwrap();
        s.submit(Command::new(2, CommandKind::StartRotation)).unwrap();
        let a0 = s.snapshot().arc;
        let snaps = s.run_for(2.0).unwrap();
        let last = snaps.last().unwrap();
        let slip = s.scene().locomotion_params.slip.at(3.0);
        let expected = slip * distance_per_revolution(&MicrorobotDesign::stock(DesignKind::TopPorts)) * 3.0 * 2.0;
        let noise = s.scene().locomotion_params.slip_noise;
        assert!((last.arc - a0 - expected).abs() <= noise * expected, "{} vs {expected}", last.arc - a0);
        assert_eq!(last.ack, Some(2));
    }

    #[test]
    fn sequence_numbers_must_increase() {
        let mut s = session("flat_dry");
        s.submit(Command::new(5, CommandKind::StartRotation)).unwrap();
        assert!(matches!(
            s.submit(Command::new(5, CommandKind::StopRotation)),
            Err(TeleopError::MalformedCommand(_))
        ));
        assert!(s.submit(Command::new(4, CommandKind::StopRotation)).is_err());
        s.submit(Command::new(6, CommandKind::StopRotation)).unwrap();
    }

    #[test]
    fn unknown_scene_is_rejected_at_submit() {
        let mut s = session("flat_dry");
        assert!(s
            .submit(Command::new(1, CommandKind::LoadScene { name: "moon".into() }))
            .is_err());
        assert!(s.submit(Command::new(1, CommandKind::Reset)).is_ok());
    }

    #[test]
    fn reset_restores_the_initial_world() {
        let mut s = session("phantom_rat");
        let initial = s.robot().clone();
        s.submit(Command::new(1, CommandKind::SetFrequency { hz: 5.0 })).unwrap();
        s.submit(Command::new(2, CommandKind::StartRotation)).unwrap();
        s.submit(Command::new(3, CommandKind::TriggerFus { duration_s: 10.0 })).unwrap();
        s.run_for(0.5).unwrap();
        assert_ne!(s.robot().position, initial.position);
        s.submit(Command::new(4, CommandKind::Reset)).unwrap();
        let snap = s.run_for(0.1).unwrap().pop().unwrap();
        assert_eq!(s.robot().position, initial.position);
        assert!(!snap.rotating);
        assert_eq!(snap.temp_c, s.scene().temperature_ambient_c);
    }

    #[test]
    fn fus_heats_and_releases_above_body_temperature() {
        let mut s = session("phantom_rat");
        s.submit(Command::new(1, CommandKind::TriggerFus { duration_s: 180.0 })).unwrap();
        let snaps = s.run_for(200.0).unwrap();
        let first = snaps.iter().find(|x| x.released > 0.0).expect("release happens");
        assert!(first.temp_c > 37.0);
        let peak = snaps.iter().map(|x| x.temp_c).fold(f64::MIN, f64::max);
        assert!((peak - 42.0).abs() <= 0.5);
        assert!(!snaps.last().unwrap().fus_active);
    }
}
