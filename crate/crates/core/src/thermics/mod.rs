//! Wax melt curve, lumped FUS heating and thermally gated payload release.

mod program;
mod release;

pub use program::{
    design_comparison_program, stepped_bath_program, run_program, ProgramSample, ProgramSegment, ReleaseRun,
    TemperatureProgram, DEFAULT_RAMP_RATE,
};
pub use release::{
    cap_update, rate_constant, release_step, sample_supernatant, CapPreset, PayloadState, TP_RATE_CONSTANT,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ThermicsError {
    #[error("mass fraction {w} outside the melt curve domain [{min}, {max}]")]
    OutOfDomain { w: f64, min: f64, max: f64 },
    #[error("invalid melt curve: {0}")]
    InvalidCurve(String),
    #[error("invalid thermal state: {0}")]
    InvalidThermal(String),
    #[error("invalid FUS configuration: {0}")]
    InvalidFus(String),
    #[error("invalid temperature program: {0}")]
    InvalidProgram(String),
    #[error(transparent)]
    Design(#[from] crate::microrobot::DesignError),
}

/// One measured wax formulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeltPoint {
    pub w: f64,
    pub onset: f64,
    /// Final melting temperature, when measured.
    #[serde(default)]
    pub final_c: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<MeltPoint>", into = "Vec<MeltPoint>")]
pub struct MeltCurve {
    points: Vec<MeltPoint>,
}

impl TryFrom<Vec<MeltPoint>> for MeltCurve {
    type Error = ThermicsError;

    fn try_from(points: Vec<MeltPoint>) -> Result<Self, Self::Error> {
        Self::new(points)
    }
}

impl From<MeltCurve> for Vec<MeltPoint> {
    fn from(c: MeltCurve) -> Self {
        c.points
    }
}

impl Default for MeltCurve {
    /// Pure paraffin begins melting near 50 °C; 60 % mineral oil near 39 °C.
    fn default() -> Self {
        Self::new(vec![
            MeltPoint { w: 0.0, onset: 50.0, final_c: None },
            MeltPoint { w: 0.6, onset: 39.0, final_c: None },
        ])
        .expect("default melt curve is valid")
    }
}

impl MeltCurve {
    pub fn new(points: Vec<MeltPoint>) -> Result<Self, ThermicsError> {
        if points.is_empty() {
            return Err(ThermicsError::InvalidCurve("at least one point is required".into()));
        }
        for p in &points {
            if !(p.w.is_finite() && p.onset.is_finite()) || !(0.0..=1.0).contains(&p.w) {
                return Err(ThermicsError::InvalidCurve(format!("bad point at w = {}", p.w)));
            }
            if let Some(f) = p.final_c {
                if !(f >= p.onset) {
                    return Err(ThermicsError::InvalidCurve(format!(
                        "final temperature {f} below onset {} at w = {}",
                        p.onset, p.w
                    )));
                }
            }
        }
        if points.windows(2).any(|p| p[1].w <= p[0].w) {
            return Err(ThermicsError::InvalidCurve("mass fractions must strictly increase".into()));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[MeltPoint] {
        &self.points
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.points[0].w, self.points[self.points.len() - 1].w)
    }

    /// Piecewise-linear onset temperature.
    pub fn onset(&self, w: f64) -> Result<f64, ThermicsError> {
        let (min, max) = self.domain();
        if !(min..=max).contains(&w) {
            return Err(ThermicsError::OutOfDomain { w, min, max });
        }
        let i = self.points.partition_point(|p| p.w <= w);
        if i == 0 {
            return Ok(self.points[0].onset);
        }
        let a = self.points[i - 1];
        if a.w == w || i == self.points.len() {
            return Ok(a.onset);
        }
        let b = self.points[i];
        let t = (w - a.w) / (b.w - a.w);
        Ok(a.onset + t * (b.onset - a.onset))
    }
}

pub fn melt_onset(curve: &MeltCurve, w: f64) -> Result<f64, ThermicsError> {
    curve.onset(w)
}

/// Lumped thermal parameters fitted to the phantom thermocouple anchors.
pub mod calibrated {
    pub const ABSORBED_FRACTION: f64 = 0.5;
    pub const CONDUCTANCE: f64 = 0.16;
    pub const CAPACITANCE: f64 = 8.95;
}

/// Single-node temperature at the robot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermalState {
    pub temperature: f64,
    pub ambient: f64,
    /// J/°C
    pub capacitance: f64,
    /// W/°C
    pub conductance: f64,
}

impl ThermalState {
    pub fn new(ambient: f64, capacitance: f64, conductance: f64) -> Result<Self, ThermicsError> {
        let s = Self {
            temperature: ambient,
            ambient,
            capacitance,
            conductance,
        };
        s.validate()?;
        Ok(s)
    }

    /// At ambient, with the calibrated lumped parameters.
    pub fn calibrated(ambient: f64) -> Self {
        Self::new(ambient, calibrated::CAPACITANCE, calibrated::CONDUCTANCE).expect("calibrated constants are valid")
    }

    pub fn validate(&self) -> Result<(), ThermicsError> {
        if !(self.capacitance > 0.0 && self.conductance > 0.0) {
            return Err(ThermicsError::InvalidThermal("capacitance and conductance must be positive".into()));
        }
        if !(self.capacitance.is_finite() && self.conductance.is_finite()) {
            return Err(ThermicsError::InvalidThermal("capacitance and conductance must be finite".into()));
        }
        if !(self.temperature.is_finite() && self.ambient.is_finite()) {
            return Err(ThermicsError::InvalidThermal("temperatures must be finite".into()));
        }
        Ok(())
    }

    pub fn time_constant(&self) -> f64 {
        self.capacitance / self.conductance
    }

    /// Equilibrium temperature under a constant absorbed power.
    pub fn steady_state(&self, absorbed_power: f64) -> f64 {
        self.ambient + absorbed_power / self.conductance
    }
}

/// Pulsed focused-ultrasound source.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FusConfig {
    pub electrical_power: f64,
    pub frequency: f64,
    pub burst_length: f64,
    pub period: f64,
    /// Sonication stops at this time, s.
    pub duration: f64,
    pub absorbed_fraction: f64,
}

impl Default for FusConfig {
    fn default() -> Self {
        Self {
            electrical_power: 10.0,
            frequency: 6.775e6,
            burst_length: 0.20e-3,
            period: 1.00e-3,
            duration: 180.0,
            absorbed_fraction: calibrated::ABSORBED_FRACTION,
        }
    }
}

impl FusConfig {
    pub fn with_duration(mut self, duration: f64) -> Self {
        self.duration = duration;
        self
    }

    pub fn validate(&self) -> Result<(), ThermicsError> {
        if !(self.electrical_power >= 0.0 && self.frequency > 0.0 && self.burst_length > 0.0 && self.period > 0.0) {
            return Err(ThermicsError::InvalidFus("power, frequency, burst and period must be positive".into()));
        }
        if self.burst_length > self.period {
            return Err(ThermicsError::InvalidFus("burst length exceeds the period".into()));
        }
        if !(self.absorbed_fraction > 0.0 && self.absorbed_fraction <= 1.0) {
            return Err(ThermicsError::InvalidFus("absorbed fraction must lie in (0, 1]".into()));
        }
        if !(self.duration >= 0.0) {
            return Err(ThermicsError::InvalidFus("duration must be non-negative".into()));
        }
        Ok(())
    }

    pub fn duty_cycle(&self) -> f64 {
        self.burst_length / self.period
    }

    /// Duty-averaged absorbed power while the source is on.
    pub fn absorbed_power(&self) -> f64 {
        self.electrical_power * self.duty_cycle() * self.absorbed_fraction
    }

    pub fn power_at(&self, t: f64) -> f64 {
        if t < self.duration {
            self.absorbed_power()
        } else {
            0.0
        }
    }
}

/// Exact solution of `C·dT/dt = P − G·(T − ambient)` for constant `P`.
fn relax(state: &ThermalState, power: f64, dt: f64) -> f64 {
    let target = state.steady_state(power);
    target + (state.temperature - target) * (-dt / state.time_constant()).exp()
}

/// Advances the lumped temperature from `t` to `t + dt`. A step that spans
/// the end of sonication is split there so the update stays exact.
pub fn heat_step(state: &ThermalState, fus: Option<&FusConfig>, t: f64, dt: f64) -> ThermalState {
    let mut next = *state;
    match fus {
        Some(f) if t < f.duration && t + dt > f.duration => {
            let on = f.duration - t;
            next.temperature = relax(state, f.absorbed_power(), on);
            next.temperature = relax(&next, 0.0, dt - on);
        }
        Some(f) => next.temperature = relax(state, f.power_at(t), dt),
        None => next.temperature = relax(state, 0.0, dt),
    }
    next
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn default_curve_anchors() {
        let c = MeltCurve::default();
        assert_eq!(melt_onset(&c, 0.0).unwrap(), 50.0);
        assert_eq!(melt_onset(&c, 0.6).unwrap(), 39.0);
        assert_relative_eq!(melt_onset(&c, 0.3).unwrap(), 44.5, max_relative = 1e-12);
        assert!(matches!(melt_onset(&c, 0.7), Err(ThermicsError::OutOfDomain { .. })));
        assert!(matches!(melt_onset(&c, -0.1), Err(ThermicsError::OutOfDomain { .. })));
    }

    #[test]
    fn knots_are_returned_exactly() {
        let c = MeltCurve::new(vec![
            MeltPoint { w: 0.0, onset: 50.0, final_c: Some(58.0) },
            MeltPoint { w: 0.3, onset: 46.1, final_c: None },
            MeltPoint { w: 0.6, onset: 39.0, final_c: Some(44.0) },
        ])
        .unwrap();
        assert_eq!(c.onset(0.3).unwrap(), 46.1);
        let json = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<MeltCurve>(&json).unwrap(), c);
    }

    #[test]
    fn curve_validation() {
        let p = |w, onset, final_c| MeltPoint { w, onset, final_c };
        assert!(MeltCurve::new(vec![]).is_err());
        assert!(MeltCurve::new(vec![p(0.3, 40.0, None), p(0.3, 39.0, None)]).is_err());
        assert!(MeltCurve::new(vec![p(0.3, 40.0, Some(39.0))]).is_err());
    }

    #[test]
    fn equilibrium_is_kept_without_source() {
        let s = ThermalState::calibrated(36.0);
        assert_eq!(heat_step(&s, None, 0.0, 10.0).temperature, 36.0);
        let fus = FusConfig::default();
        assert_eq!(heat_step(&s, Some(&fus), 200.0, 10.0).temperature, 36.0);
    }

    #[test]
    fn duty_averaged_power() {
        let f = FusConfig::default();
        assert_relative_eq!(f.duty_cycle(), 0.2, max_relative = 1e-12);
        assert_relative_eq!(f.absorbed_power(), 10.0 * 0.2 * f.absorbed_fraction, max_relative = 1e-12);
        assert!(FusConfig { burst_length: 2e-3, ..f }.validate().is_err());
        assert!(FusConfig { absorbed_fraction: 0.0, ..f }.validate().is_err());
    }

    #[test]
    fn steady_state_after_ten_time_constants() {
        let mut s = ThermalState::calibrated(36.0);
        let fus = FusConfig::default().with_duration(f64::INFINITY);
        let n = (10.0 * s.time_constant()).ceil() as usize;
        for i in 0..n {
            s = heat_step(&s, Some(&fus), i as f64, 1.0);
        }
        let expected = 36.0 + fus.absorbed_power() / s.conductance;
        assert!((s.temperature - expected).abs() < 0.01);
    }

    #[test]
    fn cutoff_inside_a_step_is_exact() {
        let s = ThermalState::calibrated(36.0);
        let fus = FusConfig::default();
        let coarse = heat_step(&s, Some(&fus), 170.0, 20.0);
        let fine = heat_step(&heat_step(&s, Some(&fus), 170.0, 10.0), Some(&fus), 180.0, 10.0);
        assert_relative_eq!(coarse.temperature, fine.temperature, max_relative = 1e-12);
    }
}
