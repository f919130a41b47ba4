//! Tumbling microrobot designs: body geometry, ports, payload and wax cap.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::magnetics::RobotMagnet;

pub const DEFAULT_BODY_DENSITY: f64 = 1100.0;
pub const WATER_DENSITY: f64 = 1000.0;
/// Standard gravity, m/s².
pub const GRAVITY: f64 = 9.80665;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DesignError {
    #[error("invalid design: {0}")]
    InvalidDesign(String),
    #[error("invalid payload: {0}")]
    InvalidPayload(String),
    #[error("invalid wax cap: {0}")]
    InvalidCap(String),
    #[error("unknown design kind `{0}` (expected tp, sp or ep)")]
    UnknownKind(String),
}

/// Port configuration of the drug cavity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DesignKind {
    #[serde(rename = "tp")]
    TopPorts,
    #[serde(rename = "sp")]
    SidePorts,
    #[serde(rename = "ep")]
    EndPorts,
}

impl DesignKind {
    pub const ALL: [DesignKind; 3] = [DesignKind::TopPorts, DesignKind::SidePorts, DesignKind::EndPorts];

    pub fn as_str(self) -> &'static str {
        match self {
            DesignKind::TopPorts => "tp",
            DesignKind::SidePorts => "sp",
            DesignKind::EndPorts => "ep",
        }
    }

    /// Terminal releasable fraction observed after a 42 °C / 10 min bath.
    pub fn default_max_release(self) -> f64 {
        match self {
            DesignKind::TopPorts => 0.93,
            DesignKind::SidePorts => 0.52,
            DesignKind::EndPorts => 1.00,
        }
    }
}

impl fmt::Display for DesignKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DesignKind {
    type Err = DesignError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "tp" => Ok(DesignKind::TopPorts),
            "sp" => Ok(DesignKind::SidePorts),
            "ep" => Ok(DesignKind::EndPorts),
            other => Err(DesignError::UnknownKind(other.to_string())),
        }
    }
}

/// Geometry and material of one robot.
///
/// The body is an `length × width × height` box that tumbles end over end
/// about its width axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MicrorobotDesign {
    pub kind: DesignKind,
    pub length: f64,
    pub width: f64,
    pub height: f64,
    pub port_count: u32,
    pub port_diameter: f64,
    pub internal_volume: f64,
    pub cavity_volume: f64,
    pub magnet: RobotMagnet,
    pub body_density: f64,
    pub magnet_density: f64,
}

impl MicrorobotDesign {
    pub fn stock(kind: DesignKind) -> Self {
        let (port_count, port_diameter) = match kind {
            DesignKind::TopPorts => (2, 750e-6),
            DesignKind::SidePorts => (4, 750e-6),
            DesignKind::EndPorts => (2, 1000e-6),
        };
        Self {
            kind,
            length: 3.0e-3,
            width: 1.4e-3,
            height: 1.4e-3,
            port_count,
            port_diameter,
            internal_volume: 5e-9,
            cavity_volume: 3e-9,
            magnet: RobotMagnet::default(),
            body_density: DEFAULT_BODY_DENSITY,
            magnet_density: RobotMagnet::DEFAULT_DENSITY,
        }
    }

    pub fn validate(&self) -> Result<(), DesignError> {
        let positive = [
            ("length", self.length),
            ("width", self.width),
            ("height", self.height),
            ("port_diameter", self.port_diameter),
            ("internal_volume", self.internal_volume),
            ("cavity_volume", self.cavity_volume),
            ("body_density", self.body_density),
            ("magnet_density", self.magnet_density),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(DesignError::InvalidDesign(format!("{name} must be positive, got {v}")));
            }
        }
        if self.port_count == 0 {
            return Err(DesignError::InvalidDesign("port_count must be at least 1".into()));
        }
        if self.internal_volume >= self.body_volume() {
            return Err(DesignError::InvalidDesign("internal volume exceeds body volume".into()));
        }
        if self.cavity_volume + self.magnet.volume() > self.internal_volume {
            return Err(DesignError::InvalidDesign("cavity and magnet do not fit the internal volume".into()));
        }
        Ok(())
    }

    pub fn body_volume(&self) -> f64 {
        self.length * self.width * self.height
    }

    /// Solid resin volume: body envelope minus the hollow interior.
    pub fn shell_volume(&self) -> f64 {
        self.body_volume() - self.internal_volume
    }

    /// Wall thickness of a uniform shell whose interior equals `internal_volume`.
    pub fn wall_thickness(&self) -> f64 {
        let interior = |t: f64| (self.length - 2.0 * t) * (self.width - 2.0 * t) * (self.height - 2.0 * t);
        let (mut lo, mut hi) = (0.0, 0.5 * self.length.min(self.width).min(self.height));
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if interior(mid) > self.internal_volume {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Total open area of the cavity ports.
    pub fn port_area(&self) -> f64 {
        self.port_count as f64 * PI * 0.25 * self.port_diameter * self.port_diameter
    }

    /// Nominal contact area of the robot lying on its long face.
    pub fn contact_area(&self) -> f64 {
        self.length * self.width
    }

    /// Half of the tumbling cross-section diagonal.
    pub fn half_diagonal(&self) -> f64 {
        0.5 * self.length.hypot(self.height)
    }
}

/// Footprint advance per full field revolution: four edge pivots of an
/// `L × h` rectangle advance it by `2(L + h)`.
pub fn distance_per_revolution(design: &MicrorobotDesign) -> f64 {
    2.0 * (design.length + design.height)
}

/// Solution loaded into the drug cavity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PayloadSpec {
    pub solution_name: String,
    /// Solute concentration, kg/m³ (100 mg/mL = 100 kg/m³).
    pub concentration: f64,
    pub loaded_volume: f64,
    pub max_release_fraction: f64,
    #[serde(default = "default_solution_density")]
    pub solution_density: f64,
}

fn default_solution_density() -> f64 {
    WATER_DENSITY
}

impl PayloadSpec {
    /// Fully loaded BSA solution with the design's default terminal fraction.
    pub fn bsa(design: &MicrorobotDesign, concentration: f64) -> Self {
        Self {
            solution_name: "BSA".to_string(),
            concentration,
            loaded_volume: design.cavity_volume,
            max_release_fraction: design.kind.default_max_release(),
            solution_density: WATER_DENSITY,
        }
    }

    pub fn validate(&self, design: &MicrorobotDesign) -> Result<(), DesignError> {
        if !(self.loaded_volume > 0.0 && self.loaded_volume <= design.cavity_volume) {
            return Err(DesignError::InvalidPayload(format!(
                "loaded volume {} must lie in (0, {}]",
                self.loaded_volume, design.cavity_volume
            )));
        }
        if !(0.0..=1.0).contains(&self.max_release_fraction) {
            return Err(DesignError::InvalidPayload("max release fraction must lie in [0, 1]".into()));
        }
        if !(self.concentration >= 0.0 && self.solution_density >= 0.0) {
            return Err(DesignError::InvalidPayload("concentration and density must be non-negative".into()));
        }
        Ok(())
    }

    /// Mass of drug (solute) in the cavity.
    pub fn drug_mass(&self) -> f64 {
        self.concentration * self.loaded_volume
    }

    /// Mass of the whole solution, which is what the robot carries.
    pub fn solution_mass(&self) -> f64 {
        self.solution_density * self.loaded_volume
    }
}

/// Shell + magnet + payload solution.
pub fn robot_mass(design: &MicrorobotDesign, payload: Option<&PayloadSpec>) -> f64 {
    let shell = design.shell_volume() * design.body_density;
    let magnet = design.magnet.volume() * design.magnet_density;
    shell + magnet + payload.map_or(0.0, PayloadSpec::solution_mass)
}

/// Paraffin / mineral-oil seal over the cavity ports.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaxCap {
    pub oil_mass_fraction: f64,
    /// Melt onset of the formulation, °C.
    pub onset_temperature: f64,
    /// Per-cap shift of the onset (°C); negative for thin coats.
    #[serde(default)]
    pub onset_shift: f64,
    /// Time constant of integrity loss above onset, s.
    #[serde(default = "default_decay")]
    pub decay_time_constant: f64,
    pub integrity: f64,
}

fn default_decay() -> f64 {
    WaxCap::DEFAULT_DECAY
}

impl WaxCap {
    pub const DEFAULT_DECAY: f64 = 10.0;
    pub const BREACH_THRESHOLD: f64 = 0.5;
    pub const MAX_OIL_FRACTION: f64 = 0.8;

    pub fn new(oil_mass_fraction: f64, onset_temperature: f64) -> Result<Self, DesignError> {
        let cap = Self {
            oil_mass_fraction,
            onset_temperature,
            onset_shift: 0.0,
            decay_time_constant: Self::DEFAULT_DECAY,
            integrity: 1.0,
        };
        cap.validate()?;
        Ok(cap)
    }

    pub fn validate(&self) -> Result<(), DesignError> {
        if !(0.0..=Self::MAX_OIL_FRACTION).contains(&self.oil_mass_fraction) {
            return Err(DesignError::InvalidCap(format!(
                "oil mass fraction {} outside [0, 0.8]",
                self.oil_mass_fraction
            )));
        }
        if !(0.0..=1.0).contains(&self.integrity) {
            return Err(DesignError::InvalidCap("integrity must lie in [0, 1]".into()));
        }
        if !(self.decay_time_constant > 0.0) || !self.onset_temperature.is_finite() || !self.onset_shift.is_finite() {
            return Err(DesignError::InvalidCap("decay constant must be positive and temperatures finite".into()));
        }
        Ok(())
    }

    pub fn effective_onset(&self) -> f64 {
        self.onset_temperature + self.onset_shift
    }

    pub fn breached(&self) -> bool {
        self.integrity < Self::BREACH_THRESHOLD
    }
}
