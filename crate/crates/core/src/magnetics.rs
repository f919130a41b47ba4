//! Magnetic field models and the force/torque laws acting on the robot magnet.
//!
//! Conventions: SI units throughout. `FieldSample::grad` stores the Jacobian
//! `grad[(i, j)] = dB_i / dx_j`.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Vacuum permeability, T·m/A.
pub const MU_0: f64 = 4.0e-7 * PI;

/// Closest approach to a point dipole that [`dipole_field`] accepts.
pub const MIN_DIPOLE_DISTANCE: f64 = 1e-4;

/// Lower bound of the actuator's field magnitude at the workspace center (T).
pub const MIN_WORKSPACE_FIELD: f64 = 0.010;
/// Upper bound of the actuator's field magnitude at the workspace center (T).
pub const MAX_WORKSPACE_FIELD: f64 = 0.030;
/// Highest rotation frequency the actuator supports (Hz).
pub const MAX_ROTATION_FREQUENCY: f64 = 5.0;

/// Default stand-off between the actuator magnet and the workspace center (m).
pub const DEFAULT_STANDOFF: f64 = 0.0553;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MagneticsError {
    #[error("field point is {distance:.3e} m from the dipole, closer than {MIN_DIPOLE_DISTANCE:e} m")]
    SingularPoint { distance: f64 },
    #[error("invalid dipole source: {0}")]
    InvalidSource(&'static str),
    #[error("invalid actuator state: {0}")]
    InvalidActuator(&'static str),
    #[error("invalid robot magnet: {0}")]
    InvalidMagnet(&'static str),
}

/// Flux density and its spatial Jacobian at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldSample {
    pub b: Vector3<f64>,
    pub grad: Matrix3<f64>,
}

impl FieldSample {
    pub fn uniform(b: Vector3<f64>) -> Self {
        Self {
            b,
            grad: Matrix3::zeros(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.b.iter().all(|v| v.is_finite()) && self.grad.iter().all(|v| v.is_finite())
    }
}

/// A point magnetic dipole.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DipoleSource {
    pub moment_magnitude: f64,
    pub moment_direction: Vector3<f64>,
    pub position: Vector3<f64>,
}

impl DipoleSource {
    pub fn new(
        moment_magnitude: f64,
        moment_direction: Vector3<f64>,
        position: Vector3<f64>,
    ) -> Result<Self, MagneticsError> {
        if !(moment_magnitude > 0.0 && moment_magnitude.is_finite()) {
            return Err(MagneticsError::InvalidSource("moment magnitude must be positive"));
        }
        let norm = moment_direction.norm();
        if !norm.is_finite() || norm == 0.0 {
            return Err(MagneticsError::InvalidSource("moment direction must be non-zero"));
        }
        Ok(Self {
            moment_magnitude,
            moment_direction: moment_direction / norm,
            position,
        })
    }

    /// Builds a source from a full moment vector.
    pub fn from_moment(moment: Vector3<f64>, position: Vector3<f64>) -> Result<Self, MagneticsError> {
        Self::new(moment.norm(), moment, position)
    }

    pub fn moment(&self) -> Vector3<f64> {
        self.moment_direction * self.moment_magnitude
    }
}

/// Field and field gradient of a point dipole.
///
/// `B = μ0/4π · (3 r̂ (m·r̂) − m) / r³`, and the Jacobian
/// `∂B_i/∂x_j = 3μ0/(4π r⁵) · (m_i r_j + m_j r_i + (m·r) δ_ij − 5 (m·r) r_i r_j / r²)`,
/// which is symmetric and traceless by construction.
pub fn dipole_field(source: &DipoleSource, point: &Vector3<f64>) -> Result<FieldSample, MagneticsError> {
    let r = point - source.position;
    let dist = r.norm();
    if !(dist >= MIN_DIPOLE_DISTANCE) {
        return Err(MagneticsError::SingularPoint { distance: dist });
    }
    let m = source.moment();
    let k = MU_0 / (4.0 * PI);
    let r2 = dist * dist;
    let r3 = r2 * dist;
    let r5 = r3 * r2;
    let m_dot_r = m.dot(&r);

    let b = k * (3.0 * r * m_dot_r / r2 - m) / r3;

    let mut grad = m * r.transpose() + r * m.transpose() - (5.0 * m_dot_r / r2) * (r * r.transpose());
    for i in 0..3 {
        grad[(i, i)] += m_dot_r;
    }
    grad *= 3.0 * k / r5;

    Ok(FieldSample { b, grad })
}

/// `T = m × B`.
pub fn magnetic_torque(robot_moment: &Vector3<f64>, b: &Vector3<f64>) -> Vector3<f64> {
    robot_moment.cross(b)
}

/// `F = (m·∇) B`, i.e. `F_i = Σ_j m_j ∂B_i/∂x_j`.
pub fn magnetic_force(robot_moment: &Vector3<f64>, grad: &Matrix3<f64>) -> Vector3<f64> {
    grad * robot_moment
}

/// Cubic permanent magnet embedded in the robot body.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RobotMagnetRepr", into = "RobotMagnetRepr")]
pub struct RobotMagnet {
    pub edge_length: f64,
    pub remanence: f64,
    /// Direction of magnetization in the robot frame (x length, y width, z height).
    pub moment_direction_body: Vector3<f64>,
    moment: f64,
}

#[derive(Serialize, Deserialize)]
struct RobotMagnetRepr {
    edge_length: f64,
    remanence: f64,
    moment_direction_body: Vector3<f64>,
}

impl TryFrom<RobotMagnetRepr> for RobotMagnet {
    type Error = MagneticsError;

    fn try_from(r: RobotMagnetRepr) -> Result<Self, Self::Error> {
        RobotMagnet::new(r.edge_length, r.remanence, r.moment_direction_body)
    }
}

impl From<RobotMagnet> for RobotMagnetRepr {
    fn from(m: RobotMagnet) -> Self {
        Self {
            edge_length: m.edge_length,
            remanence: m.remanence,
            moment_direction_body: m.moment_direction_body,
        }
    }
}

impl RobotMagnet {
    pub const DEFAULT_EDGE: f64 = 500e-6;
    pub const DEFAULT_REMANENCE: f64 = 1.3;
    pub const DEFAULT_DENSITY: f64 = 7500.0;

    pub fn new(edge_length: f64, remanence: f64, moment_direction_body: Vector3<f64>) -> Result<Self, MagneticsError> {
        if !(edge_length > 0.0 && edge_length.is_finite()) {
            return Err(MagneticsError::InvalidMagnet("edge length must be positive"));
        }
        if !(remanence > 0.0 && remanence.is_finite()) {
            return Err(MagneticsError::InvalidMagnet("remanence must be positive"));
        }
        let norm = moment_direction_body.norm();
        if !norm.is_finite() || norm == 0.0 {
            return Err(MagneticsError::InvalidMagnet("moment direction must be non-zero"));
        }
        Ok(Self {
            edge_length,
            remanence,
            moment_direction_body: moment_direction_body / norm,
            moment: remanence * edge_length.powi(3) / MU_0,
        })
    }

    /// Moment magnitude `Br·V/μ0` in A·m².
    pub fn moment(&self) -> f64 {
        self.moment
    }

    pub fn volume(&self) -> f64 {
        self.edge_length.powi(3)
    }
}

impl Default for RobotMagnet {
    fn default() -> Self {
        Self::new(Self::DEFAULT_EDGE, Self::DEFAULT_REMANENCE, Vector3::z())
            .expect("default magnet is valid")
    }
}

/// Configuration of the rotating-field actuator.
///
/// At phase 0 the field points along +z; it then rotates toward the in-plane
/// heading direction, so a quarter turn later it lies along the heading.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActuatorState {
    pub rotation_frequency: f64,
    pub heading: f64,
    pub phase: f64,
    pub field_magnitude_at_workspace: f64,
}

impl Default for ActuatorState {
    fn default() -> Self {
        Self {
            rotation_frequency: 0.0,
            heading: 0.0,
            phase: 0.0,
            field_magnitude_at_workspace: 0.020,
        }
    }
}

impl ActuatorState {
    pub fn validate(&self) -> Result<(), MagneticsError> {
        if !(0.0..=MAX_ROTATION_FREQUENCY).contains(&self.rotation_frequency) {
            return Err(MagneticsError::InvalidActuator("rotation frequency must lie in [0, 5] Hz"));
        }
        if !(MIN_WORKSPACE_FIELD..=MAX_WORKSPACE_FIELD).contains(&self.field_magnitude_at_workspace) {
            return Err(MagneticsError::InvalidActuator("workspace field must lie in [10, 30] mT"));
        }
        if !self.heading.is_finite() || !self.phase.is_finite() {
            return Err(MagneticsError::InvalidActuator("heading and phase must be finite"));
        }
        Ok(())
    }

    /// Unit vector of the in-plane heading.
    pub fn heading_direction(&self) -> Vector3<f64> {
        Vector3::new(self.heading.cos(), self.heading.sin(), 0.0)
    }

    /// Field angle, measured from +z toward the heading, at time `t`.
    pub fn field_angle(&self, t: f64) -> f64 {
        self.phase + 2.0 * PI * self.rotation_frequency * t
    }

    /// Direction of the rotating field at time `t`.
    pub fn field_direction(&self, t: f64) -> Vector3<f64> {
        let angle = self.field_angle(t);
        Vector3::z() * angle.cos() + self.heading_direction() * angle.sin()
    }
}

/// Rotating permanent-magnet actuator modelled as a point dipole above the
/// workspace center.
///
/// At each instant the dipole moment is chosen so that the field at the
/// workspace center equals the commanded rotating field; the gradient that
/// comes with it is what the optional magnetic-force term sees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotatingActuator {
    /// Dipole position relative to the workspace center.
    pub offset: Vector3<f64>,
}

impl Default for RotatingActuator {
    fn default() -> Self {
        Self {
            offset: Vector3::new(0.0, 0.0, DEFAULT_STANDOFF),
        }
    }
}

impl RotatingActuator {
    pub fn with_standoff(standoff: f64) -> Self {
        Self {
            offset: Vector3::new(0.0, 0.0, standoff),
        }
    }

    /// Dipole moment producing `b` at the workspace center.
    ///
    /// The dipole operator `k(3 r̂r̂ᵀ − I)` has eigenvalues `2k` along `r̂` and
    /// `−k` across it, so its inverse is applied component-wise.
    pub fn moment_for_field(&self, b: &Vector3<f64>) -> Vector3<f64> {
        let r = -self.offset;
        let dist = r.norm();
        let r_hat = r / dist;
        let k = MU_0 / (4.0 * PI * dist.powi(3));
        let along = r_hat * r_hat.dot(b);
        let across = b - along;
        along / (2.0 * k) - across / k
    }

    /// Equivalent dipole source for a given workspace field.
    pub fn source_for_field(&self, b: &Vector3<f64>) -> Result<DipoleSource, MagneticsError> {
        DipoleSource::from_moment(self.moment_for_field(b), self.offset)
    }
}

/// Field sample at the workspace center produced by the actuator at time `t`.
pub fn actuator_field(state: &ActuatorState, t: f64) -> FieldSample {
    actuator_field_with(&RotatingActuator::default(), state, t)
}

pub fn actuator_field_with(actuator: &RotatingActuator, state: &ActuatorState, t: f64) -> FieldSample {
    let b = state.field_direction(t) * state.field_magnitude_at_workspace;
    let grad = actuator
        .source_for_field(&b)
        .and_then(|src| dipole_field(&src, &Vector3::zeros()))
        .map(|s| s.grad)
        .unwrap_or_else(|_| Matrix3::zeros());
    FieldSample { b, grad }
}
