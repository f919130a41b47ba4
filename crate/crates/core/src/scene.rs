//! Test environments: flat substrates, inclines and colon lumens.
//!
//! Scene files are JSON with SI values (temperatures in °C, the incline in
//! degrees). Loading fills defaults and validates every invariant; the
//! resolved scene serializes back to the same file shape.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::microrobot::{DesignKind, MicrorobotDesign};

/// Radius of the actuator workspace disk (75 mm diameter).
pub const WORKSPACE_RADIUS: f64 = 0.0375;
pub const MAX_INCLINE_DEG: f64 = 60.0;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("cannot read scene {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("scene parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("scene validation failed: {0}")]
    Validation(String),
    #[error("point projects outside the lumen centerline span")]
    OffCenterlineEnds,
    #[error("unknown bundled scene `{0}`")]
    UnknownScene(String),
}

impl From<serde_json::Error> for SceneError {
    fn from(e: serde_json::Error) -> Self {
        SceneError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SceneKind {
    FlatDry,
    FlatWet,
    Incline,
    Phantom,
    InVivo,
}

impl SceneKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SceneKind::FlatDry => "flat_dry",
            SceneKind::FlatWet => "flat_wet",
            SceneKind::Incline => "incline",
            SceneKind::Phantom => "phantom",
            SceneKind::InVivo => "in_vivo",
        }
    }

    pub fn needs_lumen(self) -> bool {
        matches!(self, SceneKind::Phantom | SceneKind::InVivo)
    }
}

impl fmt::Display for SceneKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fluid {
    Air,
    DiWater,
    Saline,
}

/// Slip factor versus actuation frequency, linearly interpolated and clamped
/// at the table ends.
#[derive(Debug, Clone, PartialEq)]
pub struct SlipTable {
    points: Vec<(f64, f64)>,
}

impl SlipTable {
    pub fn new(mut points: Vec<(f64, f64)>) -> Result<Self, SceneError> {
        if points.is_empty() {
            return Err(SceneError::Validation("slip table must have at least one entry".into()));
        }
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        for w in points.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(SceneError::Validation(format!("duplicate slip table frequency {}", w[0].0)));
            }
        }
        for &(f, s) in &points {
            if !(f >= 0.0 && f.is_finite()) {
                return Err(SceneError::Validation(format!("slip table frequency {f} must be non-negative")));
            }
            if !(0.0..=1.0).contains(&s) {
                return Err(SceneError::Validation(format!("slip factor {s} at {f} Hz outside [0, 1]")));
            }
        }
        Ok(Self { points })
    }

    pub fn constant(s: f64) -> Self {
        Self::new(vec![(2.0, s), (5.0, s)]).expect("constant slip within [0, 1]")
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn at(&self, freq: f64) -> f64 {
        let pts = &self.points;
        if freq <= pts[0].0 {
            return pts[0].1;
        }
        for w in pts.windows(2) {
            let ((f0, s0), (f1, s1)) = (w[0], w[1]);
            if freq <= f1 {
                return s0 + (s1 - s0) * (freq - f0) / (f1 - f0);
            }
        }
        pts[pts.len() - 1].1
    }

    pub fn is_frequency_independent(&self) -> bool {
        self.points.iter().all(|p| p.1 == self.points[0].1)
    }
}

impl Serialize for SlipTable {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let mut map = serializer.serialize_map(Some(self.points.len()))?;
        for (f, s) in &self.points {
            map.serialize_entry(&f.to_string(), s)?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for SlipTable {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = BTreeMap::<String, f64>::deserialize(deserializer)?;
        let mut points = Vec::with_capacity(raw.len());
        for (k, v) in raw {
            let f: f64 = k
                .trim()
                .parse()
                .map_err(|_| serde::de::Error::custom(format!("slip key `{k}` is not a frequency in Hz")))?;
            points.push((f, v));
        }
        SlipTable::new(points).map_err(serde::de::Error::custom)
    }
}

/// Per-environment locomotion calibration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocomotionParams {
    pub slip: SlipTable,
    pub mu: f64,
    pub adhesion_pa: f64,
    /// Amplitude of the zero-mean multiplicative slip noise applied per pivot.
    #[serde(default = "default_slip_noise")]
    pub slip_noise: f64,
}

fn default_slip_noise() -> f64 {
    LocomotionParams::DEFAULT_SLIP_NOISE
}

impl LocomotionParams {
    pub const DEFAULT_SLIP_NOISE: f64 = 0.05;

    pub fn validate(&self) -> Result<(), SceneError> {
        if !(self.mu >= 0.0 && self.mu.is_finite()) {
            return Err(SceneError::Validation(format!("mu = {} must be non-negative", self.mu)));
        }
        if !(self.adhesion_pa >= 0.0 && self.adhesion_pa.is_finite()) {
            return Err(SceneError::Validation(format!("adhesion_pa = {} must be non-negative", self.adhesion_pa)));
        }
        if !(0.0..=1.0).contains(&self.slip_noise) {
            return Err(SceneError::Validation("slip_noise must lie in [0, 1]".into()));
        }
        Ok(())
    }

    /// Dry printed-resin substrate in air.
    pub fn dry() -> Self {
        Self {
            slip: SlipTable::constant(0.85),
            mu: calibrated::DRY_MU,
            adhesion_pa: calibrated::DRY_ADHESION_PA,
            slip_noise: Self::DEFAULT_SLIP_NOISE,
        }
    }

    /// Gelatin substrate under DI water.
    pub fn wet() -> Self {
        Self {
            slip: SlipTable::constant(0.75),
            mu: calibrated::WET_MU,
            adhesion_pa: calibrated::WET_ADHESION_PA,
            slip_noise: Self::DEFAULT_SLIP_NOISE,
        }
    }

    /// Saline-filled gelatin colon phantom.
    pub fn phantom() -> Self {
        Self {
            slip: SlipTable::new(vec![(2.0, 0.70), (3.0, 0.70), (4.0, 0.70), (5.0, 0.70)]).unwrap(),
            ..Self::wet()
        }
    }

    /// Live colon: markedly slower at low frequency, close to the phantom at 5 Hz.
    pub fn in_vivo() -> Self {
        Self {
            slip: SlipTable::new(vec![(2.0, 0.35), (3.0, 0.40), (4.0, 0.45), (5.0, 0.68)]).unwrap(),
            ..Self::wet()
        }
    }

    pub fn without_noise(mut self) -> Self {
        self.slip_noise = 0.0;
        self
    }
}

/// Frozen output of `calibrate` against the default anchor set; a test in the
/// harness keeps these in sync.
pub mod calibrated {
    pub const DRY_MU: f64 = 0.335;
    pub const DRY_ADHESION_PA: f64 = 0.35;
    pub const WET_MU: f64 = 0.505;
    pub const WET_ADHESION_PA: f64 = 3.55;
}

/// Lumen centerline with a per-point radius.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LumenFile", into = "LumenFile")]
pub struct LumenProfile {
    centerline: Vec<Vector3<f64>>,
    radius: Vec<f64>,
    arc: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct LumenFile {
    centerline: Vec<[f64; 3]>,
    radius: Vec<f64>,
}

impl TryFrom<LumenFile> for LumenProfile {
    type Error = SceneError;

    fn try_from(f: LumenFile) -> Result<Self, Self::Error> {
        LumenProfile::new(f.centerline.into_iter().map(Vector3::from).collect(), f.radius)
    }
}

impl From<LumenProfile> for LumenFile {
    fn from(l: LumenProfile) -> Self {
        LumenFile {
            centerline: l.centerline.iter().map(|p| [p.x, p.y, p.z]).collect(),
            radius: l.radius,
        }
    }
}

/// Floor contact line of a lumen at one arc length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LumenFrame {
    pub center: Vector3<f64>,
    pub tangent: Vector3<f64>,
    /// Inward wall normal at the lowest point of the cross-section.
    pub normal: Vector3<f64>,
    pub radius: f64,
    pub floor: Vector3<f64>,
}

impl LumenProfile {
    pub fn new(centerline: Vec<Vector3<f64>>, radius: Vec<f64>) -> Result<Self, SceneError> {
        if centerline.len() < 2 {
            return Err(SceneError::Validation("lumen centerline needs at least 2 points".into()));
        }
        if radius.len() != centerline.len() {
            return Err(SceneError::Validation(format!(
                "lumen has {} centerline points but {} radii",
                centerline.len(),
                radius.len()
            )));
        }
        if let Some(r) = radius.iter().find(|r| !(**r > 0.0 && r.is_finite())) {
            return Err(SceneError::Validation(format!("lumen radius {r} must be positive")));
        }
        let mut arc = Vec::with_capacity(centerline.len());
        arc.push(0.0);
        for w in centerline.windows(2) {
            let seg = (w[1] - w[0]).norm();
            if !(seg > 0.0 && seg.is_finite()) {
                return Err(SceneError::Validation(
                    "lumen arc length must be strictly increasing (repeated centerline point)".into(),
                ));
            }
            arc.push(arc.last().unwrap() + seg);
        }
        Ok(Self { centerline, radius, arc })
    }

    /// Straight horizontal tube along +x, centered on the origin.
    pub fn straight(length: f64, radius: f64) -> Result<Self, SceneError> {
        Self::new(
            vec![Vector3::new(-0.5 * length, 0.0, 0.0), Vector3::new(0.5 * length, 0.0, 0.0)],
            vec![radius, radius],
        )
    }

    pub fn centerline(&self) -> &[Vector3<f64>] {
        &self.centerline
    }

    pub fn radii(&self) -> &[f64] {
        &self.radius
    }

    pub fn length(&self) -> f64 {
        *self.arc.last().unwrap()
    }

    pub fn min_radius(&self) -> f64 {
        self.radius.iter().copied().fold(f64::INFINITY, f64::min)
    }

    fn segment_at(&self, s: f64) -> usize {
        match self.arc.binary_search_by(|a| a.total_cmp(&s)) {
            Ok(i) => i.min(self.arc.len() - 2),
            Err(i) => i.saturating_sub(1).min(self.arc.len() - 2),
        }
    }

    /// Frame at arc length `s` (clamped to the centerline span).
    pub fn frame_at(&self, s: f64) -> LumenFrame {
        let s = s.clamp(0.0, self.length());
        let i = self.segment_at(s);
        let seg = self.arc[i + 1] - self.arc[i];
        let u = (s - self.arc[i]) / seg;
        let center = self.centerline[i] + (self.centerline[i + 1] - self.centerline[i]) * u;
        let radius = self.radius[i] + (self.radius[i + 1] - self.radius[i]) * u;
        let tangent = (self.centerline[i + 1] - self.centerline[i]) / seg;
        let normal = floor_normal(&tangent);
        LumenFrame {
            center,
            tangent,
            normal,
            radius,
            floor: center - normal * radius,
        }
    }

    /// Closest centerline arc length to `p` and the squared distance to it.
    pub fn project(&self, p: &Vector3<f64>) -> Result<f64, SceneError> {
        let mut best = (f64::INFINITY, 0.0);
        let n = self.centerline.len();
        for i in 0..n - 1 {
            let a = self.centerline[i];
            let d = self.centerline[i + 1] - a;
            let seg = self.arc[i + 1] - self.arc[i];
            let u = (p - a).dot(&d) / (seg * seg);
            if (i == 0 && u < -1e-12) || (i == n - 2 && u > 1.0 + 1e-12) {
                // Beyond an open end; only an error if no interior segment is closer.
                let q = a + d * u.clamp(0.0, 1.0);
                let dist = (p - q).norm_squared();
                if dist < best.0 {
                    best = (dist, f64::NAN);
                }
                continue;
            }
            let u = u.clamp(0.0, 1.0);
            let q = a + d * u;
            let dist = (p - q).norm_squared();
            if dist < best.0 {
                best = (dist, self.arc[i] + u * seg);
            }
        }
        if best.1.is_nan() {
            Err(SceneError::OffCenterlineEnds)
        } else {
            Ok(best.1)
        }
    }
}

/// Unit vector of "up" with the tangent component removed.
fn floor_normal(tangent: &Vector3<f64>) -> Vector3<f64> {
    let up = Vector3::z();
    let n = up - tangent * tangent.dot(&up);
    if n.norm() < 1e-12 {
        // Vertical lumen: no floor, fall back to an arbitrary horizontal normal.
        Vector3::x()
    } else {
        n.normalize()
    }
}

/// Settles a contact point onto the lumen floor at its arc position.
///
/// `position` is the robot's lowest point; the returned point lies on the wall
/// at the bottom of the same cross-section, with the inward wall normal.
pub fn constrain_to_lumen(position: &Vector3<f64>, lumen: &LumenProfile) -> Result<(Vector3<f64>, Vector3<f64>), SceneError> {
    let s = lumen.project(position)?;
    let frame = lumen.frame_at(s);
    Ok((frame.floor, frame.normal))
}

/// Inclined plane through the origin, rising along +x.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneSurface {
    pub angle: f64,
    pub normal: Vector3<f64>,
    pub uphill: Vector3<f64>,
}

pub fn incline_surface(angle: f64) -> Result<PlaneSurface, SceneError> {
    if !(0.0..=MAX_INCLINE_DEG.to_radians() + 1e-12).contains(&angle) {
        return Err(SceneError::Validation(format!(
            "incline angle {:.3}° outside [0°, {MAX_INCLINE_DEG}°]",
            angle.to_degrees()
        )));
    }
    let (s, c) = angle.sin_cos();
    Ok(PlaneSurface {
        angle,
        normal: Vector3::new(-s, 0.0, c),
        uphill: Vector3::new(c, 0.0, s),
    })
}

/// A fully resolved test environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SceneFile", into = "SceneFile")]
pub struct Scene {
    pub kind: SceneKind,
    pub incline_angle_deg: f64,
    pub lumen: Option<LumenProfile>,
    pub fluid: Fluid,
    pub temperature_ambient_c: f64,
    pub locomotion_params: LocomotionParams,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneFile {
    kind: SceneKind,
    #[serde(default)]
    incline_angle_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lumen: Option<LumenProfile>,
    #[serde(default)]
    fluid: Option<Fluid>,
    #[serde(default)]
    temperature_ambient_c: Option<f64>,
    #[serde(default)]
    locomotion_params: Option<LocomotionParams>,
}

impl TryFrom<SceneFile> for Scene {
    type Error = SceneError;

    fn try_from(f: SceneFile) -> Result<Self, Self::Error> {
        let (fluid, temp, params) = match f.kind {
            SceneKind::FlatDry => (Fluid::Air, 20.0, LocomotionParams::dry()),
            SceneKind::FlatWet => (Fluid::DiWater, 20.0, LocomotionParams::wet()),
            SceneKind::Incline => match f.fluid {
                Some(Fluid::Air) => (Fluid::Air, 20.0, LocomotionParams::dry()),
                _ => (Fluid::DiWater, 20.0, LocomotionParams::wet()),
            },
            SceneKind::Phantom => (Fluid::Saline, 36.0, LocomotionParams::phantom()),
            SceneKind::InVivo => (Fluid::Saline, 37.0, LocomotionParams::in_vivo()),
        };
        let scene = Scene {
            kind: f.kind,
            incline_angle_deg: f.incline_angle_deg.unwrap_or(0.0),
            lumen: f.lumen,
            fluid: f.fluid.unwrap_or(fluid),
            temperature_ambient_c: f.temperature_ambient_c.unwrap_or(temp),
            locomotion_params: f.locomotion_params.unwrap_or(params),
        };
        scene.validate()?;
        Ok(scene)
    }
}

impl From<Scene> for SceneFile {
    fn from(s: Scene) -> Self {
        SceneFile {
            kind: s.kind,
            incline_angle_deg: Some(s.incline_angle_deg),
            lumen: s.lumen,
            fluid: Some(s.fluid),
            temperature_ambient_c: Some(s.temperature_ambient_c),
            locomotion_params: Some(s.locomotion_params),
        }
    }
}

/// Where the robot's current pivot edge rests.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Anchor {
    Plane([f64; 3]),
    Lumen { arc: f64 },
}

/// Local contact frame: the pivot edge point, the surface normal and the
/// forward direction of travel within the surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceFrame {
    pub origin: Vector3<f64>,
    pub normal: Vector3<f64>,
    pub forward: Vector3<f64>,
}

impl SurfaceFrame {
    /// Width axis; positive rotation about it tips the robot forward.
    pub fn axis(&self) -> Vector3<f64> {
        self.normal.cross(&self.forward)
    }
}

impl Scene {
    pub fn flat(kind: SceneKind) -> Self {
        assert!(matches!(kind, SceneKind::FlatDry | SceneKind::FlatWet));
        SceneFile {
            kind,
            incline_angle_deg: None,
            lumen: None,
            fluid: None,
            temperature_ambient_c: None,
            locomotion_params: None,
        }
        .try_into()
        .expect("default flat scene is valid")
    }

    pub fn incline(angle_deg: f64, fluid: Fluid, params: LocomotionParams) -> Result<Self, SceneError> {
        let scene = Scene {
            kind: SceneKind::Incline,
            incline_angle_deg: angle_deg,
            lumen: None,
            fluid,
            temperature_ambient_c: 20.0,
            locomotion_params: params,
        };
        scene.validate()?;
        Ok(scene)
    }

    /// Same environment with a different incline angle.
    pub fn with_incline(&self, angle_deg: f64) -> Result<Self, SceneError> {
        Self::incline(angle_deg, self.fluid, self.locomotion_params.clone())
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        if !(0.0..=MAX_INCLINE_DEG).contains(&self.incline_angle_deg) {
            return Err(SceneError::Validation(format!(
                "incline_angle_deg = {} outside [0, {MAX_INCLINE_DEG}]",
                self.incline_angle_deg
            )));
        }
        if self.kind != SceneKind::Incline && self.incline_angle_deg != 0.0 {
            return Err(SceneError::Validation(format!(
                "incline_angle_deg is only allowed for incline scenes, got {} for {}",
                self.incline_angle_deg, self.kind
            )));
        }
        match (&self.lumen, self.kind.needs_lumen()) {
            (None, true) => {
                return Err(SceneError::Validation(format!("{} scenes require a lumen", self.kind)));
            }
            (Some(_), false) => {
                return Err(SceneError::Validation(format!("{} scenes must not define a lumen", self.kind)));
            }
            _ => {}
        }
        if !self.temperature_ambient_c.is_finite() {
            return Err(SceneError::Validation("temperature_ambient_c must be finite".into()));
        }
        self.locomotion_params.validate()?;
        self.validate_for(&MicrorobotDesign::stock(DesignKind::TopPorts))
    }

    /// Checks that the robot fits every lumen cross-section.
    pub fn validate_for(&self, design: &MicrorobotDesign) -> Result<(), SceneError> {
        if let Some(lumen) = &self.lumen {
            if lumen.min_radius() <= design.half_diagonal() {
                return Err(SceneError::Validation(format!(
                    "lumen radius {:.3e} m does not exceed the robot half-diagonal {:.3e} m",
                    lumen.min_radius(),
                    design.half_diagonal()
                )));
            }
        }
        Ok(())
    }

    pub fn incline_angle(&self) -> f64 {
        self.incline_angle_deg.to_radians()
    }

    fn plane(&self) -> PlaneSurface {
        incline_surface(self.incline_angle()).expect("validated incline")
    }

    /// Where a robot starts a trial: `offset` metres before the origin along
    /// the heading on planes, or `offset` metres into the lumen.
    pub fn start_anchor(&self, heading: f64, offset: f64) -> Anchor {
        match &self.lumen {
            Some(_) => Anchor::Lumen { arc: offset },
            None => {
                let frame = self.frame(&Anchor::Plane([0.0; 3]), heading);
                let p = frame.forward * -offset;
                Anchor::Plane([p.x, p.y, p.z])
            }
        }
    }

    /// Contact frame at an anchor for a world heading.
    pub fn frame(&self, anchor: &Anchor, heading: f64) -> SurfaceFrame {
        let dir = Vector3::new(heading.cos(), heading.sin(), 0.0);
        match (anchor, &self.lumen) {
            (Anchor::Lumen { arc }, Some(lumen)) => {
                let f = lumen.frame_at(*arc);
                let sign = if dir.dot(&f.tangent) < 0.0 { -1.0 } else { 1.0 };
                SurfaceFrame {
                    origin: f.floor,
                    normal: f.normal,
                    forward: f.tangent * sign,
                }
            }
            (Anchor::Plane(p), _) => {
                let plane = self.plane();
                let fwd = dir - plane.normal * dir.dot(&plane.normal);
                SurfaceFrame {
                    origin: Vector3::from(*p),
                    normal: plane.normal,
                    forward: fwd.normalize(),
                }
            }
            (Anchor::Lumen { .. }, None) => {
                // Lumen anchor in a plane scene: treat as the origin.
                self.frame(&Anchor::Plane([0.0; 3]), heading)
            }
        }
    }

    /// Moves an anchor `distance` metres along the heading. In a lumen the
    /// advance is the heading's projection on the centerline, clamped to the
    /// lumen ends.
    pub fn advance(&self, anchor: &Anchor, heading: f64, distance: f64) -> Anchor {
        match (anchor, &self.lumen) {
            (Anchor::Lumen { arc }, Some(lumen)) => {
                let f = lumen.frame_at(*arc);
                let dir = Vector3::new(heading.cos(), heading.sin(), 0.0);
                let along = dir.dot(&f.tangent);
                let horizontal = (f.tangent - Vector3::z() * f.tangent.z).norm();
                let proj = if horizontal > 1e-12 { along / horizontal } else { 1.0 };
                Anchor::Lumen {
                    arc: (arc + distance * proj).clamp(0.0, lumen.length()),
                }
            }
            _ => {
                let frame = self.frame(anchor, heading);
                let p = frame.origin + frame.forward * distance;
                Anchor::Plane([p.x, p.y, p.z])
            }
        }
    }

    /// Arc-length coordinate of a point: centerline position in a lumen,
    /// otherwise the signed distance from the origin along `heading`.
    pub fn arc_length(&self, anchor: &Anchor, heading: f64) -> f64 {
        match anchor {
            Anchor::Lumen { arc } => *arc,
            Anchor::Plane(p) => {
                let frame = self.frame(anchor, heading);
                Vector3::from(*p).dot(&frame.forward)
            }
        }
    }

    /// Slope of the surface along the direction of travel (positive uphill).
    pub fn slope_along(&self, frame: &SurfaceFrame) -> f64 {
        frame.forward.z.clamp(-1.0, 1.0).asin()
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("scene serializes")
    }
}

pub fn parse_scene(text: &str) -> Result<Scene, SceneError> {
    if text.trim().is_empty() {
        return Err(SceneError::Parse {
            line: 1,
            column: 0,
            message: "empty scene file".into(),
        });
    }
    let mut de = serde_json::Deserializer::from_str(text);
    match Scene::deserialize(&mut de).and_then(|s| de.end().map(|_| s)) {
        Ok(s) => Ok(s),
        Err(e) if e.is_data() && e.to_string().contains("validation failed") => {
            Err(SceneError::Validation(strip_position(&e.to_string())))
        }
        Err(e) => Err(e.into()),
    }
}

fn strip_position(msg: &str) -> String {
    let msg = msg.strip_prefix("scene validation failed: ").unwrap_or(msg);
    match msg.rfind(" at line ") {
        Some(i) => msg[..i].to_string(),
        None => msg.to_string(),
    }
}

/// Loads a scene from a path, or from the bundled fixtures when `path` names
/// one (with or without the `.json` suffix).
pub fn load_scene(path: impl AsRef<Path>) -> Result<Scene, SceneError> {
    let path = path.as_ref();
    if !path.exists() {
        if let Some(text) = bundled_scene_text(&path.to_string_lossy()) {
            return parse_scene(text);
        }
    }
    let text = std::fs::read_to_string(path).map_err(|source| SceneError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_scene(&text)
}

const BUNDLED: &[(&str, &str)] = &[
    ("flat_dry", include_str!("../scenes/flat_dry.json")),
    ("flat_wet", include_str!("../scenes/flat_wet.json")),
    ("incline_20", include_str!("../scenes/incline_20.json")),
    ("incline_50", include_str!("../scenes/incline_50.json")),
    ("phantom_rat", include_str!("../scenes/phantom_rat.json")),
    ("invivo_rat", include_str!("../scenes/invivo_rat.json")),
];

pub fn bundled_scene_names() -> Vec<&'static str> {
    BUNDLED.iter().map(|(n, _)| *n).collect()
}

fn bundled_scene_text(name: &str) -> Option<&'static str> {
    let name = name.strip_suffix(".json").unwrap_or(name);
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

pub fn bundled_scene(name: &str) -> Result<Scene, SceneError> {
    let text = bundled_scene_text(name).ok_or_else(|| SceneError::UnknownScene(name.to_string()))?;
    parse_scene(text)
}
