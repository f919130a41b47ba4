//! Experiment runners, calibration and artifact output behind `mutum-sim`.

mod calibrate;
mod runners;

pub use calibrate::{
    calibrate, Anchors, CalibrationResult, InclineAnchor, InclineFit, ThermalAnchors, ThermalFit, TimeTemperature,
    PeakAnchor,
};
pub use runners::{
    run_design_comparison, run_experiment, run_fus_phantom, run_incline_ladder, run_melt_curve_sweep,
    run_release_schedule, run_velocity_sweep, DesignReleaseRow, FusReplicate, FusSummary, LadderRow, RunOutput,
    VelocityRow,
};

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::locomotion::LocomotionError;
use crate::microrobot::{DesignError, DesignKind};
use crate::scene::SceneError;
use crate::thermics::ThermicsError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_CALIBRATION_INFEASIBLE: i32 = 3;

/// Frequencies the locomotion protocols use.
pub const PROTOCOL_FREQUENCIES: [f64; 4] = [2.0, 3.0, 4.0, 5.0];

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Validation(String),
    #[error("calibration infeasible; violated anchors: {}", .violated.join(", "))]
    CalibrationInfeasible { violated: Vec<String> },
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Locomotion(#[from] LocomotionError),
    #[error(transparent)]
    Thermics(#[from] ThermicsError),
    #[error(transparent)]
    Design(#[from] DesignError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Validation(_)
            | HarnessError::Scene(_)
            | HarnessError::Design(_)
            | HarnessError::Json { .. }
            | HarnessError::Thermics(ThermicsError::OutOfDomain { .. } | ThermicsError::InvalidCurve(_)) => {
                EXIT_VALIDATION
            }
            HarnessError::Locomotion(LocomotionError::InvalidTimestep(_) | LocomotionError::Actuator(_)) => {
                EXIT_VALIDATION
            }
            HarnessError::CalibrationInfeasible { .. } => EXIT_CALIBRATION_INFEASIBLE,
            _ => EXIT_FAILURE,
        }
    }

    fn io(path: &Path, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    VelocitySweep,
    InclineLadder,
    MeltCurveSweep,
    ReleaseSchedule,
    FusPhantom,
    DesignComparison,
}

impl Experiment {
    pub const ALL: [Experiment; 6] = [
        Experiment::VelocitySweep,
        Experiment::InclineLadder,
        Experiment::MeltCurveSweep,
        Experiment::ReleaseSchedule,
        Experiment::FusPhantom,
        Experiment::DesignComparison,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Experiment::VelocitySweep => "velocity-sweep",
            Experiment::InclineLadder => "incline-ladder",
            Experiment::MeltCurveSweep => "melt-curve-sweep",
            Experiment::ReleaseSchedule => "release-schedule",
            Experiment::FusPhantom => "fus-phantom",
            Experiment::DesignComparison => "design-comparison",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Experiment {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|e| e.as_str() == s)
            .ok_or_else(|| HarnessError::Validation(format!("unknown experiment '{s}'")))
    }
}

/// Whether the robots carry their payload during locomotion runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PayloadMode {
    #[default]
    Empty,
    Filled,
    Both,
}

impl PayloadMode {
    pub fn variants(self) -> &'static [bool] {
        match self {
            PayloadMode::Empty => &[false],
            PayloadMode::Filled => &[true],
            PayloadMode::Both => &[false, true],
        }
    }
}

impl FromStr for PayloadMode {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "empty" => Ok(PayloadMode::Empty),
            "filled" => Ok(PayloadMode::Filled),
            "both" => Ok(PayloadMode::Both),
            _ => Err(HarnessError::Validation(format!("payload must be empty, filled or both, got '{s}'"))),
        }
    }
}

/// One harness run. Unset optional fields take per-experiment defaults,
/// which are written back into the `config.json` sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    /// Scene file path or bundled scene name.
    pub scene: Option<String>,
    pub designs: Vec<DesignKind>,
    pub frequencies: Vec<f64>,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub payload: PayloadMode,
    /// Overrides the terminal release fraction of the loaded formulation.
    pub max_release: Option<f64>,
}

impl ExperimentConfig {
    pub fn new(experiment: Experiment, output_dir: impl Into<PathBuf>) -> Self {
        Self {
            experiment,
            scene: None,
            designs: match experiment {
                Experiment::ReleaseSchedule | Experiment::FusPhantom | Experiment::MeltCurveSweep => {
                    vec![DesignKind::TopPorts]
                }
                _ => DesignKind::ALL.to_vec(),
            },
            frequencies: PROTOCOL_FREQUENCIES.to_vec(),
            seed: 0,
            output_dir: output_dir.into(),
            payload: PayloadMode::Empty,
            max_release: None,
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.designs.is_empty() {
            return Err(HarnessError::Validation("at least one design is required".into()));
        }
        if self.frequencies.is_empty() {
            return Err(HarnessError::Validation("at least one frequency is required".into()));
        }
        for f in &self.frequencies {
            if !PROTOCOL_FREQUENCIES.contains(f) {
                return Err(HarnessError::Validation(format!("frequency {f} Hz is not one of 2, 3, 4, 5")));
            }
        }
        if let Some(m) = self.max_release {
            if !(0.0..=1.0).contains(&m) {
                return Err(HarnessError::Validation(format!("max release {m} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Parses `2,3,5` style lists.
pub fn parse_frequencies(s: &str) -> Result<Vec<f64>, HarnessError> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| HarnessError::Validation(format!("bad frequency '{p}'")))
        })
        .collect()
}

/// Parses `tp,sp,ep` (or `all`).
pub fn parse_designs(s: &str) -> Result<Vec<DesignKind>, HarnessError> {
    if s == "all" {
        return Ok(DesignKind::ALL.to_vec());
    }
    s.split(',')
        .map(|p| p.trim().parse::<DesignKind>().map_err(HarnessError::from))
        .collect()
}

fn write_file(path: &Path, contents: &str) -> Result<(), HarnessError> {
    fs::write(path, contents).map_err(|e| HarnessError::io(path, e))
}

impl RunOutput {
    /// Writes every CSV, `summary.json` and the `config.json` sidecar into
    /// `dir`, returning the paths written.
    pub fn write_to(&self, dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
        fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
        let mut written = Vec::new();
        for (name, contents) in &self.files {
            let path = dir.join(name);
            write_file(&path, contents)?;
            written.push(path);
        }
        for (name, value) in [("summary.json", &self.summary), ("config.json", &self.config)] {
            let path = dir.join(name);
            let mut text = serde_json::to_string_pretty(value).expect("json values serialize");
            text.push('\n');
            write_file(&path, &text)?;
            written.push(path);
        }
        Ok(written)
    }
}
