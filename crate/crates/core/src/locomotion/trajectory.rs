use std::io::{self, Write};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::{LocomotionError, RobotState};

pub const TRAJECTORY_CSV_HEADER: &str = "t,x,y,z,qw,qx,qy,qz,phase,synchronized";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub state: RobotState,
}

/// Fixed-rate record of a robot's states. Sample `i` is at `t0 + i·dt`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub dt: f64,
    pub t0: f64,
    pub samples: Vec<TrajectorySample>,
}

impl Trajectory {
    pub fn new(dt: f64, t0: f64) -> Self {
        Self {
            dt,
            t0,
            samples: Vec::new(),
        }
    }

    pub fn push(&mut self, state: RobotState) {
        let t = self.t0 + self.samples.len() as f64 * self.dt;
        self.samples.push(TrajectorySample { t, state });
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn first(&self) -> Option<&RobotState> {
        self.samples.first().map(|s| &s.state)
    }

    pub fn last(&self) -> Option<&RobotState> {
        self.samples.last().map(|s| &s.state)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{TRAJECTORY_CSV_HEADER}")?;
        for s in &self.samples {
            let p = &s.state.position;
            let q = s.state.orientation.quaternion();
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                s.t,
                p.x,
                p.y,
                p.z,
                q.w,
                q.i,
                q.j,
                q.k,
                s.state.tumble_phase,
                u8::from(s.state.synchronized)
            )?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }
}

/// Net horizontal displacement along the initial heading over elapsed time.
pub fn average_velocity(traj: &Trajectory) -> Result<f64, LocomotionError> {
    if traj.samples.len() < 2 {
        return Err(LocomotionError::TooFewSamples);
    }
    let first = &traj.samples[0];
    let last = &traj.samples[traj.samples.len() - 1];
    let heading = Vector3::new(first.state.heading.cos(), first.state.heading.sin(), 0.0);
    let mut d = last.state.position - first.state.position;
    d.z = 0.0;
    Ok(d.dot(&heading) / (last.t - first.t))
}
