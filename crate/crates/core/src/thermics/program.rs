use serde::{Deserialize, Serialize};

use super::{sample_supernatant, PayloadState, ThermicsError};

/// Water-bed heating rate between set points, °C/s (1 °C/min).
pub const DEFAULT_RAMP_RATE: f64 = 1.0 / 60.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ProgramSegment {
    /// Hold the bath, sampling every `sample_every` seconds if set.
    Hold {
        temperature: f64,
        duration: f64,
        #[serde(default)]
        sample_every: Option<f64>,
    },
    Ramp { to: f64, rate: f64 },
    Sample,
}

/// Bath temperature schedule with supernatant sampling points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemperatureProgram {
    pub start_temperature: f64,
    pub segments: Vec<ProgramSegment>,
}

impl TemperatureProgram {
    pub fn validate(&self) -> Result<(), ThermicsError> {
        let mut current = self.start_temperature;
        for seg in &self.segments {
            match *seg {
                ProgramSegment::Hold {
                    temperature,
                    duration,
                    sample_every,
                } => {
                    if temperature != current {
                        return Err(ThermicsError::InvalidProgram(format!(
                            "hold at {temperature} °C follows a bath at {current} °C"
                        )));
                    }
                    if !(duration >= 0.0) || sample_every.is_some_and(|s| !(s > 0.0)) {
                        return Err(ThermicsError::InvalidProgram("hold durations and intervals must be positive".into()));
                    }
                }
                ProgramSegment::Ramp { to, rate } => {
                    if !(rate > 0.0 && to.is_finite()) {
                        return Err(ThermicsError::InvalidProgram("ramp rate must be positive".into()));
                    }
                    current = to;
                }
                ProgramSegment::Sample => {}
            }
        }
        Ok(())
    }

    pub fn sample_count(&self) -> usize {
        self.segments
            .iter()
            .map(|s| match *s {
                ProgramSegment::Hold {
                    duration,
                    sample_every: Some(every),
                    ..
                } => (duration / every + 1e-9).floor() as usize,
                ProgramSegment::Sample => 1,
                _ => 0,
            })
            .sum()
    }
}

/// Stepped bath protocol: 20 min at 36 °C sampled every 5 min, then 38, 40,
/// 42 and 44 °C, each sampled on arrival and after a 5 min hold.
pub fn stepped_bath_program() -> TemperatureProgram {
    let mut segments = vec![ProgramSegment::Hold {
        temperature: 36.0,
        duration: 1200.0,
        sample_every: Some(300.0),
    }];
    for t in [38.0, 40.0, 42.0, 44.0] {
        segments.push(ProgramSegment::Ramp {
            to: t,
            rate: DEFAULT_RAMP_RATE,
        });
        segments.push(ProgramSegment::Sample);
        segments.push(ProgramSegment::Hold {
            temperature: t,
            duration: 300.0,
            sample_every: Some(300.0),
        });
    }
    TemperatureProgram {
        start_temperature: 36.0,
        segments,
    }
}

/// 10 min at 37 °C, heat to 42 °C, 10 min there, then one sample.
pub fn design_comparison_program() -> TemperatureProgram {
    TemperatureProgram {
        start_temperature: 37.0,
        segments: vec![
            ProgramSegment::Hold {
                temperature: 37.0,
                duration: 600.0,
                sample_every: None,
            },
            ProgramSegment::Ramp {
                to: 42.0,
                rate: DEFAULT_RAMP_RATE,
            },
            ProgramSegment::Hold {
                temperature: 42.0,
                duration: 600.0,
                sample_every: None,
            },
            ProgramSegment::Sample,
        ],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProgramSample {
    pub t: f64,
    pub temperature: f64,
    pub sample_mass: f64,
    pub cumulative_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReleaseRun {
    pub samples: Vec<ProgramSample>,
    pub payload: PayloadState,
}

impl ReleaseRun {
    /// Bath temperature at the first sample containing drug.
    pub fn first_release_temperature(&self) -> Option<f64> {
        self.samples.iter().find(|s| s.sample_mass > 0.0).map(|s| s.temperature)
    }

    pub fn total_sampled(&self) -> f64 {
        self.samples.iter().map(|s| s.sample_mass).sum()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,T,sample_mass,cumulative_fraction\n");
        for s in &self.samples {
            out.push_str(&format!("{},{},{},{}\n", s.t, s.temperature, s.sample_mass, s.cumulative_fraction));
        }
        out
    }
}

struct Runner {
    payload: PayloadState,
    temperature: f64,
    dt: f64,
    samples: Vec<ProgramSample>,
}

impl Runner {
    /// Steps for `duration` seconds with the bath moving linearly to `to`.
    /// The robot is taken to sit at the bath temperature.
    fn run(&mut self, duration: f64, to: f64) {
        let from = self.temperature;
        let mut elapsed = 0.0;
        while duration - elapsed > 1e-9 {
            let h = self.dt.min(duration - elapsed);
            elapsed += h;
            let temperature = from + (to - from) * (elapsed / duration);
            self.payload = self.payload.advance(temperature, h);
            self.temperature = temperature;
        }
        self.temperature = to;
    }

    fn sample(&mut self) {
        let mass = sample_supernatant(&mut self.payload);
        self.samples.push(ProgramSample {
            t: self.payload.time,
            temperature: self.temperature,
            sample_mass: mass,
            cumulative_fraction: self.payload.released_fraction(),
        });
    }
}

/// Runs a bath program against one capped payload with thermal steps of
/// `dt` seconds.
pub fn run_program(program: &TemperatureProgram, payload: PayloadState, dt: f64) -> Result<ReleaseRun, ThermicsError> {
    program.validate()?;
    if !(dt > 0.0) {
        return Err(ThermicsError::InvalidProgram("time step must be positive".into()));
    }
    let mut r = Runner {
        payload,
        temperature: program.start_temperature,
        dt,
        samples: Vec::new(),
    };
    for seg in &program.segments {
        match *seg {
            ProgramSegment::Hold {
                temperature,
                duration,
                sample_every,
            } => match sample_every {
                Some(every) => {
                    let mut left = duration;
                    while left + 1e-9 >= every {
                        r.run(every, temperature);
                        r.sample();
                        left -= every;
                    }
                    if left > 1e-9 {
                        r.run(left, temperature);
                    }
                }
                None => r.run(duration, temperature),
            },
            ProgramSegment::Ramp { to, rate } => {
                let duration = (to - r.temperature).abs() / rate;
                r.run(duration, to);
            }
            ProgramSegment::Sample => r.sample(),
        }
    }
    Ok(ReleaseRun {
        samples: r.samples,
        payload: r.payload,
    })
}
