use serde::{Deserialize, Serialize};

use super::{MeltCurve, ThermicsError};
use crate::microrobot::{DesignKind, MicrorobotDesign, PayloadSpec, WaxCap};

/// First-order release rate of the top-port design, 1/s. Other designs scale
/// it by their open port area.
pub const TP_RATE_CONSTANT: f64 = 0.006;

/// Release rate constant of a design, proportional to its open port area.
pub fn rate_constant(design: &MicrorobotDesign) -> f64 {
    let reference = MicrorobotDesign::stock(DesignKind::TopPorts).port_area();
    TP_RATE_CONSTANT * design.port_area() / reference
}

/// Integrity decays exponentially while the cap sits at or above its onset
/// and is untouched below it. Integrity never increases.
pub fn cap_update(cap: &WaxCap, temperature: f64, dt: f64) -> WaxCap {
    let mut next = *cap;
    if temperature >= cap.effective_onset() && dt > 0.0 {
        next.integrity = cap.integrity * (-dt / cap.decay_time_constant).exp();
    }
    next
}

/// Coating variability between hand-dipped caps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CapPreset {
    /// Thin coat: melts early and fails fast.
    Thin,
    Nominal,
    /// Thick coat: needs longer above onset before it opens.
    Thick,
}

impl CapPreset {
    pub const ALL: [CapPreset; 3] = [CapPreset::Thin, CapPreset::Nominal, CapPreset::Thick];

    pub fn as_str(self) -> &'static str {
        match self {
            CapPreset::Thin => "thin",
            CapPreset::Nominal => "nominal",
            CapPreset::Thick => "thick",
        }
    }

    /// `(onset shift °C, decay time constant s)`.
    pub fn parameters(self) -> (f64, f64) {
        match self {
            CapPreset::Thin => (-1.5, 3.0),
            CapPreset::Nominal => (0.0, WaxCap::DEFAULT_DECAY),
            CapPreset::Thick => (1.0, 47.5),
        }
    }

    pub fn cap(self, curve: &MeltCurve, w: f64) -> Result<WaxCap, ThermicsError> {
        let mut cap = WaxCap::new(w, curve.onset(w)?)?;
        (cap.onset_shift, cap.decay_time_constant) = self.parameters();
        Ok(cap)
    }
}

/// Drug mass bookkeeping of one loaded robot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PayloadState {
    /// Drug mass loaded, kg.
    pub loaded_mass: f64,
    pub released_mass: f64,
    pub max_release_fraction: f64,
    pub cap: WaxCap,
    pub breach_time: Option<f64>,
    /// 1/s
    pub rate_constant: f64,
    pub time: f64,
    /// Released mass already collected by supernatant samples.
    pub sampled_mass: f64,
}

impl PayloadState {
    pub fn new(design: &MicrorobotDesign, payload: &PayloadSpec, cap: WaxCap) -> Result<Self, ThermicsError> {
        payload.validate(design)?;
        cap.validate()?;
        Ok(Self {
            loaded_mass: payload.drug_mass(),
            released_mass: 0.0,
            max_release_fraction: payload.max_release_fraction,
            cap,
            breach_time: None,
            rate_constant: rate_constant(design),
            time: 0.0,
            sampled_mass: 0.0,
        })
    }

    pub fn retained_mass(&self) -> f64 {
        self.loaded_mass - self.released_mass
    }

    pub fn released_fraction(&self) -> f64 {
        if self.loaded_mass == 0.0 {
            0.0
        } else {
            self.released_mass / self.loaded_mass
        }
    }

    /// Updates the cap at `temperature` and releases for `dt` seconds.
    pub fn advance(&self, temperature: f64, dt: f64) -> Self {
        let mut next = self.clone();
        next.cap = cap_update(&self.cap, temperature, dt);
        release_step(&next, next.cap.breached(), dt)
    }
}

/// Advances release by `dt`. The breach time is latched at the end of the
/// first step that reports a breached cap; after it the released fraction
/// follows `F_max·(1 − e^{−k(t − t_b)})`.
pub fn release_step(p: &PayloadState, cap_breached: bool, dt: f64) -> PayloadState {
    let mut next = p.clone();
    next.time += dt;
    if next.breach_time.is_none() && cap_breached {
        next.breach_time = Some(next.time);
    }
    if let Some(tb) = next.breach_time {
        let f = p.max_release_fraction * -(-p.rate_constant * (next.time - tb)).exp_m1();
        next.released_mass = next.released_mass.max(f * p.loaded_mass);
    }
    next
}

/// Collects the supernatant: returns the mass released since the previous
/// sample.
pub fn sample_supernatant(p: &mut PayloadState) -> f64 {
    let increment = p.released_mass - p.sampled_mass;
    p.sampled_mass = p.released_mass;
    increment
}
