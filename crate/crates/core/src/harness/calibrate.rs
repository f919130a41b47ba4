use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::locomotion::climb_feasible;
use crate::microrobot::{DesignKind, MicrorobotDesign};
use crate::scene::{calibrated as loco, LocomotionParams};
use crate::thermics::{calibrated as thermal, FusConfig};

// Grid resolution as `index / denominator`, which keeps grid values exact
// decimals. Changing any of these changes the calibrated constants.
const MU_PER_UNIT: f64 = 200.0; // μ ∈ [0, 2] in steps of 0.005
const MU_STEPS: usize = 400;
const ADHESION_PER_PA: f64 = 20.0; // σ ∈ [0, 20] Pa in steps of 0.05
const ADHESION_STEPS: usize = 400;
const G_PER_UNIT: f64 = 1000.0; // G ∈ [0.01, 1] W/°C in steps of 0.001
const G_RANGE: (usize, usize) = (10, 1000);
const C_PER_UNIT: f64 = 100.0; // C ∈ [0.5, 30] J/°C in steps of 0.01
const C_RANGE: (usize, usize) = (50, 3000);

/// The robot must climb `pass_deg` and fail at `fail_deg`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InclineAnchor {
    pub environment: String,
    pub pass_deg: f64,
    pub fail_deg: f64,
    /// Friction coefficient preferred among equally good fits.
    pub mu_prior: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeTemperature {
    pub t_s: f64,
    pub temp_c: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakAnchor {
    pub temp_c: f64,
    pub tolerance_c: f64,
    pub window_s: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThermalAnchors {
    pub ambient_c: f64,
    /// Held fixed; only the ratio to conductance is identifiable.
    pub absorbed_fraction: f64,
    pub fus_duration_s: f64,
    /// Temperature must be at least this by the given time.
    pub min_temperature: TimeTemperature,
    /// Aim this far above `min_temperature` so the fit is not marginal.
    pub early_margin_c: f64,
    pub peak: PeakAnchor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Anchors {
    #[serde(default)]
    pub incline: Vec<InclineAnchor>,
    #[serde(default)]
    pub thermal: Option<ThermalAnchors>,
}

impl Default for Anchors {
    /// Dry 20°/25° and wet 50°/55° climbing limits; phantom heating from
    /// 36 °C reaching 40.9 °C by 90 s and peaking at 42 ± 0.5 °C in 180–240 s.
    fn default() -> Self {
        Self {
            incline: vec![
                InclineAnchor {
                    environment: "dry".into(),
                    pass_deg: 20.0,
                    fail_deg: 25.0,
                    mu_prior: 0.35,
                },
                InclineAnchor {
                    environment: "wet".into(),
                    pass_deg: 50.0,
                    fail_deg: 55.0,
                    mu_prior: 0.5,
                },
            ],
            thermal: Some(ThermalAnchors {
                ambient_c: 36.0,
                absorbed_fraction: thermal::ABSORBED_FRACTION,
                fus_duration_s: 180.0,
                min_temperature: TimeTemperature { t_s: 90.0, temp_c: 40.9 },
                early_margin_c: 0.1,
                peak: PeakAnchor {
                    temp_c: 42.0,
                    tolerance_c: 0.5,
                    window_s: [180.0, 240.0],
                },
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InclineFit {
    pub environment: String,
    pub mu: f64,
    pub adhesion_pa: f64,
    /// Steepest feasible slope of the fitted parameters.
    pub threshold_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThermalFit {
    pub absorbed_fraction: f64,
    pub conductance: f64,
    pub capacitance: f64,
    pub time_constant: f64,
    pub temp_at_check_c: f64,
    pub peak_temp_c: f64,
    pub peak_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub incline: Vec<InclineFit>,
    pub thermal: Option<ThermalFit>,
}

impl CalibrationResult {
    /// Whether the result equals the constants compiled into the library.
    pub fn matches_builtin(&self) -> bool {
        let find = |env: &str| self.incline.iter().find(|f| f.environment == env);
        let incline_ok = match (find("dry"), find("wet")) {
            (Some(d), Some(w)) => {
                d.mu == loco::DRY_MU
                    && d.adhesion_pa == loco::DRY_ADHESION_PA
                    && w.mu == loco::WET_MU
                    && w.adhesion_pa == loco::WET_ADHESION_PA
            }
            _ => false,
        };
        let thermal_ok = self.thermal.as_ref().is_some_and(|t| {
            t.absorbed_fraction == thermal::ABSORBED_FRACTION
                && t.conductance == thermal::CONDUCTANCE
                && t.capacitance == thermal::CAPACITANCE
        });
        incline_ok && thermal_ok
    }
}

struct Candidate<T> {
    value: T,
    violated: Vec<String>,
    violation: f64,
    objective: f64,
}

/// Keeps the best feasible candidate by objective, or failing that the
/// least-violating one. Ties keep the first seen, so the scan order makes
/// the result deterministic.
struct Best<T> {
    feasible: Option<Candidate<T>>,
    infeasible: Option<Candidate<T>>,
}

impl<T> Best<T> {
    fn new() -> Self {
        Self {
            feasible: None,
            infeasible: None,
        }
    }

    fn offer(&mut self, c: Candidate<T>) {
        if c.violated.is_empty() {
            if self.feasible.as_ref().is_none_or(|b| c.objective < b.objective) {
                self.feasible = Some(c);
            }
        } else if self.feasible.is_none() && self.infeasible.as_ref().is_none_or(|b| c.violation < b.violation) {
            self.infeasible = Some(c);
        }
    }

    fn finish(self) -> Result<T, Vec<String>> {
        match (self.feasible, self.infeasible) {
            (Some(c), _) => Ok(c.value),
            (None, Some(c)) => Err(c.violated),
            (None, None) => Err(vec!["empty search grid".into()]),
        }
    }
}

fn fit_incline(anchor: &InclineAnchor) -> Result<InclineFit, Vec<String>> {
    let designs: Vec<MicrorobotDesign> = DesignKind::ALL.iter().map(|&k| MicrorobotDesign::stock(k)).collect();
    let pass = anchor.pass_deg.to_radians();
    let fail = anchor.fail_deg.to_radians();
    let mid = 0.5 * (anchor.pass_deg + anchor.fail_deg);
    let half = 0.5 * (anchor.fail_deg - anchor.pass_deg).abs().max(1e-9);
    let pass_name = format!("{}: climbs {}°", anchor.environment, anchor.pass_deg);
    let fail_name = format!("{}: fails {}°", anchor.environment, anchor.fail_deg);
    let mut best = Best::new();
    for i in 0..=MU_STEPS {
        for j in 0..=ADHESION_STEPS {
            let params = LocomotionParams {
                mu: i as f64 / MU_PER_UNIT,
                adhesion_pa: j as f64 / ADHESION_PER_PA,
                ..LocomotionParams::dry()
            };
            let mut violated = Vec::new();
            let mut violation = 0.0;
            let mut threshold = f64::INFINITY;
            for d in &designs {
                let capacity = threshold_tan(&params, d);
                threshold = threshold.min(capacity.atan().to_degrees());
                if !climb_feasible(pass, &params, d) {
                    violation += pass.tan() - capacity;
                    if !violated.contains(&pass_name) {
                        violated.push(pass_name.clone());
                    }
                }
                if climb_feasible(fail, &params, d) {
                    violation += capacity - fail.tan();
                    if !violated.contains(&fail_name) {
                        violated.push(fail_name.clone());
                    }
                }
            }
            let objective = ((threshold - mid) / half).powi(2) + (params.mu - anchor.mu_prior).powi(2);
            best.offer(Candidate {
                value: InclineFit {
                    environment: anchor.environment.clone(),
                    mu: params.mu,
                    adhesion_pa: params.adhesion_pa,
                    threshold_deg: threshold,
                },
                violated,
                violation,
                objective,
            });
        }
    }
    best.finish()
}

fn threshold_tan(params: &LocomotionParams, design: &MicrorobotDesign) -> f64 {
    let weight = crate::microrobot::robot_mass(design, None) * crate::microrobot::GRAVITY;
    params.mu + params.adhesion_pa * design.contact_area() / weight
}

/// Closed-form lumped heating: rise while the source is on, decay after.
fn temperature_at(t: f64, ambient: f64, rise: f64, tau: f64, duration: f64) -> f64 {
    if t <= duration {
        ambient + rise * -(-t / tau).exp_m1()
    } else {
        let peak = rise * -(-duration / tau).exp_m1();
        ambient + peak * (-(t - duration) / tau).exp()
    }
}

fn fit_thermal(a: &ThermalAnchors) -> Result<ThermalFit, Vec<String>> {
    let fus = FusConfig {
        absorbed_fraction: a.absorbed_fraction,
        duration: a.fus_duration_s,
        ..FusConfig::default()
    };
    if fus.validate().is_err() {
        return Err(vec!["thermal: absorbed fraction must lie in (0, 1]".into()]);
    }
    let power = fus.absorbed_power();
    let check = a.min_temperature;
    let early_target = check.temp_c + a.early_margin_c;
    let early_name = format!("thermal: ≥ {} °C at {} s", check.temp_c, check.t_s);
    let peak_name = format!("thermal: peak {} ± {} °C", a.peak.temp_c, a.peak.tolerance_c);
    let window_name = format!("thermal: peak within [{}, {}] s", a.peak.window_s[0], a.peak.window_s[1]);
    // The lumped temperature rises monotonically while the source is on and
    // decays afterwards, so the peak sits at the end of sonication.
    let peak_time = a.fus_duration_s;
    let mut best = Best::new();
    for gi in G_RANGE.0..=G_RANGE.1 {
        let g = gi as f64 / G_PER_UNIT;
        let rise = power / g;
        for ci in C_RANGE.0..=C_RANGE.1 {
            let c = ci as f64 / C_PER_UNIT;
            let tau = c / g;
            let early = temperature_at(check.t_s, a.ambient_c, rise, tau, a.fus_duration_s);
            let peak = temperature_at(peak_time, a.ambient_c, rise, tau, a.fus_duration_s);
            let mut violated = Vec::new();
            let mut violation = 0.0;
            if early < check.temp_c {
                violated.push(early_name.clone());
                violation += check.temp_c - early;
            }
            let off = (peak - a.peak.temp_c).abs();
            if off > a.peak.tolerance_c {
                violated.push(peak_name.clone());
                violation += off - a.peak.tolerance_c;
            }
            if !(a.peak.window_s[0]..=a.peak.window_s[1]).contains(&peak_time) {
                violated.push(window_name.clone());
                violation += 1.0;
            }
            best.offer(Candidate {
                value: ThermalFit {
                    absorbed_fraction: a.absorbed_fraction,
                    conductance: g,
                    capacitance: c,
                    time_constant: tau,
                    temp_at_check_c: early,
                    peak_temp_c: peak,
                    peak_time_s: peak_time,
                },
                violated,
                violation,
                objective: (early - early_target).powi(2) + (peak - a.peak.temp_c).powi(2),
            });
        }
    }
    best.finish()
}

/// Deterministic grid search of every free parameter against the anchors.
/// Fails with the full list of anchors the best grid point still violates.
pub fn calibrate(anchors: &Anchors) -> Result<CalibrationResult, HarnessError> {
    let mut violated = Vec::new();
    let mut incline = Vec::new();
    for a in &anchors.incline {
        if !(0.0..=90.0).contains(&a.pass_deg) || !(0.0..=90.0).contains(&a.fail_deg) || a.mu_prior < 0.0 {
            return Err(HarnessError::Validation(format!("incline anchor '{}' is out of range", a.environment)));
        }
        match fit_incline(a) {
            Ok(fit) => incline.push(fit),
            Err(v) => violated.extend(v),
        }
    }
    let thermal = match &anchors.thermal {
        Some(a) => match fit_thermal(a) {
            Ok(fit) => Some(fit),
            Err(v) => {
                violated.extend(v);
                None
            }
        },
        None => None,
    };
    if !violated.is_empty() {
        return Err(HarnessError::CalibrationInfeasible { violated });
    }
    Ok(CalibrationResult { incline, thermal })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_heating_matches_stepper() {
        let fus = FusConfig::default();
        let mut s = crate::thermics::ThermalState::calibrated(36.0);
        for i in 0..200 {
            s = crate::thermics::heat_step(&s, Some(&fus), i as f64, 1.0);
        }
        let rise = fus.absorbed_power() / s.conductance;
        let expected = temperature_at(200.0, 36.0, rise, s.time_constant(), fus.duration);
        assert!((s.temperature - expected).abs() < 1e-9);
    }

    #[test]
    fn contradictory_incline_anchors_are_reported() {
        let anchors = Anchors {
            incline: vec![InclineAnchor {
                environment: "dry".into(),
                pass_deg: 50.0,
                fail_deg: 20.0,
                mu_prior: 0.35,
            }],
            thermal: None,
        };
        match calibrate(&anchors) {
            Err(HarnessError::CalibrationInfeasible { violated }) => {
                assert!(violated.iter().any(|v| v.contains("dry")), "{violated:?}");
            }
            other => panic!("expected infeasible, got {other:?}"),
        }
    }

    #[test]
    fn unreachable_peak_is_reported() {
        let mut anchors = Anchors::default();
        anchors.incline.clear();
        let t = anchors.thermal.as_mut().unwrap();
        t.peak.window_s = [200.0, 240.0];
        let err = calibrate(&anchors).unwrap_err();
        assert!(err.to_string().contains("peak within"));
    }
}
