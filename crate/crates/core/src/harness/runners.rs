use serde::Serialize;
use serde_json::{json, Value};

use super::{Experiment, ExperimentConfig, HarnessError};
use crate::locomotion::{incline_ladder, nine_panel_velocity, TrialOptions, INCLINE_LADDER_FREQUENCY};
use crate::microrobot::{distance_per_revolution, DesignKind, MicrorobotDesign, PayloadSpec};
use crate::scene::{load_scene, Scene};
use crate::thermics::{
    design_comparison_program, stepped_bath_program, heat_step, run_program, CapPreset, FusConfig, MeltCurve, PayloadState,
    ProgramSegment, TemperatureProgram, ThermalState,
};

/// Drug concentration of the design-comparison and phantom payloads, kg/m³.
const COMPARISON_CONCENTRATION: f64 = 300.0;
/// Concentration and terminal fraction of the stepped release study.
const SCHEDULE_CONCENTRATION: f64 = 100.0;
const SCHEDULE_MAX_RELEASE: f64 = 0.80;
const CAP_OIL_FRACTION: f64 = 0.6;
const THERMAL_DT: f64 = 1.0;
const FUS_OBSERVATION: f64 = 240.0;

/// Everything a runner produces: named CSV files, a summary and the fully
/// resolved configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub files: Vec<(String, String)>,
    pub summary: Value,
    pub config: Value,
}

impl RunOutput {
    pub fn file(&self, name: &str) -> Option<&str> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, c)| c.as_str())
    }
}

fn resolved(cfg: &ExperimentConfig, extra: Value) -> Value {
    json!({ "experiment": cfg, "resolved": extra })
}

fn scene_or(cfg: &ExperimentConfig, default: &str) -> Result<(String, Scene), HarnessError> {
    let name = cfg.scene.clone().unwrap_or_else(|| default.to_string());
    let scene = load_scene(&name)?;
    Ok((name, scene))
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutput, HarnessError> {
    cfg.validate()?;
    match cfg.experiment {
        Experiment::VelocitySweep => run_velocity_sweep(cfg),
        Experiment::InclineLadder => run_incline_ladder(cfg),
        Experiment::MeltCurveSweep => run_melt_curve_sweep(cfg),
        Experiment::ReleaseSchedule => run_release_schedule(cfg),
        Experiment::FusPhantom => run_fus_phantom(cfg),
        Experiment::DesignComparison => run_design_comparison(cfg),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VelocityRow {
    pub env: String,
    pub design: DesignKind,
    pub filled: bool,
    pub frequency: f64,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub trials: Vec<f64>,
}

fn payload_label(filled: bool) -> &'static str {
    if filled {
        "filled"
    } else {
        "empty"
    }
}

/// Nine-trial velocity panels for every (design, payload, frequency).
pub fn run_velocity_sweep(cfg: &ExperimentConfig) -> Result<RunOutput, HarnessError> {
    let (scene_name, scene) = scene_or(cfg, "flat_dry")?;
    let env = scene.kind.as_str().to_string();
    let mut rows = Vec::new();
    let mut options_used = Vec::new();
    for &kind in &cfg.designs {
        let design = MicrorobotDesign::stock(kind);
        for &filled in cfg.payload.variants() {
            let options = TrialOptions {
                payload: filled.then(|| PayloadSpec::bsa(&design, COMPARISON_CONCENTRATION)),
                ..TrialOptions::default()
            };
            for &f in &cfg.frequencies {
                let r = nine_panel_velocity(&design, &scene, f, cfg.seed, &options)?;
                rows.push(VelocityRow {
                    env: env.clone(),
                    design: kind,
                    filled,
                    frequency: f,
                    mean: r.mean,
                    min: r.min,
                    max: r.max,
                    trials: r.trials,
                });
            }
            options_used.push(options);
        }
    }

    let mut panel = String::from("env,design,payload,f,v_mean,v_min,v_max\n");
    let mut trials = String::from("env,design,payload,f,robot,trial,v\n");
    let mut bound_ratio: f64 = 0.0;
    for r in &rows {
        let design = r.design.as_str();
        let payload = payload_label(r.filled);
        panel.push_str(&format!(
            "{},{design},{payload},{},{},{},{}\n",
            r.env, r.frequency, r.mean, r.min, r.max
        ));
        for (i, v) in r.trials.iter().enumerate() {
            trials.push_str(&format!("{},{design},{payload},{},{},{},{v}\n", r.env, r.frequency, i / 3, i % 3));
        }
        let bound = distance_per_revolution(&MicrorobotDesign::stock(r.design)) * r.frequency;
        bound_ratio = bound_ratio.max(r.max / bound);
    }
    Ok(RunOutput {
        files: vec![("velocity.csv".into(), panel), ("velocity_trials.csv".into(), trials)],
        summary: json!({ "rows": rows, "max_fraction_of_no_slip_bound": bound_ratio }),
        config: resolved(cfg, json!({ "scene_source": scene_name, "scene": scene, "trial_options": options_used })),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LadderRow {
    pub env: String,
    pub design: DesignKind,
    pub theta_max_deg: f64,
}

/// Maximum climbable slope per design and environment. Without a scene the
/// dry and wet calibrations are both run.
pub fn run_incline_ladder(cfg: &ExperimentConfig) -> Result<RunOutput, HarnessError> {
    let envs: Vec<(String, Scene)> = match &cfg.scene {
        Some(name) => {
            let scene = load_scene(name)?;
            let label = match scene.fluid {
                crate::scene::Fluid::Air => "dry".to_string(),
                _ => "wet".to_string(),
            };
            vec![(label, scene)]
        }
        None => vec![
            ("dry".to_string(), load_scene("flat_dry")?),
            ("wet".to_string(), load_scene("flat_wet")?),
        ],
    };
    let mut rows = Vec::new();
    for (env, scene) in &envs {
        for &kind in &cfg.designs {
            let theta = incline_ladder(&MicrorobotDesign::stock(kind), scene, INCLINE_LADDER_FREQUENCY)?;
            rows.push(LadderRow {
                env: env.clone(),
                design: kind,
                theta_max_deg: theta,
            });
        }
    }
    let mut csv = String::from("env,design,theta_max_deg\n");
    for r in &rows {
        csv.push_str(&format!("{},{},{}\n", r.env, r.design, r.theta_max_deg));
    }
    let params: Vec<_> = envs.iter().map(|(e, s)| json!({ "env": e, "params": s.locomotion_params })).collect();
    Ok(RunOutput {
        files: vec![("incline_ladder.csv".into(), csv)],
        summary: json!({ "rows": rows }),
        config: resolved(cfg, json!({ "frequency": INCLINE_LADDER_FREQUENCY, "environments": params })),
    })
}

/// Onset temperature across the tested oil fractions.
pub fn run_melt_curve_sweep(cfg: &ExperimentConfig) -> Result<RunOutput, HarnessError> {
    let curve = MeltCurve::default();
    let (lo, hi) = curve.domain();
    let n = ((hi - lo) / 0.05).round() as usize;
    let mut csv = String::from("w,onset_c\n");
    let mut points = Vec::new();
    for i in 0..=n {
        let w = ((lo + i as f64 * 0.05) * 100.0).round() / 100.0;
        let onset = curve.onset(w)?;
        csv.push_str(&format!("{w},{onset}\n"));
        points.push(json!({ "w": w, "onset_c": onset }));
    }
    Ok(RunOutput {
        files: vec![("melt_curve.csv".into(), csv)],
        summary: json!({ "points": points }),
        config: resolved(cfg, json!({ "curve": curve })),
    })
}

fn capped_payload(
    kind: DesignKind,
    concentration: f64,
    max_release: Option<f64>,
    preset: CapPreset,
) -> Result<PayloadState, HarnessError> {
    let design = MicrorobotDesign::stock(kind);
    let mut spec = PayloadSpec::bsa(&design, concentration);
    if let Some(m) = max_release {
        spec.max_release_fraction = m;
    }
    let cap = preset.cap(&MeltCurve::default(), CAP_OIL_FRACTION)?;
    Ok(PayloadState::new(&design, &spec, cap)?)
}

/// Stepped bath program with 12 supernatant samples.
pub fn run_release_schedule(cfg: &ExperimentConfig) -> Result<RunOutput, HarnessError> {
    let kind = cfg.designs[0];
    let max_release = cfg.max_release.unwrap_or(SCHEDULE_MAX_RELEASE);
    let payload = capped_payload(kind, SCHEDULE_CONCENTRATION, Some(max_release), CapPreset::Nominal)?;
    let program = stepped_bath_program();
    let run = run_program(&program, payload.clone(), THERMAL_DT)?;
    let p = &run.payload;
    let summary = json!({
        "design": kind,
        "samples": run.samples.len(),
        "first_release_temperature_c": run.first_release_temperature(),
        "terminal_fraction": p.released_fraction(),
        "max_release_fraction": max_release,
        "loaded_mass_kg": p.loaded_mass,
        "released_mass_kg": p.released_mass,
        "retained_mass_kg": p.retained_mass(),
        "sampled_mass_kg": run.total_sampled(),
    });
    Ok(RunOutput {
        files: vec![("release_schedule.csv".into(), run.to_csv())],
        summary,
        config: resolved(
            cfg,
            json!({ "program": program, "initial_payload": payload, "thermal_dt_s": THERMAL_DT }),
        ),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FusReplicate {
    pub cap: CapPreset,
    pub initial_release_temp_c: Option<f64>,
    pub initial_release_time_s: Option<f64>,
    pub final_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FusSummary {
    pub ambient_c: f64,
    pub temp_at_90s_c: f64,
    pub peak_temp_c: f64,
    pub peak_time_s: f64,
    pub replicates: Vec<FusReplicate>,
}

/// FUS heating of a capped robot parked in the phantom, one replicate per
/// cap preset.
pub fn run_fus_phantom(cfg: &ExperimentConfig) -> Result<RunOutput, HarnessError> {
    let (scene_name, scene) = scene_or(cfg, "phantom_rat")?;
    let fus = FusConfig::default();
    fus.validate()?;
    let kind = cfg.designs[0];
    let steps = (FUS_OBSERVATION / THERMAL_DT).round() as usize;

    // Temperature is shared by all replicates: the robot sits at the focus.
    let mut temps = Vec::with_capacity(steps + 1);
    let mut thermal = ThermalState::calibrated(scene.temperature_ambient_c);
    temps.push(thermal.temperature);
    for i in 0..steps {
        thermal = heat_step(&thermal, Some(&fus), i as f64 * THERMAL_DT, THERMAL_DT);
        temps.push(thermal.temperature);
    }
    let (peak_idx, peak) = temps
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, t)| if t > best.1 { (i, t) } else { best });

    let mut csv = String::from("replicate,t,T,released_fraction\n");
    let mut replicates = Vec::new();
    for preset in CapPreset::ALL {
        let mut p = capped_payload(kind, COMPARISON_CONCENTRATION, cfg.max_release, preset)?;
        csv.push_str(&format!("{},0,{},0\n", preset.as_str(), temps[0]));
        let mut release = None;
        for i in 0..steps {
            p = p.advance(temps[i + 1], THERMAL_DT);
            if release.is_none() && p.breach_time.is_some() {
                release = Some(((i + 1) as f64 * THERMAL_DT, temps[i + 1]));
            }
            csv.push_str(&format!(
                "{},{},{},{}\n",
                preset.as_str(),
                (i + 1) as f64 * THERMAL_DT,
                temps[i + 1],
                p.released_fraction()
            ));
        }
        replicates.push(FusReplicate {
            cap: preset,
            initial_release_temp_c: release.map(|r| r.1),
            initial_release_time_s: release.map(|r| r.0),
            final_fraction: p.released_fraction(),
        });
    }
    let check = (90.0 / THERMAL_DT).round() as usize;
    let summary = FusSummary {
        ambient_c: scene.temperature_ambient_c,
        temp_at_90s_c: temps[check],
        peak_temp_c: peak,
        peak_time_s: peak_idx as f64 * THERMAL_DT,
        replicates,
    };
    let caps: Vec<_> = CapPreset::ALL
        .iter()
        .map(|p| json!({ "preset": p, "cap": p.cap(&MeltCurve::default(), CAP_OIL_FRACTION).ok() }))
        .collect();
    Ok(RunOutput {
        files: vec![("fus_timeline.csv".into(), csv)],
        summary: serde_json::to_value(&summary).expect("summary serializes"),
        config: resolved(
            cfg,
            json!({
                "scene_source": scene_name,
                "scene": scene,
                "fus": fus,
                "thermal": ThermalState::calibrated(scene.temperature_ambient_c),
                "caps": caps,
                "observation_s": FUS_OBSERVATION,
                "thermal_dt_s": THERMAL_DT,
            }),
        ),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DesignReleaseRow {
    pub design: DesignKind,
    pub max_release_fraction: f64,
    pub fraction_after_42c: f64,
    pub fraction_at_37c_only: f64,
}

fn body_temperature_program() -> TemperatureProgram {
    TemperatureProgram {
        start_temperature: 37.0,
        segments: vec![
            ProgramSegment::Hold {
                temperature: 37.0,
                duration: 1200.0,
                sample_every: None,
            },
            ProgramSegment::Sample,
        ],
    }
}

/// Released fraction of each design after 10 min at 37 °C and 10 min at
/// 42 °C, with a 37 °C-only control.
pub fn run_design_comparison(cfg: &ExperimentConfig) -> Result<RunOutput, HarnessError> {
    let program = design_comparison_program();
    let control = body_temperature_program();
    let mut rows = Vec::new();
    for &kind in &cfg.designs {
        let payload = capped_payload(kind, COMPARISON_CONCENTRATION, cfg.max_release, CapPreset::Nominal)?;
        let hot = run_program(&program, payload.clone(), THERMAL_DT)?;
        let cold = run_program(&control, payload.clone(), THERMAL_DT)?;
        rows.push(DesignReleaseRow {
            design: kind,
            max_release_fraction: payload.max_release_fraction,
            fraction_after_42c: hot.payload.released_fraction(),
            fraction_at_37c_only: cold.payload.released_fraction(),
        });
    }
    let mut csv = String::from("design,f_max,fraction_42c,fraction_37c_only\n");
    for r in &rows {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            r.design, r.max_release_fraction, r.fraction_after_42c, r.fraction_at_37c_only
        ));
    }
    Ok(RunOutput {
        files: vec![("design_comparison.csv".into(), csv)],
        summary: json!({ "rows": rows }),
        config: resolved(
            cfg,
            json!({ "program": program, "control_program": control, "concentration_kg_m3": COMPARISON_CONCENTRATION }),
        ),
    })
}
