use nalgebra::{Matrix3, Vector3};
use proptest::prelude::*;

use mutum_core::locomotion::{climb_feasible_for_weight, nine_panel_velocity, TrialOptions};
use mutum_core::magnetics::{dipole_field, magnetic_force, magnetic_torque, DipoleSource, FieldSample};
use mutum_core::microrobot::{distance_per_revolution, DesignKind, MicrorobotDesign, PayloadSpec};
use mutum_core::scene::{bundled_scene, LocomotionParams, SlipTable};
use mutum_core::teleop::{parse_command, Command, CommandKind};
use mutum_core::thermics::{heat_step, melt_onset, CapPreset, FusConfig, MeltCurve, PayloadState, ThermalState};

fn vec3(range: std::ops::Range<f64>) -> impl Strategy<Value = Vector3<f64>> {
    (range.clone(), range.clone(), range).prop_map(|(x, y, z)| Vector3::new(x, y, z))
}

fn design() -> impl Strategy<Value = DesignKind> {
    prop::sample::select(DesignKind::ALL.to_vec())
}

fn preset() -> impl Strategy<Value = CapPreset> {
    prop::sample::select(CapPreset::ALL.to_vec())
}

fn payload(kind: DesignKind, preset: CapPreset, fmax: f64) -> PayloadState {
    let d = MicrorobotDesign::stock(kind);
    let spec = PayloadSpec {
        max_release_fraction: fmax,
        ..PayloadSpec::bsa(&d, 300.0)
    };
    PayloadState::new(&d, &spec, preset.cap(&MeltCurve::default(), 0.6).unwrap()).unwrap()
}

proptest! {
    #[test]
    fn torque_is_orthogonal_to_moment_and_field(m in vec3(-1.0..1.0), b in vec3(-0.05..0.05)) {
        let t = magnetic_torque(&m, &b);
        let scale = m.norm() * b.norm() * (m.norm() + b.norm()) + f64::MIN_POSITIVE;
        prop_assert!(t.dot(&m).abs() <= 1e-15 * scale);
        prop_assert!(t.dot(&b).abs() <= 1e-15 * scale);
    }

    #[test]
    fn uniform_field_exerts_no_force(m in vec3(-1.0..1.0), b in vec3(-0.05..0.05)) {
        prop_assert_eq!(magnetic_force(&m, &FieldSample::uniform(b).grad), Vector3::zeros());
    }

    #[test]
    fn dipole_gradient_is_symmetric_traceless_and_matches_differences(
        m in vec3(-50.0..50.0).prop_filter("non-zero", |m| m.norm() > 1e-3),
        dir in vec3(-1.0..1.0).prop_filter("non-zero", |d| d.norm() > 0.1),
        dist in 0.01f64..0.3,
    ) {
        let src = DipoleSource::from_moment(m, Vector3::zeros()).unwrap();
        let p = dir.normalize() * dist;
        let g = dipole_field(&src, &p).unwrap().grad;
        let scale = g.abs().max();
        prop_assert!((g - g.transpose()).abs().max() <= 1e-12 * scale);
        prop_assert!(g.trace().abs() <= 1e-12 * scale);

        let h = 1e-6 * dist;
        let mut fd = Matrix3::zeros();
        for j in 0..3 {
            let mut dp = Vector3::zeros();
            dp[j] = h;
            let d = dipole_field(&src, &(p + dp)).unwrap().b - dipole_field(&src, &(p - dp)).unwrap().b;
            fd.set_column(j, &(d / (2.0 * h)));
        }
        prop_assert!((fd - g).abs().max() <= 1e-6 * scale);
    }

    #[test]
    fn climbing_is_monotone(
        theta in 0.0f64..1.2,
        dtheta in 0.0f64..0.3,
        mu in 0.0f64..1.0,
        dmu in 0.0f64..0.5,
        sigma in 0.0f64..10.0,
    ) {
        let d = MicrorobotDesign::stock(DesignKind::TopPorts);
        let p = |mu: f64| LocomotionParams { slip: SlipTable::constant(0.8), mu, adhesion_pa: sigma, slip_noise: 0.0 };
        let w = 2e-5;
        let a = d.contact_area();
        if climb_feasible_for_weight(theta + dtheta, &p(mu), w, a) {
            prop_assert!(climb_feasible_for_weight(theta, &p(mu), w, a));
        }
        if climb_feasible_for_weight(theta, &p(mu), w, a) {
            prop_assert!(climb_feasible_for_weight(theta, &p(mu + dmu), w, a));
        }
    }

    #[test]
    fn heating_does_not_depend_on_step_subdivision(
        t0 in 0.0f64..300.0,
        dt in 0.1f64..30.0,
        n in 2usize..50,
        ambient in 30.0f64..40.0,
        fus_on in any::<bool>(),
    ) {
        let fus = FusConfig::default();
        let fus = fus_on.then_some(&fus);
        let start = ThermalState::calibrated(ambient);
        let whole = heat_step(&start, fus, t0, dt);
        let mut split = start;
        for i in 0..n {
            split = heat_step(&split, fus, t0 + i as f64 * dt / n as f64, dt / n as f64);
        }
        prop_assert!((whole.temperature - split.temperature).abs() <= 1e-9 * whole.temperature);
    }

    #[test]
    fn release_is_monotone_bounded_and_conserves_mass(
        kind in design(),
        cap in preset(),
        fmax in 0.1f64..1.0,
        temps in prop::collection::vec(30.0f64..48.0, 1..200),
        dt in 0.1f64..10.0,
    ) {
        let mut p = payload(kind, cap, fmax);
        let m0 = p.loaded_mass;
        for t in temps {
            let next = p.advance(t, dt);
            prop_assert!(next.released_mass >= p.released_mass);
            prop_assert!(next.released_fraction() <= fmax + 1e-15);
            prop_assert!(next.cap.integrity <= p.cap.integrity);
            prop_assert!(((next.released_mass + next.retained_mass()) - m0).abs() <= 1e-12 * m0);
            p = next;
        }
    }

    #[test]
    fn nothing_is_released_below_onset(
        kind in design(),
        cap in preset(),
        temps in prop::collection::vec(20.0f64..37.4, 1..300),
    ) {
        let mut p = payload(kind, cap, 0.9);
        prop_assert!(p.cap.effective_onset() > 37.4);
        for t in temps {
            p = p.advance(t, 5.0);
        }
        prop_assert_eq!(p.released_mass, 0.0);
        prop_assert_eq!(p.cap.integrity, 1.0);
    }

    #[test]
    fn melt_onset_never_rises_with_oil(a in 0.0f64..0.6, b in 0.0f64..0.6) {
        let c = MeltCurve::default();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(melt_onset(&c, hi).unwrap() <= melt_onset(&c, lo).unwrap());
    }

    #[test]
    fn commands_round_trip(
        seq in any::<u64>(),
        which in 0usize..7,
        x in 0.0f64..5.0,
    ) {
        let kind = match which {
            0 => CommandKind::SetFrequency { hz: x },
            1 => CommandKind::SetHeading { rad: x - 2.5 },
            2 => CommandKind::StartRotation,
            3 => CommandKind::StopRotation,
            4 => CommandKind::TriggerFus { duration_s: x + 0.1 },
            5 => CommandKind::Reset,
            _ => CommandKind::LoadScene { name: format!("scene{}", x as u32) },
        };
        let cmd = Command::new(seq, kind);
        prop_assert_eq!(parse_command(&cmd.to_json()).unwrap(), cmd);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn velocity_never_exceeds_no_slip_bound_and_is_seeded(
        kind in design(),
        freq in prop::sample::select(vec![2.0, 3.0, 4.0, 5.0]),
        seed in any::<u64>(),
        scene in prop::sample::select(vec!["flat_dry", "flat_wet", "phantom_rat", "invivo_rat"]),
    ) {
        let d = MicrorobotDesign::stock(kind);
        let s = bundled_scene(scene).unwrap();
        let opts = TrialOptions { duration: 0.5, ..TrialOptions::default() };
        let a = nine_panel_velocity(&d, &s, freq, seed, &opts).unwrap();
        let bound = distance_per_revolution(&d) * freq;
        prop_assert!(a.max <= bound, "{} > {}", a.max, bound);
        prop_assert!(a.min >= 0.0);
        let b = nine_panel_velocity(&d, &s, freq, seed, &opts).unwrap();
        prop_assert_eq!(a, b);
    }
}
