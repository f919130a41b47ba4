use std::fs;
use std::process::{Command, Output};

use mutum_core::teleop::{Command as TeleopCommand, CommandKind, Session, SessionConfig};

fn mutum(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mutum-sim")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn help_lists_every_experiment() {
    let o = mutum(&["--help"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8_lossy(&o.stdout);
    for cmd in [
        "velocity-sweep",
        "incline-ladder",
        "melt-curve-sweep",
        "release-schedule",
        "fus-phantom",
        "design-comparison",
        "calibrate",
        "serve",
        "replay",
    ] {
        assert!(text.contains(cmd), "{cmd} missing from help");
    }
}

#[test]
fn runs_an_experiment_into_the_output_directory() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = mutum(&["melt-curve-sweep", "--out", out]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("melt_curve.csv")).unwrap();
    assert!(csv.starts_with("w,onset_c\n0,50\n"));
    assert!(csv.contains("\n0.6,39\n"));
    assert!(dir.path().join("summary.json").exists());
    assert!(dir.path().join("config.json").exists());
}

#[test]
fn bad_arguments_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    for args in [
        vec!["velocity-sweep", "--freq", "9", "--out", out],
        vec!["velocity-sweep", "--design", "xx", "--out", out],
        vec!["incline-ladder", "--scene", "missing.json", "--out", out],
        vec!["velocity-sweep", "--payload", "half", "--out", out],
        vec!["no-such-command"],
    ] {
        let o = mutum(&args);
        assert_eq!(code(&o), 2, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn calibrate_prints_fit_and_reports_infeasible_anchors() {
    let dir = tempfile::tempdir().unwrap();
    let o = mutum(&["calibrate", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let fit: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let threshold = fit["incline"][0]["threshold_deg"].as_f64().unwrap();
    assert!((20.0..25.0).contains(&threshold), "{threshold}");
    assert!(dir.path().join("calibration.json").exists());

    let anchors = dir.path().join("bad.json");
    fs::write(
        &anchors,
        r#"{"incline":[{"environment":"dry","pass_deg":45,"fail_deg":30,"mu_prior":0.3}]}"#,
    )
    .unwrap();
    let o = mutum(&["calibrate", "--anchors", anchors.to_str().unwrap()]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("dry"));

    fs::write(&anchors, "{ not json").unwrap();
    assert_eq!(code(&mutum(&["calibrate", "--anchors", anchors.to_str().unwrap()])), 2);
}

#[test]
fn replay_verifies_logs() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("session.jsonl");
    let mut s = Session::new(SessionConfig::default()).unwrap();
    s.record_in_memory().unwrap();
    s.submit(TeleopCommand::new(1, CommandKind::StartRotation)).unwrap();
    s.run_for(0.5).unwrap();
    s.finish_recording().unwrap();
    fs::write(&log, s.recorded_log().unwrap()).unwrap();

    let o = mutum(&["replay", log.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("replay ok: 50 ticks"));

    let text = fs::read_to_string(&log).unwrap();
    fs::write(&log, text.replacen("\"snapshot\"", "\"snapshop\"", 1)).unwrap();
    let o = mutum(&["replay", log.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line"));
}
