use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mutum_core::harness::{
    self, calibrate, parse_designs, parse_frequencies, Anchors, Experiment, ExperimentConfig, HarnessError,
    PayloadMode,
};
use mutum_core::microrobot::DesignKind;
use mutum_core::teleop::{self, ServerOptions, SessionConfig, TeleopError};

#[derive(Parser)]
#[command(name = "mutum-sim", version, about = "Magnetic tumbling microrobot simulator")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args)]
struct RunArgs {
    /// Scene file or bundled scene name
    #[arg(long)]
    scene: Option<String>,
    /// Designs: tp, sp, ep, a comma list, or all
    #[arg(long)]
    design: Option<String>,
    /// Actuation frequencies in Hz, e.g. 2,3,5
    #[arg(long = "freq")]
    freq: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Payload during locomotion: empty, filled or both
    #[arg(long, default_value = "empty")]
    payload: String,
    /// Terminal release fraction of the loaded formulation
    #[arg(long)]
    max_release: Option<f64>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Nine-trial velocity panels per design and frequency
    VelocitySweep(RunArgs),
    /// 5° incline ladder at 5 Hz
    InclineLadder(RunArgs),
    /// Wax melt onset across oil fractions
    MeltCurveSweep(RunArgs),
    /// Stepped bath release study with 12 samples
    ReleaseSchedule(RunArgs),
    /// Focused-ultrasound heating and release in the phantom
    FusPhantom(RunArgs),
    /// Release of each design after 10 min at 42 °C
    DesignComparison(RunArgs),
    /// Fit friction, adhesion and thermal parameters to anchors
    Calibrate {
        /// Anchor file (JSON); the built-in anchors when omitted
        #[arg(long)]
        anchors: Option<PathBuf>,
        /// Also write calibration.json here
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the teleoperation server
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = teleop::DEFAULT_SCENE)]
        scene: String,
        #[arg(long, default_value = "tp")]
        design: DesignKind,
        /// Record the session log to this file
        #[arg(long)]
        record: Option<PathBuf>,
    },
    /// Replay a recorded session log and verify it
    Replay { log: PathBuf },
}

fn experiment_config(experiment: Experiment, args: RunArgs) -> Result<ExperimentConfig, HarnessError> {
    let mut cfg = ExperimentConfig::new(experiment, args.out);
    cfg.scene = args.scene;
    if let Some(d) = args.design {
        cfg.designs = parse_designs(&d)?;
    }
    if let Some(f) = args.freq {
        cfg.frequencies = parse_frequencies(&f)?;
    }
    cfg.seed = args.seed;
    cfg.payload = args.payload.parse::<PayloadMode>()?;
    cfg.max_release = args.max_release;
    Ok(cfg)
}

fn run(experiment: Experiment, args: RunArgs) -> Result<(), HarnessError> {
    let cfg = experiment_config(experiment, args)?;
    let output = harness::run_experiment(&cfg)?;
    for path in output.write_to(&cfg.output_dir)? {
        println!("{}", path.display());
    }
    Ok(())
}

fn read_anchors(path: &Path) -> Result<Anchors, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| HarnessError::Json {
        path: path.to_path_buf(),
        source,
    })
}

fn run_calibrate(anchors: Option<PathBuf>, out: Option<PathBuf>) -> Result<(), HarnessError> {
    let anchors = match anchors {
        Some(p) => read_anchors(&p)?,
        None => Anchors::default(),
    };
    let result = calibrate(&anchors)?;
    let text = serde_json::to_string_pretty(&result).expect("calibration serializes");
    println!("{text}");
    if let Some(dir) = out {
        std::fs::create_dir_all(&dir).map_err(|source| HarnessError::Io { path: dir.clone(), source })?;
        let path = dir.join("calibration.json");
        std::fs::write(&path, format!("{text}\n")).map_err(|source| HarnessError::Io { path, source })?;
    }
    if !result.matches_builtin() {
        eprintln!("note: result differs from the built-in calibrated constants");
    }
    Ok(())
}

fn teleop_exit(e: TeleopError) -> ExitCode {
    eprintln!("error: {e}");
    match e {
        TeleopError::Replay { .. } | TeleopError::InvalidConfig(_) | TeleopError::Scene(_) => ExitCode::from(2),
        _ => ExitCode::from(1),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Cmd::VelocitySweep(a) => run(Experiment::VelocitySweep, a),
        Cmd::InclineLadder(a) => run(Experiment::InclineLadder, a),
        Cmd::MeltCurveSweep(a) => run(Experiment::MeltCurveSweep, a),
        Cmd::ReleaseSchedule(a) => run(Experiment::ReleaseSchedule, a),
        Cmd::FusPhantom(a) => run(Experiment::FusPhantom, a),
        Cmd::DesignComparison(a) => run(Experiment::DesignComparison, a),
        Cmd::Calibrate { anchors, out } => run_calibrate(anchors, out),
        Cmd::Serve {
            port,
            scene,
            design,
            record,
        } => {
            let options = ServerOptions {
                session: SessionConfig {
                    scene,
                    design,
                    ..SessionConfig::default()
                },
                record,
            };
            let runtime = tokio::runtime::Runtime::new().expect("tokio runtime");
            return match runtime.block_on(teleop::serve(port, options)) {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => teleop_exit(e),
            };
        }
        Cmd::Replay { log } => {
            let text = match std::fs::read_to_string(&log) {
                Ok(t) => t,
                Err(e) => return teleop_exit(TeleopError::Io(e)),
            };
            return match teleop::replay(&text) {
                Ok(r) => {
                    println!(
                        "replay ok: {} ticks, {} commands, {} snapshots verified",
                        r.ticks, r.commands, r.snapshots
                    );
                    println!("final: {}", r.final_snapshot.to_json());
                    ExitCode::SUCCESS
                }
                Err(e) => teleop_exit(e),
            };
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
