use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use regkit::benchmark::run_suite;
use regkit::correction::{apply_region_correction, fit_region_correction, pair_ground_truth, RegionSpec};
use regkit::geometry::{PoseRecord, RigidTransform, Vec3};
use regkit::io::{load_any, read_reference_points, write_ply_binary};
use regkit::register::{register, RegistrationConfig};
use regkit::tracker::{replay_sequence, tracker_init, write_pose_lines, FrameStream, TrackStatus, TrackerConfig};
use regkit::Error;
use serde::Serialize;

#[derive(Parser)]
#[command(name = "regkit", version, about = "Rigid registration and 6-DoF tracking for depth-sensor point clouds")]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the pose mapping SOURCE onto TARGET.
    Register {
        #[arg(long)]
        source: PathBuf,
        #[arg(long)]
        target: PathBuf,
        /// Output pose JSON.
        #[arg(long)]
        out: PathBuf,
        /// TOML with [coarse] and [icp] tables and a seed.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Fit and apply a rigid correction for one region of a scene.
    Correct {
        #[arg(long)]
        scene: PathBuf,
        /// Ground-truth points (CSV x_mm,y_mm,z_mm or PLY).
        #[arg(long)]
        gt: PathBuf,
        /// Region as cx,cy,cz[,r] in mm; r defaults to 70.
        #[arg(long, value_parser = parse_region)]
        region: RegionSpec,
        /// Corrected scene (PLY).
        #[arg(long)]
        out: PathBuf,
        /// Correction model JSON.
        #[arg(long)]
        model: PathBuf,
    },
    /// Track MODEL through the frames listed in DIR/frames.index.
    Track {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        frames: PathBuf,
        /// Initial pose JSON, as written by `register`.
        #[arg(long)]
        init: PathBuf,
        /// Pose stream (JSON lines).
        #[arg(long)]
        out: PathBuf,
        /// Age of the initial pose in ms.
        #[arg(long, default_value_t = 0.0)]
        latency_ms: f64,
        /// TOML tracker configuration.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Run a benchmark suite and write CSV and JSON reports.
    Benchmark {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

fn parse_region(s: &str) -> Result<RegionSpec, String> {
    let v: Vec<f64> =
        s.split(',').map(|x| x.trim().parse::<f64>()).collect::<Result<_, _>>().map_err(|e| format!("bad number in region: {e}"))?;
    match v[..] {
        [x, y, z] => Ok(RegionSpec::with_default_radius(Vec3::new(x, y, z))),
        [x, y, z, r] => RegionSpec::new(Vec3::new(x, y, z), r).map_err(|e| e.to_string()),
        _ => Err(format!("expected cx,cy,cz[,r], got {s:?}")),
    }
}

/// Failure of the computation itself, as opposed to bad input.
enum Failure {
    Usage(Error),
    Estimation(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::RegistrationFailed(_) | Error::NoCorrespondences | Error::TooFewCorrespondences { .. } => {
                Failure::Estimation(e.to_string())
            }
            e => Failure::Usage(e),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Usage(e.into())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Usage(e.into())
    }
}

#[derive(Serialize)]
struct RegisterOutput {
    #[serde(flatten)]
    pose: PoseRecord,
    success: bool,
    inlier_rmse_mm: Option<f64>,
    inlier_fraction: f64,
    coarse: regkit::coarse::CoarseDiagnostics,
    coarse_rotation_row_major_9: [f64; 9],
    coarse_translation_mm_3: [f64; 3],
}

fn read_toml<T: Default>(path: Option<&Path>, parse: impl Fn(&str) -> regkit::Result<T>) -> Result<T, Failure> {
    match path {
        Some(p) => Ok(parse(&fs::read_to_string(p)?)?),
        None => Ok(T::default()),
    }
}

fn run_register(source: &Path, target: &Path, out: &Path, config: Option<&Path>) -> Result<(), Failure> {
    let config = read_toml(config, RegistrationConfig::from_toml)?;
    let source = load_any(source)?;
    let target = load_any(target)?;
    let reg = register(&source, &target, &config)?;
    let c = &reg.coarse.transform;
    let output = RegisterOutput {
        pose: PoseRecord::from(&reg.transform),
        success: reg.success(),
        inlier_rmse_mm: reg.refine.inlier_rmse,
        inlier_fraction: reg.refine.inlier_fraction,
        coarse: reg.coarse.diagnostics.clone(),
        coarse_rotation_row_major_9: c.rotation_row_major(),
        coarse_translation_mm_3: [c.translation.x, c.translation.y, c.translation.z],
    };
    fs::write(out, serde_json::to_string_pretty(&output)?)?;
    if !reg.success() {
        return Err(Failure::Estimation(format!(
            "refinement did not reach a valid alignment (inlier fraction {:.2}, rmse {:?})",
            reg.refine.inlier_fraction, reg.refine.inlier_rmse
        )));
    }
    log::info!("registered with inlier rmse {:?} mm", reg.refine.inlier_rmse);
    Ok(())
}

fn run_correct(scene: &Path, gt: &Path, region: &RegionSpec, out: &Path, model_path: &Path) -> Result<(), Failure> {
    let scene = load_any(scene)?;
    let gt = read_reference_points(gt)?;
    let pairs = pair_ground_truth(&gt, &scene, region)?;
    let model = fit_region_correction(&pairs, region)?;
    let corrected = apply_region_correction(&scene, &model)?;
    write_ply_binary(out, &corrected)?;
    model.save(model_path)?;
    log::info!("correction fitted on {} pairs, residual rms {:.3} mm", model.n, model.residual_rms);
    Ok(())
}

fn read_pose(path: &Path) -> Result<RigidTransform, Failure> {
    let record: PoseRecord = serde_json::from_str(&fs::read_to_string(path)?)?;
    Ok(RigidTransform::try_from(&record)?)
}

fn run_track(model: &Path, frames: &Path, init: &Path, out: &Path, latency_ms: f64, config: Option<&Path>) -> Result<(), Failure> {
    let config = read_toml(config, TrackerConfig::from_toml)?;
    let model = load_any(model)?;
    let init = read_pose(init)?;
    let mut state = tracker_init(model, init, latency_ms)?.with_config(config)?;
    let (poses, timing) = replay_sequence(&mut state, FrameStream::open(frames)?)?;
    let mut w = BufWriter::new(fs::File::create(out)?);
    write_pose_lines(&mut w, &poses)?;
    w.flush()?;
    let lost = poses.iter().filter(|p| p.status == TrackStatus::Lost).count();
    log::info!("{} frames, {lost} lost, median {:?} ms", poses.len(), timing.median_ms);
    if poses.last().is_some_and(|p| p.status == TrackStatus::Lost) {
        return Err(Failure::Estimation(format!("tracking lost ({lost} of {} frames)", poses.len())));
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Register { source, target, out, config } => run_register(&source, &target, &out, config.as_deref()),
        Command::Correct { scene, gt, region, out, model } => run_correct(&scene, &gt, &region, &out, &model),
        Command::Track { model, frames, init, out, latency_ms, config } => {
            run_track(&model, &frames, &init, &out, latency_ms, config.as_deref())
        }
        Command::Benchmark { config, out_dir } => {
            let report = run_suite(&config, &out_dir)?;
            for table in &report.tables {
                println!("lambda {:.2}", table.lambda);
                for row in &table.rows {
                    println!(
                        "  {:<12} score {:>7.2}  median rmse {:>9.3} mm  median runtime {:>9.1} ms",
                        row.method, row.score, row.median_rmse_mm, row.median_runtime_ms
                    );
                }
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(Failure::Estimation(msg)) => {
            eprintln!("failed: {msg}");
            ExitCode::from(2)
        }
    }
}
