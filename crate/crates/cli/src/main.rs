//! `sew`: retarget single frames, replay trajectories, measure latency,
//! generate synthetic motions and audit optimality.

use std::error::Error;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use sew_core::harness::oracle::{audit, AuditOptions, AuditRow, OracleOptions};
use sew_core::harness::replay::{arm_latencies, run_replay, ReplayOptions, DEFAULT_WARMUP};
use sew_core::harness::report::{quantile, report_write, write_rows, ReportFormat, Stats};
use sew_core::harness::synth::{input_from_robot, jitter, RollingPunch};
use sew_core::harness::trajectory::KeypointTrajectory;
use sew_core::model::{Bimanual, NUM_JOINTS};
use sew_core::retarget::{costs, sync_frames, SyncOptions};
use sew_core::safety::make_capsules;
use sew_core::{
    safety_filter, sew_mimic, ArmPair, FilterParams, JointVector, RobotArmModel, WristType,
};

type CliResult<T = ()> = Result<T, Box<dyn Error>>;

#[derive(Parser)]
#[command(name = "sew", version, about = "SEW-Mimic arm retargeting harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Retarget one frame, from a trajectory file or a robot pose.
    Retarget(RetargetArgs),
    /// Replay a trajectory and write a per-frame report.
    Replay(ReplayArgs),
    /// Single-arm and per-frame latency distribution.
    Bench(BenchArgs),
    /// Emit a synthetic rolling-punch trajectory.
    Synth(SynthArgs),
    /// Compare closed-form costs against a multi-start numerical search.
    Oracle(OracleArgs),
}

#[derive(Args)]
struct ModelArgs {
    /// Left arm description: a file path or a bundled name.
    #[arg(long, requires = "model_right")]
    model_left: Option<String>,
    /// Right arm description: a file path or a bundled name.
    #[arg(long, requires = "model_left")]
    model_right: Option<String>,
    /// Bundled pair used when no model files are given.
    #[arg(long, value_enum, default_value_t = Wrist::Perpendicular)]
    wrist: Wrist,
}

#[derive(Clone, Copy, ValueEnum)]
enum Wrist {
    Parallel,
    Perpendicular,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Args)]
struct FilterArgs {
    /// Run the self-collision safety filter.
    #[arg(long, value_enum, default_value_t = Switch::Off)]
    filter: Switch,
    /// TOML file overriding filter parameters.
    #[arg(long)]
    params: Option<PathBuf>,
}

#[derive(Args)]
struct OutputArgs {
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Jsonl,
}

impl From<Format> for ReportFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => ReportFormat::Csv,
            Format::Jsonl => ReportFormat::Jsonl,
        }
    }
}

#[derive(Args)]
struct RetargetArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    filter: FilterArgs,
    /// Trajectory file to take the frame from.
    #[arg(long, conflicts_with = "pose")]
    input: Option<PathBuf>,
    /// Frame index within `--input`.
    #[arg(long, default_value_t = 0)]
    frame: usize,
    /// Build the frame from robot forward kinematics: 14 comma-separated
    /// joint angles, left arm first.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pose: Option<Vec<f64>>,
    /// Starting pose, 14 comma-separated joint angles (default zero).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    q0: Option<Vec<f64>>,
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReplayArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    filter: FilterArgs,
    #[command(flatten)]
    output: OutputArgs,
    /// Trajectory file (JSON lines).
    #[arg(long)]
    traj: PathBuf,
    /// Frames excluded from timing aggregates.
    #[arg(long, default_value_t = DEFAULT_WARMUP)]
    warmup: usize,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    filter: FilterArgs,
    /// Trajectory to time; a rolling punch of `--frames` frames otherwise.
    #[arg(long)]
    traj: Option<PathBuf>,
    /// Timed frames of the synthetic trajectory, after warm-up.
    #[arg(long, default_value_t = 10_000)]
    frames: usize,
    #[arg(long, default_value_t = DEFAULT_WARMUP)]
    warmup: usize,
    /// Write the per-frame report here.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    duration: Option<f64>,
    /// Frames per second.
    #[arg(long)]
    rate: Option<f64>,
    #[arg(long)]
    rotations: Option<f64>,
    #[arg(long)]
    radius: Option<f64>,
    #[arg(long)]
    forward: Option<f64>,
    #[arg(long)]
    drop: Option<f64>,
    #[arg(long)]
    cross: Option<f64>,
    #[arg(long)]
    stagger: Option<f64>,
    #[arg(long)]
    wrist_bend: Option<f64>,
    /// Displace elbows and wrists by up to this many meters.
    #[arg(long, default_value_t = 0.0)]
    jitter: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    output: OutputArgs,
    /// Instances per arm.
    #[arg(long, default_value_t = 100)]
    instances: usize,
    /// Random starts per oracle solve.
    #[arg(long, default_value_t = 50)]
    starts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Elbow and wrist perturbation, meters.
    #[arg(long, default_value_t = 0.03)]
    noise: f64,
    /// Hand perturbation, radians.
    #[arg(long, default_value_t = 0.3)]
    hand_noise: f64,
    /// Keep the description's joint limits instead of widening them.
    #[arg(long)]
    keep_limits: bool,
    /// Excess over the oracle counted as a violation.
    #[arg(long, default_value_t = 1e-6)]
    tolerance: f64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Retarget(a) => retarget(a),
        Command::Replay(a) => replay(a),
        Command::Bench(a) => bench(a),
        Command::Synth(a) => synth(a),
        Command::Oracle(a) => oracle(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn load_model(spec: &str) -> CliResult<RobotArmModel> {
    if sew_core::model::bundled_source(spec).is_some() {
        return Ok(RobotArmModel::bundled(spec)?);
    }
    Ok(RobotArmModel::load(spec)?)
}

impl ModelArgs {
    fn pair(&self) -> CliResult<ArmPair> {
        match (&self.model_left, &self.model_right) {
            (Some(l), Some(r)) => Ok(ArmPair::new(load_model(l)?, load_model(r)?)?),
            _ => Ok(ArmPair::bundled(match self.wrist {
                Wrist::Parallel => WristType::Parallel,
                Wrist::Perpendicular => WristType::Perpendicular,
            })?),
        }
    }
}

impl FilterArgs {
    fn params(&self) -> CliResult<FilterParams> {
        Ok(match &self.params {
            Some(p) => FilterParams::load(p)?,
            None => FilterParams::default(),
        })
    }

    fn enabled(&self) -> bool {
        self.filter == Switch::On
    }
}

fn output(path: Option<&Path>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| format!("{}: {e}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn print_json(value: &impl Serialize, out: Option<&Path>) -> CliResult {
    let mut w = output(out)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn split_pose(values: &[f64]) -> CliResult<Bimanual<JointVector>> {
    if values.len() != 2 * NUM_JOINTS {
        return Err(format!(
            "a pose needs {} joint angles, got {}",
            2 * NUM_JOINTS,
            values.len()
        )
        .into());
    }
    let mut left = [0.0; NUM_JOINTS];
    let mut right = [0.0; NUM_JOINTS];
    left.copy_from_slice(&values[..NUM_JOINTS]);
    right.copy_from_slice(&values[NUM_JOINTS..]);
    Ok(Bimanual::new(JointVector(left), JointVector(right)))
}

fn retarget(a: RetargetArgs) -> CliResult {
    let pair = a.model.pair()?;
    let params = a.filter.params()?;
    let raw = match (&a.input, &a.pose) {
        (Some(path), _) => {
            let traj = KeypointTrajectory::load(path)?;
            let n = traj.len();
            traj.frames
                .get(a.frame)
                .ok_or_else(|| format!("frame {} out of range ({n} frames)", a.frame))?
                .input
        }
        (None, Some(pose)) => input_from_robot(&pair, &pair.clamp(&split_pose(pose)?))?,
        (None, None) => return Err("give --input or --pose".into()),
    };
    let q0 = match &a.q0 {
        Some(v) => pair.clamp(&split_pose(v)?),
        None => Bimanual::default(),
    };
    let synced = sync_frames(&raw, &SyncOptions::default())?;
    let solved = q0.map(|side, q| sew_mimic(pair.arm(side), q, synced.arms.get(side)));
    let q_des = solved.map(|_, r| r.q);
    let (q, status) = if a.filter.enabled() {
        let out = safety_filter(&pair, &q0, &q_des, &params);
        (out.q, Some(out.status))
    } else {
        (q_des, None)
    };
    let report = json!({
        "q": q,
        "costs": q.map(|side, q| costs(pair.arm(side), q, synced.arms.get(side))),
        "flags": solved.map(|_, r| r.flags),
        "solve_time": solved.map(|_, r| r.solve_time),
        "filter": status,
        "min_distance": make_capsules(&pair, &pair.fk(&q)).min_distance(),
    });
    print_json(&report, a.out.as_deref())
}

fn replay(a: ReplayArgs) -> CliResult {
    let pair = a.model.pair()?;
    let traj = KeypointTrajectory::load(&a.traj)?;
    let options = ReplayOptions {
        filter: a.filter.enabled(),
        params: a.filter.params()?,
        warmup: a.warmup,
        ..ReplayOptions::default()
    };
    let report = run_replay(&pair, &traj, &options);
    match &a.output.out {
        Some(path) => {
            report_write(&report, path, a.output.format.into())?;
            print_json(&report.summary, None)
        }
        None => {
            let mut w = output(None)?;
            write_rows(&report.rows, a.output.format.into(), &mut w)?;
            eprintln!("{}", serde_json::to_string(&report.summary)?);
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct Distribution {
    median: f64,
    iqr: f64,
    mean: f64,
    p05: f64,
    p95: f64,
    count: usize,
}

impl Distribution {
    fn of(samples: &[f64]) -> Self {
        let s = Stats::of(samples);
        let mut v = samples.to_vec();
        v.sort_by(f64::total_cmp);
        let q = |p| {
            if v.is_empty() {
                f64::NAN
            } else {
                quantile(&v, p)
            }
        };
        Self {
            median: s.median,
            iqr: s.iqr,
            mean: s.mean,
            p05: q(0.05),
            p95: q(0.95),
            count: s.count,
        }
    }
}

fn bench(a: BenchArgs) -> CliResult {
    let pair = a.model.pair()?;
    let traj = match &a.traj {
        Some(p) => KeypointTrajectory::load(p)?,
        None => RollingPunch {
            duration: (a.frames + a.warmup) as f64 / 100.0,
            ..RollingPunch::default()
        }
        .generate(),
    };
    let arm = arm_latencies(&pair, &traj, &SyncOptions::default());
    let skip = (2 * a.warmup).min(arm.len());
    let options = ReplayOptions {
        filter: a.filter.enabled(),
        params: a.filter.params()?,
        warmup: a.warmup,
        ..ReplayOptions::default()
    };
    let report = run_replay(&pair, &traj, &options);
    if let Some(path) = &a.out {
        report_write(&report, path, a.format.into())?;
    }
    let timed = if report.rows.len() > a.warmup {
        &report.rows[a.warmup..]
    } else {
        &report.rows[..]
    };
    let frame: Vec<f64> = timed.iter().map(|r| r.time_total).collect();
    let summary = json!({
        "frames": traj.len(),
        "warmup": a.warmup,
        "filter": a.filter.enabled(),
        "parallel_feature": cfg!(feature = "parallel"),
        "arm_seconds": Distribution::of(&arm[skip..]),
        "frame_seconds": Distribution::of(&frame),
    });
    print_json(&summary, None)
}

fn synth(a: SynthArgs) -> CliResult {
    let d = RollingPunch::default();
    let punch = RollingPunch {
        duration: a.duration.unwrap_or(d.duration),
        rate: a.rate.unwrap_or(d.rate),
        rotations: a.rotations.unwrap_or(d.rotations),
        radius: a.radius.unwrap_or(d.radius),
        forward: a.forward.unwrap_or(d.forward),
        drop: a.drop.unwrap_or(d.drop),
        cross: a.cross.unwrap_or(d.cross),
        stagger: a.stagger.unwrap_or(d.stagger),
        wrist_bend: a.wrist_bend.unwrap_or(d.wrist_bend),
        body: d.body,
    };
    if !(punch.duration > 0.0 && punch.rate > 0.0) {
        return Err("duration and rate must be positive".into());
    }
    let mut traj = punch.generate();
    if a.jitter > 0.0 {
        traj = jitter(&traj, a.jitter, a.seed);
    }
    let mut w = output(a.out.as_deref())?;
    traj.write(&mut w)?;
    w.flush()?;
    Ok(())
}

fn oracle(a: OracleArgs) -> CliResult {
    let pair = a.model.pair()?;
    let options = AuditOptions {
        instances: a.instances,
        seed: a.seed,
        noise: a.noise,
        hand_noise: a.hand_noise,
        widen: !a.keep_limits,
        oracle: OracleOptions {
            starts: a.starts.max(1),
            seed: a.seed,
            ..OracleOptions::default()
        },
    };
    let rows = audit(&pair, &options);
    if let Some(path) = &a.output.out {
        write_audit(&rows, path, a.output.format)?;
    }
    let excess: Vec<f64> = rows.iter().map(|r| r.excess).collect();
    let summary = json!({
        "instances": rows.len(),
        "widened_limits": options.widen,
        "tolerance": a.tolerance,
        "violations": rows.iter().filter(|r| r.excess > a.tolerance).count(),
        "clamped": rows.iter().filter(|r| r.clamped).count(),
        "max_excess": excess.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        "excess": Distribution::of(&excess),
    });
    print_json(&summary, None)
}

fn write_audit(rows: &[AuditRow], path: &Path, format: Format) -> CliResult {
    let mut w = output(Some(path))?;
    match format {
        Format::Csv => {
            let mut c = csv::Writer::from_writer(w);
            for r in rows {
                c.serialize(r)?;
            }
            c.flush()?;
        }
        Format::Jsonl => {
            for r in rows {
                serde_json::to_writer(&mut w, r)?;
                writeln!(w)?;
            }
            w.flush()?;
        }
    }
    Ok(())
}
