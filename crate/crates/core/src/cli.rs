//! The `handanno` command-line tool.
//!
//! Exit status is 0 on success, 2 on usage errors and 1 on any other
//! failure. Failures print one line `error[<kind>]: <message>` to stderr,
//! where `<kind>` is one of `usage`, `not-found`, `io`, `parse`, `invalid`.

use std::collections::HashMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::annotate::annotate_frame;
use crate::calibration::{apply_calibration, solve_pnp};
use crate::geometry::RigidTransform;
use crate::hand::{Frame, HandShape, JointId};
use crate::io::{self, AnnotationRow, IoError};
use crate::metrics::{self, ErrorRecord, MissingJoints};
use crate::protocol::CaptureSchedule;
use crate::session::{generate_synthetic_session, RunConfig};
use crate::sync::{align, gap_stats};

#[derive(Debug, Parser)]
#[command(
    name = "handanno",
    version,
    about = "Hand pose annotation from six 6D sensors",
    arg_required_else_help = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic session: sensor log plus ground-truth joints.
    Simulate(SimulateArgs),
    /// Recover 21 joints per sensor frame.
    Annotate(AnnotateArgs),
    /// Estimate the tracker-to-camera transform from 3D-2D correspondences.
    Calibrate(CalibrateArgs),
    /// Pair depth frames with the nearest sensor readings.
    Sync(SyncArgs),
    /// Write the capture schedule.
    Protocol(ProtocolArgs),
    /// Compare estimated joints with ground truth.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Run configuration (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Hand shape (TOML); the built-in reference hand if omitted.
    #[arg(long)]
    shape: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    frames: Option<usize>,
    #[arg(long)]
    frames_per_transition: Option<usize>,
    /// Position noise sigma, mm.
    #[arg(long)]
    noise_pos: Option<f64>,
    /// Rotation noise sigma per axis, degrees.
    #[arg(long)]
    noise_rot: Option<f64>,
    /// Express the ground truth in the camera frame using this transform.
    #[arg(long)]
    transform: Option<PathBuf>,
    #[arg(long)]
    out_sensors: PathBuf,
    #[arg(long)]
    out_gt: PathBuf,
    /// Also write the shape used.
    #[arg(long)]
    out_shape: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct AnnotateArgs {
    #[arg(long)]
    shape: PathBuf,
    #[arg(long)]
    sensors: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Tracker-to-camera transform; output joints are then in the camera frame.
    #[arg(long)]
    transform: Option<PathBuf>,
    /// Run configuration supplying tolerances.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Feasibility tolerance, mm.
    #[arg(long)]
    feasibility: Option<f64>,
}

#[derive(Debug, Args)]
struct CalibrateArgs {
    #[arg(long)]
    intrinsics: PathBuf,
    #[arg(long)]
    corrs: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SyncArgs {
    #[arg(long)]
    depth: PathBuf,
    #[arg(long)]
    sensors: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ProtocolArgs {
    #[arg(long, default_value_t = crate::protocol::DEFAULT_FRAMES_PER_TRANSITION)]
    frames_per_transition: usize,
    #[arg(long)]
    no_random: bool,
    #[arg(long)]
    no_egocentric: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(long)]
    gt: PathBuf,
    #[arg(long)]
    est: PathBuf,
    /// Comma-separated joint names (`W,M1,P1,...`) or `all`.
    #[arg(long, default_value = "all")]
    subset: String,
    /// `lo:hi:n` for n evenly spaced values, or a comma-separated list, mm.
    #[arg(long, default_value = "0:80:81")]
    eps_grid: String,
    /// Treat joints missing from the estimate as infinitely wrong instead
    /// of rejecting the file.
    #[arg(long)]
    allow_missing: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug)]
struct Failure {
    kind: &'static str,
    msg: String,
}

impl Failure {
    fn new(kind: &'static str, msg: impl Into<String>) -> Self {
        Failure { kind, msg: msg.into() }
    }

    fn invalid(msg: impl std::fmt::Display) -> Self {
        Self::new("invalid", msg.to_string())
    }

    fn usage(msg: impl Into<String>) -> Self {
        Self::new("usage", msg)
    }
}

impl From<IoError> for Failure {
    fn from(e: IoError) -> Self {
        let kind = match &e {
            _ if e.is_not_found() => "not-found",
            IoError::Io { .. } | IoError::Write(_) => "io",
            IoError::Parse { .. } | IoError::Toml(_) | IoError::Csv(_) => "parse",
            IoError::Invalid { .. } => "invalid",
        };
        Failure::new(kind, e.to_string())
    }
}

fn with_path<T>(path: &Path, r: Result<T, IoError>) -> Result<T, Failure> {
    r.map_err(|e| {
        let mut f = Failure::from(e);
        if !f.msg.contains(&*path.to_string_lossy()) {
            f.msg = format!("{}: {}", path.display(), f.msg);
        }
        f
    })
}

fn load_config(path: Option<&Path>) -> Result<RunConfig, Failure> {
    match path {
        None => Ok(RunConfig::default()),
        Some(p) => {
            if !p.exists() {
                return Err(Failure::new("not-found", format!("{}: no such file", p.display())));
            }
            RunConfig::load(p).map_err(Failure::invalid)
        }
    }
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = e.print();
                    0
                }
                ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
                    report(&Failure::usage("missing subcommand"));
                    let _ = e.print();
                    2
                }
                _ => {
                    let text = e.to_string();
                    let head = text.split("\n\n").next().unwrap_or("");
                    let msg: Vec<&str> = head.lines().map(str::trim).collect();
                    report(&Failure::usage(msg.join(" ").trim_start_matches("error: ")));
                    if let Some(usage) = text.lines().find(|l| l.starts_with("Usage:")) {
                        eprintln!("{usage}");
                    }
                    2
                }
            };
        }
    };
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Annotate(a) => annotate(a),
        Command::Calibrate(a) => calibrate(a),
        Command::Sync(a) => sync(a),
        Command::Protocol(a) => protocol(a),
        Command::Evaluate(a) => evaluate(a),
    };
    match result {
        Ok(()) => 0,
        Err(f) => {
            report(&f);
            if f.kind == "usage" {
                2
            } else {
                1
            }
        }
    }
}

fn report(f: &Failure) {
    eprintln!("error[{}]: {}", f.kind, f.msg.replace('\n', " "));
}

fn simulate(a: SimulateArgs) -> Result<(), Failure> {
    let mut cfg = load_config(a.config.as_deref())?;
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if let Some(v) = a.frames {
        cfg.frames = v;
    }
    if let Some(v) = a.frames_per_transition {
        cfg.frames_per_transition = v;
    }
    if let Some(v) = a.noise_pos {
        cfg.noise.position_mm = v;
    }
    if let Some(v) = a.noise_rot {
        cfg.noise.rotation_deg = v;
    }
    if let Some(p) = a.shape {
        cfg.shape = Some(p);
    }
    if let Some(p) = a.transform {
        cfg.transform = Some(p);
    }
    cfg.validate().map_err(Failure::invalid)?;
    let shape = match &cfg.shape {
        Some(p) => with_path(p, io::read_shape(p))?,
        None => HandShape::reference(),
    };
    let transform = match &cfg.transform {
        Some(p) => Some(with_path(p, io::read_transform(p))?),
        None => None,
    };
    let session = generate_synthetic_session(&cfg, &shape).map_err(Failure::invalid)?;
    let mut gt = session.ground_truth;
    if let Some(x) = transform {
        for row in &mut gt {
            let skel = row.skeleton().expect("ground truth is complete");
            let cam = apply_calibration(&skel, &x).map_err(Failure::invalid)?;
            *row = AnnotationRow::from_skeleton(row.timestamp_us, &cam);
        }
    }
    with_path(&a.out_sensors, io::write_sensor_file(&a.out_sensors, &session.sensors))?;
    with_path(&a.out_gt, io::write_annotation_file(&a.out_gt, &gt))?;
    if let Some(p) = a.out_shape {
        with_path(&p, io::write_shape(&p, &shape))?;
    }
    println!("simulated {} frames (seed {})", session.sensors.len(), cfg.seed);
    Ok(())
}

fn transform_row(row: &mut AnnotationRow, x: &RigidTransform) {
    for p in row.joints.iter_mut().flatten() {
        *p = x.apply_point(p);
    }
    row.frame = Frame::Camera;
}

fn annotate(a: AnnotateArgs) -> Result<(), Failure> {
    let cfg = load_config(a.config.as_deref())?;
    let mut opts = cfg.tolerances.annotate_options();
    if let Some(f) = a.feasibility {
        if !(f.is_finite() && f > 0.0) {
            return Err(Failure::usage(format!("--feasibility must be positive, got {f}")));
        }
        opts.feasibility = f;
    }
    let shape = with_path(&a.shape, io::read_shape(&a.shape))?;
    let frames = with_path(&a.sensors, io::read_sensor_csv(&a.sensors))?;
    let transform = match &a.transform {
        Some(p) => Some(with_path(p, io::read_transform(p))?),
        None => None,
    };
    let mut rows = Vec::with_capacity(frames.len());
    let (mut exact, mut projected, mut failed) = (0, 0, 0);
    for f in &frames {
        let r = annotate_frame(f, &shape, &opts).map_err(Failure::invalid)?;
        match r.status {
            crate::AnnotationStatus::Exact => exact += 1,
            crate::AnnotationStatus::Projected => projected += 1,
            crate::AnnotationStatus::Failed(_) => failed += 1,
        }
        let mut row = AnnotationRow::from_result(&r);
        if let Some(x) = &transform {
            transform_row(&mut row, x);
        }
        rows.push(row);
    }
    with_path(&a.out, io::write_annotation_file(&a.out, &rows))?;
    println!(
        "annotated {} frames: {exact} exact, {projected} projected, {failed} failed",
        rows.len()
    );
    Ok(())
}

fn calibrate(a: CalibrateArgs) -> Result<(), Failure> {
    let k = with_path(&a.intrinsics, io::read_intrinsics(&a.intrinsics))?;
    let corrs = with_path(&a.corrs, io::open(&a.corrs).and_then(io::parse_correspondence_csv))?;
    let sol = solve_pnp(&corrs, &k).map_err(Failure::invalid)?;
    with_path(&a.out, io::write_transform(&a.out, &sol.transform))?;
    println!("rms {} px after {} iterations", sol.rms, sol.iterations);
    Ok(())
}

fn sync(a: SyncArgs) -> Result<(), Failure> {
    let depth = with_path(&a.depth, io::open(&a.depth).and_then(io::parse_event_csv))?;
    let sensors = with_path(&a.sensors, io::open(&a.sensors).and_then(io::parse_event_csv))?;
    let pairs = align(&depth, &sensors).map_err(Failure::invalid)?;
    with_path(&a.out, io::create(&a.out).and_then(|w| io::write_pair_csv(w, &pairs)))?;
    match gap_stats(&pairs, 100) {
        Ok(s) => println!(
            "{} pairs, max gap {} us, mean gap {} us",
            pairs.len(),
            s.max_us,
            s.mean_us
        ),
        Err(_) => println!("0 pairs"),
    }
    Ok(())
}

fn protocol(a: ProtocolArgs) -> Result<(), Failure> {
    let schedule = CaptureSchedule::builder()
        .frames_per_transition(a.frames_per_transition)
        .random(!a.no_random)
        .egocentric(!a.no_egocentric)
        .build()
        .map_err(|e| Failure::usage(e.to_string()))?;
    with_path(
        &a.out,
        io::create(&a.out).and_then(|w| io::write_schedule_csv(w, &schedule)),
    )?;
    println!(
        "{} segments, {} frames",
        schedule.segments.len(),
        schedule.total_frames()
    );
    Ok(())
}

pub fn parse_subset(spec: &str) -> Result<Vec<JointId>, String> {
    let spec = spec.trim();
    if spec.eq_ignore_ascii_case("all") {
        return Ok(JointId::all().collect());
    }
    let ids: Vec<JointId> = spec
        .split(',')
        .map(|s| s.trim().parse::<JointId>().map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    if ids.is_empty() {
        return Err("empty joint subset".into());
    }
    Ok(ids)
}

pub fn parse_eps_grid(spec: &str) -> Result<Vec<f64>, String> {
    let bad = || format!("bad epsilon grid `{spec}`");
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() == 3 {
        let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
        let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
        let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
        return Ok(metrics::linear_grid(lo, hi, n));
    }
    spec.split(',').map(|s| s.trim().parse().map_err(|_| bad())).collect()
}

fn evaluate(a: EvaluateArgs) -> Result<(), Failure> {
    let subset = parse_subset(&a.subset).map_err(Failure::usage)?;
    let grid = parse_eps_grid(&a.eps_grid).map_err(Failure::usage)?;
    let gt = with_path(&a.gt, io::read_annotation_csv(&a.gt))?;
    let est = with_path(&a.est, io::read_annotation_csv(&a.est))?;
    let by_ts: HashMap<u64, &AnnotationRow> = est.iter().map(|r| (r.timestamp_us, r)).collect();
    let missing = if a.allow_missing {
        MissingJoints::Infinite
    } else {
        MissingJoints::Reject
    };
    let mut records = Vec::with_capacity(gt.len());
    for g in &gt {
        let skel = g
            .skeleton()
            .ok_or_else(|| Failure::invalid(format!("ground truth at {} us is incomplete", g.timestamp_us)))?;
        let e = by_ts
            .get(&g.timestamp_us)
            .ok_or_else(|| Failure::invalid(format!("no estimate for timestamp {} us", g.timestamp_us)))?;
        let errors = metrics::joint_errors_partial(&e.joints, e.frame, &skel, &subset, missing)
            .map_err(|err| Failure::invalid(format!("timestamp {} us: {err}", g.timestamp_us)))?;
        records.push(ErrorRecord::new(g.timestamp_us, errors));
    }
    let rows = metrics::curve_export(&records, &grid).map_err(Failure::invalid)?;
    with_path(&a.out, io::create(&a.out).and_then(|w| io::write_curve_csv(w, &rows)))?;
    let mean = metrics::mean_error(&records).map_err(Failure::invalid)?;
    println!(
        "{} frames, {} joints each, mean error {} mm",
        records.len(),
        subset.len(),
        mean
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subsets_and_grids() {
        assert_eq!(parse_subset("all").unwrap().len(), 21);
        assert_eq!(parse_subset("W, t1,M3").unwrap().len(), 3);
        assert!(parse_subset("W,Q9").is_err());
        assert_eq!(parse_eps_grid("0:10:3").unwrap(), vec![0.0, 5.0, 10.0]);
        assert_eq!(parse_eps_grid("0.001").unwrap(), vec![0.001]);
        assert!(parse_eps_grid("a,b").is_err());
    }

    #[test]
    fn usage_exit_codes() {
        assert_eq!(run(["handanno"]), 2);
        assert_eq!(run(["handanno", "frobnicate"]), 2);
        assert_eq!(run(["handanno", "--help"]), 0);
    }
}
