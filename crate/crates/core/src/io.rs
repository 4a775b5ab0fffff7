//! File formats.
//!
//! CSV files always carry a header row. Floats are written with the
//! shortest decimal representation that parses back to the same `f64`, so
//! every writer/reader pair round-trips bit-exactly. Timestamps are integer
//! microseconds. Configuration-like files (shape, intrinsics, transform) are
//! TOML.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use nalgebra::{Point2, Point3, Quaternion, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::annotate::AnnotationResult;
use crate::calibration::{CameraIntrinsics, Correspondence};
use crate::geometry::RigidTransform;
use crate::hand::{validate_shape, FingerBones, Frame, HandShape, JointId, Skeleton, FINGER_COUNT, JOINT_COUNT};
use crate::kinematics::{SensorFrame, SensorId, SensorReading};
use crate::metrics::CurveRow;
use crate::protocol::{CaptureSchedule, SegmentKind};
use crate::sync::{Pair, TimedEvent};

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {msg}")]
    Parse { line: u64, msg: String },
    #[error("{0}")]
    Toml(String),
    #[error("invalid {what}: {msg}")]
    Invalid { what: &'static str, msg: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Write(#[from] std::io::Error),
}

impl IoError {
    fn parse(line: u64, msg: impl Into<String>) -> Self {
        IoError::Parse { line, msg: msg.into() }
    }

    pub fn is_not_found(&self) -> bool {
        matches!(self, IoError::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound)
    }
}

pub fn open(path: &Path) -> Result<BufReader<File>, IoError> {
    File::open(path).map(BufReader::new).map_err(|source| IoError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn create(path: &Path) -> Result<BufWriter<File>, IoError> {
    File::create(path).map(BufWriter::new).map_err(|source| IoError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn read_string(path: &Path) -> Result<String, IoError> {
    let mut s = String::new();
    open(path)?.read_to_string(&mut s).map_err(|source| IoError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(s)
}

fn write_string(path: &Path, s: &str) -> Result<(), IoError> {
    let mut w = create(path)?;
    w.write_all(s.as_bytes())?;
    w.flush()?;
    Ok(())
}

pub fn parse_frame(s: &str) -> Option<Frame> {
    match s {
        "tracker" => Some(Frame::Tracker),
        "camera" => Some(Frame::Camera),
        "palm-local" => Some(Frame::PalmLocal),
        _ => None,
    }
}

/// Renormalizes unless the quaternion is already unit to rounding error, so
/// that values written by this module parse back bit-identically.
fn parsed_unit(q: Quaternion<f64>) -> UnitQuaternion<f64> {
    if (q.norm_squared() - 1.0).abs() <= 8.0 * f64::EPSILON {
        UnitQuaternion::new_unchecked(q)
    } else {
        UnitQuaternion::from_quaternion(q)
    }
}

fn line_of(rec: &csv::StringRecord) -> u64 {
    rec.position().map_or(0, |p| p.line())
}

fn field(rec: &csv::StringRecord, i: usize) -> Result<&str, IoError> {
    rec.get(i)
        .ok_or_else(|| IoError::parse(line_of(rec), format!("missing column {}", i + 1)))
}

fn num<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, name: &str) -> Result<T, IoError> {
    let s = field(rec, i)?;
    s.trim()
        .parse()
        .map_err(|_| IoError::parse(line_of(rec), format!("bad {name} `{s}`")))
}

fn finite(rec: &csv::StringRecord, i: usize, name: &str) -> Result<f64, IoError> {
    let v: f64 = num(rec, i, name)?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(IoError::parse(line_of(rec), format!("non-finite {name}")))
    }
}

fn check_header(rdr: &mut csv::Reader<impl Read>, expected: &[&str]) -> Result<(), IoError> {
    let h = rdr.headers()?;
    let found: Vec<&str> = h.iter().map(str::trim).collect();
    if found != expected {
        return Err(IoError::parse(
            1,
            format!("expected header `{}`, found `{}`", expected.join(","), found.join(",")),
        ));
    }
    Ok(())
}

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().has_headers(true).from_reader(r)
}

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().has_headers(false).from_writer(w)
}

// ---------------------------------------------------------------- shape

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ShapeFile {
    /// W, M1..M5 in the palm-local frame.
    palm: [[f64; 3]; 6],
    /// Proximal, middle and distal lengths per finger.
    bones: [[f64; 3]; FINGER_COUNT],
    half_thickness: [f64; FINGER_COUNT],
    nail_fraction: [f64; FINGER_COUNT],
    s6_offset: TransformFile,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TransformFile {
    /// w, x, y, z
    quaternion: [f64; 4],
    translation: [f64; 3],
}

impl TransformFile {
    fn from_transform(x: &RigidTransform) -> Self {
        let q = x.rotation.quaternion();
        TransformFile {
            quaternion: [q.w, q.i, q.j, q.k],
            translation: [x.translation.x, x.translation.y, x.translation.z],
        }
    }

    fn to_transform(&self) -> Result<RigidTransform, IoError> {
        let [w, x, y, z] = self.quaternion;
        let q = Quaternion::new(w, x, y, z);
        let n = q.norm();
        if !n.is_finite() || (n - 1.0).abs() > 1e-6 {
            return Err(IoError::Invalid {
                what: "transform",
                msg: format!("quaternion norm {n} is not 1"),
            });
        }
        if !self.translation.iter().all(|v| v.is_finite()) {
            return Err(IoError::Invalid {
                what: "transform",
                msg: "non-finite translation".into(),
            });
        }
        Ok(RigidTransform::new(parsed_unit(q), Vector3::from(self.translation)))
    }
}

fn toml_err(e: impl std::fmt::Display) -> IoError {
    IoError::Toml(e.to_string().trim_end().to_string())
}

pub fn shape_from_str(s: &str) -> Result<HandShape, IoError> {
    let f: ShapeFile = toml::from_str(s).map_err(toml_err)?;
    let shape = HandShape {
        palm_points: f.palm.map(Point3::from),
        bones: f.bones.map(|[p, m, d]| FingerBones::new(p, m, d)),
        half_thickness: f.half_thickness,
        nail_fraction: f.nail_fraction,
        s6_offset: f.s6_offset.to_transform()?,
    };
    let report = validate_shape(&shape);
    if !report.is_ok() {
        return Err(IoError::Invalid {
            what: "shape",
            msg: report.to_string(),
        });
    }
    Ok(shape)
}

pub fn shape_to_string(shape: &HandShape) -> String {
    let f = ShapeFile {
        palm: shape.palm_points.map(|p| [p.x, p.y, p.z]),
        bones: shape.bones.map(|b| [b.proximal, b.middle, b.distal]),
        half_thickness: shape.half_thickness,
        nail_fraction: shape.nail_fraction,
        s6_offset: TransformFile::from_transform(&shape.s6_offset),
    };
    toml::to_string(&f).expect("shape serializes")
}

pub fn read_shape(path: &Path) -> Result<HandShape, IoError> {
    shape_from_str(&read_string(path)?)
}

pub fn write_shape(path: &Path, shape: &HandShape) -> Result<(), IoError> {
    write_string(path, &shape_to_string(shape))
}

// ---------------------------------------------------------------- transform

pub fn transform_from_str(s: &str) -> Result<RigidTransform, IoError> {
    toml::from_str::<TransformFile>(s).map_err(toml_err)?.to_transform()
}

pub fn transform_to_string(x: &RigidTransform) -> String {
    toml::to_string(&TransformFile::from_transform(x)).expect("transform serializes")
}

pub fn read_transform(path: &Path) -> Result<RigidTransform, IoError> {
    transform_from_str(&read_string(path)?)
}

pub fn write_transform(path: &Path, x: &RigidTransform) -> Result<(), IoError> {
    write_string(path, &transform_to_string(x))
}

// ---------------------------------------------------------------- intrinsics

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct IntrinsicsFile {
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    #[serde(default = "default_width")]
    width: u32,
    #[serde(default = "default_height")]
    height: u32,
}

fn default_width() -> u32 {
    640
}

fn default_height() -> u32 {
    480
}

pub fn intrinsics_from_str(s: &str) -> Result<CameraIntrinsics, IoError> {
    let f: IntrinsicsFile = toml::from_str(s).map_err(toml_err)?;
    let k = CameraIntrinsics {
        fx: f.fx,
        fy: f.fy,
        cx: f.cx,
        cy: f.cy,
        width: f.width,
        height: f.height,
    };
    k.validate().map_err(|e| IoError::Invalid {
        what: "intrinsics",
        msg: e.to_string(),
    })?;
    Ok(k)
}

pub fn intrinsics_to_string(k: &CameraIntrinsics) -> String {
    toml::to_string(&IntrinsicsFile {
        fx: k.fx,
        fy: k.fy,
        cx: k.cx,
        cy: k.cy,
        width: k.width,
        height: k.height,
    })
    .expect("intrinsics serialize")
}

pub fn read_intrinsics(path: &Path) -> Result<CameraIntrinsics, IoError> {
    intrinsics_from_str(&read_string(path)?)
}

pub fn write_intrinsics(path: &Path, k: &CameraIntrinsics) -> Result<(), IoError> {
    write_string(path, &intrinsics_to_string(k))
}

// ---------------------------------------------------------------- sensors

pub const SENSOR_HEADER: [&str; 9] = ["timestamp_us", "sensor_id", "x", "y", "z", "qw", "qx", "qy", "qz"];

/// Rows grouped into frames by consecutive equal timestamps. Quaternions are
/// renormalized; every frame must hold each sensor exactly once and
/// timestamps must strictly increase between frames.
pub fn parse_sensor_csv<R: Read>(r: R) -> Result<Vec<SensorFrame>, IoError> {
    let mut rdr = reader(r);
    check_header(&mut rdr, &SENSOR_HEADER)?;
    let mut frames: Vec<SensorFrame> = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = line_of(&rec);
        let ts: u64 = num(&rec, 0, "timestamp_us")?;
        let id: SensorId = field(&rec, 1)?
            .trim()
            .parse()
            .map_err(|e: crate::kinematics::KinematicsError| IoError::parse(line, e.to_string()))?;
        let mut v = [0.0; 7];
        for (k, name) in SENSOR_HEADER[2..].iter().enumerate() {
            v[k] = finite(&rec, k + 2, name)?;
        }
        let q = Quaternion::new(v[3], v[4], v[5], v[6]);
        if q.norm() < 1e-9 {
            return Err(IoError::parse(line, "zero quaternion"));
        }
        let reading = SensorReading::new(id, Point3::new(v[0], v[1], v[2]), parsed_unit(q));
        match frames.last_mut() {
            Some(f) if f.timestamp_us == ts => f.readings.push(reading),
            Some(f) if f.timestamp_us > ts => {
                return Err(IoError::parse(line, format!("timestamp {ts} goes backwards")));
            }
            _ => frames.push(SensorFrame {
                timestamp_us: ts,
                readings: vec![reading],
            }),
        }
    }
    for f in &frames {
        f.validate().map_err(|e| IoError::Invalid {
            what: "sensor frame",
            msg: e.to_string(),
        })?;
    }
    Ok(frames)
}

pub fn write_sensor_csv<W: Write>(w: W, frames: &[SensorFrame]) -> Result<(), IoError> {
    let mut wtr = writer(w);
    wtr.write_record(SENSOR_HEADER)?;
    for f in frames {
        let mut readings: Vec<_> = f.readings.iter().collect();
        readings.sort_by_key(|r| r.id.index());
        for r in readings {
            let q = r.orientation.quaternion();
            wtr.write_record([
                f.timestamp_us.to_string(),
                r.id.to_string(),
                r.position.x.to_string(),
                r.position.y.to_string(),
                r.position.z.to_string(),
                q.w.to_string(),
                q.i.to_string(),
                q.j.to_string(),
                q.k.to_string(),
            ])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_sensor_csv(path: &Path) -> Result<Vec<SensorFrame>, IoError> {
    parse_sensor_csv(open(path)?)
}

pub fn write_sensor_file(path: &Path, frames: &[SensorFrame]) -> Result<(), IoError> {
    write_sensor_csv(create(path)?, frames)
}

// ---------------------------------------------------------------- annotations

/// One row of an annotation CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationRow {
    pub timestamp_us: u64,
    pub frame: Frame,
    pub joints: [Option<Point3<f64>>; JOINT_COUNT],
    pub status: String,
}

impl AnnotationRow {
    pub fn from_skeleton(timestamp_us: u64, skel: &Skeleton) -> Self {
        AnnotationRow {
            timestamp_us,
            frame: skel.frame,
            joints: skel.joints.map(Some),
            status: "exact".into(),
        }
    }

    pub fn from_result(r: &AnnotationResult) -> Self {
        AnnotationRow {
            timestamp_us: r.timestamp_us,
            frame: r.frame,
            joints: r.joints,
            status: r.status.to_string(),
        }
    }

    pub fn skeleton(&self) -> Option<Skeleton> {
        let mut joints = [Point3::origin(); JOINT_COUNT];
        for (d, s) in joints.iter_mut().zip(&self.joints) {
            *d = (*s)?;
        }
        Some(Skeleton::new(self.frame, joints))
    }
}

pub fn annotation_header() -> Vec<String> {
    let mut h = vec!["timestamp_us".to_string(), "frame".to_string()];
    for j in JointId::all() {
        for axis in ["x", "y", "z"] {
            h.push(format!("{}_{axis}", j.name()));
        }
    }
    h.push("status".into());
    h
}

pub fn parse_annotation_csv<R: Read>(r: R) -> Result<Vec<AnnotationRow>, IoError> {
    let mut rdr = reader(r);
    let header = annotation_header();
    let expected: Vec<&str> = header.iter().map(String::as_str).collect();
    check_header(&mut rdr, &expected)?;
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = line_of(&rec);
        if rec.len() != header.len() {
            return Err(IoError::parse(
                line,
                format!("expected {} columns, found {}", header.len(), rec.len()),
            ));
        }
        let timestamp_us: u64 = num(&rec, 0, "timestamp_us")?;
        let frame = parse_frame(field(&rec, 1)?.trim()).ok_or_else(|| IoError::parse(line, "unknown frame tag"))?;
        let mut joints = [None; JOINT_COUNT];
        for (j, slot) in joints.iter_mut().enumerate() {
            let col = 2 + 3 * j;
            let empty = (0..3).map(|k| rec[col + k].trim().is_empty()).collect::<Vec<_>>();
            if empty.iter().all(|e| *e) {
                continue;
            }
            if empty.iter().any(|e| *e) {
                return Err(IoError::parse(
                    line,
                    format!("joint {} is partially empty", header[col]),
                ));
            }
            *slot = Some(Point3::new(
                finite(&rec, col, &header[col])?,
                finite(&rec, col + 1, &header[col + 1])?,
                finite(&rec, col + 2, &header[col + 2])?,
            ));
        }
        rows.push(AnnotationRow {
            timestamp_us,
            frame,
            joints,
            status: field(&rec, header.len() - 1)?.trim().to_string(),
        });
    }
    Ok(rows)
}

pub fn write_annotation_csv<W: Write>(w: W, rows: &[AnnotationRow]) -> Result<(), IoError> {
    let mut wtr = writer(w);
    wtr.write_record(annotation_header())?;
    for r in rows {
        let mut rec = Vec::with_capacity(2 + 3 * JOINT_COUNT + 1);
        rec.push(r.timestamp_us.to_string());
        rec.push(r.frame.to_string());
        for j in &r.joints {
            match j {
                Some(p) => rec.extend([p.x.to_string(), p.y.to_string(), p.z.to_string()]),
                None => rec.extend([String::new(), String::new(), String::new()]),
            }
        }
        rec.push(r.status.clone());
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_annotation_csv(path: &Path) -> Result<Vec<AnnotationRow>, IoError> {
    parse_annotation_csv(open(path)?)
}

pub fn write_annotation_file(path: &Path, rows: &[AnnotationRow]) -> Result<(), IoError> {
    write_annotation_csv(create(path)?, rows)
}

// ---------------------------------------------------------------- correspondences

pub const CORRESPONDENCE_HEADER: [&str; 5] = ["x", "y", "z", "u", "v"];

pub fn parse_correspondence_csv<R: Read>(r: R) -> Result<Vec<Correspondence>, IoError> {
    let mut rdr = reader(r);
    check_header(&mut rdr, &CORRESPONDENCE_HEADER)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let mut v = [0.0; 5];
        for (k, name) in CORRESPONDENCE_HEADER.iter().enumerate() {
            v[k] = finite(&rec, k, name)?;
        }
        out.push(Correspondence {
            tracker_point: Point3::new(v[0], v[1], v[2]),
            pixel: Point2::new(v[3], v[4]),
        });
    }
    Ok(out)
}

pub fn write_correspondence_csv<W: Write>(w: W, corrs: &[Correspondence]) -> Result<(), IoError> {
    let mut wtr = writer(w);
    wtr.write_record(CORRESPONDENCE_HEADER)?;
    for c in corrs {
        let p = c.tracker_point;
        wtr.write_record([p.x, p.y, p.z, c.pixel.x, c.pixel.y].map(|v| v.to_string()))?;
    }
    wtr.flush()?;
    Ok(())
}

// ---------------------------------------------------------------- sync

pub const EVENT_HEADER: [&str; 2] = ["timestamp_us", "id"];
pub const PAIR_HEADER: [&str; 4] = ["depth_id", "sensor_id", "gap_us", "extrapolated"];

pub fn parse_event_csv<R: Read>(r: R) -> Result<Vec<TimedEvent>, IoError> {
    let mut rdr = reader(r);
    check_header(&mut rdr, &EVENT_HEADER)?;
    rdr.records()
        .map(|rec| {
            let rec = rec?;
            Ok(TimedEvent::new(num(&rec, 0, "timestamp_us")?, num(&rec, 1, "id")?))
        })
        .collect()
}

pub fn write_event_csv<W: Write>(w: W, events: &[TimedEvent]) -> Result<(), IoError> {
    let mut wtr = writer(w);
    wtr.write_record(EVENT_HEADER)?;
    for e in events {
        wtr.write_record([e.timestamp_us.to_string(), e.id.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn parse_pair_csv<R: Read>(r: R) -> Result<Vec<Pair>, IoError> {
    let mut rdr = reader(r);
    check_header(&mut rdr, &PAIR_HEADER)?;
    rdr.records()
        .map(|rec| {
            let rec = rec?;
            Ok(Pair {
                depth_id: num(&rec, 0, "depth_id")?,
                sensor_id: num(&rec, 1, "sensor_id")?,
                gap_us: num(&rec, 2, "gap_us")?,
                extrapolated: num(&rec, 3, "extrapolated")?,
            })
        })
        .collect()
}

pub fn write_pair_csv<W: Write>(w: W, pairs: &[Pair]) -> Result<(), IoError> {
    let mut wtr = writer(w);
    wtr.write_record(PAIR_HEADER)?;
    for p in pairs {
        wtr.write_record([
            p.depth_id.to_string(),
            p.sensor_id.to_string(),
            p.gap_us.to_string(),
            p.extrapolated.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

// ---------------------------------------------------------------- schedule and curves

pub const SCHEDULE_HEADER: [&str; 6] = ["segment", "kind", "pose_a", "pose_b", "region", "frames"];
pub const CURVE_HEADER: [&str; 3] = ["eps_mm", "joints_within", "frames_within"];

pub fn write_schedule_csv<W: Write>(w: W, schedule: &CaptureSchedule) -> Result<(), IoError> {
    let mut wtr = writer(w);
    wtr.write_record(SCHEDULE_HEADER)?;
    for (i, s) in schedule.segments.iter().enumerate() {
        let (a, b) = match s.kind {
            SegmentKind::Schemed { a, b } => (a.0.to_string(), b.0.to_string()),
            _ => (String::new(), String::new()),
        };
        wtr.write_record([
            i.to_string(),
            s.kind.name().to_string(),
            a,
            b,
            s.region.map(|r| r.to_string()).unwrap_or_default(),
            s.frames.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_curve_csv<W: Write>(w: W, rows: &[CurveRow]) -> Result<(), IoError> {
    let mut wtr = writer(w);
    wtr.write_record(CURVE_HEADER)?;
    for r in rows {
        wtr.write_record([r.eps, r.joints_within, r.frames_within].map(|v| v.to_string()))?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn parse_curve_csv<R: Read>(r: R) -> Result<Vec<CurveRow>, IoError> {
    let mut rdr = reader(r);
    check_header(&mut rdr, &CURVE_HEADER)?;
    rdr.records()
        .map(|rec| {
            let rec = rec?;
            Ok(CurveRow {
                eps: finite(&rec, 0, "eps_mm")?,
                joints_within: finite(&rec, 1, "joints_within")?,
                frames_within: finite(&rec, 2, "frames_within")?,
            })
        })
        .collect()
}
