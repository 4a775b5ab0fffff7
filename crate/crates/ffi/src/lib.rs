//! C ABI for `handanno`.
//!
//! Every fallible function returns an [`HaStatus`]; `HA_OK` is zero. On
//! failure a message is kept per thread and can be read with
//! [`ha_last_error`]. Hand shapes are opaque handles created by
//! [`ha_shape_reference`] or [`ha_shape_from_toml`] and released with
//! [`ha_shape_free`]. All other data crosses the boundary as plain
//! `#[repr(C)]` structs or caller-owned arrays.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use handanno::annotate::{self, AnnotateOptions, AnnotationStatus, SideRule};
use handanno::calibration::{self, CameraIntrinsics, Correspondence};
use handanno::hand::{FingerAngles, Frame, HandPose, HandShape, Skeleton, FINGER_COUNT, JOINT_COUNT};
use handanno::kinematics::{SensorFrame, SensorId, SensorReading, SENSOR_COUNT};
use handanno::metrics::{self, ErrorRecord};
use handanno::sync::{self, TimedEvent};
use handanno::{protocol, RigidTransform};
use nalgebra::{Point2, Point3, Quaternion, UnitQuaternion, Vector3};

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidShape = 3,
    InvalidPose = 4,
    Infeasible = 5,
    Degenerate = 6,
    NotConverged = 7,
    OutOfDomain = 8,
    Parse = 9,
    Panic = 10,
}

/// Outcome of annotating one frame.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HaAnnotation {
    Exact = 0,
    Projected = 1,
    Failed = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HaVec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HaQuat {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Default for HaQuat {
    fn default() -> Self {
        HaQuat {
            w: 1.0,
            x: 0.0,
            y: 0.0,
            z: 0.0,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HaTransform {
    pub rotation: HaQuat,
    pub translation: HaVec3,
}

/// Twist, flexion, abduction, PIP and DIP angles of one finger, radians.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HaFingerAngles {
    pub twist: f64,
    pub flexion: f64,
    pub abduction: f64,
    pub pip: f64,
    pub dip: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HaPose {
    pub global: HaTransform,
    pub fingers: [HaFingerAngles; 5],
}

/// Joints in the order W, then MCP, PIP, DIP, TIP of thumb to little finger.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HaSkeleton {
    pub joints: [HaVec3; 21],
}

/// Sensor `i` of a frame is S(i+1): five nails, thumb first, then the palm.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HaSensor {
    pub position: HaVec3,
    pub orientation: HaQuat,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HaIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

/// Opaque hand shape.
pub struct HaShape(HandShape);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let s = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(s).unwrap_or_default());
}

fn fail(status: HaStatus, msg: impl Into<String>) -> HaStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> HaStatus) -> HaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => {
            if s == HaStatus::Ok {
                set_error("");
            }
            s
        }
        Err(_) => fail(HaStatus::Panic, "internal panic"),
    }
}

macro_rules! deref {
    ($p:expr) => {
        match unsafe { $p.as_ref() } {
            Some(v) => v,
            None => return fail(HaStatus::NullPointer, concat!("null pointer: ", stringify!($p))),
        }
    };
}

macro_rules! deref_mut {
    ($p:expr) => {
        match unsafe { $p.as_mut() } {
            Some(v) => v,
            None => return fail(HaStatus::NullPointer, concat!("null pointer: ", stringify!($p))),
        }
    };
}

unsafe fn slice<'a, T>(p: *const T, n: usize) -> Option<&'a [T]> {
    if n == 0 {
        Some(&[])
    } else if p.is_null() {
        None
    } else {
        Some(std::slice::from_raw_parts(p, n))
    }
}

unsafe fn slice_mut<'a, T>(p: *mut T, n: usize) -> Option<&'a mut [T]> {
    if n == 0 {
        Some(&mut [])
    } else if p.is_null() {
        None
    } else {
        Some(std::slice::from_raw_parts_mut(p, n))
    }
}

impl From<Point3<f64>> for HaVec3 {
    fn from(p: Point3<f64>) -> Self {
        HaVec3 { x: p.x, y: p.y, z: p.z }
    }
}

impl HaVec3 {
    fn point(&self) -> Point3<f64> {
        Point3::new(self.x, self.y, self.z)
    }

    fn vector(&self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }
}

impl HaQuat {
    fn unit(&self) -> Option<UnitQuaternion<f64>> {
        let q = Quaternion::new(self.w, self.x, self.y, self.z);
        let n = q.norm();
        (n.is_finite() && n > 1e-12).then(|| UnitQuaternion::from_quaternion(q))
    }

    fn from_unit(q: &UnitQuaternion<f64>) -> Self {
        HaQuat {
            w: q.w,
            x: q.i,
            y: q.j,
            z: q.k,
        }
    }
}

impl HaTransform {
    fn to_rigid(self) -> Option<RigidTransform> {
        Some(RigidTransform::new(self.rotation.unit()?, self.translation.vector()))
    }

    fn from_rigid(x: &RigidTransform) -> Self {
        HaTransform {
            rotation: HaQuat::from_unit(&x.rotation),
            translation: HaVec3 {
                x: x.translation.x,
                y: x.translation.y,
                z: x.translation.z,
            },
        }
    }
}

/// Version string of the library, static storage.
#[no_mangle]
pub extern "C" fn ha_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message of the last failed call on this thread; empty after a success.
/// Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn ha_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// The built-in reference hand. Never null.
#[no_mangle]
pub extern "C" fn ha_shape_reference() -> *mut HaShape {
    Box::into_raw(Box::new(HaShape(HandShape::reference())))
}

/// Parses a shape from NUL-terminated TOML text.
#[no_mangle]
pub unsafe extern "C" fn ha_shape_from_toml(text: *const c_char, out: *mut *mut HaShape) -> HaStatus {
    guard(|| {
        let out = deref_mut!(out);
        *out = std::ptr::null_mut();
        if text.is_null() {
            return fail(HaStatus::NullPointer, "null pointer: text");
        }
        let Ok(s) = CStr::from_ptr(text).to_str() else {
            return fail(HaStatus::Parse, "shape text is not UTF-8");
        };
        match handanno::io::shape_from_str(s) {
            Ok(shape) => {
                *out = Box::into_raw(Box::new(HaShape(shape)));
                HaStatus::Ok
            }
            Err(e @ handanno::io::IoError::Invalid { .. }) => fail(HaStatus::InvalidShape, e.to_string()),
            Err(e) => fail(HaStatus::Parse, e.to_string()),
        }
    })
}

/// Releases a shape; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn ha_shape_free(shape: *mut HaShape) {
    if !shape.is_null() {
        drop(Box::from_raw(shape));
    }
}

fn pose_from_c(p: &HaPose) -> HandPose {
    let mut pose = HandPose::rest();
    let r = p.global.rotation;
    pose.rotation = Quaternion::new(r.w, r.x, r.y, r.z);
    pose.translation = p.global.translation.vector();
    for (dst, src) in pose.fingers.iter_mut().zip(&p.fingers) {
        *dst = FingerAngles {
            twist: src.twist,
            flexion: src.flexion,
            abduction: src.abduction,
            pip: src.pip,
            dip: src.dip,
        };
    }
    pose
}

fn skeleton_to_c(s: &Skeleton) -> HaSkeleton {
    HaSkeleton {
        joints: s.joints.map(HaVec3::from),
    }
}

/// Joint positions of `pose` in the tracker frame.
#[no_mangle]
pub unsafe extern "C" fn ha_forward_kinematics(
    shape: *const HaShape,
    pose: *const HaPose,
    out: *mut HaSkeleton,
) -> HaStatus {
    guard(|| {
        let (shape, pose, out) = (deref!(shape), deref!(pose), deref_mut!(out));
        match handanno::forward_kinematics(&shape.0, &pose_from_c(pose)) {
            Ok(s) => {
                *out = skeleton_to_c(&s);
                HaStatus::Ok
            }
            Err(e @ handanno::kinematics::KinematicsError::InvalidShape(_)) => {
                fail(HaStatus::InvalidShape, e.to_string())
            }
            Err(e) => fail(HaStatus::InvalidPose, e.to_string()),
        }
    })
}

/// The six sensor readings `skeleton` produces, written to `out[0..6]`.
#[no_mangle]
pub unsafe extern "C" fn ha_simulate_sensors(
    shape: *const HaShape,
    skeleton: *const HaSkeleton,
    out: *mut HaSensor,
) -> HaStatus {
    guard(|| {
        let (shape, skel) = (deref!(shape), deref!(skeleton));
        let Some(out) = slice_mut(out, SENSOR_COUNT) else {
            return fail(HaStatus::NullPointer, "null pointer: out");
        };
        let s = Skeleton::new(Frame::Tracker, skel.joints.map(|j| j.point()));
        match handanno::simulate_sensors(&shape.0, &s, 0) {
            Ok(frame) => {
                for r in &frame.readings {
                    out[r.id.index()] = HaSensor {
                        position: r.position.into(),
                        orientation: HaQuat::from_unit(&r.orientation),
                    };
                }
                HaStatus::Ok
            }
            Err(e) => fail(HaStatus::InvalidPose, e.to_string()),
        }
    })
}

/// Annotates six readings (`sensors[0..6]`). Joints of failed fingers are
/// set to NaN and flagged 0 in `present[0..21]` (which may be null).
/// `failed_mask` bit `i` is set when finger `i` failed.
#[no_mangle]
pub unsafe extern "C" fn ha_annotate(
    shape: *const HaShape,
    sensors: *const HaSensor,
    feasibility_mm: f64,
    out: *mut HaSkeleton,
    present: *mut u8,
    status: *mut HaAnnotation,
    failed_mask: *mut u32,
) -> HaStatus {
    guard(|| {
        let (shape, out, status) = (deref!(shape), deref_mut!(out), deref_mut!(status));
        let Some(input) = slice(sensors, SENSOR_COUNT) else {
            return fail(HaStatus::NullPointer, "null pointer: sensors");
        };
        let mut readings = Vec::with_capacity(SENSOR_COUNT);
        for (i, s) in input.iter().enumerate() {
            let Some(q) = s.orientation.unit() else {
                return fail(
                    HaStatus::InvalidArgument,
                    format!("sensor S{} has a zero quaternion", i + 1),
                );
            };
            readings.push(SensorReading::new(
                SensorId::from_index(i).expect("six sensors"),
                s.position.point(),
                q,
            ));
        }
        let frame = SensorFrame {
            timestamp_us: 0,
            readings,
        };
        let opts = AnnotateOptions {
            feasibility: feasibility_mm,
            ..AnnotateOptions::default()
        };
        let r = match annotate::annotate_frame(&frame, &shape.0, &opts) {
            Ok(r) => r,
            Err(e) => return fail(HaStatus::InvalidArgument, e.to_string()),
        };
        for (i, j) in r.joints.iter().enumerate() {
            out.joints[i] = j.map(HaVec3::from).unwrap_or(HaVec3 {
                x: f64::NAN,
                y: f64::NAN,
                z: f64::NAN,
            });
        }
        if let Some(p) = slice_mut(present, if present.is_null() { 0 } else { JOINT_COUNT }) {
            for (dst, j) in p.iter_mut().zip(&r.joints) {
                *dst = j.is_some() as u8;
            }
        }
        let mut mask = 0u32;
        *status = match &r.status {
            AnnotationStatus::Exact => HaAnnotation::Exact,
            AnnotationStatus::Projected => HaAnnotation::Projected,
            AnnotationStatus::Failed(set) => {
                for f in set {
                    mask |= 1 << f.index();
                }
                HaAnnotation::Failed
            }
        };
        if let Some(m) = failed_mask.as_mut() {
            *m = mask;
        }
        HaStatus::Ok
    })
}

/// PIP joint from MCP, DIP and TIP, with `P` on the opposite side of line
/// `MD` from `T`. `tie_normal` orients the solution when `T` lies on the
/// line.
#[no_mangle]
pub unsafe extern "C" fn ha_solve_pip(
    mcp: HaVec3,
    dip: HaVec3,
    tip: HaVec3,
    proximal: f64,
    middle: f64,
    tie_normal: HaVec3,
    tolerance_mm: f64,
    out: *mut HaVec3,
) -> HaStatus {
    guard(|| {
        let out = deref_mut!(out);
        let rule = SideRule::OppositeTip {
            tie_normal: tie_normal.vector(),
        };
        match annotate::solve_pip(
            &mcp.point(),
            &dip.point(),
            &tip.point(),
            proximal,
            middle,
            &rule,
            tolerance_mm,
        ) {
            Ok(s) => {
                *out = s.pip.into();
                HaStatus::Ok
            }
            Err(e @ annotate::PipError::Infeasible { .. }) => fail(HaStatus::Infeasible, e.to_string()),
            Err(e @ annotate::PipError::BadLengths) => fail(HaStatus::InvalidArgument, e.to_string()),
            Err(e) => fail(HaStatus::Degenerate, e.to_string()),
        }
    })
}

/// Tracker-to-camera transform from `n` points (`points[3n]`, xyz) and
/// pixels (`pixels[2n]`, uv).
#[no_mangle]
pub unsafe extern "C" fn ha_solve_pnp(
    points: *const f64,
    pixels: *const f64,
    n: usize,
    intrinsics: *const HaIntrinsics,
    out: *mut HaTransform,
    rms_px: *mut f64,
) -> HaStatus {
    guard(|| {
        let (k, out) = (deref!(intrinsics), deref_mut!(out));
        let (Some(pts), Some(px)) = (slice(points, 3 * n), slice(pixels, 2 * n)) else {
            return fail(HaStatus::NullPointer, "null pointer: points or pixels");
        };
        let corrs: Vec<Correspondence> = (0..n)
            .map(|i| Correspondence {
                tracker_point: Point3::new(pts[3 * i], pts[3 * i + 1], pts[3 * i + 2]),
                pixel: Point2::new(px[2 * i], px[2 * i + 1]),
            })
            .collect();
        let k = CameraIntrinsics {
            fx: k.fx,
            fy: k.fy,
            cx: k.cx,
            cy: k.cy,
            width: k.width,
            height: k.height,
        };
        use calibration::CalibrationError as E;
        match calibration::solve_pnp(&corrs, &k) {
            Ok(sol) => {
                *out = HaTransform::from_rigid(&sol.transform);
                if let Some(r) = rms_px.as_mut() {
                    *r = sol.rms;
                }
                HaStatus::Ok
            }
            Err(e @ E::RankDeficient { .. }) => fail(HaStatus::Degenerate, e.to_string()),
            Err(ref e @ E::NotConverged { ref best, rms, .. }) => {
                *out = HaTransform::from_rigid(best);
                if let Some(r) = rms_px.as_mut() {
                    *r = rms;
                }
                fail(HaStatus::NotConverged, e.to_string())
            }
            Err(e) => fail(HaStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Applies a transform to a point.
#[no_mangle]
pub unsafe extern "C" fn ha_transform_point(x: *const HaTransform, p: HaVec3, out: *mut HaVec3) -> HaStatus {
    guard(|| {
        let (x, out) = (deref!(x), deref_mut!(out));
        let Some(r) = x.to_rigid() else {
            return fail(HaStatus::InvalidArgument, "zero quaternion");
        };
        *out = r.apply_point(&p.point()).into();
        HaStatus::Ok
    })
}

/// Pairs each of `n` depth timestamps with the nearest of `m` sensor
/// timestamps. Writes the sensor index and gap (µs) per depth event.
#[no_mangle]
pub unsafe extern "C" fn ha_align(
    depth_us: *const u64,
    n: usize,
    sensor_us: *const u64,
    m: usize,
    out_index: *mut u64,
    out_gap_us: *mut u64,
) -> HaStatus {
    guard(|| {
        let (Some(d), Some(s)) = (slice(depth_us, n), slice(sensor_us, m)) else {
            return fail(HaStatus::NullPointer, "null pointer: timestamps");
        };
        let (Some(oi), Some(og)) = (slice_mut(out_index, n), slice_mut(out_gap_us, n)) else {
            return fail(HaStatus::NullPointer, "null pointer: outputs");
        };
        let ev = |ts: &[u64]| {
            ts.iter()
                .enumerate()
                .map(|(i, &t)| TimedEvent::new(t, i as u64))
                .collect::<Vec<_>>()
        };
        match sync::align(&ev(d), &ev(s)) {
            Ok(pairs) => {
                for (k, p) in pairs.iter().enumerate() {
                    oi[k] = p.sensor_id;
                    og[k] = p.gap_us;
                }
                HaStatus::Ok
            }
            Err(e) => fail(HaStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Viewpoint region (0..16) of a palm-local unit direction.
#[no_mangle]
pub unsafe extern "C" fn ha_viewpoint_region(direction: HaVec3, out: *mut u32) -> HaStatus {
    guard(|| {
        let out = deref_mut!(out);
        match protocol::viewpoint_region(&direction.vector()) {
            Ok(r) => {
                *out = r as u32;
                HaStatus::Ok
            }
            Err(e) => fail(HaStatus::OutOfDomain, e.to_string()),
        }
    })
}

unsafe fn records(errors: *const f64, frames: usize, joints: usize) -> Option<Vec<ErrorRecord>> {
    let e = slice(errors, frames.checked_mul(joints)?)?;
    Some(
        (0..frames)
            .map(|f| ErrorRecord::new(f as u64, e[f * joints..(f + 1) * joints].to_vec()))
            .collect(),
    )
}

/// Fraction of the `frames × joints` errors (row-major) that are `<= eps`.
#[no_mangle]
pub unsafe extern "C" fn ha_joints_within(
    errors: *const f64,
    frames: usize,
    joints: usize,
    eps: f64,
    out: *mut f64,
) -> HaStatus {
    guard(|| {
        let out = deref_mut!(out);
        let Some(r) = records(errors, frames, joints) else {
            return fail(HaStatus::NullPointer, "null pointer: errors");
        };
        match metrics::joints_within(&r, eps) {
            Ok(v) => {
                *out = v;
                HaStatus::Ok
            }
            Err(e) => fail(HaStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Fraction of frames whose worst error is `<= eps`.
#[no_mangle]
pub unsafe extern "C" fn ha_frames_within(
    errors: *const f64,
    frames: usize,
    joints: usize,
    eps: f64,
    out: *mut f64,
) -> HaStatus {
    guard(|| {
        let out = deref_mut!(out);
        let Some(r) = records(errors, frames, joints) else {
            return fail(HaStatus::NullPointer, "null pointer: errors");
        };
        match metrics::frames_within(&r, eps) {
            Ok(v) => {
                *out = v;
                HaStatus::Ok
            }
            Err(e) => fail(HaStatus::InvalidArgument, e.to_string()),
        }
    })
}

const _: () = assert!(FINGER_COUNT == 5 && JOINT_COUNT == 21 && SENSOR_COUNT == 6);
