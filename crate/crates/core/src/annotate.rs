//! Six-sensor hand annotation.
//!
//! The palm sensor `S6` fixes the wrist and the five MCPs. Each nail sensor
//! gives its finger's tip and DIP in closed form. The PIP is the remaining
//! unknown: it lies in the finger plane at fixed distances from the MCP and
//! the DIP, which leaves two mirror-image candidates across the line `MD`.

use std::collections::BTreeSet;
use std::fmt;

use nalgebra::{Point3, Vector3};

use crate::geometry::{fit_rigid, reject, wrap_angle, RigidTransform};
use crate::hand::{
    skeleton_consistency, validate_shape, ConsistencyTolerance, Finger, FingerAngles, Frame, HandPose, HandShape,
    JointId, NailGeometry, Skeleton, ValidationReport, FINGER_COUNT, JOINT_COUNT,
};
use crate::kinematics::{KinematicsError, SensorFrame, SensorId, SensorReading};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnnotateError {
    #[error(transparent)]
    MalformedFrame(#[from] KinematicsError),
    #[error("invalid hand shape: {0}")]
    InvalidShape(ValidationReport),
    #[error("inconsistent skeleton: {0}")]
    InconsistentSkeleton(ValidationReport),
    #[error("invalid tolerance {name} = {value}")]
    InvalidTolerance { name: &'static str, value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum PipError {
    /// `|MD|` lies outside `[|b_mp - b_pd|, b_mp + b_pd]` by more than the tolerance.
    #[error("infeasible PIP triangle: |MD| = {distance:.6} mm, reachable [{min:.6}, {max:.6}] mm")]
    Infeasible { distance: f64, min: f64, max: f64 },
    /// The side of `MD` on which the PIP lies cannot be decided.
    #[error("PIP side is undetermined")]
    Undetermined,
    #[error("nonpositive bone length")]
    BadLengths,
}

/// How to choose between the two mirror-image PIP candidates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SideRule {
    /// `P` and `T` on opposite sides of line `MD`. When `T` sits on the line
    /// the finger plane is the one containing `MD` closest to `tie_normal`,
    /// and `P` goes to the `tie_normal` side.
    OppositeTip { tie_normal: Vector3<f64> },
    /// `P` on the back-of-finger side of `MD`, i.e. along `e_MD × lateral`,
    /// where `lateral` is the finger-plane normal (`V3` of the nail sensor).
    /// Matches non-negative PIP flexion for every DIP angle.
    Dorsal { lateral: Vector3<f64> },
}

/// A solved PIP with diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipSolution {
    pub pip: Point3<f64>,
    /// `max(| |P-M| - b_mp |, | |P-D| - b_pd |)`, mm.
    pub residual: f64,
    /// `|MD|` was outside the reachable interval and was clamped.
    pub projected: bool,
    /// `T` was on line `MD`, so the side came from the tie-break direction.
    pub side_tie: bool,
    /// `T` and `P` end up strictly on opposite sides of line `MD`.
    pub tip_opposite: bool,
}

/// Circle–circle intersection in the plane through `M`, `D` (and `T`).
///
/// Triangle feasibility is checked against `tol`: a `|MD|` within `tol` of
/// the reachable interval is clamped to the tangent configuration, where
/// `P` is on the line through `M` and `D`. Distances within a few ulps of
/// the interval ends count as tangent.
pub fn solve_pip(
    mcp: &Point3<f64>,
    dip: &Point3<f64>,
    tip: &Point3<f64>,
    proximal: f64,
    middle: f64,
    rule: &SideRule,
    tol: f64,
) -> Result<PipSolution, PipError> {
    if !(proximal > 0.0 && middle > 0.0) {
        return Err(PipError::BadLengths);
    }
    let md = dip - mcp;
    let dist = md.norm();
    let (min, max) = ((proximal - middle).abs(), proximal + middle);
    if dist > max + tol || dist < min - tol || !dist.is_finite() {
        return Err(PipError::Infeasible {
            distance: dist,
            min,
            max,
        });
    }
    let tip_offset = if dist > 0.0 {
        reject(&(tip - mcp), &(md / dist))
    } else {
        tip - mcp
    };
    let residual_of = |p: &Point3<f64>| {
        ((p - mcp).norm() - proximal)
            .abs()
            .max(((p - dip).norm() - middle).abs())
    };
    let opposite = |p: &Point3<f64>, e: &Vector3<f64>| {
        let side_p = reject(&(p - mcp), e);
        side_p.dot(&tip_offset) < 0.0
    };

    // |MD| within rounding error of a tangency is treated as exact tangency
    let coord_scale = mcp.coords.amax().max(dip.coords.amax()).max(max);
    let snap = 16.0 * f64::EPSILON * coord_scale;
    if dist >= max - snap || dist <= min + snap {
        // tangent configuration: P on the line, no plane needed
        let e = md.try_normalize(1e-12).ok_or(PipError::Undetermined)?;
        let along = if dist >= max || proximal >= middle {
            proximal
        } else {
            -proximal
        };
        let pip = mcp + e * along;
        let projected = dist > max || dist < min;
        return Ok(PipSolution {
            pip,
            residual: residual_of(&pip),
            projected,
            side_tie: false,
            tip_opposite: false,
        });
    }

    let e = md / dist;
    let scale = dist.max((tip - mcp).norm());
    let (height_dir, side_tie) = match rule {
        SideRule::OppositeTip { tie_normal } => {
            if tip_offset.norm() > 1e-9 * scale {
                (-tip_offset.normalize(), false)
            } else {
                let h = reject(tie_normal, &e)
                    .try_normalize(1e-9)
                    .ok_or(PipError::Undetermined)?;
                (h, true)
            }
        }
        SideRule::Dorsal { lateral } => {
            let tie = tip_offset.norm() <= 1e-9 * scale;
            let mut n = if tie {
                *lateral
            } else {
                let n = e.cross(&tip_offset);
                if n.dot(lateral) < 0.0 {
                    -n
                } else {
                    n
                }
            };
            n = reject(&n, &e);
            let n = n.try_normalize(1e-9).ok_or(PipError::Undetermined)?;
            (e.cross(&n), tie)
        }
    };
    let a = (dist * dist + proximal * proximal - middle * middle) / (2.0 * dist);
    let h = (proximal * proximal - a * a).max(0.0).sqrt();
    let pip = mcp + e * a + height_dir * h;
    Ok(PipSolution {
        pip,
        residual: residual_of(&pip),
        projected: false,
        side_tie,
        tip_opposite: opposite(&pip, &e),
    })
}

/// Palm points `W, M1..M5` in the tracker frame from the palm sensor.
pub fn palm_from_s6(s6: &SensorReading, shape: &HandShape) -> [Point3<f64>; 6] {
    let palm = palm_pose_from_s6(s6, shape);
    shape.palm_points.map(|p| palm.apply_point(&p))
}

/// Palm-local to tracker transform implied by an `S6` reading.
pub fn palm_pose_from_s6(s6: &SensorReading, shape: &HandShape) -> RigidTransform {
    s6.pose().compose(&shape.s6_offset.inverse())
}

/// Tip and DIP of a finger from its nail sensor:
/// `T = L + l1 V1 + r V2`, `D = L - l2 V1 + r V2`.
pub fn tip_dip_from_nail(reading: &SensorReading, nail: &NailGeometry) -> (Point3<f64>, Point3<f64>) {
    let (v1, v2, _) = reading.axes();
    let base = reading.position + v2 * nail.half_thickness;
    (base + v1 * nail.tip_offset(), base - v1 * nail.dip_offset())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnotateOptions {
    /// Slack on the PIP triangle before a finger fails, mm.
    pub feasibility: f64,
    /// Largest bone-length residual still counted as exact, mm.
    pub residual: f64,
}

impl Default for AnnotateOptions {
    fn default() -> Self {
        AnnotateOptions {
            feasibility: 2.0,
            residual: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FingerDiagnostics {
    /// Circle-intersection residual; `None` when the finger failed.
    pub residual: Option<f64>,
    pub projected: bool,
    /// Whether `T` and `P` came out on opposite sides of `MD`.
    pub tip_opposite: bool,
    pub side_tie: bool,
    pub error: Option<PipError>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AnnotationStatus {
    Exact,
    Projected,
    Failed(BTreeSet<Finger>),
}

impl AnnotationStatus {
    pub fn is_exact(&self) -> bool {
        matches!(self, AnnotationStatus::Exact)
    }
}

impl fmt::Display for AnnotationStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AnnotationStatus::Exact => f.write_str("exact"),
            AnnotationStatus::Projected => f.write_str("projected"),
            AnnotationStatus::Failed(set) => {
                f.write_str("failed-")?;
                for finger in set {
                    write!(f, "{}", finger.number())?;
                }
                Ok(())
            }
        }
    }
}

/// Joints of one annotated frame. A failed finger leaves its PIP, DIP and
/// tip unset; the palm points are always present.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationResult {
    pub timestamp_us: u64,
    pub frame: Frame,
    pub joints: [Option<Point3<f64>>; JOINT_COUNT],
    pub fingers: [FingerDiagnostics; FINGER_COUNT],
    pub status: AnnotationStatus,
}

impl AnnotationResult {
    /// The full skeleton, if no finger failed.
    pub fn skeleton(&self) -> Option<Skeleton> {
        let mut joints = [Point3::origin(); JOINT_COUNT];
        for (dst, src) in joints.iter_mut().zip(self.joints.iter()) {
            *dst = (*src)?;
        }
        Some(Skeleton::new(self.frame, joints))
    }

    pub fn joint(&self, id: JointId) -> Option<Point3<f64>> {
        self.joints[id.index()]
    }

    pub fn present_count(&self) -> usize {
        self.joints.iter().filter(|j| j.is_some()).count()
    }
}

/// Annotates one frame in the tracker frame.
///
/// Fingers are solved independently: a finger whose PIP triangle is
/// infeasible beyond `opts.feasibility` is reported in the status and the
/// rest of the hand is still produced.
pub fn annotate_frame(
    frame: &SensorFrame,
    shape: &HandShape,
    opts: &AnnotateOptions,
) -> Result<AnnotationResult, AnnotateError> {
    for (name, value) in [("feasibility", opts.feasibility), ("residual", opts.residual)] {
        if !(value > 0.0) {
            return Err(AnnotateError::InvalidTolerance { name, value });
        }
    }
    frame.validate()?;
    let report = validate_shape(shape);
    if !report.is_ok() {
        return Err(AnnotateError::InvalidShape(report));
    }
    let s6 = frame.reading(SensorId::PALM).expect("validated frame");
    let palm = palm_from_s6(s6, shape);
    let mut joints = [None; JOINT_COUNT];
    joints[JointId::WRIST.index()] = Some(palm[0]);

    let blank = FingerDiagnostics {
        residual: None,
        projected: false,
        tip_opposite: false,
        side_tie: false,
        error: None,
    };
    let mut fingers = [blank; FINGER_COUNT];
    let mut failed = BTreeSet::new();
    let mut any_projected = false;
    for f in Finger::ALL {
        let m = palm[f.number()];
        joints[JointId::mcp(f).index()] = Some(m);
        let nail = frame.reading(SensorId::nail(f)).expect("validated frame");
        let (t, d) = tip_dip_from_nail(nail, &shape.nail(f));
        let (_, _, lateral) = nail.axes();
        let b = shape.bones[f.index()];
        let diag = &mut fingers[f.index()];
        match solve_pip(
            &m,
            &d,
            &t,
            b.proximal,
            b.middle,
            &SideRule::Dorsal { lateral },
            opts.feasibility,
        ) {
            Ok(sol) => {
                // clamping by less than the residual tolerance is rounding, not projection
                let projected = sol.residual >= opts.residual;
                any_projected |= projected;
                *diag = FingerDiagnostics {
                    residual: Some(sol.residual),
                    projected,
                    tip_opposite: sol.tip_opposite,
                    side_tie: sol.side_tie,
                    error: None,
                };
                joints[JointId::pip(f).index()] = Some(sol.pip);
                joints[JointId::dip(f).index()] = Some(d);
                joints[JointId::tip(f).index()] = Some(t);
            }
            Err(e) => {
                diag.error = Some(e);
                failed.insert(f);
            }
        }
    }
    let status = if !failed.is_empty() {
        AnnotationStatus::Failed(failed)
    } else if any_projected {
        AnnotationStatus::Projected
    } else {
        AnnotationStatus::Exact
    };
    Ok(AnnotationResult {
        timestamp_us: frame.timestamp_us,
        frame: Frame::Tracker,
        joints,
        fingers,
        status,
    })
}

/// Recovers the 31 pose parameters of a consistent skeleton.
///
/// The global placement is the least-squares rigid fit of the shape's palm
/// points. Per finger, abduction and flexion come from the proximal bone
/// direction, twist from the finger-plane normal, and PIP/DIP flexion from
/// the in-plane segment directions. Of the equivalent decompositions the one
/// with `|abduction| <= 90°` and `|twist| <= 90°` is returned; a straight
/// finger, whose twist is unobservable, gets twist zero.
pub fn extract_angles(
    skel: &Skeleton,
    shape: &HandShape,
    tol: &ConsistencyTolerance,
) -> Result<HandPose, AnnotateError> {
    let report = validate_shape(shape);
    if !report.is_ok() {
        return Err(AnnotateError::InvalidShape(report));
    }
    let report = skeleton_consistency(skel, shape, tol);
    if !report.is_ok() {
        return Err(AnnotateError::InconsistentSkeleton(report));
    }
    let global = fit_rigid(&shape.palm_points, &skel.palm_points())
        .ok_or_else(|| AnnotateError::InconsistentSkeleton(ValidationReport::default()))?
        .canonical();
    let to_local = global.inverse();
    let mut pose = HandPose::rest().with_global(&global);
    for f in Finger::ALL {
        let base = shape.finger_base(f).expect("validated shape");
        let to_base = base.inverse();
        let chain = skel.chain(f).map(|p| to_local.apply_point(&p));
        let [m, p, d, t] = chain;
        let u = (to_base * (p - m)).normalize();
        let d2 = (to_base * (d - p)).normalize();
        let d3 = (to_base * (t - d)).normalize();

        let mut abduction = u.y.atan2(u.x);
        let mut flexion = (-u.z).atan2(u.x.hypot(u.y));
        if abduction.abs() > std::f64::consts::FRAC_PI_2 {
            abduction = wrap_angle(abduction + std::f64::consts::PI);
            flexion = wrap_angle(std::f64::consts::PI - flexion);
        }
        // lateral axis before twist
        let y0 = Vector3::new(-abduction.sin(), abduction.cos(), 0.0);
        let candidates = [u.cross(&d2), u.cross(&d3), d2.cross(&d3)];
        let best = candidates
            .iter()
            .max_by(|a, b| a.norm().total_cmp(&b.norm()))
            .copied()
            .unwrap_or_default();
        let lateral = if best.norm() > 1e-12 {
            let n = reject(&best, &u).normalize();
            if n.dot(&y0) < 0.0 {
                -n
            } else {
                n
            }
        } else {
            y0
        };
        let twist = lateral.dot(&u.cross(&y0)).atan2(lateral.dot(&y0));
        let dorsal = u.cross(&lateral);
        let pip = (-d2.dot(&dorsal)).atan2(d2.dot(&u));
        let cumulative = (-d3.dot(&dorsal)).atan2(d3.dot(&u));
        pose.fingers[f.index()] = FingerAngles {
            twist,
            flexion,
            abduction,
            pip,
            dip: wrap_angle(cumulative - pip),
        };
    }
    Ok(pose)
}
