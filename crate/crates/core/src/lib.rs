//! Automatic 21-joint hand annotation from six 6D magnetic sensors.
//!
//! Five sensors sit on the finger nails and one on the back of the palm.
//! Given a subject's measured [`HandShape`](hand::HandShape), the
//! [`annotate`] module recovers every joint in closed form. Around it:
//!
//! - [`hand`]: joint ids, hand shape, 31-DOF pose, validation.
//! - [`kinematics`]: forward kinematics and the sensor simulator used as
//!   ground truth.
//! - [`calibration`]: pinhole projection and PnP between tracker and camera.
//! - [`sync`]: nearest-timestamp pairing of depth and sensor streams.
//! - [`protocol`]: extremal poses, transition pairs, viewpoint regions and
//!   capture schedules.
//! - [`metrics`]: per-joint errors, joints/frames-within-ε curves, 9:1 splits.
//! - [`io`], [`session`], [`cli`]: file formats, synthetic sessions and the
//!   `handanno` command-line tool.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod annotate;
pub mod calibration;
pub mod cli;
pub mod geometry;
pub mod hand;
pub mod io;
pub mod kinematics;
pub mod metrics;
pub mod protocol;
pub mod sampling;
pub mod session;
pub mod sync;

pub use annotate::{annotate_frame, extract_angles, solve_pip, AnnotateOptions, AnnotationResult, AnnotationStatus};
pub use geometry::RigidTransform;
pub use hand::{Finger, Frame, HandPose, HandShape, JointId, JointLimits, Skeleton};
pub use kinematics::{forward_kinematics, simulate_sensors, SensorFrame, SensorId, SensorReading};
