//! Seeded random generation of shapes, poses and rotations.
//!
//! Every generator takes an explicit RNG. Sessions derive per-frame and
//! per-segment generators from one 64-bit seed with [`frame_rng`] and
//! [`segment_rng`]: ChaCha8 seeded with the session seed, on stream `k`
//! for frame `k` and on stream `2^63 + s` for segment `s`.

use nalgebra::{Point3, Quaternion, UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::geometry::RigidTransform;
use crate::hand::{FingerAngles, FingerBones, HandPose, HandShape, JointLimits, FINGER_COUNT};

const SEGMENT_STREAM_BASE: u64 = 1 << 63;

pub fn frame_rng(seed: u64, frame: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(frame);
    rng
}

pub fn segment_rng(seed: u64, segment: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(SEGMENT_STREAM_BASE + segment);
    rng
}

/// Uniformly distributed rotation (normalized 4D Gaussian).
pub fn random_rotation<R: Rng + ?Sized>(rng: &mut R) -> UnitQuaternion<f64> {
    loop {
        let q = Quaternion::new(
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
        );
        if q.norm() > 1e-6 {
            return UnitQuaternion::from_quaternion(q);
        }
    }
}

pub fn random_unit_vector<R: Rng + ?Sized>(rng: &mut R) -> Vector3<f64> {
    loop {
        let v = Vector3::new(
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
        );
        let n: f64 = v.norm();
        if n > 1e-6 {
            return v / n;
        }
    }
}

/// Articulation angles uniform within `limits`, identity global placement.
pub fn random_articulation<R: Rng + ?Sized>(rng: &mut R, limits: &JointLimits) -> HandPose {
    let ranges = limits.ranges();
    let mut pose = HandPose::rest();
    for f in 0..FINGER_COUNT {
        let mut a = [0.0; 5];
        for (k, r) in ranges.iter().enumerate() {
            a[k] = if r.span() > 0.0 {
                rng.random_range(r.min..=r.max)
            } else {
                r.min
            };
        }
        pose.fingers[f] = FingerAngles::from_array(a);
    }
    pose
}

/// Uniform articulation, uniform rotation, translation uniform in a cube of
/// half-width `reach_mm`.
pub fn random_pose<R: Rng + ?Sized>(rng: &mut R, limits: &JointLimits, reach_mm: f64) -> HandPose {
    let pose = random_articulation(rng, limits);
    let t = if reach_mm > 0.0 {
        Vector3::new(
            rng.random_range(-reach_mm..reach_mm),
            rng.random_range(-reach_mm..reach_mm),
            rng.random_range(-reach_mm..reach_mm),
        )
    } else {
        Vector3::zeros()
    };
    pose.with_global(&RigidTransform::new(random_rotation(rng), t))
}

/// Reference hand scaled by 0.85–1.15 with per-bone ±10 % jitter, ±2 mm MCP
/// jitter (M3 kept on the palm x-axis), thickness ±15 %, nail fraction in
/// [0.35, 0.65] and an S6 mounting rotated up to 10°.
pub fn random_shape<R: Rng + ?Sized>(rng: &mut R) -> HandShape {
    let base = HandShape::reference();
    let s = rng.random_range(0.85..1.15);
    let mut palm = base.palm_points.map(|p| Point3::from(p.coords * s));
    for (i, p) in palm.iter_mut().enumerate().skip(1) {
        let jitter = Vector3::new(
            rng.random_range(-2.0..2.0),
            rng.random_range(-2.0..2.0),
            rng.random_range(-2.0..2.0),
        );
        *p += jitter;
        if i == 3 {
            p.y = 0.0;
            p.z = 0.0;
        }
    }
    let bones = base.bones.map(|b| {
        FingerBones::new(
            b.proximal * s * rng.random_range(0.9..1.1),
            b.middle * s * rng.random_range(0.9..1.1),
            b.distal * s * rng.random_range(0.9..1.1),
        )
    });
    let half_thickness = base.half_thickness.map(|r| r * rng.random_range(0.85..1.15));
    let nail_fraction = [(); FINGER_COUNT].map(|_| rng.random_range(0.35..0.65));
    let axis = random_unit_vector(rng);
    let angle = rng.random_range(0.0..10f64.to_radians());
    let t = base.s6_offset.translation * s
        + Vector3::new(
            rng.random_range(-3.0..3.0),
            rng.random_range(-3.0..3.0),
            rng.random_range(-3.0..3.0),
        );
    HandShape {
        palm_points: palm,
        bones,
        half_thickness,
        nail_fraction,
        s6_offset: RigidTransform::new(UnitQuaternion::from_scaled_axis(axis * angle), t),
    }
}
