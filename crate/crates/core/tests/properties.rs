use std::collections::HashSet;

use handanno::annotate::{annotate_frame, extract_angles, AnnotateOptions};
use handanno::geometry::{rotation_distance, RigidTransform};
use handanno::hand::{ConsistencyTolerance, Frame, JointId, JointLimits};
use handanno::io::{self, AnnotationRow};
use handanno::kinematics::{forward_kinematics, simulate_sensors};
use handanno::metrics::{frames_within, joint_errors, joints_within, split_9_1, ErrorRecord};
use handanno::sampling::{random_pose, random_rotation, random_shape};
use handanno::sync::{align, TimedEvent};
use nalgebra::{Point3, Vector3};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rigid(seed: u64) -> RigidTransform {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t = Vector3::new(
        rng.random_range(-500.0..500.0),
        rng.random_range(-500.0..500.0),
        rng.random_range(-500.0..500.0),
    );
    RigidTransform::new(random_rotation(&mut rng), t)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn annotation_recovers_every_joint(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shape = random_shape(&mut rng);
        let pose = random_pose(&mut rng, &JointLimits::default(), 300.0);
        let skel = forward_kinematics(&shape, &pose).unwrap();
        let frame = simulate_sensors(&shape, &skel, 0).unwrap();
        let r = annotate_frame(&frame, &shape, &AnnotateOptions::default()).unwrap();
        prop_assert!(r.status.is_exact());
        prop_assert!(r.skeleton().unwrap().max_distance(&skel) < 1e-6);
    }

    #[test]
    fn extracted_angles_reproduce_skeleton(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shape = random_shape(&mut rng);
        let pose = random_pose(&mut rng, &JointLimits::default(), 300.0);
        let skel = forward_kinematics(&shape, &pose).unwrap();
        let back = extract_angles(&skel, &shape, &ConsistencyTolerance::default()).unwrap();
        let again = forward_kinematics(&shape, &back).unwrap();
        prop_assert!(again.max_distance(&skel) < 1e-6);
    }

    #[test]
    fn rigid_transform_group_laws(a in any::<u64>(), b in any::<u64>(), c in any::<u64>(), p in prop::array::uniform3(-1e3..1e3f64)) {
        let (x, y, z) = (rigid(a), rigid(b), rigid(c));
        let p = Point3::from(p);
        let lhs = x.compose(&y).compose(&z).apply_point(&p);
        let rhs = x.compose(&y.compose(&z)).apply_point(&p);
        prop_assert!((lhs - rhs).norm() < 1e-9);
        prop_assert!((x.compose(&y).apply_point(&p) - x.apply_point(&y.apply_point(&p))).norm() < 1e-9);
        let id = x.compose(&x.inverse());
        prop_assert!((id.apply_point(&p) - p).norm() < 1e-9);
        prop_assert!(rotation_distance(&id.rotation, &RigidTransform::identity().rotation) < 1e-12);
    }

    #[test]
    fn joint_errors_are_rigid_invariant(seed in any::<u64>(), xs in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shape = random_shape(&mut rng);
        let limits = JointLimits::default();
        let gt = forward_kinematics(&shape, &random_pose(&mut rng, &limits, 100.0)).unwrap();
        let est = forward_kinematics(&shape, &random_pose(&mut rng, &limits, 100.0)).unwrap();
        let x = rigid(xs);
        let subset: Vec<JointId> = JointId::all().collect();
        let e0 = joint_errors(&est, &gt, &subset).unwrap();
        let e1 = joint_errors(&est.transformed(&x, Frame::Camera), &gt.transformed(&x, Frame::Camera), &subset).unwrap();
        for (a, b) in e0.iter().zip(&e1) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn transform_toml_round_trip_is_bit_exact(seed in any::<u64>()) {
        let x = rigid(seed).canonical();
        let back = io::transform_from_str(&io::transform_to_string(&x)).unwrap();
        prop_assert_eq!(back.rotation.into_inner(), x.rotation.into_inner());
        prop_assert_eq!(back.translation, x.translation);
    }

    #[test]
    fn shape_toml_round_trip_is_bit_exact(seed in any::<u64>()) {
        let shape = random_shape(&mut ChaCha8Rng::seed_from_u64(seed));
        let back = io::shape_from_str(&io::shape_to_string(&shape)).unwrap();
        prop_assert_eq!(io::shape_to_string(&back), io::shape_to_string(&shape));
    }

    #[test]
    fn sensor_and_annotation_csv_round_trip(seed in any::<u64>(), ts in any::<u32>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shape = random_shape(&mut rng);
        let skel = forward_kinematics(&shape, &random_pose(&mut rng, &JointLimits::default(), 300.0)).unwrap();
        let frames = vec![simulate_sensors(&shape, &skel, ts as u64).unwrap()];
        let mut buf = Vec::new();
        io::write_sensor_csv(&mut buf, &frames).unwrap();
        let back = io::parse_sensor_csv(buf.as_slice()).unwrap();
        prop_assert_eq!(back.len(), 1);
        for (a, b) in back[0].readings.iter().zip(&frames[0].readings) {
            prop_assert_eq!(a.id, b.id);
            prop_assert_eq!(a.position, b.position);
            prop_assert_eq!(a.orientation.into_inner(), b.orientation.into_inner());
        }
        let rows = vec![AnnotationRow::from_skeleton(ts as u64, &skel)];
        let mut buf = Vec::new();
        io::write_annotation_csv(&mut buf, &rows).unwrap();
        prop_assert_eq!(io::parse_annotation_csv(buf.as_slice()).unwrap(), rows);
    }

    #[test]
    fn alignment_picks_a_nearest_sensor_event(
        depth in prop::collection::btree_set(0u64..1_000_000, 1..40),
        sensors in prop::collection::btree_set(0u64..1_000_000, 1..200),
    ) {
        let d: Vec<TimedEvent> = depth.iter().enumerate().map(|(i, &t)| TimedEvent::new(t, i as u64)).collect();
        let s: Vec<TimedEvent> = sensors.iter().enumerate().map(|(i, &t)| TimedEvent::new(t, i as u64)).collect();
        let pairs = align(&d, &s).unwrap();
        prop_assert_eq!(pairs.len(), d.len());
        for (p, de) in pairs.iter().zip(&d) {
            let best = s.iter().map(|e| e.timestamp_us.abs_diff(de.timestamp_us)).min().unwrap();
            // ties resolve to the earliest event at the minimal gap
            let first = s.iter().find(|e| e.timestamp_us.abs_diff(de.timestamp_us) == best).unwrap();
            prop_assert_eq!(p.gap_us, best);
            prop_assert_eq!(p.sensor_id, first.id);
            let outside = de.timestamp_us < s[0].timestamp_us || de.timestamp_us > s[s.len() - 1].timestamp_us;
            prop_assert_eq!(p.extrapolated, outside);
        }
    }

    #[test]
    fn split_partitions_ids(ids in prop::collection::btree_set(any::<u64>(), 0..300), seed in any::<u64>()) {
        let ids: Vec<u64> = ids.into_iter().collect();
        let (train, val) = split_9_1(&ids, seed);
        prop_assert_eq!((train.clone(), val.clone()), split_9_1(&ids, seed));
        let t: HashSet<u64> = train.iter().copied().collect();
        let v: HashSet<u64> = val.iter().copied().collect();
        prop_assert!(t.is_disjoint(&v));
        prop_assert_eq!(t.len() + v.len(), ids.len());
        prop_assert_eq!(val.len(), (ids.len() as f64 / 10.0).round() as usize);
        prop_assert!(t.union(&v).all(|id| ids.binary_search(id).is_ok()));
    }

    #[test]
    fn curves_are_monotone_and_ordered(
        errs in prop::collection::vec(prop::collection::vec(0.0..100.0f64, 3), 1..30),
        mut eps in prop::collection::vec(0.0..120.0f64, 2..20),
    ) {
        let records: Vec<ErrorRecord> = errs.into_iter().enumerate().map(|(i, e)| ErrorRecord::new(i as u64, e)).collect();
        eps.sort_by(f64::total_cmp);
        let mut prev = (0.0, 0.0);
        for e in eps {
            let j = joints_within(&records, e).unwrap();
            let f = frames_within(&records, e).unwrap();
            prop_assert!(f <= j);
            prop_assert!(j >= prev.0 && f >= prev.1);
            prev = (j, f);
        }
        let max = records.iter().map(ErrorRecord::max).fold(0.0, f64::max);
        prop_assert_eq!(joints_within(&records, max).unwrap(), 1.0);
        prop_assert_eq!(frames_within(&records, max).unwrap(), 1.0);
    }
}
