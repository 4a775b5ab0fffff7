use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use handanno_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(ha_last_error()) }
        .to_string_lossy()
        .into_owned()
}

fn v(x: f64, y: f64, z: f64) -> HaVec3 {
    HaVec3 { x, y, z }
}

#[test]
fn fk_simulate_annotate_round_trip() {
    let shape = ha_shape_reference();
    let mut pose = HaPose::default();
    pose.global.translation = v(10.0, -20.0, 300.0);
    pose.global.rotation = HaQuat {
        w: 0.8,
        x: 0.6,
        y: 0.0,
        z: 0.0,
    };
    for (i, f) in pose.fingers.iter_mut().enumerate() {
        f.flexion = 0.2 + 0.1 * i as f64;
        f.pip = 0.5;
        f.dip = 0.3;
        f.abduction = 0.05;
    }
    let mut skel = HaSkeleton::default();
    unsafe {
        assert_eq!(ha_forward_kinematics(shape, &pose, &mut skel), HaStatus::Ok);
        let mut sensors = [HaSensor::default(); 6];
        assert_eq!(ha_simulate_sensors(shape, &skel, sensors.as_mut_ptr()), HaStatus::Ok);
        let mut est = HaSkeleton::default();
        let mut present = [0u8; 21];
        let mut status = HaAnnotation::Failed;
        let mut mask = 99u32;
        let rc = ha_annotate(
            shape,
            sensors.as_ptr(),
            2.0,
            &mut est,
            present.as_mut_ptr(),
            &mut status,
            &mut mask,
        );
        assert_eq!(rc, HaStatus::Ok, "{}", last_error());
        assert_eq!(status, HaAnnotation::Exact);
        assert_eq!(mask, 0);
        assert!(present.iter().all(|&p| p == 1));
        for (a, b) in est.joints.iter().zip(&skel.joints) {
            let d = ((a.x - b.x).powi(2) + (a.y - b.y).powi(2) + (a.z - b.z).powi(2)).sqrt();
            assert!(d < 1e-6, "{d}");
        }
        ha_shape_free(shape);
    }
}

#[test]
fn errors_are_reported() {
    unsafe {
        let mut skel = HaSkeleton::default();
        assert_eq!(
            ha_forward_kinematics(ptr::null(), &HaPose::default(), &mut skel),
            HaStatus::NullPointer
        );
        assert!(last_error().contains("null pointer"));

        let shape = ha_shape_reference();
        let mut bad = HaPose::default();
        bad.fingers[0].pip = 3.0;
        assert_eq!(ha_forward_kinematics(shape, &bad, &mut skel), HaStatus::InvalidPose);
        assert!(!last_error().is_empty());
        ha_shape_free(shape);

        let mut region = 0;
        assert_eq!(
            ha_viewpoint_region(v(-1.0, 0.0, 0.0), &mut region),
            HaStatus::OutOfDomain
        );
        assert_eq!(ha_viewpoint_region(v(1.0, 0.0, 0.0), &mut region), HaStatus::Ok);
        assert_eq!(region, 12);
        assert!(last_error().is_empty());

        let text = CString::new("palm = 1").unwrap();
        let mut out = ptr::null_mut();
        assert_eq!(ha_shape_from_toml(text.as_ptr(), &mut out), HaStatus::Parse);
        assert!(out.is_null());
    }
}

#[test]
fn pip_worked_example() {
    let mut p = HaVec3::default();
    let rc = unsafe {
        ha_solve_pip(
            v(0.0, 0.0, 0.0),
            v(60.0, 0.0, 0.0),
            v(75.0, -8.0, 0.0),
            45.0,
            25.0,
            v(0.0, 0.0, 1.0),
            2.0,
            &mut p,
        )
    };
    assert_eq!(rc, HaStatus::Ok);
    assert!(
        (p.x - 41.666_666_666_666_664).abs() < 1e-9 && (p.y - 16.996_731_711_975_95).abs() < 1e-9 && p.z.abs() < 1e-12
    );
    let rc = unsafe {
        ha_solve_pip(
            v(0.0, 0.0, 0.0),
            v(80.0, 0.0, 0.0),
            v(95.0, 0.0, 0.0),
            45.0,
            25.0,
            v(0.0, 0.0, 1.0),
            2.0,
            &mut p,
        )
    };
    assert_eq!(rc, HaStatus::Infeasible);
}

#[test]
fn align_and_metrics() {
    let depth = [0u64, 16667];
    let sensors: Vec<u64> = (0..20).map(|k| k * 1389).collect();
    let (mut idx, mut gap) = ([0u64; 2], [0u64; 2]);
    unsafe {
        assert_eq!(
            ha_align(
                depth.as_ptr(),
                2,
                sensors.as_ptr(),
                sensors.len(),
                idx.as_mut_ptr(),
                gap.as_mut_ptr()
            ),
            HaStatus::Ok
        );
    }
    assert_eq!((idx, gap), ([0, 12], [0, 1]));
    let errors = [0.0, 10.0, 20.0];
    let mut f = 0.0;
    unsafe {
        assert_eq!(ha_joints_within(errors.as_ptr(), 1, 3, 15.0, &mut f), HaStatus::Ok);
        assert!((f - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(ha_frames_within(errors.as_ptr(), 1, 3, 15.0, &mut f), HaStatus::Ok);
        assert_eq!(f, 0.0);
        assert_eq!(
            ha_joints_within(ptr::null(), 0, 3, 1.0, &mut f),
            HaStatus::InvalidArgument
        );
    }
}

#[test]
fn pnp_identity() {
    let k = HaIntrinsics {
        fx: 475.0,
        fy: 475.0,
        cx: 320.0,
        cy: 240.0,
        width: 640,
        height: 480,
    };
    let mut pts = Vec::new();
    let mut px = Vec::new();
    for i in 0..4 {
        for j in 0..3 {
            let (x, y, z) = (
                -60.0 + 40.0 * i as f64,
                -40.0 + 40.0 * j as f64,
                400.0 + 50.0 * ((i * 3 + j) % 5) as f64,
            );
            pts.extend([x, y, z]);
            px.extend([475.0 * x / z + 320.0, 475.0 * y / z + 240.0]);
        }
    }
    let mut x = HaTransform::default();
    let mut rms = -1.0;
    unsafe {
        assert_eq!(
            ha_solve_pnp(pts.as_ptr(), px.as_ptr(), 12, &k, &mut x, &mut rms),
            HaStatus::Ok,
            "{}",
            last_error()
        );
    }
    assert!(rms < 1e-6);
    let t = x.translation;
    assert!((t.x * t.x + t.y * t.y + t.z * t.z).sqrt() < 1e-3);
    let mut out = HaVec3::default();
    unsafe { ha_transform_point(&x, v(1.0, 2.0, 3.0), &mut out) };
    assert!((out.x - 1.0).abs() < 1e-6 && (out.z - 3.0).abs() < 1e-6);
}

fn target_dir() -> PathBuf {
    // tests run from target/<profile>/deps
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn c_program_links_against_header() {
    let lib = target_dir().join("libhandanno_ffi.a");
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    if !lib.exists() || Command::new(&cc).arg("--version").output().is_err() {
        eprintln!("skipping: no C compiler or static library");
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("smoke.c");
    std::fs::write(
        &src,
        r#"
#include <stdio.h>
#include <string.h>
#include "handanno.h"
int main(void) {
    HaShape *shape = ha_shape_reference();
    HaPose pose;
    memset(&pose, 0, sizeof pose);
    pose.global.rotation.w = 1.0;
    pose.fingers[1].pip = 0.7;
    HaSkeleton skel, est;
    HaSensor sensors[6];
    if (ha_forward_kinematics(shape, &pose, &skel) != HA_STATUS_OK) return 1;
    if (ha_simulate_sensors(shape, &skel, sensors) != HA_STATUS_OK) return 2;
    HaAnnotation status;
    uint32_t mask;
    if (ha_annotate(shape, sensors, 2.0, &est, NULL, &status, &mask) != HA_STATUS_OK) return 3;
    if (status != HA_ANNOTATION_EXACT) return 4;
    if (ha_forward_kinematics(NULL, &pose, &skel) != HA_STATUS_NULL_POINTER) return 5;
    if (strlen(ha_last_error()) == 0) return 6;
    ha_shape_free(shape);
    printf("%s ok\n", ha_version());
    return 0;
}
"#,
    )
    .unwrap();
    let exe = dir.path().join("smoke");
    let include = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include");
    let status = Command::new(&cc)
        .arg(&src)
        .arg("-I")
        .arg(&include)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success(), "C compile failed");
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    assert!(String::from_utf8_lossy(&out.stdout).ends_with("ok\n"));
}
