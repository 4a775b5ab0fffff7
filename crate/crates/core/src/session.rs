//! Synthetic capture sessions.
//!
//! A session walks a [`CaptureSchedule`], turns every scheduled frame into a
//! pose, runs forward kinematics and the sensor simulator, and optionally
//! perturbs the readings. The poses' skeletons are the exact ground truth.
//!
//! Randomness is derived from the single `seed`: segment-level choices
//! (viewpoint, placement) use [`segment_rng`], per-frame choices (random
//! articulation, sensor noise) use [`frame_rng`] with the global frame index.

use std::f64::consts::{FRAC_PI_2, TAU};
use std::path::{Path, PathBuf};

use nalgebra::{UnitQuaternion, Vector3};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::annotate::AnnotateOptions;
use crate::hand::{ConsistencyTolerance, HandPose, HandShape, JointLimits};
use crate::io::AnnotationRow;
use crate::kinematics::{forward_kinematics, perturb_frame, simulate_sensors, KinematicsError, SensorFrame};
use crate::protocol::{self, CaptureSchedule, SegmentKind};
use crate::sampling::{frame_rng, random_articulation, segment_rng};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("{field}: {msg}")]
    Field { field: &'static str, msg: String },
    #[error("config: {0}")]
    Parse(String),
}

fn field_err(field: &'static str, msg: impl Into<String>) -> ConfigError {
    ConfigError::Field { field, msg: msg.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    pub position_mm: f64,
    pub rotation_deg: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            position_mm: 0.0,
            rotation_deg: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub plane: f64,
    pub length: f64,
    pub residual: f64,
    pub feasibility: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        let c = ConsistencyTolerance::default();
        let a = AnnotateOptions::default();
        Tolerances {
            plane: c.plane,
            length: c.length,
            residual: a.residual,
            feasibility: a.feasibility,
        }
    }
}

impl Tolerances {
    pub fn annotate_options(&self) -> AnnotateOptions {
        AnnotateOptions {
            feasibility: self.feasibility,
            residual: self.residual,
        }
    }

    pub fn consistency(&self) -> ConsistencyTolerance {
        ConsistencyTolerance {
            plane: self.plane,
            length: self.length,
        }
    }
}

/// Everything a run needs besides file paths given on the command line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Frame budget; the schedule is truncated to it.
    pub frames: usize,
    pub frames_per_transition: usize,
    pub random_segments: bool,
    pub egocentric_segments: bool,
    /// Sensor sampling rate.
    pub rate_hz: f64,
    /// Half-width of the cube the hand centre is placed in per segment, mm.
    pub reach_mm: f64,
    pub noise: NoiseConfig,
    pub tolerances: Tolerances,
    pub shape: Option<PathBuf>,
    pub intrinsics: Option<PathBuf>,
    pub transform: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            frames: 1000,
            frames_per_transition: protocol::DEFAULT_FRAMES_PER_TRANSITION,
            random_segments: true,
            egocentric_segments: true,
            rate_hz: 720.0,
            reach_mm: 50.0,
            noise: NoiseConfig::default(),
            tolerances: Tolerances::default(),
            shape: None,
            intrinsics: None,
            transform: None,
        }
    }
}

impl RunConfig {
    pub fn from_toml(s: &str) -> Result<Self, ConfigError> {
        let c: RunConfig = toml::from_str(s).map_err(|e| ConfigError::Parse(e.to_string().trim_end().to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Reads a config file; relative paths inside it resolve against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Parse(format!("{}: {e}", path.display())))?;
        let mut c = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut c.shape, &mut c.intrinsics, &mut c.transform]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = [
            ("tolerances.plane", self.tolerances.plane),
            ("tolerances.length", self.tolerances.length),
            ("tolerances.residual", self.tolerances.residual),
            ("tolerances.feasibility", self.tolerances.feasibility),
            ("rate_hz", self.rate_hz),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(field_err(name, format!("must be positive, got {v}")));
            }
        }
        let non_negative = [
            ("noise.position_mm", self.noise.position_mm),
            ("noise.rotation_deg", self.noise.rotation_deg),
            ("reach_mm", self.reach_mm),
        ];
        for (name, v) in non_negative {
            if !(v.is_finite() && v >= 0.0) {
                return Err(field_err(name, format!("must be non-negative, got {v}")));
            }
        }
        if self.frames_per_transition < 2 {
            return Err(field_err("frames_per_transition", "must be at least 2"));
        }
        Ok(())
    }

    pub fn schedule(&self) -> Result<CaptureSchedule, ConfigError> {
        CaptureSchedule::builder()
            .frames_per_transition(self.frames_per_transition)
            .random(self.random_segments)
            .egocentric(self.egocentric_segments)
            .build()
            .map_err(|e| field_err("frames_per_transition", e.to_string()))
    }

    pub fn timestamp_us(&self, frame: usize) -> u64 {
        (frame as f64 * 1e6 / self.rate_hz).round() as u64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    pub shape: HandShape,
    pub poses: Vec<HandPose>,
    pub sensors: Vec<SensorFrame>,
    /// Tracker-frame ground truth, one row per sensor frame.
    pub ground_truth: Vec<AnnotationRow>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SessionError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("frame {frame}: {source}")]
    Kinematics {
        frame: usize,
        #[source]
        source: KinematicsError,
    },
}

struct Placement {
    rotation: UnitQuaternion<f64>,
    target: Vector3<f64>,
}

fn egocentric_direction<R: Rng + ?Sized>(rng: &mut R) -> Vector3<f64> {
    // uniform over the open lower hemisphere
    let az = rng.random_range(0.0..TAU);
    let s: f64 = rng.random_range(f64::EPSILON..1.0);
    protocol::direction(az, -s.asin().min(FRAC_PI_2))
}

fn segment_placement(cfg: &RunConfig, segment: usize, region: Option<usize>) -> Placement {
    let mut rng = segment_rng(cfg.seed, segment as u64);
    let d = match region {
        Some(r) => protocol::direction_in_region(r, rng.random(), rng.random()).expect("region in range"),
        None => egocentric_direction(&mut rng),
    };
    let roll = rng.random_range(-FRAC_PI_2..FRAC_PI_2);
    let reach = cfg.reach_mm;
    let target = if reach > 0.0 {
        Vector3::new(
            rng.random_range(-reach..reach),
            rng.random_range(-reach..reach),
            rng.random_range(-reach..reach),
        )
    } else {
        Vector3::zeros()
    };
    Placement {
        rotation: protocol::rotation_for_view(&d, roll),
        target,
    }
}

/// The scheduled poses, truncated to the frame budget.
pub fn scheduled_poses(
    cfg: &RunConfig,
    shape: &HandShape,
    limits: &JointLimits,
) -> Result<Vec<HandPose>, SessionError> {
    cfg.validate()?;
    let schedule = cfg.schedule()?;
    let center = Vector3::new(shape.center_offset(), 0.0, 0.0);
    let extremal = protocol::enumerate_extremal(limits);
    let mut poses = Vec::with_capacity(cfg.frames.min(schedule.total_frames()));
    'segments: for (s, seg) in schedule.segments.iter().enumerate() {
        if poses.len() >= cfg.frames {
            break;
        }
        let place = segment_placement(cfg, s, seg.region);
        let global = protocol::placement(place.rotation, &center, &place.target);
        let articulations: Vec<HandPose> = match seg.kind {
            SegmentKind::Schemed { a, b } => {
                let n = seg.frames.min(cfg.frames - poses.len());
                let full = protocol::interpolate_transition(
                    &extremal[a.0 as usize],
                    &extremal[b.0 as usize],
                    seg.frames,
                    limits,
                )
                .map_err(|e| field_err("frames_per_transition", e.to_string()))?;
                full.into_iter().take(n).collect()
            }
            SegmentKind::Random | SegmentKind::Egocentric => {
                let mut out = Vec::new();
                for _ in 0..seg.frames {
                    if poses.len() + out.len() >= cfg.frames {
                        break;
                    }
                    let k = (poses.len() + out.len()) as u64;
                    out.push(random_articulation(&mut frame_rng(cfg.seed, k), limits));
                }
                out
            }
        };
        for p in articulations {
            poses.push(p.with_global(&global));
            if poses.len() >= cfg.frames {
                break 'segments;
            }
        }
    }
    Ok(poses)
}

/// Schedule, forward kinematics, sensor simulation and optional noise.
pub fn generate_synthetic_session(cfg: &RunConfig, shape: &HandShape) -> Result<Session, SessionError> {
    let limits = JointLimits::default();
    let poses = scheduled_poses(cfg, shape, &limits)?;
    let mut sensors = Vec::with_capacity(poses.len());
    let mut ground_truth = Vec::with_capacity(poses.len());
    let noisy = cfg.noise.position_mm > 0.0 || cfg.noise.rotation_deg > 0.0;
    for (k, pose) in poses.iter().enumerate() {
        let err = |source| SessionError::Kinematics { frame: k, source };
        let ts = cfg.timestamp_us(k);
        let skel = forward_kinematics(shape, pose).map_err(err)?;
        let mut frame = simulate_sensors(shape, &skel, ts).map_err(err)?;
        if noisy {
            let mut rng = frame_rng(cfg.seed, k as u64);
            // skip the draws a random segment may have used for its pose
            let _ = random_articulation(&mut rng, &limits);
            frame = perturb_frame(
                &frame,
                cfg.noise.position_mm,
                cfg.noise.rotation_deg.to_radians(),
                &mut rng,
            );
        }
        sensors.push(frame);
        ground_truth.push(AnnotationRow::from_skeleton(ts, &skel));
    }
    Ok(Session {
        shape: shape.clone(),
        poses,
        sensors,
        ground_truth,
    })
}
