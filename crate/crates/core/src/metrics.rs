//! Evaluation measures: per-joint errors, joints- and frames-within-ε
//! curves and the 9:1 train/validation split.

use nalgebra::Point3;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::hand::{Frame, JointId, Skeleton, JOINT_COUNT};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("estimate is in the {est} frame but ground truth is in the {gt} frame")]
    FrameMismatch { est: Frame, gt: Frame },
    #[error("joint {0} is missing from the estimate")]
    MissingJoint(JointId),
    #[error("joint subset is empty")]
    EmptySubset,
    #[error("no error records")]
    NoRecords,
    #[error("record {index} has {found} joints, expected {expected}")]
    InconsistentSubset {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("error bound {0} must be finite and non-negative")]
    BadEpsilon(f64),
    #[error("epsilon grid is empty")]
    EmptyGrid,
    #[error("epsilon grid is not sorted at index {0}")]
    UnsortedGrid(usize),
}

/// How [`joint_errors_partial`] treats joints absent from the estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MissingJoints {
    #[default]
    Reject,
    /// Counted as an infinite error, so never within any ε.
    Infinite,
}

/// Euclidean distance per joint of `subset`, in subset order.
pub fn joint_errors(est: &Skeleton, gt: &Skeleton, subset: &[JointId]) -> Result<Vec<f64>, MetricsError> {
    joint_errors_partial(&est.joints.map(Some), est.frame, gt, subset, MissingJoints::Reject)
}

pub fn joint_errors_partial(
    est: &[Option<Point3<f64>>; JOINT_COUNT],
    est_frame: Frame,
    gt: &Skeleton,
    subset: &[JointId],
    missing: MissingJoints,
) -> Result<Vec<f64>, MetricsError> {
    if est_frame != gt.frame {
        return Err(MetricsError::FrameMismatch {
            est: est_frame,
            gt: gt.frame,
        });
    }
    if subset.is_empty() {
        return Err(MetricsError::EmptySubset);
    }
    subset
        .iter()
        .map(|&j| match (est[j.index()], missing) {
            (Some(p), _) => Ok((p - gt[j]).norm()),
            (None, MissingJoints::Infinite) => Ok(f64::INFINITY),
            (None, MissingJoints::Reject) => Err(MetricsError::MissingJoint(j)),
        })
        .collect()
}

/// Per-joint errors of one frame, mm.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorRecord {
    pub frame_id: u64,
    pub errors: Vec<f64>,
}

impl ErrorRecord {
    pub fn new(frame_id: u64, errors: Vec<f64>) -> Self {
        ErrorRecord { frame_id, errors }
    }

    pub fn max(&self) -> f64 {
        self.errors.iter().copied().fold(0.0, f64::max)
    }
}

fn check_records(records: &[ErrorRecord]) -> Result<usize, MetricsError> {
    let first = records.first().ok_or(MetricsError::NoRecords)?;
    let n = first.errors.len();
    if n == 0 {
        return Err(MetricsError::EmptySubset);
    }
    for (index, r) in records.iter().enumerate() {
        if r.errors.len() != n {
            return Err(MetricsError::InconsistentSubset {
                index,
                expected: n,
                found: r.errors.len(),
            });
        }
    }
    Ok(n)
}

fn check_eps(eps: f64) -> Result<(), MetricsError> {
    if eps.is_finite() && eps >= 0.0 {
        Ok(())
    } else {
        Err(MetricsError::BadEpsilon(eps))
    }
}

/// Fraction of all joint errors that are `<= eps`.
pub fn joints_within(records: &[ErrorRecord], eps: f64) -> Result<f64, MetricsError> {
    check_eps(eps)?;
    let n = check_records(records)?;
    let hits: usize = records
        .iter()
        .map(|r| r.errors.iter().filter(|e| **e <= eps).count())
        .sum();
    Ok(hits as f64 / (n * records.len()) as f64)
}

/// Fraction of frames whose worst joint error is `<= eps`.
pub fn frames_within(records: &[ErrorRecord], eps: f64) -> Result<f64, MetricsError> {
    check_eps(eps)?;
    check_records(records)?;
    let hits = records.iter().filter(|r| r.errors.iter().all(|e| *e <= eps)).count();
    Ok(hits as f64 / records.len() as f64)
}

pub fn mean_error(records: &[ErrorRecord]) -> Result<f64, MetricsError> {
    let n = check_records(records)?;
    let sum: f64 = records.iter().flat_map(|r| r.errors.iter()).sum();
    Ok(sum / (n * records.len()) as f64)
}

/// Shuffles `ids` with ChaCha8 seeded by `seed` and holds out the first
/// `round(n / 10)` as validation. Both halves are returned sorted.
pub fn split_9_1(ids: &[u64], seed: u64) -> (Vec<u64>, Vec<u64>) {
    let mut shuffled = ids.to_vec();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_val = (ids.len() + 5) / 10;
    let mut val = shuffled[..n_val].to_vec();
    let mut train = shuffled[n_val..].to_vec();
    val.sort_unstable();
    train.sort_unstable();
    (train, val)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveRow {
    pub eps: f64,
    pub joints_within: f64,
    pub frames_within: f64,
}

pub fn curve_export(records: &[ErrorRecord], grid: &[f64]) -> Result<Vec<CurveRow>, MetricsError> {
    if grid.is_empty() {
        return Err(MetricsError::EmptyGrid);
    }
    for &e in grid {
        check_eps(e)?;
    }
    if let Some(i) = grid.windows(2).position(|w| w[1] < w[0]) {
        return Err(MetricsError::UnsortedGrid(i + 1));
    }
    grid.iter()
        .map(|&eps| {
            Ok(CurveRow {
                eps,
                joints_within: joints_within(records, eps)?,
                frames_within: frames_within(records, eps)?,
            })
        })
        .collect()
}

/// `n` evenly spaced values from `lo` to `hi` inclusive.
pub fn linear_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}
