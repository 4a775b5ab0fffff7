//! Nearest-timestamp pairing of depth frames with sensor readings.

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SyncError {
    #[error("{0} stream is empty")]
    Empty(&'static str),
    #[error("{stream} stream is not strictly increasing at index {index}")]
    Unsorted { stream: &'static str, index: usize },
    #[error("histogram bin width must be positive")]
    BadBinWidth,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TimedEvent {
    pub timestamp_us: u64,
    pub id: u64,
}

impl TimedEvent {
    pub fn new(timestamp_us: u64, id: u64) -> Self {
        TimedEvent { timestamp_us, id }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pair {
    pub depth_id: u64,
    pub sensor_id: u64,
    pub gap_us: u64,
    /// The depth timestamp lies outside the sensor stream's span.
    pub extrapolated: bool,
}

fn check_sorted(events: &[TimedEvent], stream: &'static str) -> Result<(), SyncError> {
    match events.windows(2).position(|w| w[1].timestamp_us <= w[0].timestamp_us) {
        Some(i) => Err(SyncError::Unsorted { stream, index: i + 1 }),
        None => Ok(()),
    }
}

/// Pairs every depth event with the sensor event closest in time, ties going
/// to the earlier sensor event.
pub fn align(depth: &[TimedEvent], sensors: &[TimedEvent]) -> Result<Vec<Pair>, SyncError> {
    if sensors.is_empty() {
        return Err(SyncError::Empty("sensor"));
    }
    check_sorted(depth, "depth")?;
    check_sorted(sensors, "sensor")?;
    let first = sensors[0].timestamp_us;
    let last = sensors[sensors.len() - 1].timestamp_us;
    let mut j = 0;
    let mut out = Vec::with_capacity(depth.len());
    for d in depth {
        let t = d.timestamp_us;
        // advance while the next sensor event is strictly closer
        while j + 1 < sensors.len() && sensors[j + 1].timestamp_us.abs_diff(t) < sensors[j].timestamp_us.abs_diff(t) {
            j += 1;
        }
        let s = sensors[j];
        out.push(Pair {
            depth_id: d.id,
            sensor_id: s.id,
            gap_us: s.timestamp_us.abs_diff(t),
            extrapolated: t < first || t > last,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GapStats {
    pub max_us: u64,
    pub mean_us: f64,
    pub bin_width_us: u64,
    /// `histogram[k]` counts gaps in `[k * bin_width, (k + 1) * bin_width)`.
    pub histogram: Vec<usize>,
}

pub fn gap_stats(pairs: &[Pair], bin_width_us: u64) -> Result<GapStats, SyncError> {
    if pairs.is_empty() {
        return Err(SyncError::Empty("pair"));
    }
    if bin_width_us == 0 {
        return Err(SyncError::BadBinWidth);
    }
    let max_us = pairs.iter().map(|p| p.gap_us).max().unwrap_or(0);
    let sum: u128 = pairs.iter().map(|p| p.gap_us as u128).sum();
    let mut histogram = vec![0; (max_us / bin_width_us) as usize + 1];
    for p in pairs {
        histogram[(p.gap_us / bin_width_us) as usize] += 1;
    }
    Ok(GapStats {
        max_us,
        mean_us: sum as f64 / pairs.len() as f64,
        bin_width_us,
        histogram,
    })
}

/// Events at `offset_us + round(k * 1e6 / rate_hz)` for `k` in `0..count`.
pub fn periodic_stream(rate_hz: f64, offset_us: u64, count: usize) -> Vec<TimedEvent> {
    (0..count)
        .map(|k| TimedEvent::new(offset_us + (k as f64 * 1e6 / rate_hz).round() as u64, k as u64))
        .collect()
}
