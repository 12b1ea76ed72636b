//! Timestamped numeric sensor series, e.g. the measured diameter of a part.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SeriesError {
    #[error("sensor series must contain at least one point")]
    Empty,
    #[error("series offsets must be strictly increasing (offset {0} at index {1})")]
    NonIncreasingOffset(u64, usize),
}

/// A sensor time sequence: ordered `(offset_ms, value)` points plus a unit
/// label. Offsets are relative to the start of the measurement and strictly
/// increasing; the series is never empty.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSeries")]
pub struct SensorSeries {
    pub unit: String,
    pub points: Vec<(u64, f64)>,
}

#[derive(Deserialize)]
struct RawSeries {
    unit: String,
    points: Vec<(u64, f64)>,
}

impl TryFrom<RawSeries> for SensorSeries {
    type Error = SeriesError;

    fn try_from(raw: RawSeries) -> Result<Self, SeriesError> {
        SensorSeries::new(raw.unit, raw.points)
    }
}

impl SensorSeries {
    pub fn new(unit: impl Into<String>, points: Vec<(u64, f64)>) -> Result<Self, SeriesError> {
        if points.is_empty() {
            return Err(SeriesError::Empty);
        }
        for (i, w) in points.windows(2).enumerate() {
            if w[1].0 <= w[0].0 {
                return Err(SeriesError::NonIncreasingOffset(w[1].0, i + 1));
            }
        }
        Ok(SensorSeries {
            unit: unit.into(),
            points,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// The value sequence without offsets, as used by distance measures.
    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(|&(_, v)| v).collect()
    }
}

/// The parametric golden curve used when no stored reference exists: a ramp
/// from `base` up to `peak` over the first quarter of the points, a plateau,
/// and a ramp back down over the last quarter. Offsets are spaced `step_ms`
/// apart starting at 0.
pub fn reference_curve(n: usize, base: f64, peak: f64, step_ms: u64, unit: &str) -> SensorSeries {
    assert!(n >= 2, "reference curve needs at least two points");
    let quarter = (n / 4).max(1);
    let mut points = Vec::with_capacity(n);
    for i in 0..n {
        let value = if i < quarter {
            base + (peak - base) * i as f64 / quarter as f64
        } else if i >= n - quarter {
            base + (peak - base) * (n - 1 - i) as f64 / quarter as f64
        } else {
            peak
        };
        points.push((i as u64 * step_ms, value));
    }
    SensorSeries::new(unit, points).expect("curve offsets are increasing")
}
