//! Online conformance checking: temporal, sensor-data, order, and
//! model-evolution deviations, classified by manufacturing root cause.

mod calibrate;
mod checker;
mod cost;
mod dtw;
mod stats;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use calibrate::{CalibrationOutcome, Calibrator};
pub use checker::{CheckCounters, Checker, StatsSnapshot};
pub use cost::{deviation_weight, trace_cost};
pub use dtw::{dtw_distance, Band, DtwError};
pub use stats::{welford_update, zscore, RunningStats, ZScore};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("z_threshold must be > 0, got {0}")]
    BadZThreshold(f64),
    #[error("dtw threshold must be > 0, got {0} for '{1}'")]
    BadDtwThreshold(f64, String),
    #[error("dtw band fraction must be in (0, 1], got {0}")]
    BadBand(f64),
    #[error("cold_start_n must be >= 2, got {0}")]
    BadColdStart(u64),
    #[error("prior_sigma_fraction must be > 0, got {0}")]
    BadPriorSigma(f64),
}

/// What kind of deviation an alert reports.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeviationKind {
    TimeDuration,
    TimeGap,
    SensorData,
    ControlFlow,
    ModelEvolution,
}

/// Root-cause classes for manufacturing deviations. The mapping from
/// deviation kind to root cause is fixed: temporal deviations point to work
/// organization, sensor-data deviations to workpiece quality or resource
/// degradation, order deviations to ad-hoc change, and model evolution to
/// process evolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RootCause {
    WorkOrganization,
    WorkpieceQualityOrResourceDegradation,
    AdHocChange,
    ProcessEvolution,
}

impl DeviationKind {
    pub fn root_cause(self) -> RootCause {
        match self {
            DeviationKind::TimeDuration | DeviationKind::TimeGap => RootCause::WorkOrganization,
            DeviationKind::SensorData => RootCause::WorkpieceQualityOrResourceDegradation,
            DeviationKind::ControlFlow => RootCause::AdHocChange,
            DeviationKind::ModelEvolution => RootCause::ProcessEvolution,
        }
    }
}

/// A classified finding, published as an alert. `score` is |z| for temporal
/// deviations, the DTW distance for sensor deviations, and 1 per unexpected
/// move or model change.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Deviation {
    pub kind: DeviationKind,
    pub case: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub part: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task: Option<String>,
    pub score: f64,
    pub threshold: f64,
    pub root_cause: RootCause,
    pub explanation: String,
    pub ts: u64,
}

impl Deviation {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("deviation serializes")
    }
}

/// Checker configuration. File format mirrors the field names:
///
/// ```json
/// {
///   "z_threshold": 3.0,
///   "dtw_threshold": 2.0,
///   "dtw_thresholds": {"diameter": 1.25},
///   "dtw_band": "unbounded",
///   "znormalize_series": false,
///   "cold_start_n": 5,
///   "prior_sigma_fraction": 0.1
/// }
/// ```
///
/// `dtw_band` is either `"unbounded"` or a window radius as a fraction of the
/// reference length in (0, 1].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CheckerConfig {
    /// Temporal outlier threshold on |z|; an observation is flagged iff its
    /// |z| exceeds it.
    pub z_threshold: f64,
    /// Fallback DTW distance threshold for series without a calibrated
    /// per-series entry.
    pub dtw_threshold: f64,
    /// Calibrated per-series DTW thresholds.
    pub dtw_thresholds: BTreeMap<String, f64>,
    pub dtw_band: Band,
    pub znormalize_series: bool,
    /// Observations required before learned statistics replace the
    /// model-annotation prior.
    pub cold_start_n: u64,
    /// Synthetic relative sigma for the cold-start prior: sigma = fraction ·
    /// expected duration.
    pub prior_sigma_fraction: f64,
}

impl Default for CheckerConfig {
    fn default() -> Self {
        CheckerConfig {
            z_threshold: 3.0,
            dtw_threshold: 2.0,
            dtw_thresholds: BTreeMap::new(),
            dtw_band: Band::Unbounded,
            znormalize_series: false,
            cold_start_n: 5,
            prior_sigma_fraction: 0.1,
        }
    }
}

/// NaN-aware positivity check; infinity is a legal "never flag" threshold.
fn not_positive(x: f64) -> bool {
    x.is_nan() || x <= 0.0
}

impl CheckerConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if not_positive(self.z_threshold) {
            return Err(ConfigError::BadZThreshold(self.z_threshold));
        }
        if not_positive(self.dtw_threshold) {
            return Err(ConfigError::BadDtwThreshold(
                self.dtw_threshold,
                "<default>".into(),
            ));
        }
        for (series, thr) in &self.dtw_thresholds {
            if not_positive(*thr) {
                return Err(ConfigError::BadDtwThreshold(*thr, series.clone()));
            }
        }
        if let Band::Fraction(f) = self.dtw_band {
            if not_positive(f) || f > 1.0 {
                return Err(ConfigError::BadBand(f));
            }
        }
        if self.cold_start_n < 2 {
            return Err(ConfigError::BadColdStart(self.cold_start_n));
        }
        if not_positive(self.prior_sigma_fraction) {
            return Err(ConfigError::BadPriorSigma(self.prior_sigma_fraction));
        }
        Ok(())
    }

    pub fn dtw_threshold_for(&self, series_id: &str) -> f64 {
        self.dtw_thresholds
            .get(series_id)
            .copied()
            .unwrap_or(self.dtw_threshold)
    }
}
