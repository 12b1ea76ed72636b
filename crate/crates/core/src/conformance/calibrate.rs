//! Threshold calibration from conforming runs.
//!
//! Feeds conforming streams through a non-flagging checker, then derives:
//! a per-series DTW threshold of `mean + 3 · stddev` over the observed
//! distances (with a small epsilon floor so identical runs still get a
//! usable threshold), and a warm statistics snapshot the checker can load to
//! skip its cold start.

use std::collections::BTreeMap;

use crate::series::SensorSeries;
use crate::stream::StreamItem;

use super::checker::{Checker, StatsSnapshot};
use super::stats::RunningStats;
use super::{CheckerConfig, ConfigError};

pub const DEFAULT_EPSILON: f64 = 1e-6;

pub struct Calibrator {
    checker: Checker,
}

#[derive(Clone, Debug)]
pub struct CalibrationOutcome {
    pub config: CheckerConfig,
    pub stats: StatsSnapshot,
    /// Raw DTW distances per series id, for reporting.
    pub samples: BTreeMap<String, Vec<f64>>,
}

impl Calibrator {
    pub fn new(references: BTreeMap<String, SensorSeries>) -> Result<Self, ConfigError> {
        // Infinite thresholds: nothing flags, every observation is learned.
        let config = CheckerConfig {
            z_threshold: f64::INFINITY,
            dtw_threshold: f64::INFINITY,
            ..CheckerConfig::default()
        };
        Ok(Calibrator {
            checker: Checker::new(config, references)?,
        })
    }

    pub fn ingest(&mut self, item: &StreamItem) {
        self.checker.process(item);
    }

    /// Derives thresholds into `base` and returns the warm stats snapshot.
    pub fn finish(self, base: CheckerConfig) -> CalibrationOutcome {
        let mut samples: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for (series, distance) in self.checker.dtw_observations() {
            samples.entry(series.clone()).or_default().push(*distance);
        }
        let mut config = base;
        for (series, distances) in &samples {
            let mut stats = RunningStats::new();
            for &d in distances {
                stats.update(d);
            }
            let spread = stats.stddev().unwrap_or(0.0);
            let threshold = (stats.mean + 3.0 * spread).max(DEFAULT_EPSILON);
            config.dtw_thresholds.insert(series.clone(), threshold);
        }
        CalibrationOutcome {
            config,
            stats: self.checker.stats_snapshot(),
            samples,
        }
    }
}
