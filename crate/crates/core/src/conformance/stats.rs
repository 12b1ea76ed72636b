//! Streaming per-task statistics and the z-score distance measure.

use serde::{Deserialize, Serialize};

use super::CheckerConfig;

/// Welford single-pass count/mean/variance accumulator. `m2` is the running
/// sum of squared deviations; the sample variance `m2 / (n - 1)` is defined
/// for `n >= 2`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunningStats {
    pub n: u64,
    pub mean: f64,
    pub m2: f64,
}

impl RunningStats {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn update(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn variance(&self) -> Option<f64> {
        (self.n >= 2).then(|| self.m2 / (self.n - 1) as f64)
    }

    pub fn stddev(&self) -> Option<f64> {
        self.variance().map(f64::sqrt)
    }
}

/// The standard single-pass recurrence, as a pure function.
pub fn welford_update(mut stats: RunningStats, x: f64) -> RunningStats {
    stats.update(x);
    stats
}

/// Result of a z-score query.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ZScore {
    Score(f64),
    /// Neither warm statistics nor a model prior are available; the
    /// observation cannot be judged (and is treated as harmless).
    InsufficientData,
}

/// Distance of observation `x` from the task's baseline in standard
/// deviations.
///
/// Warm phase (`n >= cold_start_n`): `(x - mean) / sample_stddev`. Cold phase
/// with an annotated expected duration: `(x - prior) / (prior_sigma_fraction
/// · prior)`. A zero standard deviation yields 0 when `x` equals the
/// baseline and infinity otherwise: any departure from a perfectly constant
/// history is maximal surprise.
pub fn zscore(
    x: f64,
    stats: &RunningStats,
    config: &CheckerConfig,
    prior_mean: Option<f64>,
) -> ZScore {
    if stats.n >= config.cold_start_n.max(2) {
        let sd = stats.stddev().expect("n >= 2");
        return ZScore::Score(ratio(x - stats.mean, sd));
    }
    match prior_mean {
        Some(prior) => {
            let sd = config.prior_sigma_fraction * prior;
            ZScore::Score(ratio(x - prior, sd))
        }
        None => ZScore::InsufficientData,
    }
}

fn ratio(delta: f64, sd: f64) -> f64 {
    if sd > 0.0 {
        delta / sd
    } else if delta == 0.0 {
        0.0
    } else if delta > 0.0 {
        f64::INFINITY
    } else {
        f64::NEG_INFINITY
    }
}
