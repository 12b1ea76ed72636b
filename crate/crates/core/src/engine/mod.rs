//! Simulated process execution engine.
//!
//! The engine enacts a model's tasks in one legal execution order on a
//! virtual clock, emitting a lifecycle notification stream: `InstanceCreated`
//! (carrying the serialized model description), `TaskEnacted`/`TaskFinished`
//! pairs, and `ModelChanged`. Subprocess calls spawn child instances whose
//! notifications carry the spawning chain via `parent`, which is how
//! product-oriented correlation is applied at the source.
//!
//! Everything is a pure function of (model set, clock, fault plan, seed):
//! identical inputs produce byte-identical notification streams.

mod faults;
mod sim;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::series::SensorSeries;

pub use faults::{Fault, FaultPlan, ModelChangeSpec, WhichEvent};
pub use sim::{attach_series, run_instance, Simulator, SERIES_DATA_KEY, SIGNAL_DATA_KEY};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("inapplicable fault: {0}")]
    InapplicableFault(String),
    #[error("inapplicable model change: {0}")]
    InapplicableModelChange(String),
    #[error("unknown model '{0}'")]
    UnknownModel(String),
    #[error("invalid clock: {0}")]
    InvalidClock(String),
    #[error("model error: {0}")]
    Model(#[from] crate::model::ModelError),
    #[error("attach_series requires a task-finished notification, got {0:?}")]
    NotTaskFinished(NotificationKind),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NotificationKind {
    InstanceCreated,
    TaskEnacted,
    TaskFinished,
    ModelChanged,
}

/// A single value in a notification's data payload (and, downstream, in an
/// event's attribute map).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AttrValue {
    Series(SensorSeries),
    Num(f64),
    Str(String),
}

impl AttrValue {
    pub fn as_series(&self) -> Option<&SensorSeries> {
        match self {
            AttrValue::Series(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            AttrValue::Str(s) => Some(s),
            _ => None,
        }
    }
}

/// One engine lifecycle message. Wire format is JSON lines with exactly
/// these field names.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EngineNotification {
    pub kind: NotificationKind,
    pub instance: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<String>,
    pub model: String,
    pub version: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task: Option<String>,
    pub ts: u64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub data: BTreeMap<String, AttrValue>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_description: Option<String>,
}

impl EngineNotification {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("notification serializes")
    }
}

/// The engine's virtual clock and duration model.
///
/// Task durations are sampled lognormally around a per-task baseline with
/// relative standard deviation `jitter`; with `jitter` 0 every duration is
/// exactly its baseline. The baseline for a task is looked up in `baselines`,
/// falling back to the task's expected-duration annotation and then to
/// `default_duration_s`. `series_noise` is the per-point measurement noise
/// added to generated sensor series.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SimClock {
    #[serde(default)]
    pub start_ms: u64,
    #[serde(default)]
    pub baselines: BTreeMap<String, f64>,
    #[serde(default)]
    pub jitter: f64,
    #[serde(default = "default_duration")]
    pub default_duration_s: f64,
    #[serde(default = "default_series_noise")]
    pub series_noise: f64,
}

fn default_duration() -> f64 {
    1.0
}

fn default_series_noise() -> f64 {
    0.01
}

impl Default for SimClock {
    fn default() -> Self {
        SimClock {
            start_ms: 0,
            baselines: BTreeMap::new(),
            jitter: 0.0,
            default_duration_s: default_duration(),
            series_noise: default_series_noise(),
        }
    }
}

impl SimClock {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.jitter < 0.0 || !self.jitter.is_finite() {
            return Err(SimError::InvalidClock(format!(
                "jitter must be >= 0, got {}",
                self.jitter
            )));
        }
        if let Some((task, d)) = self.baselines.iter().find(|(_, d)| **d <= 0.0) {
            return Err(SimError::InvalidClock(format!(
                "baseline duration for task '{task}' must be > 0, got {d}"
            )));
        }
        if self.default_duration_s < 0.0 {
            return Err(SimError::InvalidClock(
                "default duration must be >= 0".into(),
            ));
        }
        if self.series_noise < 0.0 {
            return Err(SimError::InvalidClock("series noise must be >= 0".into()));
        }
        Ok(())
    }
}
