//! The logger side of the pipeline: XES-style events, per-case traces with
//! subprocess-to-root correlation, persistent logs, XES export, and replay.

mod log;
mod logger;
pub mod xes;

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

pub use self::log::{Log, ModelRecord, Replay, Speed, Trace};
pub use logger::{Logger, Quarantined};

pub use crate::engine::AttrValue;

/// Attribute key under which an event carries its task id (`concept:name`
/// holds the human label).
pub const TASK_ID_ATTR: &str = "task_id";

#[derive(Debug, Error)]
pub enum StreamError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed record at line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("xes error: {0}")]
    Xes(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Lifecycle {
    Start,
    Complete,
}

/// One XES-style event: a lifecycle transition of a task occurrence within a
/// case. `case` is the root instance id after correlation; `source_instance`
/// the instance that actually executed the task. `part` is assigned by the
/// splitter for product-oriented analysis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub case: String,
    pub source_instance: String,
    /// `concept:name` — the task label.
    pub name: String,
    pub lifecycle: Lifecycle,
    pub ts: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resource: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub attrs: BTreeMap<String, AttrValue>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub part: Option<String>,
}

impl Event {
    pub fn task_id(&self) -> &str {
        self.attrs
            .get(TASK_ID_ATTR)
            .and_then(AttrValue::as_str)
            .unwrap_or(&self.name)
    }

    pub fn series(&self) -> Option<&crate::series::SensorSeries> {
        self.attrs
            .get(crate::engine::SERIES_DATA_KEY)
            .and_then(AttrValue::as_series)
    }
}

/// A case-level model descriptor travelling in the event stream so the
/// checker always knows the model a case runs under. Emitted when a root
/// instance is created and on every model change.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelUpdate {
    /// Discriminator, always `"model"` on the wire.
    pub control: String,
    pub case: String,
    pub model: String,
    pub version: u64,
    pub ts: u64,
    pub model_description: String,
}

impl ModelUpdate {
    pub fn new(
        case: impl Into<String>,
        model: impl Into<String>,
        version: u64,
        ts: u64,
        description: impl Into<String>,
    ) -> Self {
        ModelUpdate {
            control: "model".into(),
            case: case.into(),
            model: model.into(),
            version,
            ts,
            model_description: description.into(),
        }
    }
}

/// One item of the logger's outbound stream: an event or a control record.
/// JSON lines; control records carry a `control` field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StreamItem {
    ModelUpdate(ModelUpdate),
    Event(Event),
}

impl StreamItem {
    pub fn case(&self) -> &str {
        match self {
            StreamItem::Event(e) => &e.case,
            StreamItem::ModelUpdate(m) => &m.case,
        }
    }

    pub fn ts(&self) -> u64 {
        match self {
            StreamItem::Event(e) => e.ts,
            StreamItem::ModelUpdate(m) => m.ts,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("stream item serializes")
    }

    pub fn from_json(line: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(line)
    }
}
