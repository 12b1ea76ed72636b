//! The persistent process execution log: traces per case, append-only
//! JSON-lines storage with an index sidecar, and replay of a stored log as a
//! stream.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{Event, Lifecycle, ModelUpdate, StreamError, StreamItem};

/// One model descriptor in a trace's version history.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelRecord {
    pub model: String,
    pub version: u64,
    pub ts: u64,
    pub model_description: String,
}

/// All data about one process instance (after correlation: one root case).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub case: String,
    #[serde(default)]
    pub models: Vec<ModelRecord>,
    #[serde(default)]
    pub events: Vec<Event>,
    #[serde(default = "default_true")]
    pub open: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub anomalies: Vec<String>,
    #[serde(skip)]
    open_starts: HashMap<String, u32>,
}

fn default_true() -> bool {
    true
}

impl Trace {
    fn new(case: &str) -> Self {
        Trace {
            case: case.to_string(),
            models: Vec::new(),
            events: Vec::new(),
            open: true,
            anomalies: Vec::new(),
            open_starts: HashMap::new(),
        }
    }

    fn flag(&mut self, anomaly: String) {
        if !self.anomalies.contains(&anomaly) {
            self.anomalies.push(anomaly);
        }
    }

    /// Appends an event, keeping events ordered by timestamp. Logging never
    /// loses data: an out-of-order or lifecycle-violating event is stored and
    /// the trace is flagged instead.
    fn append(&mut self, event: Event) {
        match event.lifecycle {
            Lifecycle::Start => {
                *self
                    .open_starts
                    .entry(event.task_id().to_string())
                    .or_insert(0) += 1;
            }
            Lifecycle::Complete => {
                let task = event.task_id().to_string();
                match self.open_starts.get_mut(&task) {
                    Some(n) if *n > 0 => *n -= 1,
                    _ => self.flag(format!(
                        "lifecycle anomaly: complete without start for '{task}'"
                    )),
                }
            }
        }
        let in_order = self.events.last().is_none_or(|last| last.ts <= event.ts);
        if in_order {
            self.events.push(event);
        } else {
            self.flag(format!("out-of-order timestamp at {}", event.ts));
            // Insert after existing equal timestamps so arrival order breaks
            // ties.
            let pos = self.events.partition_point(|e| e.ts <= event.ts);
            self.events.insert(pos, event);
        }
    }

    fn record_model(&mut self, update: &ModelUpdate) {
        if let Some(last) = self.models.last() {
            if update.version < last.version {
                self.flag(format!(
                    "model version regressed from {} to {}",
                    last.version, update.version
                ));
            }
        }
        self.models.push(ModelRecord {
            model: update.model.clone(),
            version: update.version,
            ts: update.ts,
            model_description: update.model_description.clone(),
        });
    }

    fn rebuild_lifecycle_state(&mut self) {
        self.open_starts.clear();
        for event in &self.events {
            if event.lifecycle == Lifecycle::Start {
                *self
                    .open_starts
                    .entry(event.task_id().to_string())
                    .or_insert(0) += 1;
            } else if let Some(n) = self.open_starts.get_mut(event.task_id()) {
                *n = n.saturating_sub(1);
            }
        }
    }
}

/// Replay speed: `Instant` ignores inter-event delays, a multiplier divides
/// them.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Speed {
    Instant,
    Multiplier(f64),
}

/// The process execution log: one trace per case plus creation metadata.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Log {
    pub meta: std::collections::BTreeMap<String, String>,
    traces: Vec<Trace>,
    index: HashMap<String, usize>,
}

impl Log {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn traces(&self) -> &[Trace] {
        &self.traces
    }

    pub fn trace(&self, case: &str) -> Option<&Trace> {
        self.index.get(case).map(|&i| &self.traces[i])
    }

    pub fn event_count(&self) -> usize {
        self.traces.iter().map(|t| t.events.len()).sum()
    }

    fn trace_mut(&mut self, case: &str) -> &mut Trace {
        if let Some(&i) = self.index.get(case) {
            return &mut self.traces[i];
        }
        self.index.insert(case.to_string(), self.traces.len());
        self.traces.push(Trace::new(case));
        self.traces.last_mut().expect("just pushed")
    }

    /// Appends a stream item to its case's trace, creating the trace if new.
    pub fn append(&mut self, item: StreamItem) {
        match item {
            StreamItem::Event(e) => {
                self.trace_mut(&e.case.clone()).append(e);
            }
            StreamItem::ModelUpdate(m) => {
                self.trace_mut(&m.case.clone()).record_model(&m);
            }
        }
    }

    /// Reinstates a fully materialized trace (XES import path).
    pub(crate) fn restore_trace(
        &mut self,
        case: String,
        models: Vec<ModelRecord>,
        events: Vec<Event>,
        open: bool,
        anomalies: Vec<String>,
    ) {
        let trace = self.trace_mut(&case);
        trace.models = models;
        trace.events = events;
        trace.open = open;
        trace.anomalies = anomalies;
        trace.rebuild_lifecycle_state();
    }

    /// Marks every trace closed; called when the inbound stream has ended.
    pub fn close_all(&mut self) {
        for trace in &mut self.traces {
            trace.open = false;
        }
    }

    /// All items of all traces merged back into one stream in global
    /// timestamp order. Ties are broken by (case id, per-case sequence
    /// number); model records sort before events at the same timestamp so a
    /// replayed checker sees descriptions first.
    pub fn replay_instant(&self) -> Vec<StreamItem> {
        type ReplayKey<'a> = (u64, &'a str, u8, usize);
        let mut keyed: Vec<(ReplayKey, StreamItem)> = Vec::new();
        for trace in &self.traces {
            for (seq, m) in trace.models.iter().enumerate() {
                keyed.push((
                    (m.ts, trace.case.as_str(), 0, seq),
                    StreamItem::ModelUpdate(ModelUpdate::new(
                        &trace.case,
                        &m.model,
                        m.version,
                        m.ts,
                        &m.model_description,
                    )),
                ));
            }
            for (seq, e) in trace.events.iter().enumerate() {
                keyed.push((
                    (e.ts, trace.case.as_str(), 1, seq),
                    StreamItem::Event(e.clone()),
                ));
            }
        }
        keyed.sort_by(|a, b| a.0.cmp(&b.0));
        keyed.into_iter().map(|(_, item)| item).collect()
    }

    /// Replays the log as an iterator, sleeping between items according to
    /// `speed`.
    pub fn replay(&self, speed: Speed) -> Replay {
        Replay {
            items: self.replay_instant().into_iter(),
            speed,
            last_ts: None,
        }
    }

    /// Writes the log as append-only JSON lines plus an index sidecar at
    /// `<path>.idx.json`.
    pub fn save(&self, path: &Path) -> Result<(), StreamError> {
        let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
        let mut index: Vec<serde_json::Value> = Vec::new();
        let mut line = 1usize;
        writeln!(file, "{}", json!({"rec": "log", "meta": self.meta}))?;
        line += 1;
        for trace in &self.traces {
            let first = line;
            writeln!(
                file,
                "{}",
                json!({"rec": "trace", "case": trace.case, "open": trace.open, "anomalies": trace.anomalies})
            )?;
            line += 1;
            for m in &trace.models {
                writeln!(
                    file,
                    "{}",
                    json!({"rec": "model", "case": trace.case, "body": m})
                )?;
                line += 1;
            }
            for e in &trace.events {
                writeln!(file, "{}", json!({"rec": "event", "body": e}))?;
                line += 1;
            }
            index.push(json!({
                "case": trace.case,
                "line": first,
                "models": trace.models.len(),
                "events": trace.events.len(),
            }));
        }
        file.flush()?;
        let sidecar = json!({"cases": index, "lines": line - 1});
        std::fs::write(
            sidecar_path(path),
            serde_json::to_string_pretty(&sidecar).expect("sidecar serializes"),
        )?;
        Ok(())
    }

    /// Loads a log written by [`Log::save`]. The sidecar is advisory; the
    /// JSON-lines file alone is authoritative.
    pub fn load(path: &Path) -> Result<Self, StreamError> {
        let file = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut log = Log::new();
        for (no, line) in file.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let value: serde_json::Value =
                serde_json::from_str(&line).map_err(|e| StreamError::Format {
                    line: no + 1,
                    message: e.to_string(),
                })?;
            let rec = value
                .get("rec")
                .and_then(|r| r.as_str())
                .unwrap_or_default();
            match rec {
                "log" => {
                    if let Some(meta) = value.get("meta") {
                        log.meta = serde_json::from_value(meta.clone()).map_err(|e| {
                            StreamError::Format {
                                line: no + 1,
                                message: e.to_string(),
                            }
                        })?;
                    }
                }
                "trace" => {
                    let case = value.get("case").and_then(|c| c.as_str()).ok_or_else(|| {
                        StreamError::Format {
                            line: no + 1,
                            message: "trace without case".into(),
                        }
                    })?;
                    let trace = log.trace_mut(case);
                    trace.open = value.get("open").and_then(|o| o.as_bool()).unwrap_or(true);
                    if let Some(anoms) = value.get("anomalies").and_then(|a| a.as_array()) {
                        trace.anomalies = anoms
                            .iter()
                            .filter_map(|a| a.as_str().map(String::from))
                            .collect();
                    }
                }
                "model" => {
                    let case = value
                        .get("case")
                        .and_then(|c| c.as_str())
                        .unwrap_or_default()
                        .to_string();
                    let body: ModelRecord =
                        serde_json::from_value(value.get("body").cloned().unwrap_or_default())
                            .map_err(|e| StreamError::Format {
                                line: no + 1,
                                message: e.to_string(),
                            })?;
                    log.trace_mut(&case).models.push(body);
                }
                "event" => {
                    let body: Event =
                        serde_json::from_value(value.get("body").cloned().unwrap_or_default())
                            .map_err(|e| StreamError::Format {
                                line: no + 1,
                                message: e.to_string(),
                            })?;
                    // Bypass append-side flagging: stored traces are already
                    // ordered and flagged.
                    log.trace_mut(&body.case.clone()).events.push(body);
                }
                other => {
                    return Err(StreamError::Format {
                        line: no + 1,
                        message: format!("unknown record kind '{other}'"),
                    })
                }
            }
        }
        for trace in &mut log.traces {
            trace.rebuild_lifecycle_state();
        }
        Ok(log)
    }
}

pub fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut os = path.as_os_str().to_os_string();
    os.push(".idx.json");
    std::path::PathBuf::from(os)
}

/// Iterator over a log's items in replay order; see [`Log::replay`].
pub struct Replay {
    items: std::vec::IntoIter<StreamItem>,
    speed: Speed,
    last_ts: Option<u64>,
}

impl Iterator for Replay {
    type Item = StreamItem;

    fn next(&mut self) -> Option<StreamItem> {
        let item = self.items.next()?;
        if let Speed::Multiplier(m) = self.speed {
            if let Some(last) = self.last_ts {
                let delta_ms = item.ts().saturating_sub(last) as f64 / m.max(f64::MIN_POSITIVE);
                if delta_ms > 0.0 {
                    std::thread::sleep(std::time::Duration::from_millis(delta_ms as u64));
                }
            }
        }
        self.last_ts = Some(item.ts());
        Some(item)
    }
}
