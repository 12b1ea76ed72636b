//! Wires logger, splitter, and checker together for live notification
//! streams and log replays. Both paths feed the checker the identical item
//! sequence, which is what makes live and replayed results comparable.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::conformance::{
    trace_cost, Checker, CheckerConfig, Deviation, DeviationKind, StatsSnapshot,
};
use crate::engine::EngineNotification;
use crate::series::SensorSeries;
use crate::splitter::StreamSplitter;
use crate::stream::{Log, Logger, StreamItem};

/// Cost summary row for one (case, part) scope.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScopeCost {
    pub case: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub part: Option<String>,
    pub cost: f64,
    pub alerts: usize,
}

#[derive(Debug, Default)]
pub struct CheckOutcome {
    pub alerts: Vec<Deviation>,
    pub summary: Vec<ScopeCost>,
    pub diagnostics: Vec<String>,
    pub counters: crate::conformance::CheckCounters,
}

impl CheckOutcome {
    pub fn alerts_of_kind(&self, kind: DeviationKind) -> usize {
        self.alerts.iter().filter(|a| a.kind == kind).count()
    }

    pub fn cost_for(&self, case: &str, part: Option<&str>) -> f64 {
        self.summary
            .iter()
            .find(|s| s.case == case && s.part.as_deref() == part)
            .map(|s| s.cost)
            .unwrap_or(0.0)
    }
}

/// Streaming checker pipeline: splitter in front of the checker, collecting
/// alerts and the per-scope cost summary.
pub struct CheckPipeline {
    splitter: StreamSplitter,
    checker: Checker,
    alerts: Vec<Deviation>,
}

impl CheckPipeline {
    pub fn new(
        config: CheckerConfig,
        references: BTreeMap<String, SensorSeries>,
        warm_stats: Option<StatsSnapshot>,
    ) -> Result<Self, crate::conformance::ConfigError> {
        let mut checker = Checker::new(config, references)?;
        if let Some(snapshot) = warm_stats {
            checker.load_stats(snapshot);
        }
        Ok(CheckPipeline {
            splitter: StreamSplitter::new(),
            checker,
            alerts: Vec::new(),
        })
    }

    /// Processes one stream item; returns the alerts it raised.
    pub fn push(&mut self, item: StreamItem) -> Vec<Deviation> {
        self.push_split(item).1
    }

    /// Like [`CheckPipeline::push`], also handing back the split item (with
    /// its part field assigned) for callers that re-emit the stream.
    pub fn push_split(&mut self, mut item: StreamItem) -> (StreamItem, Vec<Deviation>) {
        self.splitter.process(&mut item);
        let deviations = self.checker.process(&item);
        self.alerts.extend(deviations.iter().cloned());
        (item, deviations)
    }

    pub fn finish(self) -> CheckOutcome {
        let mut summary: Vec<ScopeCost> = self
            .checker
            .scopes()
            .map(|(case, part)| {
                let scoped: Vec<&Deviation> = self
                    .alerts
                    .iter()
                    .filter(|a| &a.case == case && a.part == *part)
                    .collect();
                ScopeCost {
                    case: case.clone(),
                    part: part.clone(),
                    cost: trace_cost(scoped.iter().copied()),
                    alerts: scoped.len(),
                }
            })
            .collect();
        // Case-level alerts (model evolution) may target scopes without
        // events; make sure they are not lost from the summary.
        for alert in &self.alerts {
            if !summary
                .iter()
                .any(|s| s.case == alert.case && s.part == alert.part)
            {
                let scoped: Vec<&Deviation> = self
                    .alerts
                    .iter()
                    .filter(|a| a.case == alert.case && a.part == alert.part)
                    .collect();
                summary.push(ScopeCost {
                    case: alert.case.clone(),
                    part: alert.part.clone(),
                    cost: trace_cost(scoped.iter().copied()),
                    alerts: scoped.len(),
                });
            }
        }
        summary.sort_by(|a, b| (&a.case, &a.part).cmp(&(&b.case, &b.part)));
        CheckOutcome {
            alerts: self.alerts,
            summary,
            diagnostics: self.checker.diagnostics().to_vec(),
            counters: self.checker.counters().clone(),
        }
    }
}

/// Runs the logger over a notification stream, producing the stream items
/// for checking plus the persistent log.
pub fn log_notifications<'a>(
    notifications: impl IntoIterator<Item = &'a EngineNotification>,
) -> (Vec<StreamItem>, Log, Vec<String>) {
    let mut logger = Logger::new();
    let mut log = Log::new();
    let mut items = Vec::new();
    for n in notifications {
        for item in logger.ingest(n) {
            log.append(item.clone());
            items.push(item);
        }
    }
    log.close_all();
    let diagnostics = logger
        .quarantined()
        .iter()
        .map(|q| q.reason.clone())
        .collect();
    (items, log, diagnostics)
}

/// Live path: notifications -> logger -> splitter -> checker.
pub fn check_notifications<'a>(
    notifications: impl IntoIterator<Item = &'a EngineNotification>,
    config: CheckerConfig,
    references: BTreeMap<String, SensorSeries>,
    warm_stats: Option<StatsSnapshot>,
) -> Result<CheckOutcome, crate::conformance::ConfigError> {
    let (items, _, mut diagnostics) = log_notifications(notifications);
    let mut pipeline = CheckPipeline::new(config, references, warm_stats)?;
    for item in items {
        pipeline.push(item);
    }
    let mut outcome = pipeline.finish();
    diagnostics.append(&mut outcome.diagnostics);
    outcome.diagnostics = diagnostics;
    Ok(outcome)
}

/// Replay path: persisted log -> instant replay -> splitter -> checker.
pub fn check_replay(
    log: &Log,
    config: CheckerConfig,
    references: BTreeMap<String, SensorSeries>,
    warm_stats: Option<StatsSnapshot>,
) -> Result<CheckOutcome, crate::conformance::ConfigError> {
    let mut pipeline = CheckPipeline::new(config, references, warm_stats)?;
    for item in log.replay_instant() {
        pipeline.push(item);
    }
    Ok(pipeline.finish())
}
