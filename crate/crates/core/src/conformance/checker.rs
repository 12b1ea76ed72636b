//! The online checker: consumes the (split) event stream plus golden
//! references and emits classified deviations.
//!
//! State is partitioned per case; events of one case are processed strictly
//! in arrival order and every deviation is returned before the next item is
//! consumed. Duration and gap statistics are global per (model, task) and
//! learned online from conforming observations only: a flagged observation
//! never shifts the baseline it was judged against. During cold start the
//! model's expected-duration annotation acts as prior with a synthetic
//! sigma, so the threshold is operational from the first instance.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::model::{ModelSet, OrderTracker, StepInfo};
use crate::series::SensorSeries;
use crate::stream::{Event, Lifecycle, ModelUpdate, StreamItem};

use super::dtw::dtw_distance;
use super::stats::{zscore, RunningStats, ZScore};
use super::{CheckerConfig, ConfigError, Deviation, DeviationKind};

/// Running totals over everything the checker has looked at.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CheckCounters {
    pub events: u64,
    /// Temporal observations that produced a z-score (warm or prior phase).
    pub temporal_scored: u64,
    pub temporal_flagged: u64,
    pub series_checked: u64,
    pub series_flagged: u64,
    pub starts_checked: u64,
    pub order_flagged: u64,
    pub model_changes: u64,
    pub quarantined: u64,
}

/// Serializable warm-stats snapshot; keys are `model/task`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StatsSnapshot {
    #[serde(default)]
    pub duration: BTreeMap<String, RunningStats>,
    #[serde(default)]
    pub gap: BTreeMap<String, RunningStats>,
}

fn stat_key(model: &str, task: &str) -> String {
    format!("{model}/{task}")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum TemporalKind {
    Duration,
    Gap,
}

struct CaseState {
    model_id: String,
    version: u64,
    tasks: BTreeMap<String, StepInfo>,
    order: OrderTracker,
    start_history: Vec<String>,
    /// (part, task) -> FIFO of open start timestamps.
    open_starts: HashMap<(Option<String>, String), Vec<u64>>,
    /// part -> (task, ts) of the most recent complete event.
    last_complete: HashMap<Option<String>, (String, u64)>,
}

impl CaseState {
    fn new(update: &ModelUpdate, set: ModelSet) -> Self {
        let main_id = set.main().model_id.clone();
        let tasks = set.task_index(&main_id).unwrap_or_default();
        let order = OrderTracker::new(&set, &main_id);
        CaseState {
            model_id: update.model.clone(),
            version: update.version,
            tasks,
            order,
            start_history: Vec::new(),
            open_starts: HashMap::new(),
            last_complete: HashMap::new(),
        }
    }
}

pub struct Checker {
    config: CheckerConfig,
    references: BTreeMap<String, SensorSeries>,
    duration_stats: BTreeMap<String, RunningStats>,
    gap_stats: BTreeMap<String, RunningStats>,
    cases: HashMap<String, CaseState>,
    diagnostics: Vec<String>,
    counters: CheckCounters,
    /// Every DTW distance measured, per series id; calibration input.
    dtw_observations: Vec<(String, f64)>,
    scopes: BTreeSet<(String, Option<String>)>,
}

impl Checker {
    pub fn new(
        config: CheckerConfig,
        references: BTreeMap<String, SensorSeries>,
    ) -> Result<Self, ConfigError> {
        config.validate()?;
        Ok(Checker {
            config,
            references,
            duration_stats: BTreeMap::new(),
            gap_stats: BTreeMap::new(),
            cases: HashMap::new(),
            diagnostics: Vec::new(),
            counters: CheckCounters::default(),
            dtw_observations: Vec::new(),
            scopes: BTreeSet::new(),
        })
    }

    pub fn config(&self) -> &CheckerConfig {
        &self.config
    }

    pub fn counters(&self) -> &CheckCounters {
        &self.counters
    }

    pub fn diagnostics(&self) -> &[String] {
        &self.diagnostics
    }

    pub fn dtw_observations(&self) -> &[(String, f64)] {
        &self.dtw_observations
    }

    /// Every (case, part) scope that produced at least one event, in sorted
    /// order; parts with zero alerts have conformance cost 0.
    pub fn scopes(&self) -> impl Iterator<Item = &(String, Option<String>)> {
        self.scopes.iter()
    }

    pub fn stats_snapshot(&self) -> StatsSnapshot {
        StatsSnapshot {
            duration: self.duration_stats.clone(),
            gap: self.gap_stats.clone(),
        }
    }

    /// Seeds the learned statistics from a calibration snapshot.
    pub fn load_stats(&mut self, snapshot: StatsSnapshot) {
        self.duration_stats.extend(snapshot.duration);
        self.gap_stats.extend(snapshot.gap);
    }

    fn diagnose(&mut self, message: String) {
        self.diagnostics.push(message);
    }

    /// Processes one stream item and returns the deviations it triggered, in
    /// detection order.
    pub fn process(&mut self, item: &StreamItem) -> Vec<Deviation> {
        match item {
            StreamItem::ModelUpdate(update) => self.process_model_update(update),
            StreamItem::Event(event) => self.process_event(event),
        }
    }

    fn process_model_update(&mut self, update: &ModelUpdate) -> Vec<Deviation> {
        let set = match ModelSet::parse(&update.model_description) {
            Ok(set) => set,
            Err(err) => {
                self.diagnose(format!(
                    "case '{}': unparseable model description ({err}); events will be quarantined",
                    update.case
                ));
                return Vec::new();
            }
        };
        match self.cases.get(&update.case) {
            None => {
                self.cases
                    .insert(update.case.clone(), CaseState::new(update, set));
                Vec::new()
            }
            Some(state) if update.version > state.version => {
                self.counters.model_changes += 1;
                let deviation = Deviation {
                    kind: DeviationKind::ModelEvolution,
                    case: update.case.clone(),
                    part: None,
                    task: None,
                    score: 1.0,
                    threshold: 0.0,
                    root_cause: DeviationKind::ModelEvolution.root_cause(),
                    explanation: format!(
                        "model '{}' evolved from version {} to {}; subsequent checks follow the new version",
                        update.model, state.version, update.version
                    ),
                    ts: update.ts,
                };
                self.swap_model(&update.case.clone(), update, set);
                vec![deviation]
            }
            Some(state) if update.version == state.version => Vec::new(),
            Some(state) => {
                self.diagnose(format!(
                    "case '{}': model version regressed from {} to {}; keeping current model",
                    update.case, state.version, update.version
                ));
                Vec::new()
            }
        }
    }

    /// Installs the evolved model: statistics are reset only for tasks whose
    /// annotations changed, and the order state is rebuilt by replaying the
    /// case's observed starts against the new version.
    fn swap_model(&mut self, case: &str, update: &ModelUpdate, set: ModelSet) {
        let state = self.cases.get_mut(case).expect("caller checked");
        let main_id = set.main().model_id.clone();
        let new_tasks = set.task_index(&main_id).unwrap_or_default();

        let mut touched: BTreeSet<&String> = BTreeSet::new();
        touched.extend(state.tasks.keys());
        touched.extend(new_tasks.keys());
        for task in touched {
            let old = state.tasks.get(task);
            let new = new_tasks.get(task);
            let duration_changed = old.and_then(|t| t.expected_duration)
                != new.and_then(|t| t.expected_duration)
                || old.is_none()
                || new.is_none();
            let gap_changed = old.and_then(|t| t.expected_gap_after)
                != new.and_then(|t| t.expected_gap_after)
                || old.is_none()
                || new.is_none();
            if duration_changed {
                self.duration_stats.remove(&stat_key(&state.model_id, task));
                self.duration_stats.remove(&stat_key(&update.model, task));
            }
            if gap_changed {
                self.gap_stats.remove(&stat_key(&state.model_id, task));
                self.gap_stats.remove(&stat_key(&update.model, task));
            }
        }

        state.order = OrderTracker::rebuild(&set, &main_id, &state.start_history);
        state.tasks = new_tasks;
        state.model_id = update.model.clone();
        state.version = update.version;
    }

    fn process_event(&mut self, event: &Event) -> Vec<Deviation> {
        self.counters.events += 1;
        if !self.cases.contains_key(&event.case) {
            self.counters.quarantined += 1;
            self.diagnose(format!(
                "event for case '{}' without a model description; quarantined",
                event.case
            ));
            return Vec::new();
        }
        self.scopes.insert((event.case.clone(), event.part.clone()));

        let task_id = event.task_id().to_string();
        let mut deviations = Vec::new();
        match event.lifecycle {
            Lifecycle::Start => {
                self.check_order(event, &task_id, &mut deviations);
                self.check_gap(event, &task_id, &mut deviations);
                let state = self.cases.get_mut(&event.case).expect("checked");
                state
                    .open_starts
                    .entry((event.part.clone(), task_id))
                    .or_default()
                    .push(event.ts);
            }
            Lifecycle::Complete => {
                self.check_duration(event, &task_id, &mut deviations);
                self.check_series(event, &task_id, &mut deviations);
                let state = self.cases.get_mut(&event.case).expect("checked");
                state
                    .last_complete
                    .insert(event.part.clone(), (task_id, event.ts));
            }
        }
        deviations
    }

    fn check_order(&mut self, event: &Event, task_id: &str, out: &mut Vec<Deviation>) {
        self.counters.starts_checked += 1;
        let state = self.cases.get_mut(&event.case).expect("checked");
        let outcome = state.order.observe_start(task_id);
        state.start_history.push(task_id.to_string());
        if !outcome.conforming {
            self.counters.order_flagged += 1;
            let allowed: Vec<&str> = outcome.allowed_before.iter().map(String::as_str).collect();
            out.push(Deviation {
                kind: DeviationKind::ControlFlow,
                case: event.case.clone(),
                part: event.part.clone(),
                task: Some(task_id.to_string()),
                score: 1.0,
                threshold: 0.0,
                root_cause: DeviationKind::ControlFlow.root_cause(),
                explanation: format!(
                    "unexpected start of '{}' (\"{}\"); allowed next: [{}]",
                    task_id,
                    event.name,
                    allowed.join(", ")
                ),
                ts: event.ts,
            });
        }
    }

    fn check_gap(&mut self, event: &Event, task_id: &str, out: &mut Vec<Deviation>) {
        let state = self.cases.get(&event.case).expect("checked");
        let Some((prev_task, prev_ts)) = state.last_complete.get(&event.part).cloned() else {
            return;
        };
        if event.ts < prev_ts {
            self.diagnose(format!(
                "case '{}': start of '{}' predates previous complete; gap skipped",
                event.case, task_id
            ));
            return;
        }
        let gap_s = (event.ts - prev_ts) as f64 / 1000.0;
        let prior = state
            .tasks
            .get(&prev_task)
            .and_then(|t| t.expected_gap_after);
        let model_id = state.model_id.clone();
        if let Some(deviation) = self.temporal_check(
            TemporalKind::Gap,
            &model_id,
            &prev_task,
            gap_s,
            prior,
            event,
            &format!("gap after '{prev_task}' before '{task_id}'"),
        ) {
            out.push(deviation);
        }
    }

    fn check_duration(&mut self, event: &Event, task_id: &str, out: &mut Vec<Deviation>) {
        let state = self.cases.get_mut(&event.case).expect("checked");
        let open = state
            .open_starts
            .get_mut(&(event.part.clone(), task_id.to_string()))
            .and_then(|starts| (!starts.is_empty()).then(|| starts.remove(0)));
        let Some(start_ts) = open else {
            self.counters.order_flagged += 1;
            out.push(Deviation {
                kind: DeviationKind::ControlFlow,
                case: event.case.clone(),
                part: event.part.clone(),
                task: Some(task_id.to_string()),
                score: 1.0,
                threshold: 0.0,
                root_cause: DeviationKind::ControlFlow.root_cause(),
                explanation: format!(
                    "lifecycle anomaly: complete of '{task_id}' without a matching start; no duration computed"
                ),
                ts: event.ts,
            });
            return;
        };
        let duration_s = event.ts.saturating_sub(start_ts) as f64 / 1000.0;
        let prior = state.tasks.get(task_id).and_then(|t| t.expected_duration);
        let model_id = state.model_id.clone();
        if let Some(deviation) = self.temporal_check(
            TemporalKind::Duration,
            &model_id,
            task_id,
            duration_s,
            prior,
            event,
            &format!("duration of '{}' (\"{}\")", task_id, event.name),
        ) {
            out.push(deviation);
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn temporal_check(
        &mut self,
        kind: TemporalKind,
        model_id: &str,
        stat_task: &str,
        observed_s: f64,
        prior: Option<f64>,
        event: &Event,
        what: &str,
    ) -> Option<Deviation> {
        let key = stat_key(model_id, stat_task);
        let stats_map = match kind {
            TemporalKind::Duration => &mut self.duration_stats,
            TemporalKind::Gap => &mut self.gap_stats,
        };
        let stats = stats_map.entry(key.clone()).or_default();
        match zscore(observed_s, stats, &self.config, prior) {
            ZScore::InsufficientData => {
                // Unannotated task during cold start: harmless, learn only.
                stats.update(observed_s);
                None
            }
            ZScore::Score(z) => {
                self.counters.temporal_scored += 1;
                if z.abs() > self.config.z_threshold {
                    self.counters.temporal_flagged += 1;
                    let warm = stats.n >= self.config.cold_start_n.max(2);
                    let baseline = if warm {
                        stats.mean
                    } else {
                        prior.unwrap_or(stats.mean)
                    };
                    Some(Deviation {
                        kind: match kind {
                            TemporalKind::Duration => DeviationKind::TimeDuration,
                            TemporalKind::Gap => DeviationKind::TimeGap,
                        },
                        case: event.case.clone(),
                        part: event.part.clone(),
                        task: Some(stat_task.to_string()),
                        score: if z.is_finite() { z.abs() } else { f64::MAX },
                        threshold: self.config.z_threshold,
                        root_cause: DeviationKind::TimeDuration.root_cause(),
                        explanation: format!(
                            "{what}: {observed_s:.3}s deviates from expected ~{baseline:.3}s (|z|={:.2} > {})",
                            if z.is_finite() { z.abs() } else { f64::INFINITY },
                            self.config.z_threshold
                        ),
                        ts: event.ts,
                    })
                } else {
                    stats.update(observed_s);
                    None
                }
            }
        }
    }

    fn check_series(&mut self, event: &Event, task_id: &str, out: &mut Vec<Deviation>) {
        let Some(observed) = event.series() else {
            return;
        };
        let state = self.cases.get(&event.case).expect("checked");
        let Some(series_id) = state
            .tasks
            .get(task_id)
            .and_then(|t| t.reference_series_id.clone())
        else {
            self.diagnose(format!(
                "case '{}': task '{}' carries a series but no reference annotation",
                event.case, task_id
            ));
            return;
        };
        let Some(golden) = self.references.get(&series_id) else {
            self.diagnose(format!(
                "no golden reference '{series_id}' for task '{task_id}'; series not judged"
            ));
            return;
        };
        let distance = match dtw_distance(
            &observed.values(),
            &golden.values(),
            self.config.dtw_band,
            self.config.znormalize_series,
        ) {
            Ok(d) => d,
            Err(err) => {
                self.diagnose(format!("dtw failed for series '{series_id}': {err}"));
                return;
            }
        };
        self.counters.series_checked += 1;
        self.dtw_observations.push((series_id.clone(), distance));
        let threshold = self.config.dtw_threshold_for(&series_id);
        if distance > threshold {
            self.counters.series_flagged += 1;
            out.push(Deviation {
                kind: DeviationKind::SensorData,
                case: event.case.clone(),
                part: event.part.clone(),
                task: Some(task_id.to_string()),
                score: distance,
                threshold,
                root_cause: DeviationKind::SensorData.root_cause(),
                explanation: format!(
                    "sensor series '{series_id}' of '{task_id}' is too far from the golden reference (dtw {distance:.4} > {threshold:.4})"
                ),
                ts: event.ts,
            });
        }
    }
}
