//! Shared helpers for the integration and acceptance suites.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use flowmon_core::conformance::{CheckerConfig, StatsSnapshot};
use flowmon_core::engine::{FaultPlan, SimClock, Simulator};
use flowmon_core::model::ModelSet;
use flowmon_core::pipeline::{check_notifications, CheckOutcome};
use flowmon_core::series::SensorSeries;
use flowmon_core::EngineNotification;

pub fn fixture_path(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(rel)
}

pub fn load_model_set(rel: &str) -> ModelSet {
    let text = std::fs::read_to_string(fixture_path(rel)).expect("fixture model readable");
    ModelSet::parse(&text).expect("fixture model parses")
}

pub fn load_clock() -> SimClock {
    let text = std::fs::read_to_string(fixture_path("config/clock.json")).expect("clock fixture");
    serde_json::from_str(&text).expect("clock fixture parses")
}

pub fn load_checker_config() -> CheckerConfig {
    let text =
        std::fs::read_to_string(fixture_path("config/checker.json")).expect("checker fixture");
    serde_json::from_str(&text).expect("checker fixture parses")
}

pub fn load_fault_plan(rel: &str) -> FaultPlan {
    let text = std::fs::read_to_string(fixture_path(rel)).expect("fault fixture readable");
    serde_json::from_str(&text).expect("fault fixture parses")
}

pub fn load_references() -> BTreeMap<String, SensorSeries> {
    let mut refs = BTreeMap::new();
    let dir = fixture_path("references");
    for entry in std::fs::read_dir(dir).expect("references dir") {
        let path = entry.expect("dir entry").path();
        if path.extension().and_then(|e| e.to_str()) == Some("json") {
            let id = path.file_stem().unwrap().to_string_lossy().to_string();
            let series: SensorSeries =
                serde_json::from_str(&std::fs::read_to_string(&path).unwrap())
                    .expect("reference parses");
            refs.insert(id, series);
        }
    }
    refs
}

pub fn simulate(
    set: &ModelSet,
    model_id: &str,
    clock: &SimClock,
    plan: &FaultPlan,
    seed: u64,
) -> Vec<EngineNotification> {
    let refs = load_references();
    let mut sim = Simulator::new(set, clock.clone(), &refs, seed).expect("clock valid");
    sim.run(model_id, plan).expect("simulation succeeds")
}

pub fn live_check(
    notifications: &[EngineNotification],
    config: CheckerConfig,
    warm: Option<StatsSnapshot>,
) -> CheckOutcome {
    check_notifications(notifications, config, load_references(), warm).expect("config valid")
}

/// Stable textual form for comparing alert sets.
pub fn alert_set(outcome: &CheckOutcome) -> Vec<String> {
    let mut set: Vec<String> = outcome.alerts.iter().map(|a| a.to_json()).collect();
    set.sort();
    set
}
