//! Cross-module integration tests: engine output against model semantics,
//! logger counting, splitter isolation, and calibration snapshots.

mod common;

use std::collections::BTreeMap;

use common::*;
use flowmon_core::conformance::{CheckerConfig, StatsSnapshot};
use flowmon_core::engine::{Fault, FaultPlan, SimClock, WhichEvent};
use flowmon_core::model::{allowed_next, ModelSet};
use flowmon_core::pipeline::log_notifications;
use flowmon_core::stream::Lifecycle;
use flowmon_core::{DeviationKind, NotificationKind};

/// With an empty fault plan, the projected start order is legal under
/// `allowed_next` at every prefix.
#[test]
fn fault_free_runs_follow_model_semantics() {
    let docs = [
        "model m v1 { seq { task a; par { task b; seq { task c; task d } }; loop 3 { task e } } }",
        "model m v1 { par { seq { task a; task b }; seq { task c; task d }; task e } }",
        "model m v1 { seq { task a; call sub; task z } } model sub v1 { par { task s1; task s2 } }",
    ];
    for doc in docs {
        let set = ModelSet::parse(doc).unwrap();
        for seed in 0..20u64 {
            let clock = SimClock {
                jitter: 0.3,
                ..SimClock::default()
            };
            let ns = simulate(&set, "m", &clock, &FaultPlan::none(), seed);
            let starts: Vec<String> = ns
                .iter()
                .filter(|n| n.kind == NotificationKind::TaskEnacted)
                .filter_map(|n| n.task.clone())
                .collect();
            for cut in 0..starts.len() {
                let allowed = allowed_next(&set, "m", &starts[..cut]);
                assert!(
                    allowed.contains(&starts[cut]),
                    "seed {seed}: start {} not allowed after {:?}",
                    starts[cut],
                    &starts[..cut]
                );
            }
            assert!(
                allowed_next(&set, "m", &starts).is_empty(),
                "run is complete"
            );
        }
    }
}

/// Every finish is preceded by its enact, also under delay and tamper
/// faults; only dropped events may break the pairing.
#[test]
fn enact_finish_pairing_invariant() {
    let set = load_model_set("models/keyence.model");
    let plans = [
        FaultPlan::none(),
        FaultPlan {
            faults: vec![Fault::Delay {
                task: "fetch".into(),
                occurrence: 1,
                extra_seconds: 9.0,
            }],
            ..FaultPlan::none()
        },
        FaultPlan {
            faults: vec![Fault::TamperSeries {
                task: "fetch".into(),
                occurrence: 1,
                offset: 1.0,
                noise_amplitude: 0.0,
            }],
            ..FaultPlan::none()
        },
    ];
    for (i, plan) in plans.iter().enumerate() {
        let ns = simulate(&set, "keyence_measure", &load_clock(), plan, i as u64);
        let mut open: BTreeMap<String, u32> = BTreeMap::new();
        for n in &ns {
            match n.kind {
                NotificationKind::TaskEnacted => {
                    *open.entry(n.task.clone().unwrap()).or_insert(0) += 1;
                }
                NotificationKind::TaskFinished => {
                    let counter = open.get_mut(n.task.as_ref().unwrap()).expect("enact first");
                    assert!(*counter > 0, "finish after enact for {:?}", n.task);
                    *counter -= 1;
                }
                _ => {}
            }
            // Timestamps non-decreasing per instance (single timeline here).
        }
        assert!(open.values().all(|&v| v == 0));
        let ts: Vec<u64> = ns.iter().map(|n| n.ts).collect();
        assert!(ts.windows(2).all(|w| w[0] <= w[1]));
    }
}

/// With jitter 0 and no faults, each task's finish - enact equals its
/// baseline exactly.
#[test]
fn zero_jitter_durations_are_exact() {
    let set = load_model_set("models/unload_tray.model");
    let mut clock = load_clock();
    clock.jitter = 0.0;
    let ns = simulate(&set, "unload_tray", &clock, &FaultPlan::none(), 4);
    let mut enacted: BTreeMap<String, u64> = BTreeMap::new();
    let mut matched = 0;
    for n in &ns {
        match n.kind {
            NotificationKind::TaskEnacted => {
                enacted.insert(n.task.clone().unwrap(), n.ts);
            }
            NotificationKind::TaskFinished => {
                let start = enacted[n.task.as_ref().unwrap()];
                assert_eq!(n.ts - start, 30_000, "exactly the 30 s baseline");
                matched += 1;
            }
            _ => {}
        }
    }
    assert_eq!(matched, 3);
}

/// A run of k task occurrences yields exactly 2k events, minus dropped ones.
#[test]
fn event_counts_match_occurrences() {
    let set = load_model_set("models/daily_batch.model");
    let clock = load_clock();
    // check + 5 * (signal + cut + measure + unload) = 21 occurrences.
    let ns = simulate(&set, "daily_batch", &clock, &FaultPlan::none(), 9);
    let (items, log, _) = log_notifications(&ns);
    let events = items
        .iter()
        .filter(|i| matches!(i, flowmon_core::StreamItem::Event(_)))
        .count();
    assert_eq!(events, 42);
    assert_eq!(log.event_count(), 42);

    let plan = FaultPlan {
        faults: vec![
            Fault::DropEvent {
                task: "cut".into(),
                occurrence: 1,
                which: WhichEvent::Enact,
            },
            Fault::DropEvent {
                task: "unload".into(),
                occurrence: 3,
                which: WhichEvent::Finish,
            },
        ],
        ..FaultPlan::none()
    };
    let ns = simulate(&set, "daily_batch", &clock, &plan, 9);
    let (_, log, _) = log_notifications(&ns);
    assert_eq!(log.event_count(), 40);
}

/// A tampered series in one of five parts is attributed to exactly that
/// part; sibling parts stay clean.
#[test]
fn tamper_fault_is_isolated_to_its_part() {
    let set = load_model_set("models/daily_batch.model");
    let plan = FaultPlan {
        faults: vec![Fault::TamperSeries {
            task: "measure".into(),
            occurrence: 4,
            offset: 0.6,
            noise_amplitude: 0.01,
        }],
        ..FaultPlan::none()
    };
    let ns = simulate(&set, "daily_batch", &load_clock(), &plan, 21);
    let outcome = live_check(&ns, load_checker_config(), None);
    assert_eq!(outcome.alerts.len(), 1);
    assert_eq!(outcome.alerts[0].kind, DeviationKind::SensorData);
    assert_eq!(outcome.alerts[0].part.as_deref(), Some("i0001#4"));
    for part in [1u32, 2, 3, 5] {
        assert_eq!(
            outcome.cost_for("i0001", Some(&format!("i0001#{part}"))),
            0.0
        );
    }
}

/// Warm stats snapshots round-trip through JSON and skip the cold start.
#[test]
fn stats_snapshot_round_trip_warms_the_checker() {
    let set = load_model_set("models/unload_tray.model");
    let clock = load_clock();
    let mut calibrator = flowmon_core::conformance::Calibrator::new(load_references()).unwrap();
    for seed in 0..8u64 {
        let ns = simulate(&set, "unload_tray", &clock, &FaultPlan::none(), seed);
        for item in log_notifications(&ns).0 {
            calibrator.ingest(&item);
        }
    }
    let outcome = calibrator.finish(load_checker_config());
    let json = serde_json::to_string(&outcome.stats).unwrap();
    let restored: StatsSnapshot = serde_json::from_str(&json).unwrap();
    assert_eq!(outcome.stats, restored);
    assert_eq!(restored.duration["unload_tray/a12"].n, 8);

    // Warm checker: a delayed run is judged against learned statistics.
    let plan = FaultPlan {
        faults: vec![Fault::Delay {
            task: "a12".into(),
            occurrence: 1,
            extra_seconds: 20.0,
        }],
        ..FaultPlan::none()
    };
    let ns = simulate(&set, "unload_tray", &clock, &plan, 77);
    let checked = live_check(&ns, CheckerConfig::default(), Some(restored));
    assert_eq!(checked.alerts.len(), 1);
    assert_eq!(checked.alerts[0].kind, DeviationKind::TimeDuration);
}

/// A deviation is returned by the very item that triggered it, before any
/// later event of the case is consumed.
#[test]
fn alerts_are_emitted_at_the_triggering_event() {
    use flowmon_core::pipeline::CheckPipeline;
    use flowmon_core::StreamItem;

    let set = load_model_set("models/unload_tray.model");
    let plan = FaultPlan {
        faults: vec![Fault::ZeroDuration {
            task: "a17".into(),
            occurrence: 1,
        }],
        ..FaultPlan::none()
    };
    let ns = simulate(&set, "unload_tray", &load_clock(), &plan, 13);
    let (items, _, _) = log_notifications(&ns);
    let mut pipeline = CheckPipeline::new(load_checker_config(), load_references(), None).unwrap();
    let mut hit = None;
    for (i, item) in items.iter().enumerate() {
        let is_faulty_complete = matches!(
            item,
            StreamItem::Event(e)
                if e.task_id() == "a17" && e.lifecycle == Lifecycle::Complete
        );
        let alerts = pipeline.push(item.clone());
        if is_faulty_complete {
            assert_eq!(
                alerts.len(),
                1,
                "alert raised by the faulty complete itself"
            );
            hit = Some(i);
        } else {
            assert!(alerts.is_empty(), "no alert before or after the trigger");
        }
    }
    assert!(hit.is_some());
}

/// Replay honors a speed multiplier without reordering.
#[test]
fn replay_with_multiplier_preserves_order() {
    let set = load_model_set("models/unload_tray.model");
    let ns = simulate(&set, "unload_tray", &load_clock(), &FaultPlan::none(), 2);
    let (_, log, _) = log_notifications(&ns);
    let instant: Vec<_> = log.replay_instant();
    // A huge multiplier keeps the sleeps negligible.
    let timed: Vec<_> = log
        .replay(flowmon_core::stream::Speed::Multiplier(1e9))
        .collect();
    assert_eq!(instant, timed);
}
