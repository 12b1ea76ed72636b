//! `flowmon simulate`: engine -> logger pipeline writing the notification
//! stream, the persisted log, and an XES export, all deterministically
//! derived from the manifest and seed.

use std::io::Write;
use std::sync::mpsc;

use anyhow::{Context, Result};
use flowmon_core::engine::Simulator;
use flowmon_core::stream::{xes, Log, Logger};
use flowmon_core::EngineNotification;

use crate::manifest::RunManifest;
use crate::{load, SimulateArgs};

pub fn run(args: SimulateArgs) -> Result<()> {
    let set = load::model_set(&args.models)?;
    let model_id = args
        .model_id
        .clone()
        .unwrap_or_else(|| set.main().model_id.clone());
    anyhow::ensure!(
        set.get(&model_id).is_some(),
        "model '{model_id}' not found in document(s)"
    );

    let manifest = RunManifest::build(
        &args.models,
        &model_id,
        args.instances,
        args.seed,
        args.faults.as_deref(),
        args.clock.as_deref(),
        args.references.as_deref(),
        &args.out,
    )?;

    let clock = load::clock(args.clock.as_deref())?;
    let plan = load::fault_plan(args.faults.as_deref())?;
    let references = load::references(args.references.as_deref())?;

    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    let notifications_path = args.out.join("notifications.jsonl");
    let mut notifications_file = std::io::BufWriter::new(
        std::fs::File::create(&notifications_path)
            .with_context(|| format!("creating {}", notifications_path.display()))?,
    );
    let events_path = args.out.join("events.jsonl");
    let mut events_file = std::io::BufWriter::new(
        std::fs::File::create(&events_path)
            .with_context(|| format!("creating {}", events_path.display()))?,
    );
    let mut stdout = args.stream.then(|| std::io::stdout().lock());

    let mut logger = Logger::new();
    let mut log = Log::new();
    log.meta.insert("seed".into(), args.seed.to_string());
    log.meta
        .insert("instances".into(), args.instances.to_string());
    log.meta.insert("model".into(), model_id.clone());
    log.meta
        .insert("manifest_hash".into(), manifest.manifest_hash.clone());

    // Engine stage feeds the logger stage through an ordered queue.
    let (tx, rx) = mpsc::sync_channel::<EngineNotification>(256);
    let sim_result = std::thread::scope(|scope| {
        let set = &set;
        let references = &references;
        let plan = &plan;
        let model_id = &model_id;
        let producer = scope.spawn(move || -> Result<(), flowmon_core::engine::SimError> {
            let mut sim = Simulator::new(set, clock, references, args.seed)?;
            for k in 1..=args.instances {
                let instance_plan = if k == plan.instance {
                    plan.clone()
                } else {
                    flowmon_core::FaultPlan::none()
                };
                for n in sim.run(model_id, &instance_plan)? {
                    if tx.send(n).is_err() {
                        break;
                    }
                }
            }
            drop(tx);
            Ok(())
        });
        for n in rx {
            let line = n.to_json();
            writeln!(notifications_file, "{line}")?;
            if let Some(out) = stdout.as_mut() {
                writeln!(out, "{line}")?;
            }
            for item in logger.ingest(&n) {
                writeln!(events_file, "{}", item.to_json())?;
                log.append(item);
            }
        }
        producer.join().expect("engine stage does not panic")?;
        anyhow::Ok(())
    });
    sim_result?;
    notifications_file.flush()?;
    events_file.flush()?;
    log.close_all();

    for q in logger.quarantined() {
        eprintln!("quarantined notification: {}", q.reason);
    }

    let log_path = args.out.join("log.jsonl");
    log.save(&log_path).context("writing log")?;
    let xes_path = args.out.join("log.xes");
    std::fs::write(&xes_path, xes::export_xes(&log)).context("writing XES export")?;
    std::fs::write(
        args.out.join("manifest.json"),
        serde_json::to_string_pretty(&manifest).expect("manifest serializes"),
    )?;

    eprintln!(
        "simulated {} instance(s) of '{model_id}': {} events in {} case(s), manifest {}",
        args.instances,
        log.event_count(),
        log.traces().len(),
        &manifest.manifest_hash[..12],
    );
    Ok(())
}
