//! `flowmon stats`: per-task duration and gap statistics of a persisted log.

use anyhow::{Context, Result};
use flowmon_core::conformance::Calibrator;
use flowmon_core::stream::Log;

use crate::StatsArgs;

pub fn run(args: StatsArgs) -> Result<()> {
    let log =
        Log::load(&args.log).with_context(|| format!("loading log {}", args.log.display()))?;
    let mut calibrator = Calibrator::new(Default::default()).context("building accumulator")?;
    for item in log.replay_instant() {
        calibrator.ingest(&item);
    }
    let outcome = calibrator.finish(Default::default());

    println!(
        "{:<10} {:<32} {:>6} {:>12} {:>12}",
        "kind", "model/task", "n", "mean[s]", "stddev[s]"
    );
    for (kind, map) in [
        ("duration", &outcome.stats.duration),
        ("gap", &outcome.stats.gap),
    ] {
        for (key, stats) in map {
            println!(
                "{:<10} {:<32} {:>6} {:>12.4} {:>12.4}",
                kind,
                key,
                stats.n,
                stats.mean,
                stats.stddev().unwrap_or(0.0)
            );
        }
    }
    Ok(())
}
