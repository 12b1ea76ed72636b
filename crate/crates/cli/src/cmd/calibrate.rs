//! `flowmon calibrate`: derives per-series DTW thresholds and a warm
//! statistics snapshot from conforming runs.

use anyhow::{ensure, Context, Result};
use flowmon_core::conformance::Calibrator;
use flowmon_core::stream::Log;

use crate::{load, CalibrateArgs};

pub fn run(args: CalibrateArgs) -> Result<()> {
    ensure!(
        args.logs.len() >= 2,
        "calibration needs at least 2 conforming runs, got {}",
        args.logs.len()
    );
    let references = load::references(args.references.as_deref())?;
    let base = load::checker_config(args.config.as_deref())?;

    let mut calibrator = Calibrator::new(references).context("building calibrator")?;
    for path in &args.logs {
        let log = Log::load(path).with_context(|| format!("loading log {}", path.display()))?;
        for item in log.replay_instant() {
            calibrator.ingest(&item);
        }
    }
    let outcome = calibrator.finish(base);

    std::fs::write(
        &args.out_config,
        serde_json::to_string_pretty(&outcome.config).expect("config serializes"),
    )
    .with_context(|| format!("writing {}", args.out_config.display()))?;
    std::fs::write(
        &args.out_stats,
        serde_json::to_string_pretty(&outcome.stats).expect("stats serialize"),
    )
    .with_context(|| format!("writing {}", args.out_stats.display()))?;

    for (series, samples) in &outcome.samples {
        eprintln!(
            "series '{}': {} sample(s), threshold {:.6}",
            series,
            samples.len(),
            outcome.config.dtw_thresholds[series]
        );
    }
    eprintln!(
        "calibrated from {} run(s); {} duration and {} gap statistic bucket(s)",
        args.logs.len(),
        outcome.stats.duration.len(),
        outcome.stats.gap.len()
    );
    Ok(())
}
