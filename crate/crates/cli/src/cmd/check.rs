//! `flowmon check`: online checking of a live notification stream, an event
//! stream, or a persisted log replay. Alerts stream out as JSON lines while
//! events are still being consumed; the per-case/part cost summary follows on
//! stderr. Exit code 0 means conforming, 1 means deviations, 2 input error.

use std::io::{BufRead, Write};
use std::path::Path;
use std::process::ExitCode;
use std::sync::mpsc;

use anyhow::{bail, Context, Result};
use flowmon_core::pipeline::{CheckOutcome, CheckPipeline};
use flowmon_core::stream::{Log, Logger, Speed, StreamItem};
use flowmon_core::EngineNotification;

use crate::{load, CheckArgs};

enum LineSource {
    Stdin,
    File(std::io::BufReader<std::fs::File>),
}

fn open_lines(path: &Path) -> Result<LineSource> {
    if path.as_os_str() == "-" {
        Ok(LineSource::Stdin)
    } else {
        Ok(LineSource::File(std::io::BufReader::new(
            std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?,
        )))
    }
}

impl LineSource {
    fn for_each_line(self, mut f: impl FnMut(String)) -> Result<()> {
        match self {
            LineSource::Stdin => {
                let stdin = std::io::stdin();
                for line in stdin.lock().lines() {
                    f(line?);
                }
            }
            LineSource::File(reader) => {
                for line in reader.lines() {
                    f(line?);
                }
            }
        }
        Ok(())
    }
}

fn parse_speed(s: &str) -> Result<Speed> {
    if s == "instant" {
        return Ok(Speed::Instant);
    }
    let m: f64 = s
        .parse()
        .context("speed must be 'instant' or a positive number")?;
    anyhow::ensure!(m > 0.0, "speed multiplier must be positive");
    Ok(Speed::Multiplier(m))
}

pub fn run(args: CheckArgs) -> Result<ExitCode> {
    let config = load::checker_config(args.config.as_deref())?;
    let references = load::references(args.references.as_deref())?;
    let warm = load::stats_snapshot(args.stats.as_deref())?;
    let mut pipeline =
        CheckPipeline::new(config, references, warm).context("invalid checker config")?;

    let mut alert_sink: Box<dyn Write> = match &args.alerts {
        Some(path) => Box::new(std::io::BufWriter::new(
            std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?,
        )),
        None => Box::new(std::io::stdout().lock()),
    };
    let mut split_sink: Option<std::io::BufWriter<std::fs::File>> = match &args.split_out {
        Some(path) => Some(std::io::BufWriter::new(
            std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?,
        )),
        None => None,
    };
    let mut malformed = 0u64;

    fn emit(
        pipeline: &mut CheckPipeline,
        item: StreamItem,
        sink: &mut dyn Write,
        split_sink: &mut Option<std::io::BufWriter<std::fs::File>>,
    ) {
        let (split, alerts) = pipeline.push_split(item);
        if let Some(out) = split_sink.as_mut() {
            let _ = writeln!(out, "{}", split.to_json());
        }
        for alert in alerts {
            let _ = writeln!(sink, "{}", alert.to_json());
        }
    }

    if let Some(path) = &args.log {
        let log = Log::load(path).with_context(|| format!("loading log {}", path.display()))?;
        let speed = parse_speed(&args.speed)?;
        for item in log.replay(speed) {
            emit(&mut pipeline, item, alert_sink.as_mut(), &mut split_sink);
        }
    } else if let Some(path) = &args.events {
        open_lines(path)?.for_each_line(|line| {
            if line.trim().is_empty() {
                return;
            }
            match StreamItem::from_json(&line) {
                Ok(item) => emit(&mut pipeline, item, alert_sink.as_mut(), &mut split_sink),
                Err(_) => malformed += 1,
            }
        })?;
    } else if let Some(path) = &args.notifications {
        // Reader stage feeds the logger+splitter+checker stage through an
        // ordered queue, mirroring how a live engine would deliver.
        let (tx, rx) = mpsc::sync_channel::<String>(256);
        let source = open_lines(path)?;
        std::thread::scope(|scope| -> Result<()> {
            let reader = scope.spawn(move || -> Result<()> {
                source.for_each_line(|line| {
                    let _ = tx.send(line);
                })
            });
            let mut logger = Logger::new();
            for line in rx {
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str::<EngineNotification>(&line) {
                    Ok(n) => {
                        for item in logger.ingest(&n) {
                            emit(&mut pipeline, item, alert_sink.as_mut(), &mut split_sink);
                        }
                    }
                    Err(_) => malformed += 1,
                }
            }
            for q in logger.quarantined() {
                eprintln!("quarantined notification: {}", q.reason);
            }
            reader.join().expect("reader stage does not panic")
        })?;
    } else {
        bail!("one of --notifications, --events, or --log is required");
    }
    alert_sink.flush()?;
    if let Some(mut sink) = split_sink {
        sink.flush()?;
    }

    let outcome = pipeline.finish();
    if malformed > 0 {
        eprintln!("skipped {malformed} malformed line(s)");
    }
    for diagnostic in &outcome.diagnostics {
        eprintln!("diagnostic: {diagnostic}");
    }
    print_summary(&outcome);
    if let Some(path) = &args.summary_out {
        std::fs::write(path, serde_json::to_string_pretty(&outcome.summary)?)
            .with_context(|| format!("writing {}", path.display()))?;
    }

    Ok(if outcome.alerts.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn print_summary(outcome: &CheckOutcome) {
    eprintln!(
        "{:<24} {:<14} {:>8} {:>12}",
        "case", "part", "alerts", "cost"
    );
    for row in &outcome.summary {
        eprintln!(
            "{:<24} {:<14} {:>8} {:>12.4}",
            row.case,
            row.part.as_deref().unwrap_or("-"),
            row.alerts,
            row.cost
        );
    }
    let c = &outcome.counters;
    eprintln!(
        "checked {} events ({} temporal, {} series, {} starts); {} alert(s)",
        c.events,
        c.temporal_scored,
        c.series_checked,
        c.starts_checked,
        outcome.alerts.len()
    );
}
