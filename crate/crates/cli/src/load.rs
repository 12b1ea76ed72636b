//! Input loading shared across subcommands.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};
use flowmon_core::conformance::{CheckerConfig, StatsSnapshot};
use flowmon_core::engine::{FaultPlan, SimClock};
use flowmon_core::model::ModelSet;
use flowmon_core::series::SensorSeries;

pub fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

pub fn model_set(paths: &[std::path::PathBuf]) -> Result<ModelSet> {
    let mut text = String::new();
    for path in paths {
        text.push_str(&read(path)?);
        text.push('\n');
    }
    ModelSet::parse(&text).context("parsing model document(s)")
}

pub fn clock(path: Option<&Path>) -> Result<SimClock> {
    match path {
        Some(path) => serde_json::from_str(&read(path)?)
            .with_context(|| format!("parsing clock config {}", path.display())),
        None => Ok(SimClock::default()),
    }
}

pub fn fault_plan(path: Option<&Path>) -> Result<FaultPlan> {
    match path {
        Some(path) => serde_json::from_str(&read(path)?)
            .with_context(|| format!("parsing fault plan {}", path.display())),
        None => Ok(FaultPlan::none()),
    }
}

pub fn checker_config(path: Option<&Path>) -> Result<CheckerConfig> {
    match path {
        Some(path) => serde_json::from_str(&read(path)?)
            .with_context(|| format!("parsing checker config {}", path.display())),
        None => Ok(CheckerConfig::default()),
    }
}

pub fn stats_snapshot(path: Option<&Path>) -> Result<Option<StatsSnapshot>> {
    match path {
        Some(path) => Ok(Some(
            serde_json::from_str(&read(path)?)
                .with_context(|| format!("parsing stats snapshot {}", path.display()))?,
        )),
        None => Ok(None),
    }
}

/// Loads `<series_id>.json` reference files from a directory.
pub fn references(dir: Option<&Path>) -> Result<BTreeMap<String, SensorSeries>> {
    let mut refs = BTreeMap::new();
    let Some(dir) = dir else { return Ok(refs) };
    if !dir.is_dir() {
        bail!("reference directory {} does not exist", dir.display());
    }
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        if path.extension().and_then(|e| e.to_str()) == Some("json") {
            let id = path
                .file_stem()
                .and_then(|s| s.to_str())
                .context("reference file name")?
                .to_string();
            let series: SensorSeries = serde_json::from_str(&read(&path)?)
                .with_context(|| format!("parsing reference {}", path.display()))?;
            refs.insert(id, series);
        }
    }
    Ok(refs)
}
