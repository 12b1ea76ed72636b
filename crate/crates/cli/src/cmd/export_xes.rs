//! `flowmon export-xes`: persisted log to XES XML.

use std::io::Write;

use anyhow::{Context, Result};
use flowmon_core::stream::{xes, Log};

use crate::ExportArgs;

pub fn run(args: ExportArgs) -> Result<()> {
    let log =
        Log::load(&args.log).with_context(|| format!("loading log {}", args.log.display()))?;
    let xml = xes::export_xes(&log);
    xes::validate_xes(&xml).context("export failed validation")?;
    if args.out.as_os_str() == "-" {
        std::io::stdout().lock().write_all(xml.as_bytes())?;
    } else {
        std::fs::write(&args.out, xml)
            .with_context(|| format!("writing {}", args.out.display()))?;
    }
    Ok(())
}
