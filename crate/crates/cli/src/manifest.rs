//! Run manifests: the resolved inputs of a command, hashed so outputs can be
//! traced back to the exact inputs that produced them.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Serialize)]
pub struct RunManifest {
    pub models: Vec<String>,
    pub model_id: String,
    pub instances: u32,
    pub seed: u64,
    pub faults: Option<String>,
    pub clock: Option<String>,
    pub references: Option<String>,
    pub out: String,
    pub manifest_hash: String,
}

fn feed_file(hasher: &mut Sha256, label: &str, path: &Path) -> Result<()> {
    if !path.exists() {
        bail!("referenced path {} does not exist", path.display());
    }
    hasher.update(label.as_bytes());
    hasher.update(
        path.file_name()
            .map(|n| n.to_string_lossy())
            .unwrap_or_default()
            .as_bytes(),
    );
    let bytes = std::fs::read(path).with_context(|| format!("hashing {}", path.display()))?;
    hasher.update((bytes.len() as u64).to_le_bytes());
    hasher.update(&bytes);
    Ok(())
}

impl RunManifest {
    /// Builds the manifest, verifying every referenced path exists and
    /// hashing all input bytes plus the scalar parameters.
    #[allow(clippy::too_many_arguments)]
    pub fn build(
        models: &[PathBuf],
        model_id: &str,
        instances: u32,
        seed: u64,
        faults: Option<&Path>,
        clock: Option<&Path>,
        references: Option<&Path>,
        out: &Path,
    ) -> Result<Self> {
        let mut hasher = Sha256::new();
        for path in models {
            feed_file(&mut hasher, "model", path)?;
        }
        if let Some(path) = faults {
            feed_file(&mut hasher, "faults", path)?;
        }
        if let Some(path) = clock {
            feed_file(&mut hasher, "clock", path)?;
        }
        if let Some(dir) = references {
            if !dir.is_dir() {
                bail!("reference directory {} does not exist", dir.display());
            }
            let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().and_then(|e| e.to_str()) == Some("json"))
                .collect();
            files.sort();
            for path in files {
                feed_file(&mut hasher, "reference", &path)?;
            }
        }
        hasher.update(model_id.as_bytes());
        hasher.update(instances.to_le_bytes());
        hasher.update(seed.to_le_bytes());
        let manifest_hash = hex::encode(hasher.finalize());
        Ok(RunManifest {
            models: models.iter().map(|p| p.display().to_string()).collect(),
            model_id: model_id.to_string(),
            instances,
            seed,
            faults: faults.map(|p| p.display().to_string()),
            clock: clock.map(|p| p.display().to_string()),
            references: references.map(|p| p.display().to_string()),
            out: out.display().to_string(),
            manifest_hash,
        })
    }
}
