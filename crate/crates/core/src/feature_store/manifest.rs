use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::ftrx::read_ftrx_header;
use crate::error::{Error, Result};

/// One pre-training checkpoint: its extracted train/test features and the
/// accuracies measured elsewhere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointRecord {
    pub epoch: u64,
    pub source_accuracy: f64,
    pub train_features: PathBuf,
    pub test_features: PathBuf,
    #[serde(default)]
    pub ft_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub name: String,
    pub checkpoints: Vec<CheckpointRecord>,
}

impl Manifest {
    /// Checks everything that does not need the feature files.
    pub fn validate_records(&self) -> Result<()> {
        if self.checkpoints.is_empty() {
            return Err(Error::Manifest("no checkpoints".into()));
        }
        for w in self.checkpoints.windows(2) {
            if w[1].epoch <= w[0].epoch {
                return Err(Error::Manifest(format!(
                    "epochs must be strictly increasing, found {} after {}",
                    w[1].epoch, w[0].epoch
                )));
            }
        }
        for c in &self.checkpoints {
            if !(0.0..=1.0).contains(&c.source_accuracy) {
                return Err(Error::Manifest(format!(
                    "epoch {}: source_accuracy {} outside [0, 1]",
                    c.epoch, c.source_accuracy
                )));
            }
            if let Some(ft) = c.ft_accuracy {
                if !(0.0..=1.0).contains(&ft) {
                    return Err(Error::Manifest(format!(
                        "epoch {}: ft_accuracy {ft} outside [0, 1]",
                        c.epoch
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// Loads a manifest, resolving relative feature paths against the manifest's
/// directory, and checks that all feature files agree on `d` and class count.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<Manifest> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut manifest: Manifest =
        serde_json::from_str(&text).map_err(|e| Error::Manifest(e.to_string()))?;
    manifest.validate_records()?;

    let base = path.parent().unwrap_or_else(|| Path::new(""));
    for c in &mut manifest.checkpoints {
        c.train_features = resolve(base, &c.train_features);
        c.test_features = resolve(base, &c.test_features);
    }

    let mut shape: Option<(u64, u32, PathBuf)> = None;
    for c in &manifest.checkpoints {
        for file in [&c.train_features, &c.test_features] {
            if !file.exists() {
                return Err(Error::Manifest(format!(
                    "epoch {}: missing feature file {}",
                    c.epoch,
                    file.display()
                )));
            }
            let header = read_ftrx_header(file)?;
            match &shape {
                None => shape = Some((header.d, header.num_classes, file.clone())),
                Some((d, classes, first)) => {
                    if header.d != *d || header.num_classes != *classes {
                        return Err(Error::Manifest(format!(
                            "epoch {}: {} has d={} classes={}, but {} has d={d} classes={classes}",
                            c.epoch,
                            file.display(),
                            header.d,
                            header.num_classes,
                            first.display()
                        )));
                    }
                }
            }
        }
    }
    Ok(manifest)
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}
