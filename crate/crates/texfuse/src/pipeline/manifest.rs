//! Dataset manifests: one JSON object per line, keyed
//! `{"image", "cell", "specimen", "class", "intensity"}`.

use crate::error::{Result, TexError};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Intensity {
    Positive,
    Intermediate,
    #[default]
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub image: PathBuf,
    pub cell: String,
    pub specimen: String,
    pub class: String,
    #[serde(default)]
    pub intensity: Intensity,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
    /// Sorted distinct class labels.
    pub classes: Vec<String>,
}

impl DatasetManifest {
    pub fn from_entries(entries: Vec<ManifestEntry>) -> Result<Self> {
        if entries.is_empty() {
            return Err(TexError::Manifest("manifest has no entries".into()));
        }
        let mut seen = BTreeSet::new();
        for e in &entries {
            if !seen.insert(&e.image) {
                return Err(TexError::Manifest(format!(
                    "duplicate image path {:?}",
                    e.image
                )));
            }
            if e.specimen.is_empty() {
                return Err(TexError::Manifest(format!(
                    "entry {:?} has empty specimen id",
                    e.image
                )));
            }
            if e.class.is_empty() {
                return Err(TexError::Manifest(format!(
                    "entry {:?} has empty class label",
                    e.image
                )));
            }
        }
        let classes: Vec<String> = entries
            .iter()
            .map(|e| e.class.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        Ok(Self { entries, classes })
    }

    /// Sorted specimen ids per class.
    pub fn specimens_by_class(&self) -> BTreeMap<&str, BTreeSet<&str>> {
        let mut map: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
        for e in &self.entries {
            map.entry(&e.class).or_default().insert(&e.specimen);
        }
        map
    }

    /// Sorted distinct specimen ids.
    pub fn specimens(&self) -> Vec<&str> {
        self.entries
            .iter()
            .map(|e| e.specimen.as_str())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut file = std::fs::File::create(path).map_err(|source| TexError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        for e in &self.entries {
            let line = serde_json::to_string(e)
                .map_err(|err| TexError::Manifest(err.to_string()))?;
            writeln!(file, "{line}").map_err(|source| TexError::Io {
                path: path.to_path_buf(),
                source,
            })?;
        }
        Ok(())
    }
}

pub fn load_manifest(path: &Path) -> Result<DatasetManifest> {
    let file = std::fs::File::open(path).map_err(|source| TexError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut entries = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| TexError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let entry: ManifestEntry = serde_json::from_str(&line).map_err(|err| {
            TexError::Manifest(format!("{}:{}: {err}", path.display(), lineno + 1))
        })?;
        entries.push(entry);
    }
    DatasetManifest::from_entries(entries)
}
