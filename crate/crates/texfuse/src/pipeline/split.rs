//! Specimen-aware train/test splits: setups A-D (fixed per-class specimen
//! counts into training) and leave-one-specimen-out. Splits partition
//! specimens, never individual cells.

use super::manifest::DatasetManifest;
use crate::error::{Result, TexError};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SetupKind {
    SetupA,
    SetupB,
    SetupC,
    SetupD,
    Loso,
}

impl SetupKind {
    /// Training specimens drawn per class for setups A-D.
    fn per_class(self) -> usize {
        match self {
            SetupKind::SetupA => 1,
            SetupKind::SetupB => 2,
            SetupKind::SetupC => 4,
            SetupKind::SetupD => 8,
            SetupKind::Loso => unreachable!("loso has no per-class count"),
        }
    }
}

impl std::str::FromStr for SetupKind {
    type Err = TexError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "a" | "setup_a" => Ok(SetupKind::SetupA),
            "b" | "setup_b" => Ok(SetupKind::SetupB),
            "c" | "setup_c" => Ok(SetupKind::SetupC),
            "d" | "setup_d" => Ok(SetupKind::SetupD),
            "loso" => Ok(SetupKind::Loso),
            other => Err(TexError::InvalidArgument(format!(
                "unknown setup {other:?} (expected a|b|c|d|loso)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub kind: SetupKind,
    pub seed: u64,
    pub repeats: usize,
}

impl SplitSpec {
    pub fn new(kind: SetupKind, seed: u64) -> Self {
        Self {
            kind,
            seed,
            repeats: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train_specimens: BTreeSet<String>,
    pub test_specimens: BTreeSet<String>,
}

impl Split {
    fn new(train: BTreeSet<String>, test: BTreeSet<String>) -> Self {
        assert!(
            train.is_disjoint(&test),
            "specimen appears in both train and test"
        );
        Self {
            train_specimens: train,
            test_specimens: test,
        }
    }
}

/// Per-repeat random draws of the setup's per-class specimen counts into
/// training (remainder tests), or one split per specimen for loso.
pub fn make_splits(manifest: &DatasetManifest, spec: &SplitSpec) -> Result<Vec<Split>> {
    let all: BTreeSet<String> = manifest.specimens().iter().map(|s| s.to_string()).collect();
    if spec.kind == SetupKind::Loso {
        if all.len() < 2 {
            return Err(TexError::Manifest(
                "leave-one-specimen-out needs at least 2 specimens".into(),
            ));
        }
        return Ok(all
            .iter()
            .map(|held_out| {
                let mut train = all.clone();
                train.remove(held_out);
                Split::new(train, BTreeSet::from([held_out.clone()]))
            })
            .collect());
    }

    if spec.repeats == 0 {
        return Err(TexError::InvalidArgument("repeats must be >= 1".into()));
    }
    let by_class = manifest.specimens_by_class();
    let max_avail = by_class.values().map(BTreeSet::len).max().unwrap_or(0);
    let base = spec.kind.per_class();
    let mut splits = Vec::with_capacity(spec.repeats);
    for repeat in 0..spec.repeats {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed.wrapping_add(repeat as u64));
        let mut train = BTreeSet::new();
        for (class, specimens) in &by_class {
            let avail = specimens.len();
            // Classes with fewer specimens than the rest draw at most 2
            // (Table-III-style small class); always leave >= 1 for testing.
            let mut n = base;
            if avail < max_avail {
                n = n.min(2);
            }
            n = n.min(avail.saturating_sub(1));
            if n == 0 {
                return Err(TexError::Manifest(format!(
                    "class {class:?} has {avail} specimen(s); too few for {:?}",
                    spec.kind
                )));
            }
            let mut pool: Vec<&str> = specimens.iter().copied().collect();
            pool.shuffle(&mut rng);
            train.extend(pool[..n].iter().map(|s| s.to_string()));
        }
        let test: BTreeSet<String> = all.difference(&train).cloned().collect();
        if test.is_empty() {
            return Err(TexError::Manifest("no specimens left for testing".into()));
        }
        splits.push(Split::new(train, test));
    }
    Ok(splits)
}
