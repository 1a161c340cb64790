//! "TFFC" feature cache: one binary file per feature kind plus a JSON sidecar
//! index.
//!
//! Binary layout (integers little-endian):
//! ```text
//! magic    4 bytes  "TFFC"
//! version  u32      currently 1
//! count    u32      record count
//! dim      u32      floats per record
//! records  count x { path_hash u64 (FNV-1a of the image path),
//!                    dim x f32 little-endian }
//! ```
//! The sidecar `<file>.idx.json` maps image paths to record offsets and pins
//! the extraction config hash; mismatched configs are rejected rather than
//! silently mixed.

use crate::error::{Result, TexError};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

const MAGIC: &[u8; 4] = b"TFFC";
const VERSION: u32 = 1;

/// 64-bit FNV-1a hash of a byte string.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

#[derive(Debug, Serialize, Deserialize)]
struct Sidecar {
    version: u32,
    config_hash: String,
    /// image path -> record index (row order in the binary file).
    records: BTreeMap<String, usize>,
}

#[derive(Debug)]
pub struct FeatureCache {
    path: PathBuf,
    dim: usize,
    config_hash: String,
    rows: Vec<Vec<f32>>,
    index: BTreeMap<String, usize>,
}

impl FeatureCache {
    /// Open an existing cache (validating dim and config hash) or start an
    /// empty one.
    pub fn open_or_create(path: &Path, dim: usize, config_hash: &str) -> Result<Self> {
        if dim == 0 {
            return Err(TexError::Cache("feature dimension must be > 0".into()));
        }
        if path.exists() {
            let cache = Self::load(path)?;
            if cache.dim != dim {
                return Err(TexError::Cache(format!(
                    "cache {} has dim {}, expected {dim}",
                    path.display(),
                    cache.dim
                )));
            }
            if cache.config_hash != config_hash {
                return Err(TexError::Cache(format!(
                    "cache {} was written with a different config",
                    path.display()
                )));
            }
            Ok(cache)
        } else {
            Ok(Self {
                path: path.to_path_buf(),
                dim,
                config_hash: config_hash.to_string(),
                rows: Vec::new(),
                index: BTreeMap::new(),
            })
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let io_err = |source| TexError::Io {
            path: path.to_path_buf(),
            source,
        };
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(io_err)?;
        if bytes.len() < 16 || &bytes[..4] != MAGIC {
            return Err(TexError::Cache(format!(
                "{} is not a TFFC cache",
                path.display()
            )));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let version = u32_at(4);
        if version != VERSION {
            return Err(TexError::Cache(format!("unsupported version {version}")));
        }
        let count = u32_at(8) as usize;
        let dim = u32_at(12) as usize;
        let record = 8 + 4 * dim;
        if bytes.len() != 16 + count * record {
            return Err(TexError::Cache(format!(
                "{}: truncated or oversized record section",
                path.display()
            )));
        }
        let mut hashes = Vec::with_capacity(count);
        let mut rows = Vec::with_capacity(count);
        for r in 0..count {
            let off = 16 + r * record;
            hashes.push(u64::from_le_bytes(bytes[off..off + 8].try_into().unwrap()));
            let mut row = Vec::with_capacity(dim);
            for i in 0..dim {
                let fo = off + 8 + 4 * i;
                row.push(f32::from_le_bytes(bytes[fo..fo + 4].try_into().unwrap()));
            }
            rows.push(row);
        }

        let sidecar_path = sidecar_path(path);
        let sidecar_text = std::fs::read_to_string(&sidecar_path).map_err(|source| {
            TexError::Io {
                path: sidecar_path.clone(),
                source,
            }
        })?;
        let sidecar: Sidecar = serde_json::from_str(&sidecar_text)
            .map_err(|e| TexError::Cache(format!("bad sidecar {}: {e}", sidecar_path.display())))?;
        if sidecar.records.len() != count {
            return Err(TexError::Cache(
                "sidecar record count disagrees with binary file".into(),
            ));
        }
        for (p, &i) in &sidecar.records {
            if i >= count || hashes[i] != fnv1a64(p.as_bytes()) {
                return Err(TexError::Cache(format!(
                    "sidecar entry {p:?} does not match record {i}"
                )));
            }
        }
        Ok(Self {
            path: path.to_path_buf(),
            dim,
            config_hash: sidecar.config_hash,
            rows,
            index: sidecar.records,
        })
    }

    pub fn save(&self) -> Result<()> {
        let io_err = |p: &Path| {
            let p = p.to_path_buf();
            move |source| TexError::Io {
                path: p.clone(),
                source,
            }
        };
        let mut bytes = Vec::with_capacity(16 + self.rows.len() * (8 + 4 * self.dim));
        bytes.extend_from_slice(MAGIC);
        bytes.extend_from_slice(&VERSION.to_le_bytes());
        bytes.extend_from_slice(&(self.rows.len() as u32).to_le_bytes());
        bytes.extend_from_slice(&(self.dim as u32).to_le_bytes());
        // Records are stored in row order; recover path per row for hashing.
        let mut path_of = vec![None; self.rows.len()];
        for (p, &i) in &self.index {
            path_of[i] = Some(p);
        }
        for (row, p) in self.rows.iter().zip(&path_of) {
            let p = p.expect("every row indexed");
            bytes.extend_from_slice(&fnv1a64(p.as_bytes()).to_le_bytes());
            for &v in row {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
        }
        std::fs::File::create(&self.path)
            .and_then(|mut f| f.write_all(&bytes))
            .map_err(io_err(&self.path))?;

        let sidecar = Sidecar {
            version: VERSION,
            config_hash: self.config_hash.clone(),
            records: self.index.clone(),
        };
        let sp = sidecar_path(&self.path);
        let text = serde_json::to_string_pretty(&sidecar)
            .map_err(|e| TexError::Cache(e.to_string()))?;
        std::fs::write(&sp, text).map_err(io_err(&sp))?;
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn config_hash(&self) -> &str {
        &self.config_hash
    }

    pub fn contains(&self, image_path: &str) -> bool {
        self.index.contains_key(image_path)
    }

    pub fn insert(&mut self, image_path: &str, row: &[f64]) -> Result<()> {
        if row.len() != self.dim {
            return Err(TexError::DimensionMismatch {
                expected: self.dim,
                got: row.len(),
            });
        }
        if self.index.contains_key(image_path) {
            return Err(TexError::Cache(format!(
                "row for {image_path:?} already cached"
            )));
        }
        self.index.insert(image_path.to_string(), self.rows.len());
        self.rows.push(row.iter().map(|&v| v as f32).collect());
        Ok(())
    }

    pub fn get(&self, image_path: &str) -> Option<Vec<f64>> {
        self.index
            .get(image_path)
            .map(|&i| self.rows[i].iter().map(|&v| v as f64).collect())
    }
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_os_string();
    s.push(".idx.json");
    PathBuf::from(s)
}
