//! Feature extraction orchestration: per-kind configuration, training-split
//! model fitting (PCA/GMM/codebook), cached per-image feature rows.

use super::cache::{fnv1a64, FeatureCache};
use super::manifest::DatasetManifest;
use crate::densesift::{extract_image_rootsifts, DescriptorSet, PatchGridConfig};
use crate::encode::{
    apply_pca_set, fit_gmm, fit_kmeans, fit_pca, ifv_encode, sample_training_descriptors,
    vq_encode, Codebook, GmmModel, PcaModel,
};
use crate::error::{Result, TexError};
use crate::gabor::{pricolgbp, GaborBankConfig};
use crate::imgcore::{load_image, log_enhance, normalize_to_255, GrayImage};
use crate::lbp::{LbpConfig, PatternIndexTable};
use crate::mclbp::{build_groups_co, colbp_uu, pool, pooled_dimension, GroupPartition, Pooling};
use crate::pricolbp::{pricolbp_descriptor, TemplateSet, BINS_PER_TEMPLATE};
use crate::tfmd::{ModelFile, Tensor};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Pricolbp,
    Pricolgbp,
    RootsiftIfv,
    RootsiftVq,
    MclbpSum,
    MclbpMoment,
    MclbpDft,
}

impl FeatureKind {
    pub const ALL: [FeatureKind; 7] = [
        FeatureKind::Pricolbp,
        FeatureKind::Pricolgbp,
        FeatureKind::RootsiftIfv,
        FeatureKind::RootsiftVq,
        FeatureKind::MclbpSum,
        FeatureKind::MclbpMoment,
        FeatureKind::MclbpDft,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FeatureKind::Pricolbp => "pricolbp",
            FeatureKind::Pricolgbp => "pricolgbp",
            FeatureKind::RootsiftIfv => "rootsift_ifv",
            FeatureKind::RootsiftVq => "rootsift_vq",
            FeatureKind::MclbpSum => "mclbp_sum",
            FeatureKind::MclbpMoment => "mclbp_moment",
            FeatureKind::MclbpDft => "mclbp_dft",
        }
    }

    pub fn needs_shape_models(self) -> bool {
        matches!(self, FeatureKind::RootsiftIfv | FeatureKind::RootsiftVq)
    }
}

impl std::str::FromStr for FeatureKind {
    type Err = TexError;

    fn from_str(s: &str) -> Result<Self> {
        FeatureKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                TexError::InvalidArgument(format!(
                    "unknown feature kind {s:?} (expected one of {})",
                    FeatureKind::ALL.map(|k| k.name()).join("|")
                ))
            })
    }
}

/// All knobs that affect feature values. Serialized (with the kind) into the
/// cache's config hash so stale caches are detected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    /// LBP sampling for the PRICoLBP/PRICoLGBP texture path.
    pub lbp_neighbors: u32,
    pub lbp_radius: f64,
    /// Apply log intensity enhancement before texture features.
    pub log_enhance: bool,
    /// Gabor scale indices for PRICoLGBP.
    pub gabor_scales: Vec<u32>,
    /// Dense RootSIFT grid.
    pub patch_size: usize,
    pub patch_step: usize,
    pub sift_scales: usize,
    pub min_side: usize,
    /// Shape encoding sizes.
    pub pca_dim: usize,
    pub gmm_k: usize,
    pub vq_k: usize,
    /// Descriptor subsample size for model fitting.
    pub descriptor_sample: usize,
    /// MCLBP radii; all unordered pairs are co-occurred.
    pub mclbp_radii: Vec<f64>,
    pub sigma1: f64,
    pub seed: u64,
}

impl Default for FeatureConfig {
    /// Paper-scale defaults.
    fn default() -> Self {
        Self {
            lbp_neighbors: 8,
            lbp_radius: 1.0,
            log_enhance: true,
            gabor_scales: (1..=7).collect(),
            patch_size: 41,
            patch_step: 2,
            sift_scales: 6,
            min_side: 64,
            pca_dim: 80,
            gmm_k: 256,
            vq_k: 1024,
            descriptor_sample: 100_000,
            mclbp_radii: vec![1.0, 2.0, 3.0],
            sigma1: 1.0,
            seed: 0,
        }
    }
}

impl FeatureConfig {
    /// Smaller settings that keep the full pipeline fast on a workstation.
    pub fn desk_scale() -> Self {
        Self {
            gabor_scales: vec![1, 2, 3],
            sift_scales: 3,
            pca_dim: 48,
            gmm_k: 64,
            vq_k: 64,
            descriptor_sample: 20_000,
            ..Self::default()
        }
    }

    pub fn grid(&self) -> Result<PatchGridConfig> {
        let cfg = PatchGridConfig {
            patch_size: self.patch_size,
            step: self.patch_step,
            scale_sigmas: (1..=self.sift_scales as i32).map(|i| 1.5f64.powi(i)).collect(),
            min_side: self.min_side,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn lbp(&self) -> Result<LbpConfig> {
        LbpConfig::new(self.lbp_neighbors, self.lbp_radius)
    }

    fn gabor_bank(&self) -> GaborBankConfig {
        GaborBankConfig {
            scales: self.gabor_scales.clone(),
            ..GaborBankConfig::default()
        }
    }

    fn mclbp_pairs(&self) -> Vec<(f64, f64)> {
        let r = &self.mclbp_radii;
        let mut pairs = Vec::new();
        for i in 0..r.len() {
            for j in i + 1..r.len() {
                pairs.push((r[i], r[j]));
            }
        }
        pairs
    }

    fn pooling(&self, kind: FeatureKind) -> Pooling {
        match kind {
            FeatureKind::MclbpSum => Pooling::Sum,
            FeatureKind::MclbpMoment => Pooling::Moment { sigma1: self.sigma1 },
            FeatureKind::MclbpDft => Pooling::Dft,
            _ => unreachable!("pooling only defined for mclbp kinds"),
        }
    }
}

/// Stable hash of (kind, config), pinning cached rows to their settings.
pub fn config_hash(kind: FeatureKind, cfg: &FeatureConfig) -> String {
    let text = serde_json::to_string(&(kind, cfg)).expect("config serializes");
    format!("{:016x}", fnv1a64(text.as_bytes()))
}

/// Models fit on training-split descriptors only.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeModels {
    pub pca: PcaModel,
    pub gmm: Option<GmmModel>,
    pub codebook: Option<Codebook>,
}

impl ShapeModels {
    pub fn to_model_file(&self) -> ModelFile {
        let mut m = ModelFile::new();
        let p = &self.pca;
        m.insert("pca.mean", Tensor::vector(p.mean.clone()));
        m.insert(
            "pca.basis",
            Tensor::matrix(p.input_dim, p.output_dim, p.basis.clone())
                .expect("pca basis shape"),
        );
        if let Some(g) = &self.gmm {
            m.insert("gmm.weights", Tensor::vector(g.weights.clone()));
            m.insert(
                "gmm.means",
                Tensor::matrix(g.k, g.dim, g.means.clone()).expect("gmm means shape"),
            );
            m.insert(
                "gmm.variances",
                Tensor::matrix(g.k, g.dim, g.variances.clone()).expect("gmm variances shape"),
            );
            m.insert(
                "gmm.log_likelihoods",
                Tensor::vector(g.log_likelihoods.clone()),
            );
        }
        if let Some(c) = &self.codebook {
            m.insert(
                "vq.centroids",
                Tensor::matrix(c.k, c.dim, c.centroids.clone()).expect("centroid shape"),
            );
        }
        m
    }

    pub fn from_model_file(m: &ModelFile) -> Result<Self> {
        let mean = m.get("pca.mean")?;
        let basis = m.get("pca.basis")?;
        if basis.shape.len() != 2 || basis.shape[0] != mean.data.len() {
            return Err(TexError::Model("inconsistent PCA tensors".into()));
        }
        let pca = PcaModel {
            mean: mean.data.clone(),
            basis: basis.data.clone(),
            input_dim: basis.shape[0],
            output_dim: basis.shape[1],
        };
        let gmm = if m.names().any(|n| n == "gmm.means") {
            let means = m.get("gmm.means")?;
            let (k, dim) = (means.shape[0], means.shape[1]);
            Some(GmmModel {
                k,
                dim,
                weights: m.get("gmm.weights")?.data.clone(),
                means: means.data.clone(),
                variances: m.get("gmm.variances")?.data.clone(),
                log_likelihoods: m.get("gmm.log_likelihoods")?.data.clone(),
            })
        } else {
            None
        };
        let codebook = if m.names().any(|n| n == "vq.centroids") {
            let c = m.get("vq.centroids")?;
            Some(Codebook {
                k: c.shape[0],
                dim: c.shape[1],
                centroids: c.data.clone(),
            })
        } else {
            None
        };
        Ok(Self { pca, gmm, codebook })
    }
}

fn load_gray(path: &Path) -> Result<GrayImage> {
    Ok(load_image(path)?.to_gray())
}

fn texture_input(img: &GrayImage, cfg: &FeatureConfig) -> GrayImage {
    if cfg.log_enhance {
        normalize_to_255(&log_enhance(img))
    } else {
        img.clone()
    }
}

/// RootSIFT descriptors for every image of the listed specimens.
fn train_descriptor_sets(
    manifest: &DatasetManifest,
    train_specimens: &BTreeSet<String>,
    cfg: &FeatureConfig,
) -> Result<Vec<DescriptorSet>> {
    let grid = cfg.grid()?;
    manifest
        .entries
        .par_iter()
        .filter(|e| train_specimens.contains(&e.specimen))
        .map(|e| extract_image_rootsifts(&load_gray(&e.image)?, &grid))
        .collect()
}

/// Fit the shape models (PCA plus GMM and/or codebook) from training-split
/// descriptors only.
pub fn fit_shape_models(
    manifest: &DatasetManifest,
    train_specimens: &BTreeSet<String>,
    cfg: &FeatureConfig,
    need_gmm: bool,
    need_vq: bool,
) -> Result<ShapeModels> {
    let sets = train_descriptor_sets(manifest, train_specimens, cfg)?;
    fit_shape_models_from_sets(&sets, cfg, need_gmm, need_vq)
}

/// Fit the shape models from already-extracted training descriptor sets.
pub fn fit_shape_models_from_sets(
    sets: &[DescriptorSet],
    cfg: &FeatureConfig,
    need_gmm: bool,
    need_vq: bool,
) -> Result<ShapeModels> {
    let sample = sample_training_descriptors(sets, cfg.descriptor_sample, cfg.seed)?;
    let pca = fit_pca(&sample, cfg.pca_dim)?;
    let reduced = apply_pca_set(&pca, &sample)?;
    let gmm = if need_gmm {
        Some(fit_gmm(&reduced, cfg.gmm_k, 60, 1e-5, cfg.seed)?)
    } else {
        None
    };
    let codebook = if need_vq {
        Some(fit_kmeans(&reduced, cfg.vq_k, 50, cfg.seed)?)
    } else {
        None
    };
    Ok(ShapeModels { pca, gmm, codebook })
}

/// Feature dimension for a kind under a config.
pub fn feature_dimension(kind: FeatureKind, cfg: &FeatureConfig) -> Result<usize> {
    let templates = TemplateSet::ten_templates().len();
    Ok(match kind {
        FeatureKind::Pricolbp => templates * BINS_PER_TEMPLATE,
        FeatureKind::Pricolgbp => (1 + cfg.gabor_scales.len()) * templates * BINS_PER_TEMPLATE,
        FeatureKind::RootsiftIfv => 2 * cfg.pca_dim * cfg.gmm_k,
        FeatureKind::RootsiftVq => cfg.vq_k,
        FeatureKind::MclbpSum | FeatureKind::MclbpMoment | FeatureKind::MclbpDft => {
            let partition = build_groups_co(cfg.lbp_neighbors)?;
            cfg.mclbp_pairs().len() * pooled_dimension(&partition, &cfg.pooling(kind))
        }
    })
}

/// Compute one feature row for an already-loaded image.
pub fn compute_feature(
    img: &GrayImage,
    kind: FeatureKind,
    cfg: &FeatureConfig,
    models: Option<&ShapeModels>,
    partition: Option<&GroupPartition>,
) -> Result<Vec<f64>> {
    match kind {
        FeatureKind::Pricolbp => {
            let table = PatternIndexTable::new(cfg.lbp_neighbors);
            pricolbp_descriptor(
                &texture_input(img, cfg),
                &cfg.lbp()?,
                &TemplateSet::ten_templates(),
                &table,
            )
        }
        FeatureKind::Pricolgbp => {
            let table = PatternIndexTable::new(cfg.lbp_neighbors);
            pricolgbp(
                &texture_input(img, cfg),
                &cfg.lbp()?,
                &TemplateSet::ten_templates(),
                &cfg.gabor_bank(),
                &table,
            )
        }
        FeatureKind::RootsiftIfv | FeatureKind::RootsiftVq => {
            let models = models.ok_or_else(|| {
                TexError::Model(format!("{} requires trained shape models", kind.name()))
            })?;
            let descs = extract_image_rootsifts(img, &cfg.grid()?)?;
            let reduced = apply_pca_set(&models.pca, &descs)?;
            if kind == FeatureKind::RootsiftIfv {
                let gmm = models
                    .gmm
                    .as_ref()
                    .ok_or_else(|| TexError::Model("missing GMM in shape models".into()))?;
                ifv_encode(gmm, &reduced)
            } else {
                let book = models
                    .codebook
                    .as_ref()
                    .ok_or_else(|| TexError::Model("missing codebook in shape models".into()))?;
                vq_encode(book, &reduced)
            }
        }
        FeatureKind::MclbpSum | FeatureKind::MclbpMoment | FeatureKind::MclbpDft => {
            let owned;
            let partition = match partition {
                Some(p) => p,
                None => {
                    owned = build_groups_co(cfg.lbp_neighbors)?;
                    &owned
                }
            };
            let table = PatternIndexTable::new(cfg.lbp_neighbors);
            let input = texture_input(img, cfg);
            let pooling = cfg.pooling(kind);
            let mut out = Vec::new();
            for (r1, r2) in cfg.mclbp_pairs() {
                let s1 = LbpConfig::new(cfg.lbp_neighbors, r1)?;
                let s2 = LbpConfig::new(cfg.lbp_neighbors, r2)?;
                let hist = colbp_uu(&input, &s1, &s2, &table)?;
                out.extend(pool(&hist, partition, &pooling)?);
            }
            Ok(out)
        }
    }
}

/// Compute and cache feature rows for every manifest entry not yet cached.
/// Returns the cache and the number of newly written rows; re-running with
/// the same config writes nothing.
pub fn extract_features(
    manifest: &DatasetManifest,
    kind: FeatureKind,
    cfg: &FeatureConfig,
    models: Option<&ShapeModels>,
    cache_path: &Path,
) -> Result<(FeatureCache, usize)> {
    let dim = feature_dimension(kind, cfg)?;
    let hash = config_hash(kind, cfg);
    let mut cache = FeatureCache::open_or_create(cache_path, dim, &hash)?;
    let partition = if matches!(
        kind,
        FeatureKind::MclbpSum | FeatureKind::MclbpMoment | FeatureKind::MclbpDft
    ) {
        Some(build_groups_co(cfg.lbp_neighbors)?)
    } else {
        None
    };
    let missing: Vec<_> = manifest
        .entries
        .iter()
        .filter(|e| !cache.contains(&e.image.to_string_lossy()))
        .collect();
    let rows: Vec<(String, Vec<f64>)> = missing
        .par_iter()
        .map(|e| {
            let img = load_gray(&e.image)?;
            let row = compute_feature(&img, kind, cfg, models, partition.as_ref())?;
            if row.len() != dim {
                return Err(TexError::DimensionMismatch {
                    expected: dim,
                    got: row.len(),
                });
            }
            Ok((e.image.to_string_lossy().into_owned(), row))
        })
        .collect::<Result<_>>()?;
    let written = rows.len();
    for (path, row) in rows {
        cache.insert(&path, &row)?;
    }
    cache.save()?;
    Ok((cache, written))
}
