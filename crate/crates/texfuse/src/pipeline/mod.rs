//! End-to-end pipeline: manifests, specimen-aware splits, cached feature
//! extraction, training, evaluation and reporting.

pub mod cache;
pub mod eval;
pub mod features;
pub mod manifest;
pub mod split;
pub mod synth;

pub use cache::{fnv1a64, FeatureCache};
pub use eval::{aggregate_reports, fused_row, run_train_eval, CReg, EvalReport, Summary};
pub use features::{
    compute_feature, config_hash, extract_features, feature_dimension, fit_shape_models,
    fit_shape_models_from_sets, FeatureConfig, FeatureKind, ShapeModels,
};
pub use manifest::{load_manifest, DatasetManifest, Intensity, ManifestEntry};
pub use split::{make_splits, SetupKind, Split, SplitSpec};
pub use synth::{generate_synth_corpus, SynthConfig, SYNTH_CLASSES};
