//! texfuse command-line interface.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error.

use clap::{Args, Parser, Subcommand};
use std::collections::BTreeSet;
use std::path::PathBuf;
use std::process::ExitCode;
use texfuse::pipeline::{
    aggregate_reports, config_hash, extract_features, fit_shape_models, generate_synth_corpus,
    load_manifest, make_splits, run_train_eval, CReg, DatasetManifest, FeatureCache,
    FeatureConfig, FeatureKind, SetupKind, ShapeModels, Split, SplitSpec, Summary, SynthConfig,
};
use texfuse::tfmd::ModelFile;
use texfuse::TexError;

#[derive(Parser)]
#[command(
    name = "texfuse",
    about = "Texture-and-shape image classification pipeline",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct FeatureArgs {
    /// Feature kind(s), comma-separated for fusion:
    /// pricolbp|pricolgbp|rootsift_ifv|rootsift_vq|mclbp_sum|mclbp_moment|mclbp_dft
    #[arg(long, value_delimiter = ',', required = true)]
    feature: Vec<FeatureKind>,
    /// Directory holding feature caches and fitted models
    #[arg(long)]
    cache: PathBuf,
    /// Use paper-scale settings instead of the default desk-scale settings
    #[arg(long)]
    paper_scale: bool,
}

impl FeatureArgs {
    fn config(&self, seed: u64) -> FeatureConfig {
        let mut cfg = if self.paper_scale {
            FeatureConfig::default()
        } else {
            FeatureConfig::desk_scale()
        };
        cfg.seed = seed;
        cfg
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labeled synthetic 4-class texture corpus
    Synth {
        /// Output directory (images/ plus manifest.jsonl)
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 4)]
        specimens: usize,
        #[arg(long, default_value_t = 20)]
        images: usize,
        #[arg(long, default_value_t = 96)]
        size: usize,
    },
    /// Draw specimen-disjoint train/test splits and write them as JSON
    Split {
        #[arg(long)]
        manifest: PathBuf,
        /// a|b|c|d|loso
        #[arg(long)]
        setup: SetupKind,
        #[arg(long, default_value_t = 10)]
        repeats: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit PCA plus GMM/codebook shape models on a manifest's specimens
    Codebook {
        #[arg(long)]
        manifest: PathBuf,
        #[command(flatten)]
        features: FeatureArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Extract feature rows for every manifest image into the cache
    Extract {
        #[arg(long)]
        manifest: PathBuf,
        #[command(flatten)]
        features: FeatureArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train a one-vs-rest linear SVM on all manifest rows
    Train {
        #[arg(long)]
        manifest: PathBuf,
        #[command(flatten)]
        features: FeatureArgs,
        /// "auto" cross-validates over the default grid
        #[arg(long, default_value = "auto")]
        c: CReg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output model file (TFMD)
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the full protocol: split, extract, train, test, aggregate
    Eval {
        #[arg(long)]
        manifest: PathBuf,
        #[command(flatten)]
        features: FeatureArgs,
        /// a|b|c|d|loso
        #[arg(long)]
        setup: SetupKind,
        #[arg(long, default_value_t = 10)]
        repeats: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "auto")]
        c: CReg,
        /// Summary JSON output file
        #[arg(long)]
        out: PathBuf,
    },
    /// Render a summary JSON file as a human-readable table
    Report {
        /// Summary JSON produced by `texfuse eval`
        summary: PathBuf,
        /// Write the rendered table here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn io_err(path: &std::path::Path, source: std::io::Error) -> TexError {
    TexError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_json<T: serde::Serialize>(path: &std::path::Path, value: &T) -> Result<(), TexError> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| TexError::InvalidArgument(e.to_string()))?;
    std::fs::write(path, text).map_err(|source| io_err(path, source))
}

/// Extract (or reuse) caches for the requested kinds, fitting shape models
/// from `train_specimens` when a kind needs them. Models are cached per
/// (kind, config, training set) under the cache directory.
fn build_caches(
    manifest: &DatasetManifest,
    kinds: &[FeatureKind],
    cfg: &FeatureConfig,
    cache_dir: &std::path::Path,
    train_specimens: &BTreeSet<String>,
    tag: &str,
) -> Result<Vec<FeatureCache>, TexError> {
    std::fs::create_dir_all(cache_dir).map_err(|source| io_err(cache_dir, source))?;
    let mut caches = Vec::new();
    for &kind in kinds {
        let models = if kind.needs_shape_models() {
            let model_path = cache_dir.join(format!(
                "models_{}_{}_{tag}.tfmd",
                kind.name(),
                config_hash(kind, cfg)
            ));
            if model_path.exists() {
                Some(ShapeModels::from_model_file(&ModelFile::load(&model_path)?)?)
            } else {
                let models = fit_shape_models(
                    manifest,
                    train_specimens,
                    cfg,
                    kind == FeatureKind::RootsiftIfv,
                    kind == FeatureKind::RootsiftVq,
                )?;
                models.to_model_file().save(&model_path)?;
                Some(models)
            }
        } else {
            None
        };
        let suffix = if kind.needs_shape_models() {
            format!("_{tag}")
        } else {
            String::new()
        };
        let cache_path = cache_dir.join(format!("{}{suffix}.tffc", kind.name()));
        let (cache, written) =
            extract_features(manifest, kind, cfg, models.as_ref(), &cache_path)?;
        eprintln!(
            "[texfuse] {}: {} rows cached ({written} new)",
            kind.name(),
            cache.len()
        );
        caches.push(cache);
    }
    Ok(caches)
}

/// Training-set tag so shape models fitted on different specimen sets never
/// collide in the cache directory.
fn specimen_tag(specimens: &BTreeSet<String>) -> String {
    let joined = specimens.iter().cloned().collect::<Vec<_>>().join("\n");
    format!("{:016x}", texfuse::pipeline::fnv1a64(joined.as_bytes()))
}

fn run(cli: Cli) -> Result<(), TexError> {
    match cli.command {
        Command::Synth {
            out,
            seed,
            specimens,
            images,
            size,
        } => {
            let cfg = SynthConfig {
                specimens_per_class: specimens,
                images_per_specimen: images,
                size,
                seed,
            };
            let manifest = generate_synth_corpus(&out, &cfg)?;
            println!(
                "wrote {} images over {} classes to {}",
                manifest.entries.len(),
                manifest.classes.len(),
                out.display()
            );
        }
        Command::Split {
            manifest,
            setup,
            repeats,
            seed,
            out,
        } => {
            let m = load_manifest(&manifest)?;
            let mut spec = SplitSpec::new(setup, seed);
            spec.repeats = repeats;
            let splits = make_splits(&m, &spec)?;
            write_json(&out, &splits)?;
            println!("wrote {} splits to {}", splits.len(), out.display());
        }
        Command::Codebook {
            manifest,
            features,
            seed,
        } => {
            let m = load_manifest(&manifest)?;
            let cfg = features.config(seed);
            let all: BTreeSet<String> = m.specimens().iter().map(|s| s.to_string()).collect();
            let shape_kinds: Vec<FeatureKind> = features
                .feature
                .iter()
                .copied()
                .filter(|k| k.needs_shape_models())
                .collect();
            if shape_kinds.is_empty() {
                return Err(TexError::InvalidArgument(
                    "codebook requires rootsift_ifv or rootsift_vq".into(),
                ));
            }
            std::fs::create_dir_all(&features.cache)
                .map_err(|source| io_err(&features.cache, source))?;
            for kind in shape_kinds {
                let models = fit_shape_models(
                    &m,
                    &all,
                    &cfg,
                    kind == FeatureKind::RootsiftIfv,
                    kind == FeatureKind::RootsiftVq,
                )?;
                let path = features.cache.join(format!(
                    "models_{}_{}_{}.tfmd",
                    kind.name(),
                    config_hash(kind, &cfg),
                    specimen_tag(&all)
                ));
                models.to_model_file().save(&path)?;
                println!("wrote {}", path.display());
            }
        }
        Command::Extract {
            manifest,
            features,
            seed,
        } => {
            let m = load_manifest(&manifest)?;
            let cfg = features.config(seed);
            let all: BTreeSet<String> = m.specimens().iter().map(|s| s.to_string()).collect();
            let tag = specimen_tag(&all);
            build_caches(&m, &features.feature, &cfg, &features.cache, &all, &tag)?;
        }
        Command::Train {
            manifest,
            features,
            c,
            seed,
            out,
        } => {
            let m = load_manifest(&manifest)?;
            let cfg = features.config(seed);
            let all: BTreeSet<String> = m.specimens().iter().map(|s| s.to_string()).collect();
            let tag = specimen_tag(&all);
            let caches = build_caches(&m, &features.feature, &cfg, &features.cache, &all, &tag)?;
            let cache_refs: Vec<&FeatureCache> = caches.iter().collect();
            let mut x = Vec::new();
            let mut y = Vec::new();
            let mut groups = Vec::new();
            for e in &m.entries {
                x.push(texfuse::pipeline::fused_row(
                    &cache_refs,
                    &e.image.to_string_lossy(),
                )?);
                y.push(e.class.clone());
                groups.push(e.specimen.clone());
            }
            let c_used = match c {
                CReg::Fixed(v) => v,
                CReg::Auto => texfuse::classify::cross_validate_c(
                    &x,
                    &y,
                    &groups,
                    &texfuse::classify::DEFAULT_C_GRID,
                )?,
            };
            let model = texfuse::classify::train_linear_svm_ovr(&x, &y, c_used)?;
            let mut file = ModelFile::new();
            for (i, class) in model.classes.iter().enumerate() {
                file.insert(
                    &format!("svm.weights.{class}"),
                    texfuse::tfmd::Tensor::vector(model.weights[i].clone()),
                );
                file.insert(
                    &format!("svm.bias.{class}"),
                    texfuse::tfmd::Tensor::scalar(model.biases[i]),
                );
            }
            file.insert("svm.c", texfuse::tfmd::Tensor::scalar(model.c));
            file.save(&out)?;
            println!("trained on {} rows (C = {c_used}); wrote {}", x.len(), out.display());
        }
        Command::Eval {
            manifest,
            features,
            setup,
            repeats,
            seed,
            c,
            out,
        } => {
            let m = load_manifest(&manifest)?;
            let cfg = features.config(seed);
            let mut spec = SplitSpec::new(setup, seed);
            spec.repeats = repeats;
            let splits = make_splits(&m, &spec)?;
            let summary = eval_splits(&m, &splits, &features, &cfg, c)?;
            write_json(&out, &summary)?;
            print!("{}", summary.render_text());
            println!("summary written to {}", out.display());
        }
        Command::Report { summary, out } => {
            let text = std::fs::read_to_string(&summary)
                .map_err(|source| io_err(&summary, source))?;
            let parsed: Summary = serde_json::from_str(&text)
                .map_err(|e| TexError::Manifest(format!("{}: {e}", summary.display())))?;
            let rendered = parsed.render_text();
            match out {
                Some(path) => std::fs::write(&path, rendered)
                    .map_err(|source| io_err(&path, source))?,
                None => print!("{rendered}"),
            }
        }
    }
    Ok(())
}

fn eval_splits(
    m: &DatasetManifest,
    splits: &[Split],
    features: &FeatureArgs,
    cfg: &FeatureConfig,
    c: CReg,
) -> Result<Summary, TexError> {
    let needs_models = features.feature.iter().any(|k| k.needs_shape_models());
    // Texture-only runs share one cache across splits; shape kinds refit
    // models per split (training specimens only), so caches are per split.
    let shared = if needs_models {
        None
    } else {
        let all: BTreeSet<String> = m.specimens().iter().map(|s| s.to_string()).collect();
        Some(build_caches(
            m,
            &features.feature,
            cfg,
            &features.cache,
            &all,
            "all",
        )?)
    };
    let mut reports = Vec::new();
    for (i, split) in splits.iter().enumerate() {
        let caches = match &shared {
            Some(_) => None,
            None => Some(build_caches(
                m,
                &features.feature,
                cfg,
                &features.cache,
                &split.train_specimens,
                &specimen_tag(&split.train_specimens),
            )?),
        };
        let cache_vec = caches.as_ref().or(shared.as_ref()).unwrap();
        let cache_refs: Vec<&FeatureCache> = cache_vec.iter().collect();
        let report = run_train_eval(m, split, &cache_refs, c)?;
        eprintln!(
            "[texfuse] split {}/{}: accuracy {:.4}, mca {:.4} (C = {})",
            i + 1,
            splits.len(),
            report.accuracy,
            report.mca,
            report.c_used
        );
        reports.push(report);
    }
    aggregate_reports(&reports)
}

fn init_threads() -> Result<(), TexError> {
    if let Ok(v) = std::env::var("TEXFUSE_THREADS") {
        let n: usize = v.parse().map_err(|_| {
            TexError::InvalidArgument(format!("TEXFUSE_THREADS must be a positive integer, got {v:?}"))
        })?;
        if n == 0 {
            return Err(TexError::InvalidArgument(
                "TEXFUSE_THREADS must be >= 1".into(),
            ));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| TexError::InvalidArgument(e.to_string()))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help/version requests are success; everything else is usage.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Err(e) = init_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e {
                TexError::InvalidArgument(_) => 1,
                _ => 2,
            };
            ExitCode::from(code)
        }
    }
}
