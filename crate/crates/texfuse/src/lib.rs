//! texfuse: texture-and-shape image classification.
//!
//! Building blocks:
//! - [`imgcore`]: grayscale images, PNM I/O, smoothing, resizing.
//! - [`lbp`]: local binary patterns (raw, uniform, rotation-invariant).
//! - [`pricolbp`]: pairwise-rotation-invariant co-occurrence LBP.
//! - [`gabor`]: Gabor filter bank and the multi-resolution PRICoLGBP.
//! - [`densesift`]: dense multi-scale RootSIFT descriptors.
//! - [`encode`]: PCA, k-means, GMM, Improved Fisher Vector and VQ encoding.
//! - [`mclbp`]: multi-scale co-occurrence LBP with rotation-invariant pooling.
//! - [`classify`]: normalization, fusion, linear one-vs-rest SVM, chi-squared
//!   similarity.
//! - [`pipeline`]: manifests, splits, feature caches, train/eval, synthetic
//!   corpus.
//! - [`tfmd`]: binary named-tensor model container.

pub mod classify;
pub mod densesift;
pub mod encode;
pub mod error;
pub mod gabor;
pub mod imgcore;
pub mod lbp;
pub mod mclbp;
pub mod pipeline;
pub mod pricolbp;
pub mod tfmd;

pub use error::{Result, TexError};
