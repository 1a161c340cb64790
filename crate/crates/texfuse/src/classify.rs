//! Histogram normalization, feature fusion, chi-squared kernel similarity,
//! linear one-vs-rest SVM training and C-grid cross-validation.

use crate::error::{Result, TexError};
use rayon::prelude::*;
use std::collections::BTreeSet;

/// C grid used for cross-validation when `--c auto` is requested.
pub const DEFAULT_C_GRID: [f64; 6] = [0.001, 0.01, 0.1, 1.0, 100.0, 1000.0];

/// Power normalization followed by L2: `sign(h) * sqrt(|h|)`, scaled to unit
/// L2 norm. The zero vector maps to itself.
pub fn power_l2_normalize(h: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = h.iter().map(|&v| v.signum() * v.abs().sqrt()).collect();
    let norm = out.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        for v in &mut out {
            *v /= norm;
        }
    }
    out
}

/// Power-L2 normalize each block, concatenate with the given weights, then
/// L2-normalize the concatenation.
pub fn fuse_features_weighted(blocks: &[Vec<f64>], weights: &[f64]) -> Result<Vec<f64>> {
    if blocks.is_empty() {
        return Err(TexError::InvalidArgument("no feature blocks to fuse".into()));
    }
    if blocks.len() != weights.len() {
        return Err(TexError::DimensionMismatch {
            expected: blocks.len(),
            got: weights.len(),
        });
    }
    if weights.iter().any(|w| !w.is_finite() || *w <= 0.0) {
        return Err(TexError::InvalidArgument(
            "fusion weights must be positive and finite".into(),
        ));
    }
    let mut fused = Vec::with_capacity(blocks.iter().map(Vec::len).sum());
    for (block, &w) in blocks.iter().zip(weights) {
        if block.is_empty() {
            return Err(TexError::InvalidArgument("empty feature block".into()));
        }
        fused.extend(power_l2_normalize(block).into_iter().map(|v| w * v));
    }
    let norm = fused.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        for v in &mut fused {
            *v /= norm;
        }
    }
    Ok(fused)
}

/// Equal-weight fusion of feature blocks.
pub fn fuse_features(blocks: &[Vec<f64>]) -> Result<Vec<f64>> {
    fuse_features_weighted(blocks, &vec![1.0; blocks.len()])
}

/// Chi-squared kernel similarity `sum_i 2*x_i*y_i / (x_i + y_i)`; terms with
/// a zero denominator contribute 0.
pub fn chi2_similarity(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(TexError::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    if x.iter().chain(y.iter()).any(|v| *v < 0.0) {
        return Err(TexError::InvalidArgument(
            "chi2_similarity requires non-negative entries".into(),
        ));
    }
    Ok(x.iter()
        .zip(y)
        .map(|(&a, &b)| if a + b > 0.0 { 2.0 * a * b / (a + b) } else { 0.0 })
        .sum())
}

/// Gram matrix of chi-squared similarities between two row sets, for use as a
/// precomputed kernel.
pub fn chi2_kernel_matrix(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    a.par_iter()
        .map(|row| b.iter().map(|col| chi2_similarity(row, col)).collect())
        .collect()
}

/// Nearest-neighbor classification by chi-squared similarity; the fallback
/// classifier for protocols too small to train the linear SVM.
pub fn chi2_nn_classify(train_x: &[Vec<f64>], train_y: &[String], x: &[f64]) -> Result<String> {
    if train_x.is_empty() || train_x.len() != train_y.len() {
        return Err(TexError::InvalidArgument(
            "training rows and labels must be non-empty and aligned".into(),
        ));
    }
    let mut best: Option<(f64, &str)> = None;
    for (row, label) in train_x.iter().zip(train_y) {
        let s = chi2_similarity(row, x)?;
        let better = match best {
            None => true,
            Some((bs, bl)) => s > bs || (s == bs && label.as_str() < bl),
        };
        if better {
            best = Some((s, label));
        }
    }
    Ok(best.unwrap().1.to_string())
}

/// One-vs-rest linear SVM. Weight vectors include the augmented-bias
/// component separately as `biases`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSvmModel {
    pub classes: Vec<String>,
    /// One weight vector per class, dimension = feature dimension.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
    pub c: f64,
}

impl LinearSvmModel {
    pub fn dim(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    /// Per-class decision values `w^T x + b` in `classes` order.
    pub fn scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(TexError::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(self
            .weights
            .iter()
            .zip(&self.biases)
            .map(|(w, b)| w.iter().zip(x).map(|(wi, xi)| wi * xi).sum::<f64>() + b)
            .collect())
    }
}

/// Augmented-bias Gram matrix `G_ij = x_i . x_j + 1`, shared across the
/// one-vs-rest subproblems so each solver epoch costs O(n^2) instead of
/// O(n * dim).
fn gram_matrix(x: &[&[f64]]) -> Vec<f64> {
    let n = x.len();
    let mut g = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let dot: f64 = x[i].iter().zip(x[j]).map(|(a, b)| a * b).sum::<f64>() + 1.0;
            g[i * n + j] = dot;
            g[j * n + i] = dot;
        }
    }
    g
}

/// Solve the binary L2-regularized hinge-loss problem by dual coordinate
/// descent with an augmented bias feature, working on the precomputed Gram
/// matrix. `labels[i]` is ±1. Deterministic: samples are visited in the given
/// (canonical) order every epoch. Returns (weights including the bias
/// component last, epochs used).
fn solve_binary_svm(x: &[&[f64]], gram: &[f64], labels: &[f64], c: f64) -> (Vec<f64>, usize) {
    let n = x.len();
    let mut alpha = vec![0.0; n];
    // score[j] = sum_i alpha_i y_i G_ij = w . x_j + b.
    let mut score = vec![0.0; n];
    const MAX_EPOCHS: usize = 2000;
    let mut epochs = 0;
    for epoch in 0..MAX_EPOCHS {
        epochs = epoch + 1;
        for i in 0..n {
            let yi = labels[i];
            let grad = yi * score[i] - 1.0;
            let old = alpha[i];
            let new = (old - grad / gram[i * n + i]).clamp(0.0, c);
            if new != old {
                let delta = (new - old) * yi;
                let row = &gram[i * n..(i + 1) * n];
                for (s, g) in score.iter_mut().zip(row) {
                    *s += delta * g;
                }
                alpha[i] = new;
            }
        }
        // Duality gap check once per epoch: primal = 0.5||w||^2 + C*sum hinge,
        // dual = sum(alpha) - 0.5||w||^2, with ||w||^2 = sum_i alpha_i y_i score_i.
        let wnorm2: f64 = alpha
            .iter()
            .zip(labels)
            .zip(&score)
            .map(|((a, y), s)| a * y * s)
            .sum();
        let hinge: f64 = labels
            .iter()
            .zip(&score)
            .map(|(y, s)| (1.0 - y * s).max(0.0))
            .sum();
        let primal = 0.5 * wnorm2 + c * hinge;
        let dual = alpha.iter().sum::<f64>() - 0.5 * wnorm2;
        if primal - dual <= 1e-3 * primal.abs().max(1.0) {
            break;
        }
    }
    // Recover the primal weights: w = sum_i alpha_i y_i x_i, bias last.
    let dim = x[0].len() + 1;
    let mut w = vec![0.0; dim];
    for i in 0..n {
        let coef = alpha[i] * labels[i];
        if coef == 0.0 {
            continue;
        }
        for (wj, xj) in w.iter_mut().zip(x[i]) {
            *wj += coef * xj;
        }
        w[dim - 1] += coef;
    }
    (w, epochs)
}

/// Train a one-vs-rest linear SVM. Samples are re-ordered canonically (by
/// label, then lexicographically by feature values) before the solver runs,
/// so any permutation of the input produces an identical model.
pub fn train_linear_svm_ovr(x: &[Vec<f64>], y: &[String], c: f64) -> Result<LinearSvmModel> {
    if x.len() != y.len() {
        return Err(TexError::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    if x.is_empty() {
        return Err(TexError::Training("no training samples".into()));
    }
    if !c.is_finite() || c <= 0.0 {
        return Err(TexError::InvalidArgument(format!(
            "C must be positive and finite, got {c}"
        )));
    }
    let dim = x[0].len();
    for row in x {
        if row.len() != dim {
            return Err(TexError::DimensionMismatch {
                expected: dim,
                got: row.len(),
            });
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(TexError::Training("non-finite feature value".into()));
        }
    }
    let classes: Vec<String> = y.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
    if classes.len() < 2 {
        return Err(TexError::Training(
            "one-vs-rest training needs at least 2 classes".into(),
        ));
    }
    // Canonical sample order: sort indices by (label, features).
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| {
        y[a].cmp(&y[b]).then_with(|| {
            x[a].iter()
                .zip(&x[b])
                .find_map(|(u, v)| u.partial_cmp(v).filter(|o| o.is_ne()))
                .unwrap_or(std::cmp::Ordering::Equal)
        })
    });
    let rows: Vec<&[f64]> = order.iter().map(|&i| x[i].as_slice()).collect();
    let sorted_labels: Vec<&String> = order.iter().map(|&i| &y[i]).collect();
    let gram = gram_matrix(&rows);

    let trained: Vec<Vec<f64>> = classes
        .par_iter()
        .map(|class| {
            let labels: Vec<f64> = sorted_labels
                .iter()
                .map(|l| if *l == class { 1.0 } else { -1.0 })
                .collect();
            solve_binary_svm(&rows, &gram, &labels, c).0
        })
        .collect();
    let mut weights = Vec::with_capacity(classes.len());
    let mut biases = Vec::with_capacity(classes.len());
    for mut w in trained {
        let b = w.pop().unwrap();
        weights.push(w);
        biases.push(b);
    }
    Ok(LinearSvmModel {
        classes,
        weights,
        biases,
        c,
    })
}

/// Argmax of per-class scores; ties break to the lexicographically smallest
/// label (classes are stored sorted, so the first maximum wins).
pub fn predict(model: &LinearSvmModel, x: &[f64]) -> Result<String> {
    let scores = model.scores(x)?;
    let mut best = 0;
    for (i, s) in scores.iter().enumerate().skip(1) {
        if *s > scores[best] {
            best = i;
        }
    }
    Ok(model.classes[best].clone())
}

/// Pick C from `grid` by leave-one-group-out cross-validation over specimen
/// ids (stratified 5-fold when fewer than 3 groups exist). Ties go to the
/// smallest C.
pub fn cross_validate_c(
    x: &[Vec<f64>],
    y: &[String],
    groups: &[String],
    grid: &[f64],
) -> Result<f64> {
    if grid.is_empty() {
        return Err(TexError::InvalidArgument("empty C grid".into()));
    }
    if x.len() != y.len() || x.len() != groups.len() {
        return Err(TexError::InvalidArgument(
            "features, labels and groups must be aligned".into(),
        ));
    }
    if grid.len() == 1 {
        return Ok(grid[0]);
    }
    let distinct: BTreeSet<&String> = groups.iter().collect();
    let folds: Vec<Vec<usize>> = if distinct.len() >= 3 {
        distinct
            .iter()
            .map(|g| {
                (0..x.len())
                    .filter(|&i| &groups[i] == *g)
                    .collect::<Vec<_>>()
            })
            .collect()
    } else {
        // Stratified 5-fold: round-robin per class in canonical order.
        let classes: BTreeSet<&String> = y.iter().collect();
        let mut folds = vec![Vec::new(); 5];
        for class in classes {
            let mut members: Vec<usize> = (0..x.len()).filter(|&i| &y[i] == class).collect();
            members.sort_unstable();
            for (j, i) in members.into_iter().enumerate() {
                folds[j % 5].push(i);
            }
        }
        folds.retain(|f| !f.is_empty());
        folds
    };
    if folds.len() < 2 {
        return Err(TexError::Training(
            "cross-validation needs at least 2 non-empty folds".into(),
        ));
    }
    let mut sorted_grid: Vec<f64> = grid.to_vec();
    sorted_grid.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let mut best = (f64::NEG_INFINITY, sorted_grid[0]);
    for &c in &sorted_grid {
        let mut accs = Vec::new();
        for test_fold in &folds {
            let in_test = |i: &usize| test_fold.contains(i);
            let train_idx: Vec<usize> = (0..x.len()).filter(|i| !in_test(i)).collect();
            let train_x: Vec<Vec<f64>> = train_idx.iter().map(|&i| x[i].clone()).collect();
            let train_y: Vec<String> = train_idx.iter().map(|&i| y[i].clone()).collect();
            let train_classes: BTreeSet<&String> = train_y.iter().collect();
            if train_classes.len() < 2 {
                continue;
            }
            let model = train_linear_svm_ovr(&train_x, &train_y, c)?;
            let correct = test_fold
                .iter()
                .filter(|&&i| predict(&model, &x[i]).map(|l| l == y[i]).unwrap_or(false))
                .count();
            accs.push(correct as f64 / test_fold.len() as f64);
        }
        if accs.is_empty() {
            return Err(TexError::Training(
                "degenerate grouping: every fold left a single-class training set".into(),
            ));
        }
        let mean = accs.iter().sum::<f64>() / accs.len() as f64;
        // Strict > keeps the smallest C on ties (grid is ascending).
        if mean > best.0 {
            best = (mean, c);
        }
    }
    Ok(best.1)
}
