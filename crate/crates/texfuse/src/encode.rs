//! PCA decorrelation, k-means codebooks, diagonal-covariance GMM training via
//! EM, vector-quantization encoding and Fisher-vector encoding.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::densesift::DescriptorSet;
use crate::error::{Result, TexError};

/// Linear projection learned from training descriptors.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// Column-major basis: `input_dim x output_dim`, orthonormal columns in
    /// descending eigenvalue order.
    pub basis: Vec<f64>,
    pub input_dim: usize,
    pub output_dim: usize,
}

/// Diagonal-covariance Gaussian mixture.
#[derive(Debug, Clone, PartialEq)]
pub struct GmmModel {
    pub k: usize,
    pub dim: usize,
    pub weights: Vec<f64>,
    /// `k x dim`, row-major.
    pub means: Vec<f64>,
    /// `k x dim`, row-major diagonal variances.
    pub variances: Vec<f64>,
    /// Per-iteration average log-likelihood trace from training.
    pub log_likelihoods: Vec<f64>,
}

/// Hard-assignment codebook.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    pub k: usize,
    pub dim: usize,
    /// `k x dim`, row-major.
    pub centroids: Vec<f64>,
}

impl Codebook {
    #[inline]
    pub fn centroid(&self, i: usize) -> &[f64] {
        &self.centroids[i * self.dim..(i + 1) * self.dim]
    }
}

/// Principal axes of the centered sample matrix. The sign of each column is
/// fixed so its largest-magnitude entry is positive.
pub fn fit_pca(samples: &DescriptorSet, d: usize) -> Result<PcaModel> {
    let n = samples.len();
    let dim = samples.dim;
    if n <= d {
        return Err(TexError::Training(format!(
            "PCA needs more samples than components ({n} <= {d})"
        )));
    }
    if dim < d {
        return Err(TexError::Training(format!(
            "PCA target dimension {d} exceeds descriptor dimension {dim}"
        )));
    }
    let mut mean = vec![0.0; dim];
    for row in samples.rows() {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }

    // Eigen-decomposition of the covariance gives the right singular vectors
    // of the centered matrix.
    let mut cov = DMatrix::<f64>::zeros(dim, dim);
    for row in samples.rows() {
        for i in 0..dim {
            let di = row[i] - mean[i];
            for j in i..dim {
                cov[(i, j)] += di * (row[j] - mean[j]);
            }
        }
    }
    for i in 0..dim {
        for j in 0..i {
            cov[(i, j)] = cov[(j, i)];
        }
    }
    cov /= (n - 1) as f64;

    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let total: f64 = eig.eigenvalues.iter().map(|v| v.max(0.0)).sum();
    let floor = total * 1e-12;
    let mut basis = vec![0.0; dim * d];
    for (col, &src) in order.iter().take(d).enumerate() {
        if eig.eigenvalues[src] <= floor {
            return Err(TexError::Training(format!(
                "sample rank below requested dimension {d}"
            )));
        }
        let v = eig.eigenvectors.column(src);
        let (mut max_abs, mut max_val) = (0.0f64, 0.0f64);
        for i in 0..dim {
            if v[i].abs() > max_abs {
                max_abs = v[i].abs();
                max_val = v[i];
            }
        }
        let sign = if max_val < 0.0 { -1.0 } else { 1.0 };
        for i in 0..dim {
            basis[i * d + col] = sign * v[i];
        }
    }
    Ok(PcaModel {
        mean,
        basis,
        input_dim: dim,
        output_dim: d,
    })
}

/// Project a descriptor: `basis^T * (x - mean)`.
pub fn apply_pca(model: &PcaModel, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != model.input_dim {
        return Err(TexError::DimensionMismatch {
            expected: model.input_dim,
            got: x.len(),
        });
    }
    let mut out = vec![0.0; model.output_dim];
    for i in 0..model.input_dim {
        let c = x[i] - model.mean[i];
        if c == 0.0 {
            continue;
        }
        let row = &model.basis[i * model.output_dim..(i + 1) * model.output_dim];
        for (o, b) in out.iter_mut().zip(row) {
            *o += c * b;
        }
    }
    Ok(out)
}

pub fn apply_pca_set(model: &PcaModel, set: &DescriptorSet) -> Result<DescriptorSet> {
    let mut out = DescriptorSet::new(model.output_dim);
    for row in set.rows() {
        out.push(&apply_pca(model, row)?)?;
    }
    Ok(out)
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// k-means++ seeded Lloyd iterations; empty clusters are re-seeded from the
/// point farthest from its centroid. Deterministic given the seed.
pub fn fit_kmeans(samples: &DescriptorSet, k: usize, max_iters: usize, seed: u64) -> Result<Codebook> {
    let n = samples.len();
    let dim = samples.dim;
    if n < k || k == 0 {
        return Err(TexError::Training(format!(
            "k-means needs at least k samples ({n} < {k})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // k-means++ initialization.
    let mut centroids = vec![0.0; k * dim];
    let first = rng.gen_range(0..n);
    centroids[..dim].copy_from_slice(samples.row(first));
    let mut min_d2: Vec<f64> = (0..n)
        .map(|i| sq_dist(samples.row(i), &centroids[..dim]))
        .collect();
    for c in 1..k {
        let total: f64 = min_d2.iter().sum();
        let chosen = if total <= 0.0 {
            rng.gen_range(0..n)
        } else {
            let mut target = rng.gen::<f64>() * total;
            let mut pick = n - 1;
            for (i, d) in min_d2.iter().enumerate() {
                target -= d;
                if target <= 0.0 {
                    pick = i;
                    break;
                }
            }
            pick
        };
        centroids[c * dim..(c + 1) * dim].copy_from_slice(samples.row(chosen));
        for i in 0..n {
            let d = sq_dist(samples.row(i), &centroids[c * dim..(c + 1) * dim]);
            if d < min_d2[i] {
                min_d2[i] = d;
            }
        }
    }

    let mut assign = vec![usize::MAX; n];
    for _ in 0..max_iters {
        let mut changed = false;
        for i in 0..n {
            let row = samples.row(i);
            let mut best = (0usize, f64::INFINITY);
            for c in 0..k {
                let d = sq_dist(row, &centroids[c * dim..(c + 1) * dim]);
                if d < best.1 {
                    best = (c, d);
                }
            }
            if assign[i] != best.0 {
                assign[i] = best.0;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = vec![0.0; k * dim];
        let mut counts = vec![0usize; k];
        for i in 0..n {
            let c = assign[i];
            counts[c] += 1;
            for (s, v) in sums[c * dim..(c + 1) * dim].iter_mut().zip(samples.row(i)) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                // Re-seed from the farthest point.
                let far = (0..n)
                    .max_by(|&a, &b| {
                        let da = sq_dist(samples.row(a), &centroids[assign[a] * dim..(assign[a] + 1) * dim]);
                        let db = sq_dist(samples.row(b), &centroids[assign[b] * dim..(assign[b] + 1) * dim]);
                        da.total_cmp(&db)
                    })
                    .unwrap();
                centroids[c * dim..(c + 1) * dim].copy_from_slice(samples.row(far));
            } else {
                for j in 0..dim {
                    centroids[c * dim + j] = sums[c * dim + j] / counts[c] as f64;
                }
            }
        }
    }
    Ok(Codebook {
        k,
        dim,
        centroids,
    })
}

/// Sum of squared distances to the nearest centroid.
pub fn kmeans_objective(samples: &DescriptorSet, book: &Codebook) -> f64 {
    (0..samples.len())
        .map(|i| {
            (0..book.k)
                .map(|c| sq_dist(samples.row(i), book.centroid(c)))
                .fold(f64::INFINITY, f64::min)
        })
        .sum()
}

fn log_density_diag(x: &[f64], mean: &[f64], var: &[f64]) -> f64 {
    let mut acc = -0.5 * x.len() as f64 * (2.0 * std::f64::consts::PI).ln();
    for i in 0..x.len() {
        let d = x[i] - mean[i];
        acc -= 0.5 * (var[i].ln() + d * d / var[i]);
    }
    acc
}

/// EM for a diagonal-covariance mixture, initialized from k-means. The
/// variance floor is `1e-4` times the per-dimension global variance.
pub fn fit_gmm(
    samples: &DescriptorSet,
    k: usize,
    max_iters: usize,
    tol: f64,
    seed: u64,
) -> Result<GmmModel> {
    let n = samples.len();
    let dim = samples.dim;
    if n < k || k == 0 {
        return Err(TexError::Training(format!(
            "GMM needs at least k samples ({n} < {k})"
        )));
    }

    // Global per-dimension variance for the floor.
    let mut gmean = vec![0.0; dim];
    for row in samples.rows() {
        for (m, v) in gmean.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in &mut gmean {
        *m /= n as f64;
    }
    let mut gvar = vec![0.0; dim];
    for row in samples.rows() {
        for (g, (v, m)) in gvar.iter_mut().zip(row.iter().zip(&gmean)) {
            *g += (v - m) * (v - m);
        }
    }
    let floor: Vec<f64> = gvar
        .iter()
        .map(|g| (1e-4 * g / n as f64).max(1e-12))
        .collect();

    // Initialization from k-means: weights are cluster fractions, variances
    // the within-cluster diagonal variances.
    let book = fit_kmeans(samples, k, 50, seed)?;
    let mut assign = vec![0usize; n];
    for i in 0..n {
        let row = samples.row(i);
        assign[i] = (0..k)
            .min_by(|&a, &b| sq_dist(row, book.centroid(a)).total_cmp(&sq_dist(row, book.centroid(b))))
            .unwrap();
    }
    let mut weights = vec![0.0; k];
    let mut means = book.centroids.clone();
    let mut variances = vec![0.0; k * dim];
    let mut counts = vec![0usize; k];
    for i in 0..n {
        let c = assign[i];
        counts[c] += 1;
        for j in 0..dim {
            let d = samples.row(i)[j] - means[c * dim + j];
            variances[c * dim + j] += d * d;
        }
    }
    for c in 0..k {
        weights[c] = counts[c].max(1) as f64 / n as f64;
        for j in 0..dim {
            let v = if counts[c] > 0 {
                variances[c * dim + j] / counts[c] as f64
            } else {
                gvar[j] / n as f64
            };
            variances[c * dim + j] = v.max(floor[j]);
        }
    }
    let wsum: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= wsum;
    }

    let mut log_likelihoods = Vec::new();
    let mut resp = vec![0.0; k];
    let mut prev_ll = f64::NEG_INFINITY;
    let mut log_norm = vec![0.0; k];
    let mut inv2var = vec![0.0; k * dim];
    for _ in 0..max_iters {
        // Parameters are constant within an iteration: hoist the per-component
        // log-normalizer and precision so the per-sample loop is mul-add only.
        for c in 0..k {
            let mut s = weights[c].ln() - 0.5 * dim as f64 * (2.0 * std::f64::consts::PI).ln();
            for j in 0..dim {
                let v = variances[c * dim + j];
                s -= 0.5 * v.ln();
                inv2var[c * dim + j] = 0.5 / v;
            }
            log_norm[c] = s;
        }
        // E-step accumulators.
        let mut nk = vec![0.0; k];
        let mut mean_acc = vec![0.0; k * dim];
        let mut var_acc = vec![0.0; k * dim];
        let mut ll = 0.0;
        for i in 0..n {
            let x = samples.row(i);
            let mut max_log = f64::NEG_INFINITY;
            for c in 0..k {
                let mean = &means[c * dim..(c + 1) * dim];
                let prec = &inv2var[c * dim..(c + 1) * dim];
                let mut q = 0.0;
                for ((xv, m), p) in x.iter().zip(mean).zip(prec) {
                    let d = xv - m;
                    q += d * d * p;
                }
                resp[c] = log_norm[c] - q;
                max_log = max_log.max(resp[c]);
            }
            let mut sum = 0.0;
            for r in resp.iter_mut() {
                *r = (*r - max_log).exp();
                sum += *r;
            }
            ll += max_log + sum.ln();
            for c in 0..k {
                let r = resp[c] / sum;
                nk[c] += r;
                for j in 0..dim {
                    mean_acc[c * dim + j] += r * x[j];
                    var_acc[c * dim + j] += r * x[j] * x[j];
                }
            }
        }
        let avg_ll = ll / n as f64;
        if !avg_ll.is_finite() {
            return Err(TexError::Training(
                "non-finite GMM log-likelihood (degenerate data)".into(),
            ));
        }
        log_likelihoods.push(avg_ll);

        // M-step.
        for c in 0..k {
            weights[c] = nk[c] / n as f64;
            if nk[c] <= 0.0 {
                continue;
            }
            for j in 0..dim {
                let m = mean_acc[c * dim + j] / nk[c];
                means[c * dim + j] = m;
                variances[c * dim + j] = (var_acc[c * dim + j] / nk[c] - m * m).max(floor[j]);
            }
        }
        let wsum: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= wsum;
        }

        if (avg_ll - prev_ll).abs() < tol {
            break;
        }
        prev_ll = avg_ll;
    }

    Ok(GmmModel {
        k,
        dim,
        weights,
        means,
        variances,
        log_likelihoods,
    })
}

/// Posterior component probabilities, computed in log-space with
/// max-subtraction; sums to 1.
pub fn gmm_responsibilities(model: &GmmModel, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != model.dim {
        return Err(TexError::DimensionMismatch {
            expected: model.dim,
            got: x.len(),
        });
    }
    let k = model.k;
    let d = model.dim;
    let mut logs = vec![0.0; k];
    let mut max_log = f64::NEG_INFINITY;
    for c in 0..k {
        logs[c] = model.weights[c].max(f64::MIN_POSITIVE).ln()
            + log_density_diag(x, &model.means[c * d..(c + 1) * d], &model.variances[c * d..(c + 1) * d]);
        max_log = max_log.max(logs[c]);
    }
    let mut sum = 0.0;
    for l in logs.iter_mut() {
        *l = (*l - max_log).exp();
        sum += *l;
    }
    for l in logs.iter_mut() {
        *l /= sum;
    }
    Ok(logs)
}

/// Fisher-vector encoding: first- and second-order deviation statistics per
/// component, concatenated as `[u_1, v_1, ..., u_K, v_K]` (dimension `2*d*K`).
pub fn ifv_encode(model: &GmmModel, set: &DescriptorSet) -> Result<Vec<f64>> {
    if set.is_empty() {
        return Err(TexError::InvalidArgument(
            "cannot encode an empty descriptor set".into(),
        ));
    }
    if set.dim != model.dim {
        return Err(TexError::DimensionMismatch {
            expected: model.dim,
            got: set.dim,
        });
    }
    let k = model.k;
    let d = model.dim;
    let n = set.len() as f64;
    // Per-component constants, hoisted out of the per-descriptor loop.
    let mut log_norm = vec![0.0; k];
    let mut inv2var = vec![0.0; k * d];
    let mut inv_std = vec![0.0; k * d];
    let mut inv_var = vec![0.0; k * d];
    for c in 0..k {
        let mut s = model.weights[c].max(f64::MIN_POSITIVE).ln()
            - 0.5 * d as f64 * (2.0 * std::f64::consts::PI).ln();
        for j in 0..d {
            let var = model.variances[c * d + j];
            s -= 0.5 * var.ln();
            inv2var[c * d + j] = 0.5 / var;
            inv_std[c * d + j] = 1.0 / var.sqrt();
            inv_var[c * d + j] = 1.0 / var;
        }
        log_norm[c] = s;
    }
    let mut u = vec![0.0; k * d];
    let mut v = vec![0.0; k * d];
    let mut logs = vec![0.0; k];
    for row in set.rows() {
        let mut max_log = f64::NEG_INFINITY;
        for c in 0..k {
            let mean = &model.means[c * d..(c + 1) * d];
            let prec = &inv2var[c * d..(c + 1) * d];
            let mut q = 0.0;
            for ((x, m), p) in row.iter().zip(mean).zip(prec) {
                let diff = x - m;
                q += diff * diff * p;
            }
            logs[c] = log_norm[c] - q;
            max_log = max_log.max(logs[c]);
        }
        let mut sum = 0.0;
        for l in logs.iter_mut() {
            *l = (*l - max_log).exp();
            sum += *l;
        }
        for c in 0..k {
            let s = logs[c] / sum;
            if s == 0.0 {
                continue;
            }
            let mean = &model.means[c * d..(c + 1) * d];
            for j in 0..d {
                let diff = row[j] - mean[j];
                u[c * d + j] += s * diff * inv_std[c * d + j];
                v[c * d + j] += s * (diff * diff * inv_var[c * d + j] - 1.0);
            }
        }
    }
    let mut out = Vec::with_capacity(2 * k * d);
    for c in 0..k {
        let wu = 1.0 / (n * model.weights[c].sqrt());
        let wv = 1.0 / (n * (2.0 * model.weights[c]).sqrt());
        out.extend(u[c * d..(c + 1) * d].iter().map(|x| x * wu));
        out.extend(v[c * d..(c + 1) * d].iter().map(|x| x * wv));
    }
    Ok(out)
}

/// Hard nearest-centroid histogram, L1-normalized; ties go to the lowest
/// centroid index.
pub fn vq_encode(book: &Codebook, set: &DescriptorSet) -> Result<Vec<f64>> {
    if set.is_empty() {
        return Err(TexError::InvalidArgument(
            "cannot encode an empty descriptor set".into(),
        ));
    }
    if set.dim != book.dim {
        return Err(TexError::DimensionMismatch {
            expected: book.dim,
            got: set.dim,
        });
    }
    let mut hist = vec![0.0; book.k];
    for row in set.rows() {
        let mut best = (0usize, f64::INFINITY);
        for c in 0..book.k {
            let dist = sq_dist(row, book.centroid(c));
            if dist < best.1 {
                best = (c, dist);
            }
        }
        hist[best.0] += 1.0;
    }
    let total = set.len() as f64;
    for h in &mut hist {
        *h /= total;
    }
    Ok(hist)
}

/// Uniform sample without replacement across pooled per-image descriptor
/// sets; returns everything when fewer than `n` rows exist. Deterministic per
/// seed.
pub fn sample_training_descriptors(
    sets: &[DescriptorSet],
    n: usize,
    seed: u64,
) -> Result<DescriptorSet> {
    let dim = sets
        .iter()
        .find(|s| !s.is_empty())
        .map(|s| s.dim)
        .ok_or_else(|| TexError::Training("no descriptors in corpus".into()))?;
    let total: usize = sets.iter().map(|s| s.len()).sum();
    let mut indices: Vec<(usize, usize)> = sets
        .iter()
        .enumerate()
        .flat_map(|(si, s)| (0..s.len()).map(move |ri| (si, ri)))
        .collect();
    if total > n {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        indices.shuffle(&mut rng);
        indices.truncate(n);
    }
    let mut out = DescriptorSet::new(dim);
    for (si, ri) in indices {
        out.push(sets[si].row(ri))?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn normal_sample(rng: &mut ChaCha8Rng, std: f64) -> f64 {
        // Box-Muller.
        let u1: f64 = rng.gen::<f64>().max(1e-12);
        let u2: f64 = rng.gen();
        std * (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    fn gaussian_cloud(n: usize, mean: &[f64], std: f64, seed: u64) -> DescriptorSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut set = DescriptorSet::new(mean.len());
        for _ in 0..n {
            let row: Vec<f64> = mean.iter().map(|m| m + normal_sample(&mut rng, std)).collect();
            set.push(&row).unwrap();
        }
        set
    }

    #[test]
    fn pca_finds_principal_axis() {
        // Mean-zero data with diagonal covariance diag(4, 1, 0, ...).
        let mut set = DescriptorSet::new(4);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut rows = Vec::new();
        for _ in 0..500 {
            rows.push(vec![
                normal_sample(&mut rng, 2.0),
                normal_sample(&mut rng, 1.0),
                0.0,
                0.0,
            ]);
        }
        // Symmetrize so the empirical mean is exactly zero.
        for r in rows.clone() {
            rows.push(r.iter().map(|v| -v).collect());
        }
        for r in &rows {
            set.push(r).unwrap();
        }
        let model = fit_pca(&set, 1).unwrap();
        assert!(model.basis[0] > 0.99, "basis = {:?}", &model.basis[..4]);
    }

    #[test]
    fn pca_projection_centers_and_decorrelates() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut set = DescriptorSet::new(5);
        for _ in 0..800 {
            let a: f64 = rng.gen::<f64>() * 4.0;
            let b: f64 = rng.gen::<f64>();
            let row = vec![a + b, a - b, b * 2.0, rng.gen::<f64>(), a * 0.5 + rng.gen::<f64>()];
            set.push(&row).unwrap();
        }
        let model = fit_pca(&set, 3).unwrap();
        let proj = apply_pca_set(&model, &set).unwrap();
        let n = proj.len() as f64;
        let mut mean = vec![0.0; 3];
        for row in proj.rows() {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v / n;
            }
        }
        for m in &mean {
            assert_abs_diff_eq!(*m, 0.0, epsilon = 1e-8);
        }
        let mut cov = vec![0.0; 9];
        for row in proj.rows() {
            for i in 0..3 {
                for j in 0..3 {
                    cov[i * 3 + j] += row[i] * row[j] / n;
                }
            }
        }
        let scale = cov[0].max(cov[4]).max(cov[8]);
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    assert!(cov[i * 3 + j].abs() / scale < 1e-6);
                }
            }
        }
    }

    #[test]
    fn pca_identities() {
        let set = gaussian_cloud(200, &[1.0, 2.0, 3.0], 1.0, 11);
        let model = fit_pca(&set, 2).unwrap();
        let zero = apply_pca(&model, &model.mean).unwrap();
        for v in &zero {
            assert_abs_diff_eq!(*v, 0.0, epsilon = 1e-10);
        }
        // mean + basis column j projects to e_j.
        for j in 0..2 {
            let x: Vec<f64> = (0..3)
                .map(|i| model.mean[i] + model.basis[i * 2 + j])
                .collect();
            let p = apply_pca(&model, &x).unwrap();
            for (i, v) in p.iter().enumerate() {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(*v, expected, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn pca_rejects_rank_deficit() {
        let mut set = DescriptorSet::new(3);
        for i in 0..50 {
            set.push(&[i as f64, 2.0 * i as f64, 3.0 * i as f64]).unwrap();
        }
        assert!(fit_pca(&set, 2).is_err());
    }

    #[test]
    fn kmeans_trivial_and_separated() {
        let mut set = DescriptorSet::new(2);
        set.push(&[0.0, 0.0]).unwrap();
        set.push(&[5.0, 5.0]).unwrap();
        let book = fit_kmeans(&set, 2, 20, 0).unwrap();
        assert_abs_diff_eq!(kmeans_objective(&set, &book), 0.0, epsilon = 1e-12);

        let mut set = gaussian_cloud(200, &[0.0, 0.0], 0.2, 1);
        for row in gaussian_cloud(200, &[10.0, 10.0], 0.2, 2).rows() {
            set.push(row).unwrap();
        }
        let book = fit_kmeans(&set, 2, 50, 3);
        let book = book.unwrap();
        let mut cents: Vec<&[f64]> = (0..2).map(|c| book.centroid(c)).collect();
        cents.sort_by(|a, b| a[0].total_cmp(&b[0]));
        assert!((cents[0][0]).abs() < 0.1 && (cents[1][0] - 10.0).abs() < 0.1);
    }

    #[test]
    fn kmeans_objective_non_increasing() {
        let set = gaussian_cloud(300, &[0.0, 0.0, 0.0], 2.0, 9);
        let mut prev = f64::INFINITY;
        for iters in 1..8 {
            let book = fit_kmeans(&set, 5, iters, 42).unwrap();
            let obj = kmeans_objective(&set, &book);
            assert!(obj <= prev + 1e-9, "objective rose at iter {iters}");
            prev = obj;
        }
    }

    #[test]
    fn gmm_k1_recovers_mle() {
        let set = gaussian_cloud(10000, &[2.0, -1.0], 1.5, 5);
        let model = fit_gmm(&set, 1, 30, 1e-9, 0).unwrap();
        // Closed-form K=1 MLE: sample mean and variance.
        let n = set.len() as f64;
        let mut mean = [0.0; 2];
        for row in set.rows() {
            mean[0] += row[0] / n;
            mean[1] += row[1] / n;
        }
        let mut var = [0.0; 2];
        for row in set.rows() {
            var[0] += (row[0] - mean[0]).powi(2) / n;
            var[1] += (row[1] - mean[1]).powi(2) / n;
        }
        for j in 0..2 {
            assert!((model.means[j] - mean[j]).abs() / mean[j].abs().max(1.0) < 0.05);
            assert!((model.variances[j] - var[j]).abs() / var[j] < 0.05);
        }
    }

    #[test]
    fn gmm_loglik_monotone_and_weights_recovered() {
        let mut set = gaussian_cloud(7000, &[0.0, 0.0], 0.5, 21);
        for row in gaussian_cloud(3000, &[8.0, 8.0], 0.5, 22).rows() {
            set.push(row).unwrap();
        }
        let model = fit_gmm(&set, 2, 50, 1e-12, 1).unwrap();
        for w in model.log_likelihoods.windows(2) {
            assert!(w[1] >= w[0] - 1e-9, "log-likelihood dropped: {w:?}");
        }
        let mut weights = model.weights.clone();
        weights.sort_by(f64::total_cmp);
        assert!((weights[0] - 0.3).abs() < 0.02);
        assert!((weights[1] - 0.7).abs() < 0.02);
    }

    #[test]
    fn responsibilities_sum_to_one_and_respect_symmetry() {
        let model = GmmModel {
            k: 2,
            dim: 1,
            weights: vec![0.5, 0.5],
            means: vec![-1.0, 1.0],
            variances: vec![1.0, 1.0],
            log_likelihoods: vec![],
        };
        let r = gmm_responsibilities(&model, &[0.0]).unwrap();
        assert_abs_diff_eq!(r[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(r[1], 0.5, epsilon = 1e-12);

        let single = GmmModel {
            k: 1,
            dim: 1,
            weights: vec![1.0],
            means: vec![0.0],
            variances: vec![1.0],
            log_likelihoods: vec![],
        };
        assert_eq!(gmm_responsibilities(&single, &[3.0]).unwrap(), vec![1.0]);

        // Direct density-ratio oracle: moving toward component 1 drives s_1
        // monotonically to 1.
        let mut prev = 0.5;
        for step in 1..20 {
            let x = [-(step as f64) * 0.3];
            let r = gmm_responsibilities(&model, &x).unwrap();
            assert_abs_diff_eq!(r[0] + r[1], 1.0, epsilon = 1e-12);
            assert!(r[0] >= prev);
            prev = r[0];
        }
        assert!(prev > 0.999);
    }

    #[test]
    fn ifv_single_point_at_mean() {
        let model = GmmModel {
            k: 1,
            dim: 3,
            weights: vec![1.0],
            means: vec![0.5, -0.25, 2.0],
            variances: vec![1.0, 2.0, 0.5],
            log_likelihoods: vec![],
        };
        let mut set = DescriptorSet::new(3);
        set.push(&[0.5, -0.25, 2.0]).unwrap();
        let f = ifv_encode(&model, &set).unwrap();
        assert_eq!(f.len(), 6);
        for j in 0..3 {
            assert_abs_diff_eq!(f[j], 0.0, epsilon = 1e-12);
            assert_abs_diff_eq!(f[3 + j], -1.0 / 2f64.sqrt(), epsilon = 1e-12);
        }
    }

    #[test]
    fn ifv_rejects_empty_set() {
        let model = GmmModel {
            k: 1,
            dim: 2,
            weights: vec![1.0],
            means: vec![0.0, 0.0],
            variances: vec![1.0, 1.0],
            log_likelihoods: vec![],
        };
        assert!(ifv_encode(&model, &DescriptorSet::new(2)).is_err());
    }

    #[test]
    fn vq_identities() {
        let book = Codebook {
            k: 3,
            dim: 2,
            centroids: vec![0.0, 0.0, 5.0, 0.0, 0.0, 5.0],
        };
        let mut set = DescriptorSet::new(2);
        for c in 0..3 {
            set.push(book.centroid(c)).unwrap();
        }
        let hist = vq_encode(&book, &set).unwrap();
        for h in &hist {
            assert_abs_diff_eq!(*h, 1.0 / 3.0, epsilon = 1e-12);
        }

        let mut single = DescriptorSet::new(2);
        single.push(&[4.9, 0.1]).unwrap();
        let hist = vq_encode(&book, &single).unwrap();
        assert_eq!(hist, vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn descriptor_sampling_rules() {
        let sets = vec![gaussian_cloud(30, &[0.0], 1.0, 1), gaussian_cloud(20, &[5.0], 1.0, 2)];
        let all = sample_training_descriptors(&sets, 50, 7).unwrap();
        assert_eq!(all.len(), 50);
        let short = sample_training_descriptors(&sets, 100, 7).unwrap();
        assert_eq!(short.len(), 50);
        let a = sample_training_descriptors(&sets, 25, 13).unwrap();
        let b = sample_training_descriptors(&sets, 25, 13).unwrap();
        assert_eq!(a, b);
        assert!(sample_training_descriptors(&[], 10, 0).is_err());
    }
}
