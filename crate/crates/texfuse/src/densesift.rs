//! Dense multi-scale sampling of large patches and RootSIFT descriptor
//! extraction.

use crate::error::{Result, TexError};
use crate::imgcore::{gaussian_smooth, resize_min_side, GrayImage};

pub const SIFT_DIM: usize = 128;
const SPATIAL_BINS: usize = 4;
const ORIENTATION_BINS: usize = 8;
const CLAMP: f64 = 0.2;

/// Dense grid configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchGridConfig {
    pub patch_size: usize,
    pub step: usize,
    pub scale_sigmas: Vec<f64>,
    pub min_side: usize,
}

impl Default for PatchGridConfig {
    fn default() -> Self {
        Self {
            patch_size: 41,
            step: 2,
            scale_sigmas: (1..=6).map(|i| 1.5f64.powi(i)).collect(),
            min_side: 64,
        }
    }
}

impl PatchGridConfig {
    pub fn validate(&self) -> Result<()> {
        if self.patch_size < 16 {
            return Err(TexError::InvalidArgument(format!(
                "patch_size must be at least 16, got {}",
                self.patch_size
            )));
        }
        if self.step == 0 {
            return Err(TexError::InvalidArgument("step must be at least 1".into()));
        }
        if self.scale_sigmas.is_empty() {
            return Err(TexError::InvalidArgument("scale_sigmas is empty".into()));
        }
        if self
            .scale_sigmas
            .windows(2)
            .any(|w| w[0] >= w[1] || w[0] <= 0.0)
        {
            return Err(TexError::InvalidArgument(
                "scale_sigmas must be positive and strictly ascending".into(),
            ));
        }
        Ok(())
    }
}

/// Batch of fixed-dimension descriptors, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorSet {
    pub dim: usize,
    pub data: Vec<f64>,
}

impl DescriptorSet {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            data: Vec::new(),
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map(|r| r.len()).unwrap_or(0);
        let mut set = Self::new(dim);
        for row in rows {
            set.push(row)?;
        }
        Ok(set)
    }

    pub fn push(&mut self, row: &[f64]) -> Result<()> {
        if row.len() != self.dim {
            return Err(TexError::DimensionMismatch {
                expected: self.dim,
                got: row.len(),
            });
        }
        self.data.extend_from_slice(row);
        Ok(())
    }

    #[inline]
    pub fn len(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.data.len() / self.dim
        }
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim.max(1))
    }
}

/// Top-left coordinates of all fully in-bounds patches on the dense grid.
pub fn sample_grid(width: usize, height: usize, cfg: &PatchGridConfig) -> Result<Vec<(usize, usize)>> {
    cfg.validate()?;
    if width < cfg.patch_size || height < cfg.patch_size {
        return Err(TexError::ImageTooSmall(format!(
            "{width}x{height} cannot hold a {} px patch",
            cfg.patch_size
        )));
    }
    let nx = (width - cfg.patch_size) / cfg.step + 1;
    let ny = (height - cfg.patch_size) / cfg.step + 1;
    let mut out = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            out.push((i * cfg.step, j * cfg.step));
        }
    }
    Ok(out)
}

/// 128-entry SIFT descriptor over one patch: 4x4 spatial bins x 8 orientation
/// bins, Gaussian spatial weighting (sigma = patch/2), trilinear soft
/// assignment, L2 normalization with 0.2 clamping and renormalization.
/// A zero-gradient patch yields the all-zero vector.
pub fn sift_descriptor(
    img: &GrayImage,
    top_left: (usize, usize),
    patch_size: usize,
) -> Result<Vec<f64>> {
    let (px, py) = top_left;
    if px + patch_size > img.width() || py + patch_size > img.height() {
        return Err(TexError::InvalidArgument(format!(
            "patch at ({px}, {py}) size {patch_size} exceeds image bounds"
        )));
    }
    let mut hist = vec![0.0f64; SIFT_DIM];
    let center = (patch_size as f64 - 1.0) / 2.0;
    let sigma = patch_size as f64 / 2.0;
    let bin_width = patch_size as f64 / SPATIAL_BINS as f64;
    let two_pi = 2.0 * std::f64::consts::PI;

    for v in 0..patch_size {
        for u in 0..patch_size {
            let x = (px + u) as isize;
            let y = (py + v) as isize;
            let gx = (img.get_clamped(x + 1, y) - img.get_clamped(x - 1, y)) / 2.0;
            let gy = (img.get_clamped(x, y + 1) - img.get_clamped(x, y - 1)) / 2.0;
            let mag = (gx * gx + gy * gy).sqrt();
            if mag == 0.0 {
                continue;
            }
            let du = u as f64 - center;
            let dv = v as f64 - center;
            let weight = mag * (-(du * du + dv * dv) / (2.0 * sigma * sigma)).exp();

            let theta = gy.atan2(gx).rem_euclid(two_pi);
            let obin = theta / two_pi * ORIENTATION_BINS as f64;
            let xbin = (u as f64 + 0.5) / bin_width - 0.5;
            let ybin = (v as f64 + 0.5) / bin_width - 0.5;

            let x0 = xbin.floor();
            let y0 = ybin.floor();
            let o0 = obin.floor();
            let fx = xbin - x0;
            let fy = ybin - y0;
            let fo = obin - o0;
            for (dy, wy) in [(0isize, 1.0 - fy), (1, fy)] {
                let ry = y0 as isize + dy;
                if !(0..SPATIAL_BINS as isize).contains(&ry) || wy == 0.0 {
                    continue;
                }
                for (dx, wx) in [(0isize, 1.0 - fx), (1, fx)] {
                    let rx = x0 as isize + dx;
                    if !(0..SPATIAL_BINS as isize).contains(&rx) || wx == 0.0 {
                        continue;
                    }
                    for (doo, wo) in [(0isize, 1.0 - fo), (1, fo)] {
                        let ro = (o0 as isize + doo).rem_euclid(ORIENTATION_BINS as isize);
                        let idx = (ry as usize * SPATIAL_BINS + rx as usize) * ORIENTATION_BINS
                            + ro as usize;
                        hist[idx] += weight * wy * wx * wo;
                    }
                }
            }
        }
    }

    let norm = hist.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Ok(hist);
    }
    for h in &mut hist {
        *h = (*h / norm).min(CLAMP);
    }
    let norm2 = hist.iter().map(|v| v * v).sum::<f64>().sqrt();
    for h in &mut hist {
        *h /= norm2;
    }
    Ok(hist)
}

/// L1-normalize then take the entrywise square root; the result has unit L2
/// norm for any nonzero non-negative input.
pub fn root_sift(desc: &[f64]) -> Result<Vec<f64>> {
    if desc.iter().any(|v| *v < 0.0) {
        return Err(TexError::InvalidArgument(
            "RootSIFT requires non-negative entries".into(),
        ));
    }
    let l1: f64 = desc.iter().sum();
    if l1 == 0.0 {
        return Ok(desc.to_vec());
    }
    Ok(desc.iter().map(|v| (v / l1).sqrt()).collect())
}

/// Multi-scale dense RootSIFT extraction: resize to the minimum side, smooth
/// at each sigma, sample the dense grid and emit RootSIFT rows. Zero
/// descriptors carry no gradient evidence and are dropped.
pub fn extract_image_rootsifts(img: &GrayImage, cfg: &PatchGridConfig) -> Result<DescriptorSet> {
    cfg.validate()?;
    let resized = resize_min_side(img, cfg.min_side);
    let mut set = DescriptorSet::new(SIFT_DIM);
    for &sigma in &cfg.scale_sigmas {
        let smoothed = gaussian_smooth(&resized, sigma)?;
        let grid = sample_grid(smoothed.width(), smoothed.height(), cfg)?;
        for pos in grid {
            let desc = sift_descriptor(&smoothed, pos, cfg.patch_size)?;
            if desc.iter().all(|v| *v == 0.0) {
                continue;
            }
            set.push(&root_sift(&desc)?)?;
        }
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn grid_counts_match_formula() {
        let cfg = PatchGridConfig::default();
        assert_eq!(sample_grid(70, 70, &cfg).unwrap().len(), 225);
        assert_eq!(sample_grid(70, 80, &cfg).unwrap().len(), 300);
        let single = PatchGridConfig {
            patch_size: 41,
            step: 2,
            scale_sigmas: vec![1.5],
            min_side: 41,
        };
        assert_eq!(sample_grid(41, 41, &single).unwrap().len(), 1);
        assert!(sample_grid(40, 41, &cfg).is_err());
    }

    #[test]
    fn constant_patch_gives_zero_descriptor() {
        let img = GrayImage::constant(48, 48, 7.0);
        let d = sift_descriptor(&img, (0, 0), 41).unwrap();
        assert!(d.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn nondegenerate_patch_is_normalized_and_clamped() {
        let data: Vec<f64> = (0..48 * 48)
            .map(|i| (((i * 7919) % 256) as f64))
            .collect();
        let img = GrayImage::new(48, 48, data).unwrap();
        let d = sift_descriptor(&img, (2, 3), 41).unwrap();
        let norm: f64 = d.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert_abs_diff_eq!(norm, 1.0, epsilon = 1e-6);
        assert!(d.iter().all(|v| (0.0..=CLAMP + 1e-9).contains(v)));
    }

    #[test]
    fn out_of_bounds_patch_errors() {
        let img = GrayImage::constant(40, 40, 0.0);
        assert!(sift_descriptor(&img, (5, 5), 41).is_err());
    }

    #[test]
    fn rotated_patch_permutes_bins() {
        // Rotate a square image via Irot(x, y) = I(y, N-1-x). A source pixel
        // (us, vs) lands at (N-1-vs, us), so spatial bins map as
        // (row, col) -> (col, 3-row); gradients map (gx, gy) -> (-gy, gx),
        // shifting the orientation bin by +2 (mod 8).
        let n = 40usize;
        let data: Vec<f64> = (0..n * n)
            .map(|i| {
                let x = (i % n) as f64;
                let y = (i / n) as f64;
                (x * 0.37).sin() * 60.0 + (y * 0.23).cos() * 40.0 + (x * y * 0.011).sin() * 30.0
                    + 128.0
            })
            .collect();
        let img = GrayImage::new(n, n, data).unwrap();
        let mut rot = GrayImage::constant(n, n, 0.0);
        for y in 0..n {
            for x in 0..n {
                rot.set(x, y, img.get(y, n - 1 - x));
            }
        }
        let orig = sift_descriptor(&img, (0, 0), n).unwrap();
        let rotated = sift_descriptor(&rot, (0, 0), n).unwrap();
        let mut expected = vec![0.0; SIFT_DIM];
        for row in 0..4 {
            for col in 0..4 {
                for o in 0..8 {
                    let src = (row * 4 + col) * 8 + o;
                    let dst = (col * 4 + (3 - row)) * 8 + (o + 2) % 8;
                    expected[dst] = orig[src];
                }
            }
        }
        let l2: f64 = rotated
            .iter()
            .zip(&expected)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        assert!(l2 < 0.05, "rotation permutation mismatch, L2 = {l2}");
    }

    #[test]
    fn root_sift_identities() {
        let c = 3.7;
        let out = root_sift(&vec![c; 128]).unwrap();
        for v in &out {
            assert_abs_diff_eq!(*v, 1.0 / 128f64.sqrt(), epsilon = 1e-12);
        }
        assert!(root_sift(&vec![0.0; 128]).unwrap().iter().all(|v| *v == 0.0));

        let input: Vec<f64> = (0..128).map(|i| (i % 7) as f64).collect();
        let out = root_sift(&input).unwrap();
        let l2: f64 = out.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert_abs_diff_eq!(l2, 1.0, epsilon = 1e-12);

        // Scale invariance.
        let scaled: Vec<f64> = input.iter().map(|v| v * 42.0).collect();
        let out2 = root_sift(&scaled).unwrap();
        for (a, b) in out.iter().zip(&out2) {
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-12);
        }

        assert!(root_sift(&[-1.0, 2.0]).is_err());
    }

    #[test]
    fn extraction_bounds_and_zero_rows() {
        let cfg = PatchGridConfig {
            scale_sigmas: vec![1.5, 2.25],
            ..PatchGridConfig::default()
        };
        let data: Vec<f64> = (0..70 * 70).map(|i| ((i * 131) % 251) as f64).collect();
        let img = GrayImage::new(70, 70, data).unwrap();
        let set = extract_image_rootsifts(&img, &cfg).unwrap();
        assert!(set.len() <= 2 * 225);
        assert!(set.len() > 0);
        for row in set.rows() {
            let l2: f64 = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert_abs_diff_eq!(l2, 1.0, epsilon = 1e-9);
        }

        let flat = GrayImage::constant(70, 70, 9.0);
        let set = extract_image_rootsifts(&flat, &cfg).unwrap();
        assert_eq!(set.len(), 0);
    }
}
