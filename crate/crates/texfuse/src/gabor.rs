//! Gabor filter bank and the multi-resolution co-occurrence descriptor built
//! on top of it.

use crate::error::{Result, TexError};
use crate::imgcore::{normalize_to_255, GrayImage};
use crate::lbp::{LbpConfig, PatternIndexTable};
use crate::pricolbp::{pricolbp_descriptor, TemplateSet, BINS_PER_TEMPLATE};

/// Bank parameterization. Wavelength grows linearly with scale
/// (`lambda = wavelength_per_scale * scale`), sigma follows the one-octave
/// bandwidth relation `sigma = sigma_per_lambda * lambda`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaborBankConfig {
    pub scales: Vec<u32>,
    pub orientation: f64,
    pub wavelength_per_scale: f64,
    pub sigma_per_lambda: f64,
    pub aspect: f64,
    pub phase: f64,
}

impl Default for GaborBankConfig {
    fn default() -> Self {
        Self {
            scales: (1..=7).collect(),
            orientation: 0.0,
            wavelength_per_scale: 4.0,
            sigma_per_lambda: 0.56,
            aspect: 0.5,
            phase: 0.0,
        }
    }
}

impl GaborBankConfig {
    /// Smaller bank for quick runs: scales {1, 2, 3}.
    pub fn desk_scale() -> Self {
        Self {
            scales: vec![1, 2, 3],
            ..Self::default()
        }
    }
}

/// Real part of the complex Gabor kernel at the given scale, zero-DC and
/// L1-normalized.
pub fn gabor_kernel(scale: u32, cfg: &GaborBankConfig) -> Result<Kernel> {
    if !cfg.scales.contains(&scale) {
        return Err(TexError::InvalidArgument(format!(
            "scale {scale} not in configured bank {:?}",
            cfg.scales
        )));
    }
    let lambda = cfg.wavelength_per_scale * scale as f64;
    let sigma = cfg.sigma_per_lambda * lambda;
    let gamma = cfg.aspect;
    let half = (3.0 * sigma).ceil() as isize;
    let size = (2 * half + 1) as usize;
    let mut data = vec![0.0; size * size];
    let (c, s) = (cfg.orientation.cos(), cfg.orientation.sin());
    for y in -half..=half {
        for x in -half..=half {
            let xf = x as f64;
            let yf = y as f64;
            let xp = xf * c + yf * s;
            let yp = -xf * s + yf * c;
            let envelope = (-(xp * xp + gamma * gamma * yp * yp) / (2.0 * sigma * sigma)).exp();
            let carrier = (2.0 * std::f64::consts::PI * xp / lambda + cfg.phase).cos();
            data[(y + half) as usize * size + (x + half) as usize] = envelope * carrier;
        }
    }
    // Zero-DC then L1 normalization.
    let mean = data.iter().sum::<f64>() / data.len() as f64;
    for v in &mut data {
        *v -= mean;
    }
    let l1: f64 = data.iter().map(|v| v.abs()).sum();
    if l1 > 0.0 {
        for v in &mut data {
            *v /= l1;
        }
    }

    // At orientation 0 the raw kernel factors as col(y) * row(x); keep the
    // factors so convolution can run in O(n * k) instead of O(n * k^2).
    let separable = if cfg.orientation == 0.0 && l1 > 0.0 {
        let mut row = Vec::with_capacity(size);
        let mut col = Vec::with_capacity(size);
        for i in -half..=half {
            let v = i as f64;
            row.push(
                (-v * v / (2.0 * sigma * sigma)).exp()
                    * (2.0 * std::f64::consts::PI * v / lambda + cfg.phase).cos(),
            );
            col.push((-gamma * gamma * v * v / (2.0 * sigma * sigma)).exp());
        }
        Some(SeparableParts {
            row,
            col,
            mean,
            l1,
        })
    } else {
        None
    };
    Ok(Kernel {
        size,
        data,
        separable,
    })
}

/// Rank-1 factorization of the raw (pre-normalization) kernel, plus the
/// zero-DC/L1 constants needed to reproduce the normalized response.
#[derive(Debug, Clone)]
pub struct SeparableParts {
    row: Vec<f64>,
    col: Vec<f64>,
    mean: f64,
    l1: f64,
}

/// Square convolution kernel.
#[derive(Debug, Clone)]
pub struct Kernel {
    pub size: usize,
    pub data: Vec<f64>,
    pub separable: Option<SeparableParts>,
}

impl Kernel {
    #[inline]
    pub fn half(&self) -> isize {
        (self.size / 2) as isize
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.size + j]
    }
}

/// Same-size correlation with edge-replicated borders. The raw signed
/// response is returned; use [`convolve_normalized`] to remap onto [0, 255]
/// before code extraction.
pub fn convolve(img: &GrayImage, kernel: &Kernel) -> Result<GrayImage> {
    if kernel.size > img.width() || kernel.size > img.height() {
        return Err(TexError::InvalidArgument(format!(
            "kernel size {} exceeds image {}x{}",
            kernel.size,
            img.width(),
            img.height()
        )));
    }
    if let Some(sep) = &kernel.separable {
        return convolve_separable(img, kernel, sep);
    }
    let half = kernel.half();
    let (w, h) = (img.width(), img.height());
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for ky in 0..kernel.size {
                for kx in 0..kernel.size {
                    let sx = x as isize + kx as isize - half;
                    let sy = y as isize + ky as isize - half;
                    acc += kernel.get(ky, kx) * img.get_clamped(sx, sy);
                }
            }
            out[y * w + x] = acc;
        }
    }
    GrayImage::new(w, h, out)
}

fn conv_1d_pass(img: &GrayImage, taps: &[f64], horizontal: bool) -> GrayImage {
    let half = (taps.len() / 2) as isize;
    let (w, h) = (img.width(), img.height());
    let src = img.data();
    let mut out = vec![0.0; w * h];
    if horizontal {
        let interior = half as usize..w.saturating_sub(half as usize);
        for y in 0..h {
            let row = &src[y * w..(y + 1) * w];
            let orow = &mut out[y * w..(y + 1) * w];
            for (x, o) in orow.iter_mut().enumerate() {
                let mut acc = 0.0;
                if interior.contains(&x) {
                    let base = x - half as usize;
                    for (i, t) in taps.iter().enumerate() {
                        acc += t * row[base + i];
                    }
                } else {
                    for (i, t) in taps.iter().enumerate() {
                        let sx = (x as isize + i as isize - half).clamp(0, w as isize - 1);
                        acc += t * row[sx as usize];
                    }
                }
                *o = acc;
            }
        }
    } else {
        // Accumulate tap-by-tap over whole rows; same per-pixel addition
        // order as the scalar loop, but with contiguous access.
        for y in 0..h {
            let orow = &mut out[y * w..(y + 1) * w];
            for (i, t) in taps.iter().enumerate() {
                let sy = (y as isize + i as isize - half).clamp(0, h as isize - 1) as usize;
                let srow = &src[sy * w..(sy + 1) * w];
                for (o, s) in orow.iter_mut().zip(srow) {
                    *o += t * s;
                }
            }
        }
    }
    GrayImage::new(w, h, out).expect("dims preserved")
}

fn convolve_separable(img: &GrayImage, kernel: &Kernel, sep: &SeparableParts) -> Result<GrayImage> {
    // Normalized response = (col x row response - mean * box response) / l1,
    // tap-for-tap identical to the dense kernel.
    let main = conv_1d_pass(&conv_1d_pass(img, &sep.row, true), &sep.col, false);
    let ones = vec![1.0; kernel.size];
    let boxed = conv_1d_pass(&conv_1d_pass(img, &ones, true), &ones, false);
    let (w, h) = (img.width(), img.height());
    let data: Vec<f64> = main
        .data()
        .iter()
        .zip(boxed.data())
        .map(|(m, b)| (m - sep.mean * b) / sep.l1)
        .collect();
    GrayImage::new(w, h, data)
}

/// Correlation followed by the affine remap onto [0, 255]. Code extraction is
/// invariant to monotone maps, so the remap only standardizes numeric range.
pub fn convolve_normalized(img: &GrayImage, kernel: &Kernel) -> Result<GrayImage> {
    Ok(normalize_to_255(&convolve(img, kernel)?))
}

/// Co-occurrence descriptor of the original image followed by each filtered
/// map, concatenated in scale order. Each block is independently
/// L1-normalized; total dimension `(1 + |scales|) * |templates| * 590`.
pub fn pricolgbp(
    img: &GrayImage,
    lbp_cfg: &LbpConfig,
    templates: &TemplateSet,
    bank: &GaborBankConfig,
    table: &PatternIndexTable,
) -> Result<Vec<f64>> {
    let block = templates.len() * BINS_PER_TEMPLATE;
    let mut out = Vec::with_capacity((1 + bank.scales.len()) * block);
    out.extend(pricolbp_descriptor(img, lbp_cfg, templates, table)?);
    for &scale in &bank.scales {
        let kernel = gabor_kernel(scale, bank)?;
        let filtered = convolve_normalized(img, &kernel)?;
        out.extend(pricolbp_descriptor(&filtered, lbp_cfg, templates, table)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn kernel_is_zero_dc() {
        let cfg = GaborBankConfig::default();
        for scale in [1, 4, 7] {
            let k = gabor_kernel(scale, &cfg).unwrap();
            assert_abs_diff_eq!(k.data.iter().sum::<f64>(), 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn kernel_symmetric_under_y_flip_at_orientation_zero() {
        let cfg = GaborBankConfig::default();
        let k = gabor_kernel(2, &cfg).unwrap();
        for i in 0..k.size {
            for j in 0..k.size {
                assert_abs_diff_eq!(k.get(i, j), k.get(k.size - 1 - i, j), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn kernel_rejects_unknown_scale() {
        let cfg = GaborBankConfig::desk_scale();
        assert!(gabor_kernel(7, &cfg).is_err());
    }

    #[test]
    fn constant_image_yields_zero_response() {
        let cfg = GaborBankConfig::default();
        let k = gabor_kernel(1, &cfg).unwrap();
        let img = GrayImage::constant(40, 40, 123.0);
        let resp = convolve(&img, &k).unwrap();
        for v in resp.data() {
            assert_abs_diff_eq!(*v, 0.0, epsilon = 1e-6);
        }
    }

    #[test]
    fn delta_kernel_is_identity() {
        let k = Kernel {
            size: 1,
            data: vec![1.0],
            separable: None,
        };
        let data: Vec<f64> = (0..25).map(|i| i as f64).collect();
        let img = GrayImage::new(5, 5, data).unwrap();
        let resp = convolve(&img, &k).unwrap();
        assert_eq!(resp, img);
    }

    #[test]
    fn zero_kernel_normalizes_to_constant_zero() {
        let k = Kernel {
            size: 3,
            data: vec![0.0; 9],
            separable: None,
        };
        let data: Vec<f64> = (0..25).map(|i| i as f64).collect();
        let img = GrayImage::new(5, 5, data).unwrap();
        let resp = convolve_normalized(&img, &k).unwrap();
        assert!(resp.data().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn box_kernel_on_impulse_gives_plateau() {
        let k = Kernel {
            size: 3,
            data: vec![1.0; 9],
            separable: None,
        };
        let mut img = GrayImage::constant(7, 7, 0.0);
        img.set(3, 3, 1.0);
        let resp = convolve(&img, &k).unwrap();
        for y in 0..7 {
            for x in 0..7 {
                let expected = if (2..=4).contains(&x) && (2..=4).contains(&y) {
                    1.0
                } else {
                    0.0
                };
                assert_abs_diff_eq!(resp.get(x, y), expected, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn kernel_larger_than_image_errors() {
        let cfg = GaborBankConfig::default();
        let k = gabor_kernel(7, &cfg).unwrap();
        let img = GrayImage::constant(10, 10, 0.0);
        assert!(convolve(&img, &k).is_err());
    }

    #[test]
    fn response_invariant_to_additive_shift() {
        let cfg = GaborBankConfig::default();
        let k = gabor_kernel(1, &cfg).unwrap();
        let data: Vec<f64> = (0..32 * 32).map(|i| ((i * 37) % 199) as f64).collect();
        let img = GrayImage::new(32, 32, data.clone()).unwrap();
        let shifted =
            GrayImage::new(32, 32, data.iter().map(|v| v + 40.0).collect()).unwrap();
        let a = convolve(&img, &k).unwrap();
        let b = convolve(&shifted, &k).unwrap();
        for (x, y) in a.data().iter().zip(b.data()) {
            assert_abs_diff_eq!(*x, *y, epsilon = 1e-6);
        }
    }

    #[test]
    fn separable_path_matches_dense_kernel() {
        let cfg = GaborBankConfig::default();
        let mut k = gabor_kernel(1, &cfg).unwrap();
        assert!(k.separable.is_some());
        let data: Vec<f64> = (0..24 * 30).map(|i| ((i * 31) % 211) as f64).collect();
        let img = GrayImage::new(24, 30, data).unwrap();
        let fast = convolve(&img, &k).unwrap();
        k.separable = None;
        let dense = convolve(&img, &k).unwrap();
        for (a, b) in fast.data().iter().zip(dense.data()) {
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-9);
        }
    }

    #[test]
    fn pricolgbp_dimension_formula() {
        let data: Vec<f64> = (0..40 * 40).map(|i| ((i * 53) % 229) as f64).collect();
        let img = GrayImage::new(40, 40, data).unwrap();
        let lbp_cfg = LbpConfig::default();
        let table = PatternIndexTable::new(8);
        let one = TemplateSet::new(vec![(2.0, 0.0)]).unwrap();
        let bank2 = GaborBankConfig {
            scales: vec![1, 2],
            ..GaborBankConfig::default()
        };
        let d = pricolgbp(&img, &lbp_cfg, &one, &bank2, &table).unwrap();
        assert_eq!(d.len(), 3 * 590);

        let empty = GaborBankConfig {
            scales: vec![],
            ..GaborBankConfig::default()
        };
        let d0 = pricolgbp(&img, &lbp_cfg, &one, &empty, &table).unwrap();
        let plain = pricolbp_descriptor(&img, &lbp_cfg, &one, &table).unwrap();
        assert_eq!(d0, plain);
    }
}
