//! Single-point LBP codes: raw codes, uniformity, uniform indexing with a
//! configurable start bit, rotation-invariant and riu2 codes, and whole-image
//! histograms.

use crate::error::{Result, TexError};
use crate::imgcore::GrayImage;

/// Circular sampling configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LbpConfig {
    pub neighbors: u32,
    pub radius: f64,
}

impl Default for LbpConfig {
    fn default() -> Self {
        Self {
            neighbors: 8,
            radius: 1.0,
        }
    }
}

impl LbpConfig {
    pub fn new(neighbors: u32, radius: f64) -> Result<Self> {
        if ![4, 8, 16, 24].contains(&neighbors) {
            return Err(TexError::InvalidArgument(format!(
                "neighbor count must be one of 4/8/16/24, got {neighbors}"
            )));
        }
        if radius <= 0.0 {
            return Err(TexError::InvalidArgument(format!(
                "radius must be positive, got {radius}"
            )));
        }
        Ok(Self { neighbors, radius })
    }

    /// Border margin inside which centers are skipped.
    pub fn margin(&self) -> usize {
        self.radius.ceil() as usize
    }
}

/// Histogram variant selector for [`lbp_histogram`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LbpVariant {
    Raw,
    Uniform,
    RotationInvariant,
    Riu2,
}

/// Circular right shift of a `bits`-bit code.
#[inline]
pub fn ror(code: u32, shift: u32, bits: u32) -> u32 {
    let shift = shift % bits;
    let mask = (1u32 << bits) - 1;
    ((code >> shift) | (code << (bits - shift))) & mask
}

/// Number of 0<->1 transitions in the circular bit sequence.
pub fn uniformity(code: u32, p: u32) -> u32 {
    let rotated = ror(code, 1, p);
    (code ^ rotated).count_ones()
}

/// Minimum over all circular right shifts.
pub fn ri_code(code: u32, p: u32) -> u32 {
    (0..p).map(|k| ror(code, k, p)).min().unwrap()
}

/// Smallest shift `k` such that `ror(code, k)` equals [`ri_code`].
pub fn min_rotation_index(code: u32, p: u32) -> u32 {
    let target = ri_code(code, p);
    (0..p).find(|&k| ror(code, k, p) == target).unwrap()
}

/// popcount for uniform codes, `p + 1` for the non-uniform bucket.
pub fn riu2_code(code: u32, p: u32) -> u32 {
    if uniformity(code, p) <= 2 {
        code.count_ones()
    } else {
        p + 1
    }
}

/// Total map from raw codes to uniform indices. Uniform codes rank in
/// ascending numeric order; all non-uniform codes share the bucket index
/// `uniform_count`.
#[derive(Debug, Clone)]
pub struct PatternIndexTable {
    p: u32,
    uniform_count: u32,
    map: Vec<u32>,
}

impl PatternIndexTable {
    pub fn new(p: u32) -> Self {
        let size = 1usize << p;
        let uniform: Vec<u32> = (0..size as u32).filter(|&c| uniformity(c, p) <= 2).collect();
        let uniform_count = uniform.len() as u32;
        let mut map = vec![uniform_count; size];
        for (rank, code) in uniform.iter().enumerate() {
            map[*code as usize] = rank as u32;
        }
        Self {
            p,
            uniform_count,
            map,
        }
    }

    #[inline]
    pub fn p(&self) -> u32 {
        self.p
    }

    /// Number of uniform codes (58 for P=8); also the bucket index.
    #[inline]
    pub fn uniform_count(&self) -> u32 {
        self.uniform_count
    }

    /// Histogram dimension for the uniform variant (59 for P=8).
    #[inline]
    pub fn dimension(&self) -> usize {
        self.uniform_count as usize + 1
    }

    #[inline]
    pub fn uniform_index(&self, code: u32) -> u32 {
        self.map[code as usize]
    }

    /// Uniform index after rotating the bit sequence so bit `start` becomes
    /// bit 0.
    #[inline]
    pub fn uniform_index_with_start(&self, code: u32, start: u32) -> u32 {
        self.uniform_index(ror(code, start, self.p))
    }
}

/// Precomputed neighbor displacements `(r*cos(2*pi*k/P), r*sin(2*pi*k/P))`
/// for a sampling configuration, so inner loops avoid per-pixel trig.
pub fn neighbor_offsets(cfg: &LbpConfig) -> Vec<(f64, f64)> {
    let (p, r) = (cfg.neighbors, cfg.radius);
    (0..p)
        .map(|k| {
            let angle = 2.0 * std::f64::consts::PI * k as f64 / p as f64;
            (r * angle.cos(), r * angle.sin())
        })
        .collect()
}

/// [`lbp_code`] with the neighbor displacements supplied by the caller
/// (from [`neighbor_offsets`]); bit-identical to computing them inline.
pub fn lbp_code_with_offsets(
    img: &GrayImage,
    x: f64,
    y: f64,
    cfg: &LbpConfig,
    offsets: &[(f64, f64)],
) -> Result<u32> {
    let r = cfg.radius;
    if x - r < 0.0
        || y - r < 0.0
        || x + r > (img.width() - 1) as f64
        || y + r > (img.height() - 1) as f64
    {
        return Err(TexError::InvalidArgument(format!(
            "sample circle at ({x}, {y}) radius {r} leaves image bounds"
        )));
    }
    let center = img.sample_bilinear(x, y);
    let mut code = 0u32;
    for (k, &(ox, oy)) in offsets.iter().enumerate() {
        if img.sample_bilinear(x + ox, y + oy) >= center {
            code |= 1 << k;
        }
    }
    Ok(code)
}

/// LBP code at (possibly fractional) center coordinates. Bit `k` is set iff
/// the bilinearly interpolated neighbor at angle `2*pi*k/P` is at least the
/// center value.
pub fn lbp_code(img: &GrayImage, x: f64, y: f64, cfg: &LbpConfig) -> Result<u32> {
    lbp_code_with_offsets(img, x, y, cfg, &neighbor_offsets(cfg))
}

/// L1-normalized code histogram over all valid centers.
pub fn lbp_histogram(
    img: &GrayImage,
    cfg: &LbpConfig,
    variant: LbpVariant,
    table: &PatternIndexTable,
) -> Result<Vec<f64>> {
    let margin = cfg.margin();
    if img.width() < 2 * margin + 1 || img.height() < 2 * margin + 1 {
        return Err(TexError::ImageTooSmall(format!(
            "{}x{} leaves no valid LBP centers at radius {}",
            img.width(),
            img.height(),
            cfg.radius
        )));
    }
    let p = cfg.neighbors;
    let dim = match variant {
        LbpVariant::Raw => 1usize << p,
        LbpVariant::Uniform => table.dimension(),
        LbpVariant::RotationInvariant => 1usize << p,
        LbpVariant::Riu2 => p as usize + 2,
    };
    let offsets = neighbor_offsets(cfg);
    let mut hist = vec![0.0; dim];
    let mut count = 0u64;
    for y in margin..img.height() - margin {
        for x in margin..img.width() - margin {
            let code = lbp_code_with_offsets(img, x as f64, y as f64, cfg, &offsets)?;
            let bin = match variant {
                LbpVariant::Raw => code,
                LbpVariant::Uniform => table.uniform_index(code),
                LbpVariant::RotationInvariant => ri_code(code, p),
                LbpVariant::Riu2 => riu2_code(code, p),
            };
            hist[bin as usize] += 1.0;
            count += 1;
        }
    }
    if count > 0 {
        for h in &mut hist {
            *h /= count as f64;
        }
    }
    Ok(hist)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn constant_image_gives_all_ones_code() {
        let img = GrayImage::constant(9, 9, 42.0);
        let cfg = LbpConfig::default();
        assert_eq!(lbp_code(&img, 4.0, 4.0, &cfg).unwrap(), 255);
    }

    #[test]
    fn bright_center_gives_zero_code() {
        let mut img = GrayImage::constant(9, 9, 10.0);
        img.set(4, 4, 200.0);
        let cfg = LbpConfig::default();
        assert_eq!(lbp_code(&img, 4.0, 4.0, &cfg).unwrap(), 0);
    }

    #[test]
    fn vertical_step_edge_neighbors() {
        // Left half 0, right half 255; center on the bright side adjacent to
        // the edge. The three neighbors sampled on the dark side contribute 0
        // bits; enumerating the 8 interpolated samples identifies them as
        // k = 3, 4, 5 (angles 3pi/4, pi, 5pi/4).
        let mut img = GrayImage::constant(10, 10, 0.0);
        for y in 0..10 {
            for x in 5..10 {
                img.set(x, y, 255.0);
            }
        }
        let cfg = LbpConfig::default();
        let code = lbp_code(&img, 5.0, 5.0, &cfg).unwrap();
        let expected = 0b1111_1111 & !(1 << 3) & !(1 << 4) & !(1 << 5);
        assert_eq!(code, expected);
    }

    #[test]
    fn out_of_bounds_center_errors() {
        let img = GrayImage::constant(5, 5, 0.0);
        let cfg = LbpConfig::default();
        assert!(lbp_code(&img, 0.0, 2.0, &cfg).is_err());
    }

    #[test]
    fn uniformity_matches_paper_examples() {
        // Bit strings written MSB-first as in the text.
        assert_eq!(uniformity(0b1100_0000, 8), 2);
        assert_eq!(uniformity(0b1000_0001, 8), 2);
        assert_eq!(uniformity(0b1010_1100, 8), 6);
        assert_eq!(uniformity(0, 8), 0);
        assert_eq!(uniformity(255, 8), 0);
    }

    #[test]
    fn uniform_table_counts() {
        let t = PatternIndexTable::new(8);
        assert_eq!(t.uniform_count(), 58);
        assert_eq!(t.dimension(), 59);
        assert_eq!(t.uniform_index(0), 0);
        // Every U=4 code lands in the bucket.
        for c in 0..256u32 {
            if uniformity(c, 8) == 4 {
                assert_eq!(t.uniform_index(c), 58);
            }
        }
        let distinct: std::collections::HashSet<u32> =
            (0..256u32).map(|c| t.uniform_index(c)).filter(|&i| i != 58).collect();
        assert_eq!(distinct.len(), 58);
    }

    #[test]
    fn start_bit_rotation_composes() {
        let t = PatternIndexTable::new(8);
        for code in [0b0000_1000u32, 0b0110_0000, 0b0000_0001] {
            assert_eq!(t.uniform_index_with_start(code, 0), t.uniform_index(code));
            for j in 0..8 {
                // Rotate left by j; reading from start bit j recovers the
                // original pattern.
                let rotated = ror(code, 8 - j, 8);
                assert_eq!(
                    t.uniform_index_with_start(rotated, j),
                    t.uniform_index(code)
                );
            }
        }
        // Same uniformity, different indices when read from the set bit.
        let code = 0b0000_1000u32;
        let start = 3;
        assert_ne!(
            t.uniform_index_with_start(code, start),
            t.uniform_index(code)
        );
        assert_eq!(uniformity(ror(code, start, 8), 8), uniformity(code, 8));
    }

    #[test]
    fn ri_code_examples() {
        assert_eq!(ri_code(0b1000_0000, 8), 1);
        assert_eq!(ri_code(255, 8), 255);
    }

    #[test]
    fn riu2_has_ten_values_for_p8() {
        let distinct: std::collections::HashSet<u32> = (0..256).map(|c| riu2_code(c, 8)).collect();
        assert_eq!(distinct.len(), 10);
        assert_eq!(riu2_code(0, 8), 0);
        assert_eq!(riu2_code(255, 8), 8);
        for c in 0..256u32 {
            if uniformity(c, 8) == 4 {
                assert_eq!(riu2_code(c, 8), 9);
            }
        }
    }

    #[test]
    fn uniform_group_sizes_sum_to_58() {
        // Orbit sizes of the uniform patterns under rotation, grouped by
        // popcount: {1, 8, 8, 8, 8, 8, 8, 8, 1}.
        let mut sizes = [0u32; 9];
        for c in 0..256u32 {
            if uniformity(c, 8) <= 2 {
                sizes[c.count_ones() as usize] += 1;
            }
        }
        assert_eq!(sizes, [1, 8, 8, 8, 8, 8, 8, 8, 1]);
        assert_eq!(sizes.iter().sum::<u32>(), 58);
    }

    #[test]
    fn constant_image_riu2_histogram() {
        let img = GrayImage::constant(16, 16, 7.0);
        let cfg = LbpConfig::default();
        let t = PatternIndexTable::new(8);
        let hist = lbp_histogram(&img, &cfg, LbpVariant::Riu2, &t).unwrap();
        assert_eq!(hist.len(), 10);
        assert!((hist[8] - 1.0).abs() < 1e-12);
        assert!((hist.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tiny_image_errors() {
        let img = GrayImage::constant(2, 2, 0.0);
        let cfg = LbpConfig::default();
        let t = PatternIndexTable::new(8);
        assert!(lbp_histogram(&img, &cfg, LbpVariant::Riu2, &t).is_err());
    }

    proptest! {
        #[test]
        fn rotation_orbit_invariance(code in 0u32..256, k in 0u32..8) {
            let rotated = ror(code, k, 8);
            prop_assert_eq!(riu2_code(rotated, 8), riu2_code(code, 8));
            prop_assert_eq!(ri_code(rotated, 8), ri_code(code, 8));
            prop_assert_eq!(uniformity(rotated, 8), uniformity(code, 8));
        }

        #[test]
        fn min_rotation_reaches_canonical(code in 0u32..256) {
            let k = min_rotation_index(code, 8);
            prop_assert_eq!(ror(code, k, 8), ri_code(code, 8));
        }
    }
}
