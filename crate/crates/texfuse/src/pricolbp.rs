//! Pairwise rotation-invariant co-occurrence LBP: gradient fields,
//! template-driven co-point placement, pairwise encoding and the weighted
//! multi-template descriptor.

use crate::error::{Result, TexError};
use crate::imgcore::GrayImage;
use crate::lbp::{
    lbp_code_with_offsets, min_rotation_index, neighbor_offsets, riu2_code, LbpConfig,
    PatternIndexTable,
};

/// Gradient magnitude below which a pixel's orientation is considered
/// undefined and the pair is skipped.
pub const GRADIENT_EPSILON: f64 = 1e-6;

/// Per-pixel gradients of an image: components, magnitude and orientation.
#[derive(Debug, Clone)]
pub struct GradientField {
    pub width: usize,
    pub height: usize,
    pub dx: Vec<f64>,
    pub dy: Vec<f64>,
    pub magnitude: Vec<f64>,
    pub orientation: Vec<f64>,
}

impl GradientField {
    #[inline]
    fn idx(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    #[inline]
    pub fn magnitude_at(&self, x: usize, y: usize) -> f64 {
        self.magnitude[self.idx(x, y)]
    }

    #[inline]
    pub fn orientation_at(&self, x: usize, y: usize) -> f64 {
        self.orientation[self.idx(x, y)]
    }
}

/// Central differences in the interior, one-sided at the borders; orientation
/// via `atan2`, which resolves the arctan quadrant ambiguity.
pub fn gradient_field(img: &GrayImage) -> Result<GradientField> {
    let (w, h) = (img.width(), img.height());
    if w < 3 || h < 3 {
        return Err(TexError::ImageTooSmall(format!(
            "{w}x{h} is too small for gradients (need at least 3x3)"
        )));
    }
    let n = w * h;
    let mut dx = vec![0.0; n];
    let mut dy = vec![0.0; n];
    let mut magnitude = vec![0.0; n];
    let mut orientation = vec![0.0; n];
    for y in 0..h {
        for x in 0..w {
            let gx = if x == 0 {
                img.get(1, y) - img.get(0, y)
            } else if x == w - 1 {
                img.get(w - 1, y) - img.get(w - 2, y)
            } else {
                (img.get(x + 1, y) - img.get(x - 1, y)) / 2.0
            };
            let gy = if y == 0 {
                img.get(x, 1) - img.get(x, 0)
            } else if y == h - 1 {
                img.get(x, h - 1) - img.get(x, h - 2)
            } else {
                (img.get(x, y + 1) - img.get(x, y - 1)) / 2.0
            };
            let i = y * w + x;
            dx[i] = gx;
            dy[i] = gy;
            magnitude[i] = (gx * gx + gy * gy).sqrt();
            orientation[i] = gy.atan2(gx);
        }
    }
    Ok(GradientField {
        width: w,
        height: h,
        dx,
        dy,
        magnitude,
        orientation,
    })
}

/// A template coefficient pair (a, b) placing the co-point along the gradient
/// frame of the reference pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct TemplateSet {
    pairs: Vec<(f64, f64)>,
}

impl TemplateSet {
    pub fn new(pairs: Vec<(f64, f64)>) -> Result<Self> {
        if pairs.is_empty() {
            return Err(TexError::InvalidArgument("empty template set".into()));
        }
        if pairs.iter().any(|(a, b)| !a.is_finite() || !b.is_finite()) {
            return Err(TexError::InvalidArgument(
                "template coefficients must be finite".into(),
            ));
        }
        Ok(Self { pairs })
    }

    /// Ten pairs spanning both axes and diagonals at two reaches.
    pub fn ten_templates() -> Self {
        Self::new(vec![
            (2.0, 0.0),
            (0.0, 2.0),
            (-2.0, 0.0),
            (0.0, -2.0),
            (2.0, 2.0),
            (-2.0, 2.0),
            (-2.0, -2.0),
            (2.0, -2.0),
            (4.0, 0.0),
            (0.0, 4.0),
        ])
        .expect("non-empty")
    }

    /// The 2-template preset.
    pub fn two_templates() -> Self {
        Self::new(vec![(2.0, 0.0), (0.0, 2.0)]).expect("non-empty")
    }

    #[inline]
    pub fn pairs(&self) -> &[(f64, f64)] {
        &self.pairs
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Largest reach of any template, used for the validity margin.
    pub fn max_reach(&self) -> f64 {
        self.pairs
            .iter()
            .map(|(a, b)| (a * a + b * b).sqrt())
            .fold(0.0, f64::max)
    }
}

/// Co-point placement `B = A + a*grad + b*normal` in continuous coordinates.
/// The caller rounds before sampling.
#[inline]
pub fn co_point(
    a_point: (f64, f64),
    grad_dir: (f64, f64),
    normal_dir: (f64, f64),
    a: f64,
    b: f64,
) -> (f64, f64) {
    (
        a_point.0 + a * grad_dir.0 + b * normal_dir.0,
        a_point.1 + a * grad_dir.1 + b * normal_dir.1,
    )
}

/// Bins per template at P=8: 10 riu2 values x 59 uniform indices.
pub const BINS_PER_TEMPLATE: usize = 590;

/// Gradient-magnitude-weighted co-occurrence descriptor; one 590-bin block per
/// template, L1-normalized over the concatenation.
pub fn pricolbp_descriptor(
    img: &GrayImage,
    cfg: &LbpConfig,
    templates: &TemplateSet,
    table: &PatternIndexTable,
) -> Result<Vec<f64>> {
    let p = cfg.neighbors;
    let riu2_dim = p as usize + 2;
    let uniform_dim = table.dimension();
    let block = riu2_dim * uniform_dim;
    let margin = cfg.margin();
    let reach = templates.max_reach().ceil() as usize;
    let needed = 2 * (margin + reach) + 3;
    if img.width() < needed || img.height() < needed {
        return Err(TexError::ImageTooSmall(format!(
            "{}x{} is too small for templates reaching {reach} px",
            img.width(),
            img.height()
        )));
    }

    let grad = gradient_field(img)?;
    let offsets = neighbor_offsets(cfg);
    let mut desc = vec![0.0; block * templates.len()];
    let (w, h) = (img.width(), img.height());
    let max_x = (w - 1 - margin) as f64;
    let max_y = (h - 1 - margin) as f64;
    for y in margin..h - margin {
        for x in margin..w - margin {
            let mag_a = grad.magnitude_at(x, y);
            if mag_a < GRADIENT_EPSILON {
                continue;
            }
            let theta = grad.orientation_at(x, y);
            let g = (theta.cos(), theta.sin());
            // Normal = gradient rotated +90 degrees.
            let n = (-g.1, g.0);
            let code_a = lbp_code_with_offsets(img, x as f64, y as f64, cfg, &offsets)?;
            let bin_a = riu2_code(code_a, p) as usize;
            let start = min_rotation_index(code_a, p);
            for (t, &(a, b)) in templates.pairs().iter().enumerate() {
                let (bx, by) = co_point((x as f64, y as f64), g, n, a, b);
                let bx = bx.round();
                let by = by.round();
                if bx < margin as f64 || by < margin as f64 || bx > max_x || by > max_y {
                    continue;
                }
                let code_b = lbp_code_with_offsets(img, bx, by, cfg, &offsets)?;
                let bin_b = table.uniform_index_with_start(code_b, start) as usize;
                let mag_b = grad.magnitude[by as usize * w + bx as usize];
                desc[t * block + bin_a * uniform_dim + bin_b] += mag_a + mag_b;
            }
        }
    }
    let total: f64 = desc.iter().sum();
    if total > 0.0 {
        for v in &mut desc {
            *v /= total;
        }
    }
    Ok(desc)
}
