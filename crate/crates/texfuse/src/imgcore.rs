//! Image representation, PGM/PPM decoding, smoothing, resizing and the
//! logarithmic enhancement preprocessor.
//!
//! Intensities are kept as real values in [0, 255] so that thresholding
//! descriptors operate on the raw value scale.

use std::fs;
use std::path::Path;

use crate::error::{Result, TexError};

/// Single-channel raster with row-major `f64` intensities in [0, 255].
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(TexError::InvalidArgument(
                "image dimensions must be at least 1x1".into(),
            ));
        }
        if data.len() != width * height {
            return Err(TexError::DimensionMismatch {
                expected: width * height,
                got: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(TexError::InvalidArgument("non-finite pixel value".into()));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn constant(width: usize, height: usize, value: f64) -> Self {
        Self::new(width, height, vec![value; width * height]).expect("valid dims")
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        debug_assert!(x < self.width && y < self.height);
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[y * self.width + x] = v;
    }

    /// Bilinear sample at real coordinates. The caller guarantees the point
    /// lies within `[0, width-1] x [0, height-1]`.
    pub fn sample_bilinear(&self, x: f64, y: f64) -> f64 {
        let x0 = x.floor().max(0.0) as usize;
        let y0 = y.floor().max(0.0) as usize;
        let x0 = x0.min(self.width - 1);
        let y0 = y0.min(self.height - 1);
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = (x - x0 as f64).clamp(0.0, 1.0);
        let fy = (y - y0 as f64).clamp(0.0, 1.0);
        let top = self.get(x0, y0) * (1.0 - fx) + self.get(x1, y0) * fx;
        let bot = self.get(x0, y1) * (1.0 - fx) + self.get(x1, y1) * fx;
        top * (1.0 - fy) + bot * fy
    }

    /// Clamped pixel access; coordinates outside the image replicate the edge.
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize) -> f64 {
        let x = x.clamp(0, self.width as isize - 1) as usize;
        let y = y.clamp(0, self.height as isize - 1) as usize;
        self.get(x, y)
    }
}

/// Three-plane RGB raster; all planes share dimensions.
#[derive(Debug, Clone)]
pub struct ColorImage {
    pub red: GrayImage,
    pub green: GrayImage,
    pub blue: GrayImage,
}

/// Color channel selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    Red,
    Green,
    Blue,
}

impl ColorImage {
    pub fn width(&self) -> usize {
        self.red.width()
    }

    pub fn height(&self) -> usize {
        self.red.height()
    }

    /// Average of the three planes, useful when a gray source is needed.
    pub fn to_gray(&self) -> GrayImage {
        let data: Vec<f64> = self
            .red
            .data()
            .iter()
            .zip(self.green.data())
            .zip(self.blue.data())
            .map(|((r, g), b)| (r + g + b) / 3.0)
            .collect();
        GrayImage::new(self.width(), self.height(), data).expect("planes share dims")
    }
}

/// Decode a binary PGM (P5) or PPM (P6) file. Grayscale sources yield three
/// identical planes. 16-bit samples are scaled down to [0, 255].
pub fn load_image(path: &Path) -> Result<ColorImage> {
    let bytes = fs::read(path).map_err(|source| TexError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    decode_pnm(&bytes, path)
}

fn decode_pnm(bytes: &[u8], path: &Path) -> Result<ColorImage> {
    let malformed = |reason: &str| TexError::MalformedImage {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    };

    if bytes.len() < 2 {
        return Err(malformed("file shorter than magic number"));
    }
    let channels = match &bytes[..2] {
        b"P5" => 1usize,
        b"P6" => 3usize,
        _ => {
            return Err(TexError::UnsupportedImage {
                path: path.to_path_buf(),
                reason: "only binary PGM (P5) and PPM (P6) are supported".into(),
            })
        }
    };

    let mut pos = 2usize;
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        *field = read_pnm_int(bytes, &mut pos).ok_or_else(|| malformed("truncated header"))?;
    }
    let [width, height, maxval] = fields;
    if width == 0 || height == 0 {
        return Err(malformed("zero image dimension"));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(TexError::UnsupportedImage {
            path: path.to_path_buf(),
            reason: format!("unsupported maxval {maxval}"),
        });
    }
    // Exactly one whitespace byte separates the header from the raster.
    pos += 1;

    let bytes_per_sample = if maxval > 255 { 2 } else { 1 };
    let expected = width * height * channels * bytes_per_sample;
    let body = bytes.get(pos..).unwrap_or(&[]);
    if body.len() < expected {
        return Err(malformed("truncated pixel data"));
    }
    let scale = 255.0 / maxval as f64;
    let mut planes: Vec<Vec<f64>> = vec![Vec::with_capacity(width * height); channels];
    for (i, chunk) in body[..expected].chunks_exact(bytes_per_sample * channels).enumerate() {
        let _ = i;
        for (c, plane) in planes.iter_mut().enumerate() {
            let raw = if bytes_per_sample == 2 {
                u16::from_be_bytes([chunk[2 * c], chunk[2 * c + 1]]) as f64
            } else {
                chunk[c] as f64
            };
            plane.push(raw * scale);
        }
    }

    let make = |data: Vec<f64>| GrayImage::new(width, height, data);
    if channels == 1 {
        let g = make(planes.pop().unwrap())?;
        Ok(ColorImage {
            red: g.clone(),
            green: g.clone(),
            blue: g,
        })
    } else {
        let blue = make(planes.pop().unwrap())?;
        let green = make(planes.pop().unwrap())?;
        let red = make(planes.pop().unwrap())?;
        Ok(ColorImage { red, green, blue })
    }
}

fn read_pnm_int(bytes: &[u8], pos: &mut usize) -> Option<usize> {
    // Skip whitespace and `#` comments.
    loop {
        let b = *bytes.get(*pos)?;
        if b.is_ascii_whitespace() {
            *pos += 1;
        } else if b == b'#' {
            while *bytes.get(*pos)? != b'\n' {
                *pos += 1;
            }
        } else {
            break;
        }
    }
    let start = *pos;
    while bytes.get(*pos).is_some_and(|b| b.is_ascii_digit()) {
        *pos += 1;
    }
    if *pos == start {
        return None;
    }
    std::str::from_utf8(&bytes[start..*pos]).ok()?.parse().ok()
}

/// Write a binary PGM (P5), rounding intensities to the nearest 8-bit value.
pub fn write_pgm(img: &GrayImage, path: &Path) -> Result<()> {
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend(
        img.data()
            .iter()
            .map(|v| v.round().clamp(0.0, 255.0) as u8),
    );
    fs::write(path, out).map_err(|source| TexError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn extract_channel(img: &ColorImage, channel: Channel) -> GrayImage {
    match channel {
        Channel::Red => img.red.clone(),
        Channel::Green => img.green.clone(),
        Channel::Blue => img.blue.clone(),
    }
}

/// Separable Gaussian smoothing with kernel half-width `ceil(3*sigma)` and
/// edge-replicated borders.
pub fn gaussian_smooth(img: &GrayImage, sigma: f64) -> Result<GrayImage> {
    if sigma <= 0.0 {
        return Err(TexError::InvalidArgument(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    let half = (3.0 * sigma).ceil() as isize;
    let mut kernel = Vec::with_capacity(2 * half as usize + 1);
    for i in -half..=half {
        let x = i as f64;
        kernel.push((-x * x / (2.0 * sigma * sigma)).exp());
    }
    let sum: f64 = kernel.iter().sum();
    for k in &mut kernel {
        *k /= sum;
    }

    let (w, h) = (img.width(), img.height());
    // Horizontal pass.
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (i, k) in kernel.iter().enumerate() {
                let sx = x as isize + i as isize - half;
                acc += k * img.get_clamped(sx, y as isize);
            }
            tmp[y * w + x] = acc;
        }
    }
    let tmp = GrayImage::new(w, h, tmp)?;
    // Vertical pass.
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (i, k) in kernel.iter().enumerate() {
                let sy = y as isize + i as isize - half;
                acc += k * tmp.get_clamped(x as isize, sy);
            }
            out[y * w + x] = acc;
        }
    }
    GrayImage::new(w, h, out)
}

/// Bilinear upscale so the smaller side reaches `min_side`, preserving aspect
/// ratio. Images already at least `min_side` are returned unchanged.
pub fn resize_min_side(img: &GrayImage, min_side: usize) -> GrayImage {
    let (w, h) = (img.width(), img.height());
    if w.min(h) >= min_side || min_side == 0 {
        return img.clone();
    }
    let scale = min_side as f64 / w.min(h) as f64;
    let (nw, nh) = if w <= h {
        (min_side, ((h as f64 * scale).round() as usize).max(1))
    } else {
        (((w as f64 * scale).round() as usize).max(1), min_side)
    };
    let mut data = Vec::with_capacity(nw * nh);
    // Map output pixel centers back onto the source grid.
    let sx = (w - 1) as f64 / (nw - 1).max(1) as f64;
    let sy = (h - 1) as f64 / (nh - 1).max(1) as f64;
    for y in 0..nh {
        for x in 0..nw {
            data.push(img.sample_bilinear(x as f64 * sx, y as f64 * sy));
        }
    }
    GrayImage::new(nw, nh, data).expect("computed dims")
}

/// `ln(1 + I)` per pixel, affinely remapped so min -> 0 and max -> 255.
/// A constant image maps to constant 0.
pub fn log_enhance(img: &GrayImage) -> GrayImage {
    let logged: Vec<f64> = img.data().iter().map(|v| (1.0 + v).ln()).collect();
    let min = logged.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = logged.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let range = max - min;
    let data = if range <= 0.0 {
        vec![0.0; logged.len()]
    } else {
        logged.iter().map(|v| (v - min) / range * 255.0).collect()
    };
    GrayImage::new(img.width(), img.height(), data).expect("dims preserved")
}

/// Affine remap of an arbitrary real map onto [0, 255]; degenerate range
/// collapses to constant 0.
pub fn normalize_to_255(img: &GrayImage) -> GrayImage {
    let min = img.data().iter().cloned().fold(f64::INFINITY, f64::min);
    let max = img.data().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let range = max - min;
    let data: Vec<f64> = if range <= 0.0 {
        vec![0.0; img.data().len()]
    } else {
        img.data().iter().map(|v| (v - min) / range * 255.0).collect()
    };
    GrayImage::new(img.width(), img.height(), data).expect("dims preserved")
}
