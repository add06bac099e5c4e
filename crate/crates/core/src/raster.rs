//! RGB8 buffers, luminance planes, and interpolated equirectangular sampling.

use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::sphere::NormPoint;

/// Row-major interleaved RGB8 image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl RgbImage {
    pub fn from_raw(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Domain(format!("empty image {width}x{height}")));
        }
        if data.len() != width * height * 3 {
            return Err(Error::Format(format!(
                "buffer of {} bytes does not match {width}x{height}x3",
                data.len()
            )));
        }
        Ok(RgbImage { width, height, data })
    }

    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Self {
        let data = rgb.iter().copied().cycle().take(width * height * 3).collect();
        RgbImage { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.data
    }

    pub fn as_bytes_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.data
    }

    #[inline]
    pub fn pixel(&self, col: usize, row: usize) -> [u8; 3] {
        let i = (row * self.width + col) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    #[inline]
    pub fn put_pixel(&mut self, col: usize, row: usize, rgb: [u8; 3]) {
        let i = (row * self.width + col) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    /// Copies a rectangular region.
    pub fn crop(&self, col: usize, row: usize, width: usize, height: usize) -> RgbImage {
        let mut data = Vec::with_capacity(width * height * 3);
        for r in row..row + height {
            let start = (r * self.width + col) * 3;
            data.extend_from_slice(&self.data[start..start + width * 3]);
        }
        RgbImage { width, height, data }
    }

    pub fn luma(&self) -> LumaPlane {
        LumaPlane {
            width: self.width,
            height: self.height,
            data: self
                .data
                .chunks_exact(3)
                .map(|p| luma_of([p[0] as f64, p[1] as f64, p[2] as f64]))
                .collect(),
        }
    }

    /// SHA-256 over the dimensions (little-endian u64) and pixel bytes.
    pub fn sha256_hex(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.width as u64).to_le_bytes());
        h.update((self.height as u64).to_le_bytes());
        h.update(&self.data);
        hex::encode(h.finalize())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let img = image::open(path).map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })?;
        let rgb = img.into_rgb8();
        let (w, h) = rgb.dimensions();
        RgbImage::from_raw(w as usize, h as usize, rgb.into_raw())
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        image::save_buffer_with_format(
            path,
            &self.data,
            self.width as u32,
            self.height as u32,
            image::ExtendedColorType::Rgb8,
            image::ImageFormat::Png,
        )
        .map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })
    }
}

/// BT.601 luma.
#[inline]
pub fn luma_of(rgb: [f64; 3]) -> f64 {
    0.299 * rgb[0] + 0.587 * rgb[1] + 0.114 * rgb[2]
}

/// Single-channel real-valued plane, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LumaPlane {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl LumaPlane {
    #[inline]
    pub fn at(&self, col: usize, row: usize) -> f64 {
        self.data[row * self.width + col]
    }

    pub fn crop(&self, col: usize, row: usize, width: usize, height: usize) -> LumaPlane {
        let mut data = Vec::with_capacity(width * height);
        for r in row..row + height {
            let start = r * self.width + col;
            data.extend_from_slice(&self.data[start..start + width]);
        }
        LumaPlane { width, height, data }
    }

    /// Bilinear sample with the same seam/pole rules as [`EquirectImage::bilinear_sample`].
    pub fn bilinear_sample(&self, p: NormPoint) -> f64 {
        let taps = BilinearTaps::new(self.width, self.height, p.y, p.x);
        taps.weights
            .iter()
            .zip(taps.offsets)
            .map(|(w, o)| w * self.data[o])
            .sum()
    }
}

/// Four-neighbor interpolation stencil: pixel-center convention at half
/// integers, columns wrap modulo the width, rows clamp at the poles.
#[derive(Debug, Clone, Copy)]
pub(crate) struct BilinearTaps {
    /// Linear pixel indices: top-left, top-right, bottom-left, bottom-right.
    pub offsets: [usize; 4],
    pub weights: [f64; 4],
}

impl BilinearTaps {
    #[inline]
    pub fn new(width: usize, height: usize, y: f64, x: f64) -> Self {
        let fx = x * width as f64 - 0.5;
        let fy = y * height as f64 - 0.5;
        let x0 = fx.floor();
        let y0 = fy.floor();
        let tx = fx - x0;
        let ty = fy - y0;

        let w = width as i64;
        let c0 = (x0 as i64).rem_euclid(w) as usize;
        let c1 = (x0 as i64 + 1).rem_euclid(w) as usize;
        let hmax = height as i64 - 1;
        let r0 = (y0 as i64).clamp(0, hmax) as usize;
        let r1 = (y0 as i64 + 1).clamp(0, hmax) as usize;

        BilinearTaps {
            offsets: [r0 * width + c0, r0 * width + c1, r1 * width + c0, r1 * width + c1],
            weights: [(1.0 - tx) * (1.0 - ty), tx * (1.0 - ty), (1.0 - tx) * ty, tx * ty],
        }
    }
}

/// A 360-degree image in equirectangular projection.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EquirectImage {
    image: RgbImage,
}

impl EquirectImage {
    /// Wraps an RGB image. A width that is not twice the height is logged, not rejected.
    pub fn new(image: RgbImage) -> Self {
        if image.width != 2 * image.height {
            log::warn!(
                "equirectangular image is {}x{}, expected a 2:1 aspect ratio",
                image.width,
                image.height
            );
        }
        EquirectImage { image }
    }

    pub fn load(path: &Path) -> Result<Self> {
        RgbImage::load(path).map(EquirectImage::new)
    }

    pub fn width(&self) -> usize {
        self.image.width
    }

    pub fn height(&self) -> usize {
        self.image.height
    }

    pub fn rgb(&self) -> &RgbImage {
        &self.image
    }

    pub fn into_rgb(self) -> RgbImage {
        self.image
    }

    /// Real-valued bilinear sample at a normalized position.
    pub fn bilinear_sample(&self, p: NormPoint) -> [f64; 3] {
        self.sample_unchecked(p.y, p.x)
    }

    #[inline]
    pub(crate) fn sample_unchecked(&self, y: f64, x: f64) -> [f64; 3] {
        let taps = BilinearTaps::new(self.image.width, self.image.height, y, x);
        let d = &self.image.data;
        let mut out = [0.0; 3];
        for (w, o) in taps.weights.iter().zip(taps.offsets) {
            let i = o * 3;
            out[0] += w * d[i] as f64;
            out[1] += w * d[i + 1] as f64;
            out[2] += w * d[i + 2] as f64;
        }
        out
    }
}

/// Round half away from zero and saturate to 8 bits.
#[inline]
pub fn quantize(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}
