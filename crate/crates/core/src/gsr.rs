//! Conversion of an equirectangular image plus a scanpath set into a GSR
//! sequence: at every second, one gaze-centered mini-patch per scanpath, tiled
//! into a square grid whose cell assignment never changes over time.

use std::f64::consts::{FRAC_PI_2, TAU};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{quantize, EquirectImage, RgbImage};
use crate::scanpath::ScanpathSet;
use crate::sphere::{norm_to_sph, sph_to_norm_unchecked, NormPoint, TangentPlane};

pub const FORMAT_VERSION: u32 = 1;
pub const SOFTWARE: &str = concat!("gsrkit ", env!("CARGO_PKG_VERSION"));

/// Angular spacing between neighboring patch samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pitch {
    /// One sample per source pixel at the equator: `2*pi / width`.
    SourceMatched,
    /// The patch spans this many degrees horizontally.
    FixedFov(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    /// Kernel laid on the tangent plane at the gaze point (spherical sampling).
    Tangent,
    /// Plain rectangular crop of the equirectangular plane.
    ErpCrop,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GsrConfig {
    pub patch_h: usize,
    pub patch_w: usize,
    /// Patches per frame; must be a perfect square.
    pub n: usize,
    pub pitch: Pitch,
    pub sampling: Sampling,
}

impl Default for GsrConfig {
    fn default() -> Self {
        GsrConfig {
            patch_h: 32,
            patch_w: 32,
            n: 49,
            pitch: Pitch::SourceMatched,
            sampling: Sampling::Tangent,
        }
    }
}

/// Integer square root, if `n` is a perfect square.
pub fn exact_sqrt(n: usize) -> Option<usize> {
    let r = (n as f64).sqrt().round() as usize;
    (r * r == n).then_some(r)
}

impl GsrConfig {
    /// Square patches of side `patch`, `n` per frame, default pitch and sampling.
    pub fn square(n: usize, patch: usize) -> Self {
        GsrConfig {
            patch_h: patch,
            patch_w: patch,
            n,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || exact_sqrt(self.n).is_none() {
            return Err(Error::Config(format!(
                "patch count {} is not a positive perfect square",
                self.n
            )));
        }
        if self.patch_h < 2 || self.patch_w < 2 {
            return Err(Error::Config(format!(
                "patch {}x{} smaller than 2x2",
                self.patch_h, self.patch_w
            )));
        }
        if let Pitch::FixedFov(deg) = self.pitch {
            if !(deg.is_finite() && deg > 0.0 && deg < 180.0) {
                return Err(Error::Config(format!("field of view {deg} outside (0, 180)")));
            }
            let step = deg.to_radians() / self.patch_w as f64;
            let reach = 0.5 * (self.patch_h.max(self.patch_w) - 1) as f64 * step;
            if reach >= FRAC_PI_2 {
                return Err(Error::Config(format!(
                    "field of view {deg} exceeds the tangent-plane validity range"
                )));
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> usize {
        exact_sqrt(self.n).unwrap_or(0)
    }

    pub fn frame_height(&self) -> usize {
        self.grid() * self.patch_h
    }

    pub fn frame_width(&self) -> usize {
        self.grid() * self.patch_w
    }

    fn step(&self, img_width: usize) -> f64 {
        match self.pitch {
            Pitch::SourceMatched => TAU / img_width as f64,
            Pitch::FixedFov(deg) => deg.to_radians() / self.patch_w as f64,
        }
    }
}

/// Grid cell `(row, col)` of scanpath `path_index` in a grid of `n` cells.
pub fn cell_of(path_index: usize, n: usize) -> Result<(usize, usize)> {
    let g = exact_sqrt(n)
        .filter(|&g| g > 0)
        .ok_or_else(|| Error::Config(format!("patch count {n} is not a positive perfect square")))?;
    if path_index >= n {
        return Err(Error::Domain(format!(
            "path index {path_index} out of range for {n} cells"
        )));
    }
    Ok((path_index / g, path_index % g))
}

/// Real-valued patch samples in row-major order, before quantization.
pub fn sample_patch(img: &EquirectImage, center: NormPoint, cfg: &GsrConfig) -> Result<Vec<[f64; 3]>> {
    cfg.validate()?;
    let mut out = Vec::with_capacity(cfg.patch_h * cfg.patch_w);
    for_each_sample(img, center, cfg, |v| out.push(v))?;
    Ok(out)
}

/// A `patch_h x patch_w` RGB8 mini-patch centered on `center`.
pub fn extract_patch(img: &EquirectImage, center: NormPoint, cfg: &GsrConfig) -> Result<RgbImage> {
    cfg.validate()?;
    extract_patch_validated(img, center, cfg)
}

fn extract_patch_validated(img: &EquirectImage, center: NormPoint, cfg: &GsrConfig) -> Result<RgbImage> {
    let mut data = Vec::with_capacity(cfg.patch_h * cfg.patch_w * 3);
    for_each_sample(img, center, cfg, |v| {
        data.extend_from_slice(&[quantize(v[0]), quantize(v[1]), quantize(v[2])])
    })?;
    RgbImage::from_raw(cfg.patch_w, cfg.patch_h, data)
}

fn for_each_sample(
    img: &EquirectImage,
    center: NormPoint,
    cfg: &GsrConfig,
    mut emit: impl FnMut([f64; 3]),
) -> Result<()> {
    let mid_r = (cfg.patch_h - 1) as f64 / 2.0;
    let mid_c = (cfg.patch_w - 1) as f64 / 2.0;
    match cfg.sampling {
        Sampling::Tangent => {
            let plane = TangentPlane::new(norm_to_sph(center)?);
            let step = cfg.step(img.width());
            for r in 0..cfg.patch_h {
                let v = (mid_r - r as f64) * step;
                for c in 0..cfg.patch_w {
                    let u = (c as f64 - mid_c) * step;
                    let (lat, lon) = plane.inverse(u, v);
                    let (y, x) = sph_to_norm_unchecked(lat, lon);
                    emit(img.sample_unchecked(y, x));
                }
            }
        }
        Sampling::ErpCrop => {
            center.validate()?;
            let (h, w) = (img.height() as f64, img.width() as f64);
            for r in 0..cfg.patch_h {
                let y = (center.y + (r as f64 - mid_r) / h).clamp(0.0, 1.0);
                for c in 0..cfg.patch_w {
                    let x = (center.x + (c as f64 - mid_c) / w).rem_euclid(1.0);
                    emit(img.sample_unchecked(y, x));
                }
            }
        }
    }
    Ok(())
}

/// Provenance carried alongside the frames (and written as `meta.json`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GsrMeta {
    pub version: u32,
    pub t: usize,
    pub grid: [usize; 2],
    pub patch: [usize; 2],
    pub pitch: Pitch,
    pub sampling: Sampling,
    pub image_sha256: String,
    pub scanpath_sha256: String,
    pub software: String,
}

impl GsrMeta {
    pub fn config(&self) -> GsrConfig {
        GsrConfig {
            patch_h: self.patch[0],
            patch_w: self.patch[1],
            n: self.grid[0] * self.grid[1],
            pitch: self.pitch,
            sampling: self.sampling,
        }
    }

    pub fn frame_dims(&self) -> (usize, usize) {
        (self.grid[0] * self.patch[0], self.grid[1] * self.patch[1])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GsrSequence {
    pub frames: Vec<RgbImage>,
    pub meta: GsrMeta,
}

impl GsrSequence {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// The mini-patch of scanpath `n` at time index `t`.
    pub fn patch(&self, n: usize, t: usize) -> Result<RgbImage> {
        let (row, col) = cell_of(n, self.meta.grid[0] * self.meta.grid[1])?;
        let [ph, pw] = self.meta.patch;
        let frame = self
            .frames
            .get(t)
            .ok_or_else(|| Error::Domain(format!("time index {t} out of range")))?;
        Ok(frame.crop(col * pw, row * ph, pw, ph))
    }
}

/// Converts `img` into a GSR sequence driven by `paths`.
pub fn convert(img: &EquirectImage, paths: &ScanpathSet, cfg: &GsrConfig) -> Result<GsrSequence> {
    let image_sha256 = img.rgb().sha256_hex();
    convert_with_image_hash(img, image_sha256, paths, cfg)
}

/// As [`convert`], reusing an already computed image hash.
pub fn convert_with_image_hash(
    img: &EquirectImage,
    image_sha256: String,
    paths: &ScanpathSet,
    cfg: &GsrConfig,
) -> Result<GsrSequence> {
    cfg.validate()?;
    let g = cfg.grid();
    if paths.len() != cfg.n {
        return Err(Error::Config(format!(
            "expected N = {} scanpaths for a {g}x{g} grid, got {}",
            cfg.n,
            paths.len()
        )));
    }
    let t_len = paths.duration();
    if let Some((i, p)) = paths.paths.iter().enumerate().find(|(_, p)| p.points.len() != t_len) {
        return Err(Error::Config(format!(
            "scanpath {i} has {} points, expected {t_len}",
            p.points.len()
        )));
    }

    let (ph, pw) = (cfg.patch_h, cfg.patch_w);
    let patches: Vec<RgbImage> = (0..cfg.n * t_len)
        .into_par_iter()
        .map(|k| extract_patch_validated(img, paths.paths[k % cfg.n].points[k / cfg.n], cfg))
        .collect::<Result<_>>()?;

    let (fh, fw) = (cfg.frame_height(), cfg.frame_width());
    let frames = patches
        .par_chunks(cfg.n)
        .map(|cells| {
            let mut frame = vec![0u8; fh * fw * 3];
            for (n, patch) in cells.iter().enumerate() {
                let (row, col) = (n / g, n % g);
                let src = patch.as_bytes();
                for r in 0..ph {
                    let dst = ((row * ph + r) * fw + col * pw) * 3;
                    frame[dst..dst + pw * 3].copy_from_slice(&src[r * pw * 3..(r + 1) * pw * 3]);
                }
            }
            RgbImage::from_raw(fw, fh, frame)
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(GsrSequence {
        frames,
        meta: GsrMeta {
            version: FORMAT_VERSION,
            t: t_len,
            grid: [g, g],
            patch: [ph, pw],
            pitch: cfg.pitch,
            sampling: cfg.sampling,
            image_sha256,
            scanpath_sha256: paths.sha256_hex()?,
            software: SOFTWARE.to_string(),
        },
    })
}
