//! Full-reference metrics on BT.601 luminance: PSNR, SSIM, and the spherical
//! baselines WS-PSNR (latitude-weighted) and S-PSNR (uniform sphere sampling).

use std::sync::OnceLock;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numeric::pairwise_sum;
use crate::raster::{LumaPlane, RgbImage};
use crate::sphere::{fibonacci_lattice, sph_to_norm};

/// PSNR reported for identical inputs (and the ceiling for all PSNR values).
pub const PSNR_CAP_DB: f64 = 100.0;
pub const PEAK: f64 = 255.0;
pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;
pub const S_PSNR_DEFAULT_POINTS: usize = 655_362;
pub const S_PSNR_MIN_POINTS: usize = 100;

fn same_dims(a: &LumaPlane, b: &LumaPlane) -> Result<()> {
    if a.width != b.width || a.height != b.height {
        return Err(Error::Pairing(format!(
            "dimension mismatch: {}x{} vs {}x{}",
            a.width, a.height, b.width, b.height
        )));
    }
    Ok(())
}

pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse <= 0.0 {
        return PSNR_CAP_DB;
    }
    (10.0 * (PEAK * PEAK / mse).log10()).min(PSNR_CAP_DB)
}

pub fn mse_luma(a: &LumaPlane, b: &LumaPlane) -> Result<f64> {
    same_dims(a, b)?;
    let sq: Vec<f64> = a.data.iter().zip(&b.data).map(|(x, y)| (x - y) * (x - y)).collect();
    Ok(pairwise_sum(&sq) / sq.len() as f64)
}

pub fn psnr_luma(a: &LumaPlane, b: &LumaPlane) -> Result<f64> {
    mse_luma(a, b).map(psnr_from_mse)
}

/// Luminance PSNR in dB, capped at [`PSNR_CAP_DB`].
pub fn psnr(a: &RgbImage, b: &RgbImage) -> Result<f64> {
    psnr_luma(&a.luma(), &b.luma())
}

/// Normalized 11-tap Gaussian (sigma 1.5).
pub fn gaussian_window() -> &'static [f64; SSIM_WINDOW] {
    static WINDOW: OnceLock<[f64; SSIM_WINDOW]> = OnceLock::new();
    WINDOW.get_or_init(|| {
        let mut w = [0.0; SSIM_WINDOW];
        let mid = (SSIM_WINDOW / 2) as f64;
        for (i, v) in w.iter_mut().enumerate() {
            let d = i as f64 - mid;
            *v = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
        }
        let s: f64 = w.iter().sum();
        w.iter_mut().for_each(|v| *v /= s);
        w
    })
}

/// Separable valid-mode filtering of `src` (`w x h`) with the SSIM window.
fn filter_valid(src: &[f64], w: usize, h: usize) -> Vec<f64> {
    let k = gaussian_window();
    let ow = w - SSIM_WINDOW + 1;
    let oh = h - SSIM_WINDOW + 1;
    let mut horiz = vec![0.0; h * ow];
    for r in 0..h {
        let row = &src[r * w..(r + 1) * w];
        for c in 0..ow {
            horiz[r * ow + c] = k.iter().zip(&row[c..c + SSIM_WINDOW]).map(|(a, b)| a * b).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for r in 0..oh {
        for c in 0..ow {
            out[r * ow + c] = k.iter().enumerate().map(|(i, kv)| kv * horiz[(r + i) * ow + c]).sum();
        }
    }
    out
}

/// Mean SSIM over valid window positions (no padding).
pub fn ssim_luma(a: &LumaPlane, b: &LumaPlane) -> Result<f64> {
    same_dims(a, b)?;
    let (w, h) = (a.width, a.height);
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::Domain(format!(
            "{w}x{h} image is smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window"
        )));
    }
    let c1 = (SSIM_K1 * PEAK).powi(2);
    let c2 = (SSIM_K2 * PEAK).powi(2);

    let aa: Vec<f64> = a.data.iter().map(|v| v * v).collect();
    let bb: Vec<f64> = b.data.iter().map(|v| v * v).collect();
    let ab: Vec<f64> = a.data.iter().zip(&b.data).map(|(x, y)| x * y).collect();
    let mu_a = filter_valid(&a.data, w, h);
    let mu_b = filter_valid(&b.data, w, h);
    let e_aa = filter_valid(&aa, w, h);
    let e_bb = filter_valid(&bb, w, h);
    let e_ab = filter_valid(&ab, w, h);

    let map: Vec<f64> = (0..mu_a.len())
        .map(|i| {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let var_a = e_aa[i] - ma * ma;
            let var_b = e_bb[i] - mb * mb;
            let cov = e_ab[i] - ma * mb;
            ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (var_a + var_b + c2))
        })
        .collect();
    Ok(pairwise_sum(&map) / map.len() as f64)
}

pub fn ssim(a: &RgbImage, b: &RgbImage) -> Result<f64> {
    ssim_luma(&a.luma(), &b.luma())
}

/// WS-PSNR row weight for row `j` of `h`: cosine of the row-center latitude.
pub fn ws_weight(j: usize, h: usize) -> f64 {
    ((j as f64 + 0.5 - h as f64 / 2.0) * std::f64::consts::PI / h as f64).cos()
}

/// Weighted MSE over an equirectangular luminance pair.
pub fn ws_mse_luma(a: &LumaPlane, b: &LumaPlane) -> Result<f64> {
    same_dims(a, b)?;
    let (w, h) = (a.width, a.height);
    let row_w: Vec<f64> = (0..h).map(|j| ws_weight(j, h)).collect();
    let weighted: Vec<f64> = (0..w * h)
        .map(|i| {
            let e = a.data[i] - b.data[i];
            e * e * row_w[i / w]
        })
        .collect();
    let weights: Vec<f64> = (0..w * h).map(|i| row_w[i / w]).collect();
    Ok(pairwise_sum(&weighted) / pairwise_sum(&weights))
}

pub fn ws_psnr(reference: &RgbImage, distorted: &RgbImage) -> Result<f64> {
    ws_mse_luma(&reference.luma(), &distorted.luma()).map(psnr_from_mse)
}

/// S-PSNR over `k_points` Fibonacci-lattice samples with bilinear lookup.
pub fn s_psnr(reference: &RgbImage, distorted: &RgbImage, k_points: usize) -> Result<f64> {
    if k_points < S_PSNR_MIN_POINTS {
        return Err(Error::Domain(format!(
            "S-PSNR needs at least {S_PSNR_MIN_POINTS} points, got {k_points}"
        )));
    }
    let a = reference.luma();
    let b = distorted.luma();
    same_dims(&a, &b)?;
    let points: Vec<_> = fibonacci_lattice(k_points).collect();
    let sq: Vec<f64> = points
        .par_iter()
        .map(|s| {
            let p = sph_to_norm(*s);
            let e = a.bilinear_sample(p) - b.bilinear_sample(p);
            e * e
        })
        .collect();
    Ok(psnr_from_mse(pairwise_sum(&sq) / k_points as f64))
}
