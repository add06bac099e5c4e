//! Independent oracles and synthetic data shared by the integration tests.
//!
//! Nothing here calls into the code under test except for plain data types,
//! so a bug in the library cannot hide behind a matching bug in its oracle.

#![allow(dead_code)]

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use gsrkit::RgbImage;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------- geometry

pub type V3 = [f64; 3];

pub fn unit(lat: f64, lon: f64) -> V3 {
    [lat.cos() * lon.cos(), lat.cos() * lon.sin(), lat.sin()]
}

fn mat_vec(m: &[[f64; 3]; 3], v: V3) -> V3 {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}

fn mat_mul(a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

/// Inverse gnomonic projection by brute force: put the tangent point
/// `(1, u, v)` in a frame looking down +x with east +y and north +z, normalize,
/// then rotate that frame onto the center with `Rz(lon0) * Ry(-lat0)`.
/// Returns the unit vector of the projected point.
pub fn gnomonic_oracle(lat0: f64, lon0: f64, u: f64, v: f64) -> V3 {
    let (s, c) = (-lat0).sin_cos();
    let ry = [[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]];
    let (s, c) = lon0.sin_cos();
    let rz = [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]];
    let r = mat_mul(&rz, &ry);
    let n = (1.0 + u * u + v * v).sqrt();
    mat_vec(&r, [1.0 / n, u / n, v / n])
}

/// Angle between two unit vectors.
pub fn angle(a: V3, b: V3) -> f64 {
    let cross = [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ];
    let dot = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    (cross[0] * cross[0] + cross[1] * cross[1] + cross[2] * cross[2])
        .sqrt()
        .atan2(dot)
}

/// Sample locations `(y, x)` of a tangent patch, row-major, computed with the
/// rotation oracle.
pub fn patch_sample_points(center: (f64, f64), patch: usize, step: f64) -> Vec<(f64, f64)> {
    let lat0 = (0.5 - center.0) * PI;
    let lon0 = (center.1 - 0.5) * 2.0 * PI;
    let mid = (patch - 1) as f64 / 2.0;
    let mut out = Vec::with_capacity(patch * patch);
    for r in 0..patch {
        for c in 0..patch {
            let p = gnomonic_oracle(lat0, lon0, (c as f64 - mid) * step, (mid - r as f64) * step);
            let lat = p[2].clamp(-1.0, 1.0).asin();
            let lon = p[1].atan2(p[0]);
            out.push((0.5 - lat / PI, (lon / (2.0 * PI) + 0.5).rem_euclid(1.0)));
        }
    }
    out
}

// ---------------------------------------------------------------- metrics

pub fn luma_plane(img: &RgbImage) -> Vec<Vec<f64>> {
    (0..img.height())
        .map(|r| {
            (0..img.width())
                .map(|c| {
                    let [red, g, b] = img.pixel(c, r);
                    0.299 * red as f64 + 0.587 * g as f64 + 0.114 * b as f64
                })
                .collect()
        })
        .collect()
}

fn capped_psnr(mse: f64) -> f64 {
    if mse == 0.0 {
        100.0
    } else {
        (10.0 * (255.0 * 255.0 / mse).log10()).min(100.0)
    }
}

pub fn psnr_oracle(a: &RgbImage, b: &RgbImage) -> f64 {
    let (la, lb) = (luma_plane(a), luma_plane(b));
    let mut acc = 0.0;
    for r in 0..la.len() {
        for c in 0..la[0].len() {
            let e = la[r][c] - lb[r][c];
            acc += e * e;
        }
    }
    capped_psnr(acc / (la.len() * la[0].len()) as f64)
}

pub fn ws_psnr_oracle(a: &RgbImage, b: &RgbImage) -> f64 {
    let (la, lb) = (luma_plane(a), luma_plane(b));
    let h = la.len();
    let (mut num, mut den) = (0.0, 0.0);
    for (j, (ra, rb)) in la.iter().zip(&lb).enumerate() {
        let w = ((j as f64 + 0.5 - h as f64 / 2.0) * PI / h as f64).cos();
        for (x, y) in ra.iter().zip(rb) {
            num += (x - y) * (x - y) * w;
            den += w;
        }
    }
    capped_psnr(num / den)
}

/// SSIM with a full 11x11 two-dimensional Gaussian window evaluated at every
/// valid position.
pub fn ssim_oracle(a: &RgbImage, b: &RgbImage) -> f64 {
    let (la, lb) = (luma_plane(a), luma_plane(b));
    let (h, w) = (la.len(), la[0].len());
    let mut win = [[0.0f64; 11]; 11];
    let mut total = 0.0;
    for (i, row) in win.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            let (di, dj) = (i as f64 - 5.0, j as f64 - 5.0);
            *cell = (-(di * di + dj * dj) / (2.0 * 1.5 * 1.5)).exp();
            total += *cell;
        }
    }
    let c1 = (0.01f64 * 255.0).powi(2);
    let c2 = (0.03f64 * 255.0).powi(2);
    let mut sum = 0.0;
    let mut count = 0usize;
    for r0 in 0..=h - 11 {
        for c0 in 0..=w - 11 {
            let (mut ma, mut mb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for i in 0..11 {
                for j in 0..11 {
                    let g = win[i][j] / total;
                    let (x, y) = (la[r0 + i][c0 + j], lb[r0 + i][c0 + j]);
                    ma += g * x;
                    mb += g * y;
                    saa += g * x * x;
                    sbb += g * y * y;
                    sab += g * x * y;
                }
            }
            let (va, vb, cov) = (saa - ma * ma, sbb - mb * mb, sab - ma * mb);
            sum += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            count += 1;
        }
    }
    sum / count as f64
}

// ------------------------------------------------------------- correlation

/// Rank of each value: strictly smaller count plus the mid-rank of its tie group.
pub fn rank_oracle(v: &[f64]) -> Vec<f64> {
    v.iter()
        .map(|&x| {
            let less = v.iter().filter(|&&y| y < x).count() as f64;
            let equal = v.iter().filter(|&&y| y == x).count() as f64;
            less + (equal + 1.0) / 2.0
        })
        .collect()
}

pub fn pearson_oracle(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    (sxx > 0.0 && syy > 0.0).then(|| sxy / (sxx * syy).sqrt())
}

pub fn spearman_oracle(x: &[f64], y: &[f64]) -> Option<f64> {
    pearson_oracle(&rank_oracle(x), &rank_oracle(y))
}

// ---------------------------------------------------------------- images

pub fn random_image(w: usize, h: usize, rng: &mut impl Rng) -> RgbImage {
    let data = (0..w * h * 3).map(|_| rng.random::<u8>()).collect();
    RgbImage::from_raw(w, h, data).unwrap()
}

/// A smooth, horizontally periodic texture with fine noise, standing in for a
/// natural panorama.
pub fn textured_erp(w: usize, h: usize, seed: u64) -> RgbImage {
    let mut rng = rng(seed);
    let waves: Vec<(f64, f64, f64, f64, [f64; 3])> = (0..14)
        .map(|k| {
            let fx = rng.random_range(1..=24) as f64;
            let fy = rng.random_range(0.5..12.0);
            let amp = 40.0 / (1.0 + k as f64 * 0.35);
            let phase = rng.random_range(0.0..2.0 * PI);
            let tint = [
                rng.random_range(0.5..1.0),
                rng.random_range(0.5..1.0),
                rng.random_range(0.5..1.0),
            ];
            (fx, fy, amp, phase, tint)
        })
        .collect();
    let mut img = RgbImage::filled(w, h, [0, 0, 0]);
    for r in 0..h {
        let y = (r as f64 + 0.5) / h as f64;
        for c in 0..w {
            let x = (c as f64 + 0.5) / w as f64;
            let mut px = [128.0f64; 3];
            for (fx, fy, amp, phase, tint) in &waves {
                let s = amp * (2.0 * PI * (fx * x + fy * y) + phase).sin();
                for ch in 0..3 {
                    px[ch] += s * tint[ch];
                }
            }
            let noise: f64 = rng.random_range(-12.0..12.0);
            let rgb = px.map(|v| (v + noise).round().clamp(0.0, 255.0) as u8);
            img.put_pixel(c, r, rgb);
        }
    }
    img
}

/// Separable box blur of the given radius; columns wrap, rows clamp.
pub fn box_blur(img: &RgbImage, radius: usize) -> RgbImage {
    let (w, h) = (img.width(), img.height());
    let k = (2 * radius + 1) as f64;
    let mut tmp = vec![[0.0f64; 3]; w * h];
    for r in 0..h {
        for c in 0..w {
            let mut acc = [0.0; 3];
            for d in 0..=2 * radius {
                let cc = (c + w * (radius + 1) + d - radius) % w;
                let p = img.pixel(cc, r);
                for ch in 0..3 {
                    acc[ch] += p[ch] as f64;
                }
            }
            tmp[r * w + c] = acc.map(|v| v / k);
        }
    }
    let mut out = RgbImage::filled(w, h, [0, 0, 0]);
    for r in 0..h {
        for c in 0..w {
            let mut acc = [0.0; 3];
            for d in 0..=2 * radius {
                let rr = (r + d).saturating_sub(radius).min(h - 1);
                for ch in 0..3 {
                    acc[ch] += tmp[rr * w + c][ch];
                }
            }
            out.put_pixel(c, r, acc.map(|v| (v / k).round() as u8));
        }
    }
    out
}

/// Axis-aligned region of the equirectangular plane in normalized coordinates.
#[derive(Debug, Clone, Copy)]
pub struct Region {
    pub y0: f64,
    pub y1: f64,
    pub x0: f64,
    pub x1: f64,
}

impl Region {
    pub fn contains(&self, y: f64, x: f64) -> bool {
        (self.y0..self.y1).contains(&y) && (self.x0..self.x1).contains(&x)
    }

    pub fn grown(&self, dy: f64, dx: f64) -> Region {
        Region {
            y0: self.y0 - dy,
            y1: self.y1 + dy,
            x0: self.x0 - dx,
            x1: self.x1 + dx,
        }
    }

    pub fn shrunk(&self, dy: f64, dx: f64) -> Region {
        self.grown(-dy, -dx)
    }
}

/// `img` with the pixels whose centers fall in `region` replaced by `blurred`.
pub fn composite(img: &RgbImage, blurred: &RgbImage, region: Region) -> RgbImage {
    let mut out = img.clone();
    for r in 0..img.height() {
        let y = (r as f64 + 0.5) / img.height() as f64;
        for c in 0..img.width() {
            let x = (c as f64 + 0.5) / img.width() as f64;
            if region.contains(y, x) {
                out.put_pixel(c, r, blurred.pixel(c, r));
            }
        }
    }
    out
}

// ---------------------------------------------------------- synthetic corpus

pub const CORPUS_REFS: usize = 12;
pub const CORPUS_LEVELS: [usize; 5] = [1, 2, 3, 5, 8];
pub const LOCAL_REGION: Region = Region {
    y0: 0.30,
    y1: 0.70,
    x0: 0.60,
    x1: 0.85,
};

/// Writes the synthetic corpus and its manifest into `dir`.
///
/// Even-numbered references receive global blur, odd ones blur confined to
/// [`LOCAL_REGION`]. Opinion scores fall with blur radius, and a local blur
/// is always preferred to any global one, since it leaves most of the sphere
/// untouched.
pub fn write_corpus(dir: &Path, w: usize, h: usize) -> PathBuf {
    let mut csv = String::from("dist_path,ref_path,reference_id,mos\n");
    for i in 0..CORPUS_REFS {
        let reference = textured_erp(w, h, 1000 + i as u64);
        let ref_name = format!("ref_{i:02}.png");
        reference.save_png(&dir.join(&ref_name)).unwrap();
        let local = i % 2 == 1;
        for (lvl, &radius) in CORPUS_LEVELS.iter().enumerate() {
            let blurred = box_blur(&reference, radius);
            let dist = if local {
                composite(&reference, &blurred, LOCAL_REGION)
            } else {
                blurred
            };
            let dist_name = format!("dist_{i:02}_{lvl}.png");
            dist.save_png(&dir.join(&dist_name)).unwrap();
            let base = if local { 6.0 } else { 0.0 };
            let mos = base + 5.0 - lvl as f64;
            writeln!(csv, "{dist_name},{ref_name},scene{i:02},{mos}").unwrap();
        }
    }
    let manifest = dir.join("manifest.csv");
    std::fs::write(&manifest, csv).unwrap();
    manifest
}
