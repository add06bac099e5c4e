//! Full-reference scoring of GSR sequence pairs with temporal pooling.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::canonical::to_canonical_string;
use crate::error::{Error, Result};
use crate::gsr::{cell_of, GsrSequence};
use crate::metrics::{mse_luma, psnr_from_mse, ssim_luma};
use crate::pooling::{pool, PoolingMethod, PoolingSpec, ScoreMatrix};
use crate::raster::LumaPlane;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrMetric {
    Psnr,
    Ssim,
}

impl FromStr for FrMetric {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "psnr" => Ok(FrMetric::Psnr),
            "ssim" => Ok(FrMetric::Ssim),
            _ => Err(Error::Config(format!("unknown metric {s:?}"))),
        }
    }
}

impl fmt::Display for FrMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FrMetric::Psnr => "psnr",
            FrMetric::Ssim => "ssim",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreMode {
    /// Each aligned mini-patch sequence is scored separately (N x T matrix).
    #[default]
    PerPatch,
    /// Whole tiled frames are scored (1 x T matrix).
    PerFrame,
}

impl FromStr for ScoreMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "per_patch" => Ok(ScoreMode::PerPatch),
            "per_frame" => Ok(ScoreMode::PerFrame),
            _ => Err(Error::Config(format!("unknown scoring mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QualityReport {
    pub metric: FrMetric,
    pub mode: ScoreMode,
    pub pooling: PoolingMethod,
    pub pooled: f64,
    /// Rows are mini-patch sequences (or the single frame row), columns time.
    pub matrix: ScoreMatrix,
    /// Raw luminance MSE behind each PSNR entry.
    pub mse: Option<ScoreMatrix>,
}

#[derive(Serialize)]
struct ReportJson {
    metric: FrMetric,
    mode: ScoreMode,
    pooling: PoolingSpec,
    pooled: f64,
    matrix: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mse: Option<Vec<Vec<f64>>>,
}

impl QualityReport {
    /// Canonical JSON; the matrix doubles as a spatiotemporal quality map.
    pub fn to_json_string(&self) -> Result<String> {
        to_canonical_string(&ReportJson {
            metric: self.metric,
            mode: self.mode,
            pooling: self.pooling.spec(self.matrix.cols()),
            pooled: self.pooled,
            matrix: self.matrix.to_nested(),
            mse: self.mse.as_ref().map(ScoreMatrix::to_nested),
        })
    }
}

/// Checks that two sequences were produced under the same conversion.
pub fn check_pairing(reference: &GsrSequence, distorted: &GsrSequence, mode: ScoreMode) -> Result<()> {
    let (a, b) = (&reference.meta, &distorted.meta);
    if a.t != b.t || reference.len() != distorted.len() {
        return Err(Error::Pairing(format!(
            "sequence lengths differ: {} vs {}",
            reference.len(),
            distorted.len()
        )));
    }
    if a.frame_dims() != b.frame_dims() {
        return Err(Error::Pairing(format!(
            "frame sizes differ: {:?} vs {:?}",
            a.frame_dims(),
            b.frame_dims()
        )));
    }
    if mode == ScoreMode::PerPatch && (a.grid != b.grid || a.patch != b.patch) {
        return Err(Error::Pairing(format!(
            "grid/patch layouts differ: {:?}/{:?} vs {:?}/{:?}",
            a.grid, a.patch, b.grid, b.patch
        )));
    }
    if a.pitch != b.pitch || a.sampling != b.sampling {
        return Err(Error::Pairing("sampling configurations differ".into()));
    }
    if a.scanpath_sha256 != b.scanpath_sha256 {
        return Err(Error::Pairing(
            "reference and distorted sequences were built from different scanpaths".into(),
        ));
    }
    Ok(())
}

fn score_planes(metric: FrMetric, a: &LumaPlane, b: &LumaPlane) -> Result<(f64, f64)> {
    match metric {
        FrMetric::Psnr => {
            let mse = mse_luma(a, b)?;
            Ok((psnr_from_mse(mse), mse))
        }
        FrMetric::Ssim => Ok((ssim_luma(a, b)?, f64::NAN)),
    }
}

pub fn score_sequences(
    reference: &GsrSequence,
    distorted: &GsrSequence,
    metric: FrMetric,
    mode: ScoreMode,
    pooling: PoolingMethod,
) -> Result<QualityReport> {
    check_pairing(reference, distorted, mode)?;
    let t_len = reference.len();
    let lumas: Vec<(LumaPlane, LumaPlane)> = reference
        .frames
        .par_iter()
        .zip(&distorted.frames)
        .map(|(a, b)| (a.luma(), b.luma()))
        .collect();

    let (rows, cells): (usize, Vec<(f64, f64)>) = match mode {
        ScoreMode::PerFrame => (
            1,
            lumas
                .par_iter()
                .map(|(a, b)| score_planes(metric, a, b))
                .collect::<Result<_>>()?,
        ),
        ScoreMode::PerPatch => {
            let n = reference.meta.grid[0] * reference.meta.grid[1];
            let [ph, pw] = reference.meta.patch;
            let cells = (0..n * t_len)
                .into_par_iter()
                .map(|k| {
                    let (cell, t) = (k / t_len, k % t_len);
                    let (row, col) = cell_of(cell, n)?;
                    let (a, b) = &lumas[t];
                    score_planes(
                        metric,
                        &a.crop(col * pw, row * ph, pw, ph),
                        &b.crop(col * pw, row * ph, pw, ph),
                    )
                })
                .collect::<Result<_>>()?;
            (n, cells)
        }
    };

    let matrix = ScoreMatrix::new(rows, t_len, cells.iter().map(|c| c.0).collect())?;
    let mse = match metric {
        FrMetric::Psnr => Some(ScoreMatrix::new(rows, t_len, cells.iter().map(|c| c.1).collect())?),
        FrMetric::Ssim => None,
    };
    let pooled = pool(&matrix, pooling)?;
    Ok(QualityReport {
        metric,
        mode,
        pooling,
        pooled,
        matrix,
        mse,
    })
}
