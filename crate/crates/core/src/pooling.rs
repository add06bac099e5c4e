//! Temporal pooling of per-cell, per-frame scores into one quality value.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::pairwise_sum;

/// Row-major `rows x cols` score matrix: one row per mini-patch sequence
/// (a single row in per-frame mode), one column per time instant.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl ScoreMatrix {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::Domain(format!(
                "{} values cannot fill a {rows}x{cols} matrix",
                values.len()
            )));
        }
        Ok(ScoreMatrix { rows, cols, values })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Domain("ragged score rows".into()));
        }
        let n = rows.len();
        ScoreMatrix::new(n, cols, rows.into_iter().flatten().collect())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.values[row * self.cols..(row + 1) * self.cols]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn to_nested(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|r| self.row(r).to_vec()).collect()
    }

    pub fn scaled(&self, c: f64) -> ScoreMatrix {
        ScoreMatrix {
            rows: self.rows,
            cols: self.cols,
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PoolingMethod {
    /// Arithmetic mean over time.
    Am,
    /// Ascending half-Gaussian weights peaking at the last instant.
    /// `sigma` in seconds; `None` means half the sequence length.
    Gw { sigma: Option<f64> },
}

impl PoolingMethod {
    pub fn sigma_for(&self, t_len: usize) -> Option<f64> {
        match self {
            PoolingMethod::Am => None,
            PoolingMethod::Gw { sigma } => Some(sigma.unwrap_or(t_len as f64 / 2.0)),
        }
    }

    /// Weights for `t = 1..=t_len`.
    pub fn weights(&self, t_len: usize) -> Result<Vec<f64>> {
        match self.sigma_for(t_len) {
            None => Ok(vec![1.0; t_len]),
            Some(sigma) => {
                if !(sigma.is_finite() && sigma > 0.0) {
                    return Err(Error::Config(format!("GW sigma must be positive, got {sigma}")));
                }
                let last = t_len as f64;
                Ok((1..=t_len)
                    .map(|t| {
                        let d = t as f64 - last;
                        (-d * d / (2.0 * sigma * sigma)).exp()
                    })
                    .collect())
            }
        }
    }

    /// The pooling echo written into reports, with sigma resolved for `t_len`.
    pub fn spec(&self, t_len: usize) -> PoolingSpec {
        match self.sigma_for(t_len) {
            None => PoolingSpec {
                kind: "am".into(),
                sigma: None,
            },
            Some(s) => PoolingSpec {
                kind: "gw".into(),
                sigma: Some(s),
            },
        }
    }
}

impl FromStr for PoolingMethod {
    type Err = Error;

    /// `am`, `gw`, or `gw:SIGMA`.
    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        match lower.split_once(':') {
            None if lower == "am" => Ok(PoolingMethod::Am),
            None if lower == "gw" => Ok(PoolingMethod::Gw { sigma: None }),
            Some(("gw", sigma)) => {
                let sigma: f64 = sigma
                    .parse()
                    .map_err(|_| Error::Config(format!("bad GW sigma {sigma:?}")))?;
                if !(sigma.is_finite() && sigma > 0.0) {
                    return Err(Error::Config(format!("GW sigma must be positive, got {sigma}")));
                }
                Ok(PoolingMethod::Gw { sigma: Some(sigma) })
            }
            _ => Err(Error::Config(format!(
                "unknown pooling {s:?} (expected am, gw or gw:SIGMA)"
            ))),
        }
    }
}

impl fmt::Display for PoolingMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PoolingMethod::Am => write!(f, "am"),
            PoolingMethod::Gw { sigma: None } => write!(f, "gw"),
            PoolingMethod::Gw { sigma: Some(s) } => write!(f, "gw:{s}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolingSpec {
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub sigma: Option<f64>,
}

/// Weighted temporal mean per row, then the plain mean over rows.
pub fn pool(m: &ScoreMatrix, method: PoolingMethod) -> Result<f64> {
    if m.rows == 0 || m.cols == 0 {
        return Err(Error::Domain("cannot pool an empty score matrix".into()));
    }
    let w = method.weights(m.cols)?;
    let w_sum = pairwise_sum(&w);
    let per_row: Vec<f64> = (0..m.rows)
        .map(|r| {
            let weighted: Vec<f64> = m.row(r).iter().zip(&w).map(|(s, wt)| s * wt).collect();
            pairwise_sum(&weighted) / w_sum
        })
        .collect();
    Ok(pairwise_sum(&per_row) / m.rows as f64)
}
