//! SRCC and PLCC between objective scores and subjective opinions.

use std::str::FromStr;

use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{mean, median, pairwise_sum, sample_std};

fn check_lengths(x: &[f64], y: &[f64], min: usize) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::Domain(format!("length mismatch: {} vs {}", x.len(), y.len())));
    }
    if x.len() < min {
        return Err(Error::UndefinedCorrelation(format!(
            "need at least {min} samples, got {}",
            x.len()
        )));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Domain("non-finite sample".into()));
    }
    Ok(())
}

/// Sample Pearson correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    check_lengths(x, y, 2)?;
    let (mx, my) = (mean(x), mean(y));
    let dx: Vec<f64> = x.iter().map(|v| v - mx).collect();
    let dy: Vec<f64> = y.iter().map(|v| v - my).collect();
    let sxy = pairwise_sum(&dx.iter().zip(&dy).map(|(a, b)| a * b).collect::<Vec<_>>());
    let sxx = pairwise_sum(&dx.iter().map(|a| a * a).collect::<Vec<_>>());
    let syy = pairwise_sum(&dy.iter().map(|b| b * b).collect::<Vec<_>>());
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation("constant input".into()));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// 1-based ranks; tied values share the mean of the ranks they span.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // positions i..=j hold ranks i+1..=j+1
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank-order correlation.
pub fn srcc(x: &[f64], y: &[f64]) -> Result<f64> {
    check_lengths(x, y, 2)?;
    pearson(&average_ranks(x), &average_ranks(y))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlccMapping {
    #[default]
    None,
    /// Four-parameter logistic fitted from scores to opinions first.
    Logistic4,
}

impl FromStr for PlccMapping {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(PlccMapping::None),
            "logistic4" | "logistic" => Ok(PlccMapping::Logistic4),
            _ => Err(Error::Config(format!("unknown PLCC mapping {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlccOutcome {
    pub value: f64,
    /// The logistic fit did not converge and the unmapped PLCC was returned.
    pub fit_failed: bool,
    pub params: Option<[f64; 4]>,
}

/// `(b1 - b2) / (1 + exp(-(s - b3) / |b4|)) + b2`
pub fn logistic4(s: f64, b: &[f64; 4]) -> f64 {
    (b[0] - b[1]) / (1.0 + (-(s - b[2]) / b[3].abs()).exp()) + b[1]
}

const FIT_MAX_ITER: usize = 200;
const FIT_REL_TOL: f64 = 1e-10;

fn sse(x: &[f64], y: &[f64], b: &[f64; 4]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(s, t)| {
            let r = logistic4(*s, b) - t;
            r * r
        })
        .sum()
}

/// Damped Gauss-Newton (Levenberg-Marquardt) fit of [`logistic4`].
///
/// Returns `None` when the fit produces non-finite parameters.
pub fn fit_logistic4(x: &[f64], y: &[f64]) -> Option<[f64; 4]> {
    let ymax = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ymin = y.iter().copied().fold(f64::INFINITY, f64::min);
    let spread = sample_std(x) / 4.0;
    let mut b = [ymax, ymin, median(x), if spread > 0.0 { spread } else { 1.0 }];
    let mut cost = sse(x, y, &b);
    let mut lambda = 1e-3;

    for _ in 0..FIT_MAX_ITER {
        if cost <= f64::MIN_POSITIVE {
            break;
        }
        let mut jtj = Matrix4::<f64>::zeros();
        let mut jtr = Vector4::<f64>::zeros();
        let scale = b[3].abs();
        for (&s, &t) in x.iter().zip(y) {
            let z = (s - b[2]) / scale;
            let sig = 1.0 / (1.0 + (-z).exp());
            let ds = sig * (1.0 - sig);
            let amp = b[0] - b[1];
            let j = Vector4::new(sig, 1.0 - sig, -amp * ds / scale, -amp * ds * z / scale * b[3].signum());
            let r = amp * sig + b[1] - t;
            jtj += j * j.transpose();
            jtr += j * r;
        }

        let mut improved = false;
        while lambda < 1e16 {
            let mut damped = jtj;
            for i in 0..4 {
                damped[(i, i)] += lambda * (jtj[(i, i)] + 1e-12);
            }
            let Some(step) = damped.lu().solve(&(-jtr)) else {
                lambda *= 2.0;
                continue;
            };
            let trial = [b[0] + step[0], b[1] + step[1], b[2] + step[2], b[3] + step[3]];
            let trial_cost = sse(x, y, &trial);
            if trial.iter().all(|v| v.is_finite()) && trial[3] != 0.0 && trial_cost < cost {
                let rel = (cost - trial_cost) / cost;
                b = trial;
                cost = trial_cost;
                lambda /= 2.0;
                improved = true;
                if rel < FIT_REL_TOL {
                    return Some(b);
                }
                break;
            }
            lambda *= 2.0;
        }
        if !improved {
            break;
        }
    }
    (b.iter().all(|v| v.is_finite()) && cost.is_finite()).then_some(b)
}

/// Pearson linear correlation, optionally after logistic mapping of `x` onto `y`.
pub fn plcc(x: &[f64], y: &[f64], mapping: PlccMapping) -> Result<PlccOutcome> {
    match mapping {
        PlccMapping::None => Ok(PlccOutcome {
            value: pearson(x, y)?,
            fit_failed: false,
            params: None,
        }),
        PlccMapping::Logistic4 => {
            check_lengths(x, y, 3)?;
            let raw = pearson(x, y)?;
            let mapped = fit_logistic4(x, y).and_then(|b| {
                let fx: Vec<f64> = x.iter().map(|s| logistic4(*s, &b)).collect();
                pearson(&fx, y).ok().map(|v| (v, b))
            });
            Ok(match mapped {
                Some((value, b)) => PlccOutcome {
                    value,
                    fit_failed: false,
                    params: Some(b),
                },
                None => {
                    log::warn!("logistic fit failed; reporting unmapped PLCC");
                    PlccOutcome {
                        value: raw,
                        fit_failed: true,
                        params: None,
                    }
                }
            })
        }
    }
}
