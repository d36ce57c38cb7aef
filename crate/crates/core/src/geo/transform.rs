//! Score normalization: min-max, base-10 log and Box-Cox.
//!
//! Log and Box-Cox inputs are floored at `epsilon` first, since calm or dry
//! hours produce exact zeros.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::stats::min_max;

use super::GeoError;

pub const DEFAULT_EPSILON: f64 = 1e-6;
pub const BOXCOX_LAMBDA_RANGE: (f64, f64) = (-5.0, 5.0);
pub const BOXCOX_TOLERANCE: f64 = 1e-4;
pub const BOXCOX_MIN_SAMPLES: usize = 20;
const BOXCOX_LOG_LAMBDA: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TransformKind {
    MinMax,
    Log10,
    BoxCox { lambda: f64 },
}

impl TransformKind {
    pub fn family(&self) -> &'static str {
        match self {
            TransformKind::MinMax => "minmax",
            TransformKind::Log10 => "log10",
            TransformKind::BoxCox { .. } => "boxcox",
        }
    }

    /// Applies the transform to one raw score. Min-max rescaling against a
    /// calibration range happens afterwards, so `MinMax` is the identity here.
    pub fn apply(&self, x: f64, epsilon: f64) -> f64 {
        match *self {
            TransformKind::MinMax => x,
            TransformKind::Log10 => x.max(epsilon).log10(),
            TransformKind::BoxCox { lambda } => boxcox_value(x.max(epsilon), lambda),
        }
    }
}

impl fmt::Display for TransformKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TransformKind::MinMax => f.write_str("minmax"),
            TransformKind::Log10 => f.write_str("log10"),
            TransformKind::BoxCox { lambda } => write!(f, "boxcox:{lambda}"),
        }
    }
}

impl FromStr for TransformKind {
    type Err = GeoError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        match s {
            "minmax" => Ok(TransformKind::MinMax),
            "log10" => Ok(TransformKind::Log10),
            _ => {
                let lambda = s
                    .strip_prefix("boxcox:")
                    .and_then(|l| l.parse::<f64>().ok())
                    .filter(|l| l.is_finite())
                    .ok_or_else(|| GeoError::Parse(format!("unknown transform {s:?}")))?;
                Ok(TransformKind::BoxCox { lambda })
            }
        }
    }
}

/// `(x - min) / (max - min)`.
pub fn transform_minmax(xs: &[f64]) -> Result<Vec<f64>, GeoError> {
    if xs.len() < 2 {
        return Err(GeoError::Degenerate("min-max needs at least two values".into()));
    }
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(GeoError::Degenerate("non-finite value".into()));
    }
    let (lo, hi) = min_max(xs).expect("non-empty");
    if hi <= lo {
        return Err(GeoError::Degenerate("constant input".into()));
    }
    let span = hi - lo;
    Ok(xs.iter().map(|x| (x - lo) / span).collect())
}

pub fn transform_log10(xs: &[f64], epsilon: f64) -> Vec<f64> {
    xs.iter().map(|x| x.max(epsilon).log10()).collect()
}

/// `(x^λ - 1) / λ`, or `ln x` when `|λ|` is effectively zero.
pub fn boxcox_value(x: f64, lambda: f64) -> f64 {
    if lambda.abs() < BOXCOX_LOG_LAMBDA {
        x.ln()
    } else {
        (x.powf(lambda) - 1.0) / lambda
    }
}

/// Box-Cox profile log-likelihood for positive `xs`:
/// `(λ - 1) Σ ln x - n/2 · ln σ²(λ)` with the population variance of the
/// transformed sample.
pub fn boxcox_log_likelihood(xs: &[f64], lambda: f64) -> f64 {
    let n = xs.len() as f64;
    let log_sum: f64 = xs.iter().map(|x| x.ln()).sum();
    let ys: Vec<f64> = xs.iter().map(|&x| boxcox_value(x, lambda)).collect();
    let mean = ys.iter().sum::<f64>() / n;
    let var = ys.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>() / n;
    if !(var > 0.0) || !var.is_finite() {
        return f64::NEG_INFINITY;
    }
    (lambda - 1.0) * log_sum - 0.5 * n * var.ln()
}

fn floored(xs: &[f64], epsilon: f64) -> Result<Vec<f64>, GeoError> {
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(GeoError::Degenerate("non-finite value".into()));
    }
    Ok(xs.iter().map(|x| x.max(epsilon)).collect())
}

/// Maximum-likelihood λ on `[-5, 5]` by golden-section search.
pub fn fit_boxcox_lambda(xs: &[f64], epsilon: f64) -> Result<f64, GeoError> {
    if xs.len() < BOXCOX_MIN_SAMPLES {
        return Err(GeoError::Degenerate(format!(
            "Box-Cox needs at least {BOXCOX_MIN_SAMPLES} values, got {}",
            xs.len()
        )));
    }
    let xs = floored(xs, epsilon)?;
    let (lo, hi) = min_max(&xs).expect("non-empty");
    if hi <= lo {
        return Err(GeoError::Degenerate("constant input".into()));
    }
    Ok(golden_section_max(|l| boxcox_log_likelihood(&xs, l), BOXCOX_LAMBDA_RANGE, BOXCOX_TOLERANCE))
}

/// Fits λ and returns it with the transformed values.
pub fn transform_boxcox(xs: &[f64], epsilon: f64) -> Result<(f64, Vec<f64>), GeoError> {
    let lambda = fit_boxcox_lambda(xs, epsilon)?;
    Ok((lambda, transform_boxcox_with(xs, lambda, epsilon)))
}

pub fn transform_boxcox_with(xs: &[f64], lambda: f64, epsilon: f64) -> Vec<f64> {
    xs.iter().map(|&x| boxcox_value(x.max(epsilon), lambda)).collect()
}

fn golden_section_max(f: impl Fn(f64) -> f64, (mut a, mut b): (f64, f64), tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    (a + b) / 2.0
}
