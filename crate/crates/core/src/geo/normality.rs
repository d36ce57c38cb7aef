//! Shapiro-Wilk W statistic, Royston's AS R94 approximation of the
//! coefficients.

use crate::stats::normal_quantile;

use super::GeoError;

pub const SW_MIN_N: usize = 3;
pub const SW_MAX_N: usize = 5000;

const C1: [f64; 6] = [0.0, 0.221_157, -0.147_981, -2.071_190, 4.434_685, -2.706_056];
const C2: [f64; 6] = [0.0, 0.042_981, -0.293_762, -1.752_461, 5.682_633, -3.582_633];

fn poly(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &k| acc * x + k)
}

/// Antisymmetric weights for the lower half of the order statistics,
/// positive and normalized so the full weight vector has unit length.
fn coefficients(n: usize) -> Vec<f64> {
    let half = n / 2;
    if n == 3 {
        return vec![std::f64::consts::FRAC_1_SQRT_2];
    }
    let an25 = n as f64 + 0.25;
    let m: Vec<f64> = (1..=half).map(|i| normal_quantile((i as f64 - 0.375) / an25)).collect();
    let summ2 = 2.0 * m.iter().map(|v| v * v).sum::<f64>();
    let ssumm2 = summ2.sqrt();
    let rsn = 1.0 / (n as f64).sqrt();
    let a1 = poly(&C1, rsn) - m[0] / ssumm2;

    let mut a = vec![0.0; half];
    let first_scaled;
    let fac;
    if n > 5 {
        first_scaled = 2;
        let a2 = -m[1] / ssumm2 + poly(&C2, rsn);
        fac = ((summ2 - 2.0 * m[0] * m[0] - 2.0 * m[1] * m[1]) / (1.0 - 2.0 * a1 * a1 - 2.0 * a2 * a2)).sqrt();
        a[1] = a2;
    } else {
        first_scaled = 1;
        fac = ((summ2 - 2.0 * m[0] * m[0]) / (1.0 - 2.0 * a1 * a1)).sqrt();
    }
    a[0] = a1;
    for i in first_scaled..half {
        a[i] = -m[i] / fac;
    }
    a
}

/// W for `3 <= n <= 5000` observations; order of `xs` does not matter.
pub fn shapiro_wilk(xs: &[f64]) -> Result<f64, GeoError> {
    let n = xs.len();
    if !(SW_MIN_N..=SW_MAX_N).contains(&n) {
        return Err(GeoError::SampleSize { n, min: SW_MIN_N, max: SW_MAX_N });
    }
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(GeoError::Degenerate("non-finite value".into()));
    }
    let mut x = xs.to_vec();
    x.sort_by(f64::total_cmp);
    let range = x[n - 1] - x[0];
    if !(range > 1e-19 * x[n - 1].abs().max(1.0)) {
        return Err(GeoError::Degenerate("zero range".into()));
    }

    let a = coefficients(n);
    let mean = x.iter().sum::<f64>() / n as f64;
    // W is the squared correlation between the weights and the sorted sample.
    let mut numerator = 0.0;
    for (i, ai) in a.iter().enumerate() {
        numerator += ai * ((x[n - 1 - i] - mean) - (x[i] - mean));
    }
    let ssa: f64 = 2.0 * a.iter().map(|v| v * v).sum::<f64>();
    let ssx: f64 = x.iter().map(|v| (v - mean) * (v - mean)).sum();
    let w = numerator * numerator / (ssa * ssx);
    Ok(w.min(1.0))
}
