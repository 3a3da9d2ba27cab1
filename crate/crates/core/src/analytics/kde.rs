use std::f64::consts::PI;

use super::describe::silverman_bandwidth;
use crate::error::{Error, Result};
use crate::safety::linspace;

/// Half-width of the evaluation grid beyond the data, in bandwidths.
pub const KDE_TAIL: f64 = 4.0;

/// Gaussian KDE on `grid` evenly spaced points over
/// `[min - 4h, max + 4h]`. `bandwidth` defaults to Silverman's rule (1 for
/// constant data).
pub fn kde_1d(values: &[f64], bandwidth: Option<f64>, grid: usize) -> Result<Vec<(f64, f64)>> {
    if values.len() < 2 {
        return Err(Error::Validation(format!("kde needs at least 2 values, got {}", values.len())));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Validation("kde input contains non-finite values".into()));
    }
    let h = match bandwidth {
        Some(h) if h.is_finite() && h > 0.0 => h,
        Some(h) => return Err(Error::Validation(format!("bandwidth must be > 0, got {h}"))),
        None => match silverman_bandwidth(values) {
            h if h > 0.0 => h,
            _ => 1.0,
        },
    };
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min) - KDE_TAIL * h;
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max) + KDE_TAIL * h;
    let norm = 1.0 / (values.len() as f64 * h * (2.0 * PI).sqrt());
    Ok(linspace(lo, hi, grid)?
        .into_iter()
        .map(|x| {
            let density = values
                .iter()
                .map(|v| {
                    let u = (x - v) / h;
                    (-0.5 * u * u).exp()
                })
                .sum::<f64>()
                * norm;
            (x, density)
        })
        .collect())
}

/// Trapezoid-rule integral of a sampled curve.
pub fn trapezoid(series: &[(f64, f64)]) -> f64 {
    series
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0)
        .sum()
}
