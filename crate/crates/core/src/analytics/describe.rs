use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DescriptiveSummary {
    pub n: usize,
    pub mean: f64,
    /// Unbiased standard deviation; `None` for a single value.
    pub sd: Option<f64>,
    /// `sd / sqrt(n)`; `None` for a single value.
    pub se: Option<f64>,
    pub min: f64,
    pub max: f64,
}

pub fn describe(values: &[f64]) -> Result<DescriptiveSummary> {
    if values.is_empty() {
        return Err(Error::Validation("cannot describe an empty sample".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Validation("sample contains non-finite values".into()));
    }
    let n = values.len();
    let mean = mean(values);
    let sd = sample_sd(values);
    Ok(DescriptiveSummary {
        n,
        mean,
        sd,
        se: sd.map(|s| s / (n as f64).sqrt()),
        min: values.iter().copied().fold(f64::INFINITY, f64::min),
        max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    })
}

pub(crate) fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

pub(crate) fn sample_sd(values: &[f64]) -> Option<f64> {
    let n = values.len();
    if n < 2 {
        return None;
    }
    let m = mean(values);
    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    Some((ss / (n - 1) as f64).sqrt())
}

/// Linear-interpolation quantile of already sorted data.
pub(crate) fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Silverman's rule of thumb, `0.9 min(sd, IQR / 1.34) n^(-1/5)`.
/// Falls back to the standard deviation when the IQR vanishes and returns 0
/// for constant data.
pub fn silverman_bandwidth(values: &[f64]) -> f64 {
    let Some(sd) = sample_sd(values) else {
        return 0.0;
    };
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    0.9 * spread * (values.len() as f64).powf(-0.2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn constant_data() {
        let s = describe(&[0.5, 0.5, 0.5]).unwrap();
        assert_eq!(s.mean, 0.5);
        assert_eq!(s.sd, Some(0.0));
        assert_eq!(s.se, Some(0.0));
    }

    #[test]
    fn hand_computed() {
        let s = describe(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(s.mean, 2.5);
        assert_abs_diff_eq!(s.sd.unwrap(), (5.0f64 / 3.0).sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(s.sd.unwrap(), 1.2910, epsilon = 1e-4);
        assert_abs_diff_eq!(s.se.unwrap(), 0.6455, epsilon = 1e-4);
        assert_eq!((s.min, s.max), (1.0, 4.0));
    }

    #[test]
    fn singleton_and_empty() {
        let s = describe(&[7.0]).unwrap();
        assert_eq!(s.mean, 7.0);
        assert!(s.sd.is_none() && s.se.is_none());
        assert!(describe(&[]).is_err());
    }

    #[test]
    fn silverman_on_constant_data_is_zero() {
        assert_eq!(silverman_bandwidth(&[2.0, 2.0, 2.0]), 0.0);
        assert!(silverman_bandwidth(&[1.0, 2.0, 3.0, 10.0]) > 0.0);
    }
}
