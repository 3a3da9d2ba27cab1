//! Generalized safety index (GSI) with a personalization exponent.
//!
//! The score for one human at distance `d` approaching at relative speed `v` is
//!
//! ```text
//! margin = (d - (s(v) * v^2 / (2 * a_max) + d_min)) / (d_max - d_min)
//! gsi    = clip(max(margin, 0)^rho, 0, 1)
//! ```
//!
//! where `s(v)` is the sign of the relative velocity (positive when the human
//! and robot close in). Everything here is a pure function of its arguments.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest admissible personalization exponent.
pub const RHO_MIN: f64 = 0.01;
/// Largest admissible personalization exponent.
pub const RHO_MAX: f64 = 10.0;

/// Personalization exponent, always inside `[RHO_MIN, RHO_MAX]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
#[serde(transparent)]
pub struct Rho(f64);

impl Rho {
    pub const ONE: Rho = Rho(1.0);

    pub fn new(value: f64) -> Result<Self> {
        if value.is_finite() && (RHO_MIN..=RHO_MAX).contains(&value) {
            Ok(Rho(value))
        } else {
            Err(Error::InvalidRho(value))
        }
    }

    /// Projects any finite value onto the admissible interval.
    pub fn clamped(value: f64) -> Self {
        if value.is_nan() {
            return Rho(RHO_MIN);
        }
        Rho(value.clamp(RHO_MIN, RHO_MAX))
    }

    pub fn get(self) -> f64 {
        self.0
    }

    /// True when the value sits on either end of the admissible interval.
    pub fn at_bound(self) -> bool {
        self.0 <= RHO_MIN || self.0 >= RHO_MAX
    }
}

impl<'de> Deserialize<'de> for Rho {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let value = f64::deserialize(deserializer)?;
        Rho::new(value).map_err(serde::de::Error::custom)
    }
}

impl std::fmt::Display for Rho {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

/// Physical constants of the index and the proxemics band edges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SafetyParams {
    /// Robot's maximum (de-)acceleration, m/s².
    pub a_max: f64,
    /// Minimum allowable distance, m.
    pub d_min: f64,
    /// Distance regarded as fully safe, m.
    pub d_max: f64,
    /// Intimate/personal, personal/social and social/public boundaries, m.
    pub zone_edges: [f64; 3],
}

impl Default for SafetyParams {
    fn default() -> Self {
        SafetyParams {
            a_max: 0.5,
            d_min: 0.46,
            d_max: 3.7,
            zone_edges: [0.46, 1.2, 3.7],
        }
    }
}

impl SafetyParams {
    pub fn with_a_max(a_max: f64) -> Self {
        SafetyParams {
            a_max,
            ..SafetyParams::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a_max.is_finite() && self.a_max > 0.0) {
            return Err(Error::InvalidParams(format!("a_max must be > 0, got {}", self.a_max)));
        }
        if !(self.d_min.is_finite() && self.d_max.is_finite() && 0.0 < self.d_min && self.d_min < self.d_max) {
            return Err(Error::InvalidParams(format!(
                "need 0 < d_min < d_max, got d_min = {}, d_max = {}",
                self.d_min, self.d_max
            )));
        }
        let [a, b, c] = self.zone_edges;
        if !(a.is_finite() && c.is_finite() && 0.0 < a && a < b && b < c) {
            return Err(Error::InvalidParams(format!(
                "zone edges must be positive and strictly increasing, got {:?}",
                self.zone_edges
            )));
        }
        Ok(())
    }

    fn span(&self) -> f64 {
        self.d_max - self.d_min
    }
}

/// One timestamped reading of a human relative to the robot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub d: f64,
    /// Positive when the human and the robot are closing in.
    pub v: f64,
    /// Recorded for completeness; the index does not use it.
    pub bearing: Option<f64>,
}

impl TrajectorySample {
    pub fn new(t: f64, d: f64, v: f64) -> Self {
        TrajectorySample { t, d, v, bearing: None }
    }

    pub fn margin(&self, params: &SafetyParams) -> f64 {
        safety_margin(self.d, self.v, params)
    }
}

/// Hall's interpersonal distance bands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ProxemicsZone {
    Intimate,
    Personal,
    Social,
    Public,
}

impl ProxemicsZone {
    pub fn as_str(self) -> &'static str {
        match self {
            ProxemicsZone::Intimate => "intimate",
            ProxemicsZone::Personal => "personal",
            ProxemicsZone::Social => "social",
            ProxemicsZone::Public => "public",
        }
    }
}

impl std::fmt::Display for ProxemicsZone {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Signed stopping distance `s(v) v² / (2 a_max)`, with `s(0) = +1`.
pub fn stopping_distance(v: f64, params: &SafetyParams) -> f64 {
    let sign = if v >= 0.0 { 1.0 } else { -1.0 };
    sign * v * v / (2.0 * params.a_max)
}

/// Normalized distance surplus before exponentiation and clipping.
/// May be negative or exceed one.
pub fn safety_margin(d: f64, v: f64, params: &SafetyParams) -> f64 {
    (d - (stopping_distance(v, params) + params.d_min)) / params.span()
}

/// `clip(max(margin, 0)^rho, 0, 1)`.
///
/// The margin is clamped at zero before exponentiation; a negative base with
/// a fractional exponent has no real value.
pub fn gsi_from_margin(margin: f64, rho: Rho) -> f64 {
    pow_clipped(margin, rho.get())
}

pub(crate) fn pow_clipped(margin: f64, rho: f64) -> f64 {
    if margin <= 0.0 {
        0.0
    } else if margin >= 1.0 {
        1.0
    } else {
        margin.powf(rho)
    }
}

/// Safety score in `[0, 1]`; 0 means at risk, 1 means safe.
pub fn gsi(d: f64, v: f64, rho: Rho, params: &SafetyParams) -> f64 {
    gsi_from_margin(safety_margin(d, v, params), rho)
}

/// Derivative of the clipped score with respect to rho at a fixed margin.
/// Zero wherever clipping is active.
pub fn gsi_grad_rho(margin: f64, rho: Rho) -> f64 {
    grad_rho_raw(margin, rho.get())
}

pub(crate) fn grad_rho_raw(margin: f64, rho: f64) -> f64 {
    if margin <= 0.0 || margin >= 1.0 {
        0.0
    } else {
        margin.powf(rho) * margin.ln()
    }
}

/// Proxemics band containing `d`. Bands are half-open `[lo, hi)`.
pub fn classify_zone(d: f64, params: &SafetyParams) -> ProxemicsZone {
    let [intimate, personal, social] = params.zone_edges;
    if d < intimate {
        ProxemicsZone::Intimate
    } else if d < personal {
        ProxemicsZone::Personal
    } else if d < social {
        ProxemicsZone::Social
    } else {
        ProxemicsZone::Public
    }
}

/// Uniformly sampled `(d, gsi)` series over `[d_lo, d_hi]` at fixed `v`.
pub fn gsi_curve(
    rho: Rho,
    v: f64,
    params: &SafetyParams,
    d_lo: f64,
    d_hi: f64,
    n_points: usize,
) -> Result<Vec<(f64, f64)>> {
    let grid = linspace(d_lo, d_hi, n_points)?;
    Ok(grid.into_iter().map(|d| (d, gsi(d, v, rho, params))).collect())
}

/// `n` evenly spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::InvalidRange(format!("need lo < hi, got [{lo}, {hi}]")));
    }
    if n < 2 {
        return Err(Error::InvalidRange(format!("need at least 2 points, got {n}")));
    }
    let step = (hi - lo) / (n - 1) as f64;
    Ok((0..n)
        .map(|i| if i + 1 == n { hi } else { lo + i as f64 * step })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn slow() -> SafetyParams {
        SafetyParams::with_a_max(0.5)
    }

    #[test]
    fn stopping_distance_examples() {
        assert_eq!(stopping_distance(0.0, &slow()), 0.0);
        assert_abs_diff_eq!(stopping_distance(1.0, &slow()), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(stopping_distance(-0.5, &slow()), -0.25, epsilon = 1e-15);
    }

    #[test]
    fn margin_examples() {
        let p = SafetyParams::default();
        assert_abs_diff_eq!(safety_margin(3.7, 0.0, &p), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(safety_margin(0.46, 0.0, &p), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(safety_margin(2.08, 1.0, &slow()), 0.62 / 3.24, epsilon = 1e-12);
        assert_abs_diff_eq!(safety_margin(2.08, 1.0, &slow()), 0.19136, epsilon = 1e-5);
    }

    #[test]
    fn gsi_examples() {
        let p = SafetyParams::default();
        assert_eq!(gsi(3.7, 0.0, Rho::new(5.0).unwrap(), &p), 1.0);
        assert_abs_diff_eq!(gsi(2.08, 1.0, Rho::ONE, &slow()), 0.19136, epsilon = 1e-5);
        let cas_mean = Rho::new(0.29).unwrap();
        assert_abs_diff_eq!(gsi_from_margin(0.5, cas_mean), (0.29 * 0.5f64.ln()).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(gsi_from_margin(0.5, cas_mean), 0.8179, epsilon = 1e-4);
        for rho in [0.01, 0.5, 1.0, 7.0] {
            assert_eq!(gsi(0.3, 2.0, Rho::new(rho).unwrap(), &p), 0.0);
        }
    }

    #[test]
    fn grad_examples() {
        assert_eq!(gsi_grad_rho(1.0, Rho::new(2.0).unwrap()), 0.0);
        assert_abs_diff_eq!(gsi_grad_rho(0.5, Rho::ONE), -0.34657, epsilon = 1e-5);
        assert_eq!(gsi_grad_rho(0.0, Rho::new(0.5).unwrap()), 0.0);
        assert_eq!(gsi_grad_rho(-0.3, Rho::ONE), 0.0);
        assert_eq!(gsi_grad_rho(1.4, Rho::ONE), 0.0);
    }

    #[test]
    fn zone_examples() {
        let p = SafetyParams::default();
        assert_eq!(classify_zone(0.2, &p), ProxemicsZone::Intimate);
        assert_eq!(classify_zone(0.46, &p), ProxemicsZone::Personal);
        assert_eq!(classify_zone(1.2, &p), ProxemicsZone::Social);
        assert_eq!(classify_zone(3.7, &p), ProxemicsZone::Public);
        assert_eq!(classify_zone(5.0, &p), ProxemicsZone::Public);
        assert_eq!(classify_zone(0.0, &p), ProxemicsZone::Intimate);
    }

    #[test]
    fn curve_examples() {
        let p = SafetyParams::default();
        let curve = gsi_curve(Rho::ONE, 0.0, &p, 0.46, 3.7, 3).unwrap();
        let expected = [(0.46, 0.0), (2.08, 0.5), (3.7, 1.0)];
        for ((d, g), (ed, eg)) in curve.iter().zip(expected) {
            assert_abs_diff_eq!(*d, ed, epsilon = 1e-12);
            assert_abs_diff_eq!(*g, eg, epsilon = 1e-12);
        }

        let far = gsi_curve(Rho::ONE, 0.0, &p, 3.7, 5.0, 17).unwrap();
        assert!(far.iter().all(|&(_, g)| g == 1.0));

        let lo = gsi_curve(Rho::new(0.5).unwrap(), 0.0, &p, 0.0, 4.0, 101).unwrap();
        let mid = gsi_curve(Rho::ONE, 0.0, &p, 0.0, 4.0, 101).unwrap();
        let hi = gsi_curve(Rho::new(2.0).unwrap(), 0.0, &p, 0.0, 4.0, 101).unwrap();
        for i in 0..101 {
            assert!(lo[i].1 >= mid[i].1 && mid[i].1 >= hi[i].1);
        }
    }

    #[test]
    fn curve_rejects_bad_ranges() {
        let p = SafetyParams::default();
        assert!(matches!(gsi_curve(Rho::ONE, 0.0, &p, 2.0, 1.0, 10), Err(Error::InvalidRange(_))));
        assert!(matches!(gsi_curve(Rho::ONE, 0.0, &p, 0.0, 1.0, 1), Err(Error::InvalidRange(_))));
    }

    #[test]
    fn params_validation() {
        assert!(SafetyParams::default().validate().is_ok());
        assert!(SafetyParams::with_a_max(0.0).validate().is_err());
        let swapped = SafetyParams {
            d_min: 4.0,
            ..SafetyParams::default()
        };
        assert!(swapped.validate().is_err());
        let edges = SafetyParams {
            zone_edges: [0.46, 0.46, 3.7],
            ..SafetyParams::default()
        };
        assert!(edges.validate().is_err());
    }

    #[test]
    fn rho_bounds() {
        assert!(Rho::new(0.01).is_ok());
        assert!(Rho::new(10.0).is_ok());
        assert!(Rho::new(0.0).is_err());
        assert!(Rho::new(f64::NAN).is_err());
        assert_eq!(Rho::clamped(42.0).get(), RHO_MAX);
        assert!(serde_json::from_str::<Rho>("0.001").is_err());
    }

    proptest! {
        #[test]
        fn score_in_unit_interval(d in 0.0..6.0f64, v in -2.0..2.0f64, rho in RHO_MIN..RHO_MAX) {
            let g = gsi(d, v, Rho::new(rho).unwrap(), &SafetyParams::default());
            prop_assert!((0.0..=1.0).contains(&g));
        }

        #[test]
        fn grad_matches_central_difference(m in 0.05..0.95f64, rho in 0.1..5.0f64) {
            let h = 1e-5;
            let fd = (pow_clipped(m, rho + h) - pow_clipped(m, rho - h)) / (2.0 * h);
            let analytic = grad_rho_raw(m, rho);
            prop_assert!(((analytic - fd) / analytic).abs() < 1e-6);
        }

        #[test]
        fn zones_monotone(a in 0.0..8.0f64, b in 0.0..8.0f64) {
            let p = SafetyParams::default();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(classify_zone(lo, &p) <= classify_zone(hi, &p));
        }
    }
}
