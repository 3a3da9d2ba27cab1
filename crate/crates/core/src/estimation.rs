//! Maximum-likelihood fitting of the personalization exponent.
//!
//! Ratings are modelled as `rating_i = gsi(margin_i; rho) + e_i` with Gaussian
//! `e_i`, so the log-likelihood is `-(1 / 2 sigma^2) * sum (rating_i - gsi_i)^2`.
//! Three maximizers are provided: a one-dimensional quasi-Newton search in
//! `ln rho`, the plain projected gradient-ascent update with a fixed learning
//! rate, and an exhaustive grid that serves as an independent oracle.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::safety::{grad_rho_raw, pow_clipped, Rho, SafetyParams, TrajectorySample, RHO_MAX, RHO_MIN};

/// One (margin, rating) pair. The atom of estimation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub margin: f64,
    /// Normalized perceived safety in `[0, 1]`.
    pub rating: f64,
    pub segment_id: String,
}

impl Observation {
    pub fn new(margin: f64, rating: f64) -> Self {
        Observation {
            margin,
            rating,
            segment_id: String::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.margin.is_finite() {
            return Err(Error::Validation(format!("margin must be finite ({})", self.segment_id)));
        }
        if !(0.0..=1.0).contains(&self.rating) {
            return Err(Error::Validation(format!(
                "rating {} outside [0, 1] ({})",
                self.rating, self.segment_id
            )));
        }
        Ok(())
    }

    /// Whether this observation carries information about rho.
    pub fn is_informative(&self) -> bool {
        self.margin > 0.0 && self.margin < 1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LikelihoodConfig {
    /// Residual noise scale.
    pub sigma: f64,
    /// Learning rate of the fixed-step update.
    pub eta: f64,
    pub max_iters: usize,
    /// Convergence tolerance on the step in rho (and on the gradient).
    pub tol: f64,
    pub rho_init: f64,
}

impl Default for LikelihoodConfig {
    fn default() -> Self {
        LikelihoodConfig {
            sigma: 1.0,
            eta: 0.01,
            max_iters: 500,
            tol: 1e-6,
            rho_init: 1.0,
        }
    }
}

impl LikelihoodConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |x: f64| x.is_finite() && x > 0.0;
        if !positive(self.sigma) {
            return Err(Error::Validation(format!("sigma must be > 0, got {}", self.sigma)));
        }
        if !positive(self.eta) {
            return Err(Error::Validation(format!("eta must be > 0, got {}", self.eta)));
        }
        if !positive(self.tol) {
            return Err(Error::Validation(format!("tol must be > 0, got {}", self.tol)));
        }
        Rho::new(self.rho_init)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    QuasiNewton,
    FixedStep,
    Grid,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::QuasiNewton => "quasi_newton",
            Method::FixedStep => "fixed_step",
            Method::Grid => "grid",
        }
    }
}

/// How a trajectory segment is reduced to the single margin its rating is
/// paired with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    /// Smallest margin in the segment.
    #[default]
    WorstCase,
    Mean,
}

impl Aggregation {
    pub fn as_str(self) -> &'static str {
        match self {
            Aggregation::WorstCase => "worst_case",
            Aggregation::Mean => "mean",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimationResult {
    pub rho_hat: Rho,
    pub log_lik: f64,
    pub n_obs: usize,
    pub iterations: usize,
    pub converged: bool,
    pub method: Method,
    pub sse: f64,
    /// The estimate sits on an end of the admissible interval.
    pub at_bound: bool,
}

/// Maps a `k`-of-`scale_points` Likert answer onto `[0, 1]`.
pub fn normalize_likert(k: u32, scale_points: u32) -> Result<f64> {
    if scale_points != 5 && scale_points != 7 {
        return Err(Error::Validation(format!(
            "scale must have 5 or 7 points, got {scale_points}"
        )));
    }
    if k < 1 || k > scale_points {
        return Err(Error::Validation(format!(
            "Likert value {k} outside 1..={scale_points}"
        )));
    }
    Ok((k - 1) as f64 / (scale_points - 1) as f64)
}

/// Reduces a trajectory segment to one observation.
pub fn build_observation(
    samples: &[TrajectorySample],
    rating: f64,
    aggregation: Aggregation,
    params: &SafetyParams,
    segment_id: impl Into<String>,
) -> Result<Observation> {
    if samples.is_empty() {
        return Err(Error::Validation("cannot build an observation from an empty segment".into()));
    }
    let margins = samples.iter().map(|s| s.margin(params));
    let margin = match aggregation {
        Aggregation::WorstCase => margins.fold(f64::INFINITY, f64::min),
        Aggregation::Mean => margins.sum::<f64>() / samples.len() as f64,
    };
    let obs = Observation {
        margin,
        rating,
        segment_id: segment_id.into(),
    };
    obs.validate()?;
    Ok(obs)
}

fn check_observations(obs: &[Observation]) -> Result<()> {
    if obs.is_empty() {
        return Err(Error::Validation("at least one observation is required".into()));
    }
    obs.iter().try_for_each(Observation::validate)
}

fn sse_at(rho: f64, obs: &[Observation]) -> f64 {
    obs.iter()
        .map(|o| {
            let r = o.rating - pow_clipped(o.margin, rho);
            r * r
        })
        .sum()
}

/// `d sse / d rho` scaled as `sum residual * d gsi / d rho`.
fn residual_grad_at(rho: f64, obs: &[Observation]) -> f64 {
    obs.iter()
        .map(|o| (o.rating - pow_clipped(o.margin, rho)) * grad_rho_raw(o.margin, rho))
        .sum()
}

pub fn log_likelihood(rho: Rho, obs: &[Observation], cfg: &LikelihoodConfig) -> Result<f64> {
    check_observations(obs)?;
    Ok(-sse_at(rho.get(), obs) / (2.0 * cfg.sigma * cfg.sigma))
}

/// Analytic `dl / d rho`.
pub fn log_likelihood_grad(rho: Rho, obs: &[Observation], cfg: &LikelihoodConfig) -> Result<f64> {
    check_observations(obs)?;
    Ok(residual_grad_at(rho.get(), obs) / (cfg.sigma * cfg.sigma))
}

fn require_identifiable(obs: &[Observation]) -> Result<()> {
    if obs.iter().any(Observation::is_informative) {
        Ok(())
    } else {
        Err(Error::UnidentifiableRho)
    }
}

fn finish(rho: f64, obs: &[Observation], cfg: &LikelihoodConfig, iterations: usize, converged: bool, method: Method) -> EstimationResult {
    let rho_hat = Rho::clamped(rho);
    let sse = sse_at(rho_hat.get(), obs);
    EstimationResult {
        rho_hat,
        log_lik: -sse / (2.0 * cfg.sigma * cfg.sigma),
        n_obs: obs.len(),
        iterations,
        converged,
        method,
        sse,
        at_bound: rho_hat.at_bound(),
    }
}

/// Quasi-Newton maximization over `xi = ln rho` with a box on `xi` and a
/// backtracking (sufficient-decrease) line search.
///
/// In one dimension the BFGS inverse-Hessian update reduces to the secant
/// ratio `s / y`, which is kept only while the curvature condition `s y > 0`
/// holds.
pub fn fit_rho_quasi_newton(obs: &[Observation], cfg: &LikelihoodConfig) -> Result<EstimationResult> {
    check_observations(obs)?;
    cfg.validate()?;
    require_identifiable(obs)?;

    let (lo, hi) = (RHO_MIN.ln(), RHO_MAX.ln());
    let scale = 1.0 / (2.0 * cfg.sigma * cfg.sigma);
    // Minimize f(xi) = -l(exp(xi)).
    let f = |xi: f64| scale * sse_at(xi.exp(), obs);
    let g = |xi: f64| {
        let rho = xi.exp();
        -2.0 * scale * residual_grad_at(rho, obs) * rho
    };
    // Gradient with the components that push out of the box removed.
    let projected = |xi: f64, grad: f64| {
        if (xi <= lo && grad > 0.0) || (xi >= hi && grad < 0.0) {
            0.0
        } else {
            grad
        }
    };

    let mut xi = cfg.rho_init.ln().clamp(lo, hi);
    let mut fx = f(xi);
    let mut gx = g(xi);
    let mut inv_hess = 1.0;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < cfg.max_iters {
        if projected(xi, gx).abs() < cfg.tol {
            converged = true;
            break;
        }
        iterations += 1;

        let direction = -inv_hess * gx;
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let candidate = (xi + alpha * direction).clamp(lo, hi);
            let fc = f(candidate);
            // Armijo condition on the projected step.
            if fc <= fx + 1e-4 * gx * (candidate - xi) {
                accepted = Some((candidate, fc));
                break;
            }
            alpha *= 0.5;
        }
        let Some((next, f_next)) = accepted else {
            // No decrease possible along the projected direction.
            converged = true;
            break;
        };

        let g_next = g(next);
        let s = next - xi;
        let y = g_next - gx;
        if s * y > 1e-300 {
            inv_hess = s / y;
        }
        let rho_step = (next.exp() - xi.exp()).abs();
        xi = next;
        fx = f_next;
        gx = g_next;
        if rho_step < cfg.tol {
            converged = true;
            break;
        }
    }

    if !converged && projected(xi, gx).abs() < cfg.tol {
        converged = true;
    }
    let rho = if xi <= lo {
        RHO_MIN
    } else if xi >= hi {
        RHO_MAX
    } else {
        xi.exp()
    };
    Ok(finish(rho, obs, cfg, iterations, converged, Method::QuasiNewton))
}

/// Projected gradient ascent `rho <- rho + eta * dl/drho` in the original
/// parameterization.
pub fn fit_rho_fixed_step(obs: &[Observation], cfg: &LikelihoodConfig) -> Result<EstimationResult> {
    check_observations(obs)?;
    cfg.validate()?;
    require_identifiable(obs)?;

    let inv_var = 1.0 / (cfg.sigma * cfg.sigma);
    let mut rho = cfg.rho_init;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < cfg.max_iters {
        let grad = residual_grad_at(rho, obs) * inv_var;
        let next = (rho + cfg.eta * grad).clamp(RHO_MIN, RHO_MAX);
        let step = (next - rho).abs();
        if step < cfg.tol {
            converged = true;
            break;
        }
        rho = next;
        iterations += 1;
    }
    Ok(finish(rho, obs, cfg, iterations, converged, Method::FixedStep))
}

/// Exhaustive search over `RHO_MIN, RHO_MIN + step, ...` up to `RHO_MAX`.
///
/// Ties go to the smaller rho. A flat likelihood (no informative
/// observation) is not an error here: the smallest grid point is returned with
/// `converged = false`.
pub fn fit_rho_grid(obs: &[Observation], cfg: &LikelihoodConfig, grid_step: f64) -> Result<EstimationResult> {
    check_observations(obs)?;
    cfg.validate()?;
    if !(grid_step.is_finite() && grid_step > 0.0) {
        return Err(Error::Validation(format!("grid step must be > 0, got {grid_step}")));
    }

    let n_points = ((RHO_MAX - RHO_MIN) / grid_step + 1e-9).floor() as usize + 1;
    let mut best_rho = RHO_MIN;
    let mut best_sse = f64::INFINITY;
    for k in 0..n_points {
        let rho = RHO_MIN + k as f64 * grid_step;
        let sse = sse_at(rho, obs);
        if sse < best_sse {
            best_sse = sse;
            best_rho = rho;
        }
    }
    let identifiable = obs.iter().any(Observation::is_informative);
    Ok(finish(best_rho, obs, cfg, n_points, identifiable, Method::Grid))
}

/// Runs the requested maximizer.
pub fn fit_rho(obs: &[Observation], cfg: &LikelihoodConfig, method: Method, grid_step: f64) -> Result<EstimationResult> {
    match method {
        Method::QuasiNewton => fit_rho_quasi_newton(obs, cfg),
        Method::FixedStep => fit_rho_fixed_step(obs, cfg),
        Method::Grid => {
            require_identifiable(obs)?;
            fit_rho_grid(obs, cfg, grid_step)
        }
    }
}
