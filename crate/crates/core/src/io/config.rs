//! TOML run configuration. Every section is optional; unknown keys are
//! rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analytics::ZeroMethod;
use crate::error::{Error, Result};
use crate::estimation::{Aggregation, LikelihoodConfig, Method};
use crate::safety::{Rho, SafetyParams};
use crate::simulator::{CohortSpec, DEFAULT_ITEM};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
    pub safety: SafetyParams,
    pub likelihood: LikelihoodConfig,
    pub fit: FitOptions,
    pub clustering: ClusteringOptions,
    pub analysis: AnalysisOptions,
    pub simulate: CohortSpec,
    pub score: ScoreOptions,
    pub curves: CurveOptions,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 7,
            out_dir: None,
            safety: SafetyParams::default(),
            likelihood: LikelihoodConfig::default(),
            fit: FitOptions::default(),
            clustering: ClusteringOptions::default(),
            analysis: AnalysisOptions::default(),
            simulate: CohortSpec::default(),
            score: ScoreOptions::default(),
            curves: CurveOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitOptions {
    pub method: Method,
    pub aggregation: Aggregation,
    /// Spacing of the oracle grid in rho.
    pub grid_step: f64,
    /// Questionnaire items paired with trajectory segments.
    pub items: Vec<String>,
    /// Cross-check every fit against the grid.
    pub oracle: bool,
    /// Oracle gaps above this are reported as warnings.
    pub oracle_tolerance: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            method: Method::QuasiNewton,
            aggregation: Aggregation::WorstCase,
            grid_step: 1e-3,
            items: vec![DEFAULT_ITEM.to_string()],
            oracle: true,
            oracle_tolerance: 2e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClusteringOptions {
    /// Mean-shift bandwidth; Silverman's rule when absent.
    pub bandwidth: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisOptions {
    pub kde_points: usize,
    /// KDE bandwidth; Silverman's rule when absent.
    pub kde_bandwidth: Option<f64>,
    pub zero_method: ZeroMethod,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            kde_points: 256,
            kde_bandwidth: None,
            zero_method: ZeroMethod::Drop,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScoreOptions {
    pub rho: Rho,
}

impl Default for ScoreOptions {
    fn default() -> Self {
        ScoreOptions { rho: Rho::ONE }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CurveOptions {
    pub rhos: Vec<Rho>,
    pub v: f64,
    /// Distance resolution, m.
    pub step: f64,
}

impl Default for CurveOptions {
    fn default() -> Self {
        CurveOptions {
            rhos: [0.5, 1.0, 2.0].map(Rho::clamped).to_vec(),
            v: 0.0,
            step: 0.01,
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.safety.validate()?;
        self.likelihood.validate()?;
        self.simulate.validate()?;
        let fit = &self.fit;
        if !(fit.grid_step.is_finite() && fit.grid_step > 0.0) {
            return Err(Error::Config(format!("fit.grid_step must be > 0, got {}", fit.grid_step)));
        }
        if fit.items.is_empty() || fit.items.iter().any(String::is_empty) {
            return Err(Error::Config("fit.items must list at least one non-empty item".into()));
        }
        if !(fit.oracle_tolerance.is_finite() && fit.oracle_tolerance >= 0.0) {
            return Err(Error::Config("fit.oracle_tolerance must be >= 0".into()));
        }
        for (name, h) in [
            ("clustering.bandwidth", self.clustering.bandwidth),
            ("analysis.kde_bandwidth", self.analysis.kde_bandwidth),
        ] {
            if h.is_some_and(|h| !(h.is_finite() && h > 0.0)) {
                return Err(Error::Config(format!("{name} must be > 0")));
            }
        }
        if self.analysis.kde_points < 2 {
            return Err(Error::Config("analysis.kde_points must be >= 2".into()));
        }
        let curves = &self.curves;
        if curves.rhos.is_empty() {
            return Err(Error::Config("curves.rhos must not be empty".into()));
        }
        if !curves.v.is_finite() {
            return Err(Error::Config("curves.v must be finite".into()));
        }
        if !(curves.step.is_finite() && curves.step > 0.0) {
            return Err(Error::Config(format!("curves.step must be > 0, got {}", curves.step)));
        }
        Ok(())
    }
}
