//! Joining ratings to trajectory segments and fitting rho per participant.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::Deserialize;

use super::config::RunConfig;
use super::format::{fmt_num, fmt_opt};
use super::records::{check_ratings, group_segments, read_jsonl, RatingRecord, Segment, SegmentKey, TrajectoryRecord};
use super::table::{create_dir, open, Table};
use crate::error::{Error, Result};
use crate::estimation::{build_observation, fit_rho, fit_rho_grid, Aggregation, EstimationResult, Method, Observation};
use crate::safety::SafetyParams;
use crate::simulator::Role;

/// A rating paired with the margin of the segment it describes. Keeps the
/// raw Likert answer next to the normalized rating.
#[derive(Debug, Clone, PartialEq)]
pub struct JoinedObservation {
    pub key: SegmentKey,
    pub role: Role,
    pub item: String,
    pub value: Option<u32>,
    pub scale_points: Option<u32>,
    pub observation: Observation,
}

pub fn load_segments(path: &Path) -> Result<BTreeMap<SegmentKey, Segment>> {
    let records: Vec<(usize, TrajectoryRecord)> = read_jsonl(open(path)?, &path.display().to_string())?;
    group_segments(&records)
}

pub fn load_ratings(path: &Path) -> Result<Vec<(usize, RatingRecord)>> {
    let records = read_jsonl(open(path)?, &path.display().to_string())?;
    check_ratings(&records)?;
    Ok(records)
}

/// Pairs every rating of a configured item with its segment's margin.
/// Ratings of other items are ignored, but every rating must still have a
/// segment.
pub fn join_observations(
    segments: &BTreeMap<SegmentKey, Segment>,
    ratings: &[(usize, RatingRecord)],
    items: &[String],
    aggregation: Aggregation,
    params: &SafetyParams,
) -> Result<Vec<JoinedObservation>> {
    check_ratings(ratings)?;
    let mut missing = BTreeSet::new();
    let mut joined = Vec::new();
    for (line, rating) in ratings {
        let key = rating.key();
        let Some(segment) = segments.get(&key) else {
            missing.insert(format!("{key} ({})", rating.item));
            continue;
        };
        if segment.role != rating.role {
            return Err(Error::Parse {
                line: *line,
                message: format!("rating role {} does not match trajectory role {} for {key}", rating.role, segment.role),
            });
        }
        if !items.contains(&rating.item) {
            continue;
        }
        let value = rating.normalized().map_err(|message| Error::Parse { line: *line, message })?;
        let observation = build_observation(&segment.samples, value, aggregation, params, key.to_string())?;
        joined.push(JoinedObservation {
            key,
            role: rating.role,
            item: rating.item.clone(),
            value: rating.value,
            scale_points: rating.scale_points,
            observation,
        });
    }
    if !missing.is_empty() {
        return Err(Error::Join {
            keys: missing.into_iter().collect(),
        });
    }
    joined.sort_by(|a, b| (&a.key, &a.item).cmp(&(&b.key, &b.item)));
    Ok(joined)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitStatus {
    Ok,
    UnidentifiableRho,
    Failed,
}

impl FitStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            FitStatus::Ok => "ok",
            FitStatus::UnidentifiableRho => "unidentifiable_rho",
            FitStatus::Failed => "failed",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitRow {
    pub participant_id: String,
    pub role: Role,
    pub n_obs: usize,
    pub status: FitStatus,
    pub note: String,
    pub result: Option<EstimationResult>,
    pub oracle_rho: Option<f64>,
}

impl FitRow {
    pub fn rho_hat(&self) -> Option<f64> {
        self.result.as_ref().map(|r| r.rho_hat.get())
    }

    pub fn oracle_gap(&self) -> Option<f64> {
        Some((self.rho_hat()? - self.oracle_rho?).abs())
    }

    pub fn summary(&self) -> FitSummary {
        FitSummary {
            participant_id: self.participant_id.clone(),
            role: self.role,
            status: self.status.as_str().to_string(),
            rho_hat: self.rho_hat(),
        }
    }
}

/// Fits every participant found in `joined`, in participant id order. A
/// participant whose fit fails gets a flagged row; the others are
/// unaffected.
pub fn fit_participants(joined: &[JoinedObservation], cfg: &RunConfig) -> Vec<FitRow> {
    let mut groups: BTreeMap<&str, (Role, Vec<Observation>)> = BTreeMap::new();
    for j in joined {
        groups
            .entry(&j.key.participant_id)
            .or_insert_with(|| (j.role, Vec::new()))
            .1
            .push(j.observation.clone());
    }
    groups
        .into_iter()
        .map(|(id, (role, obs))| {
            let mut row = FitRow {
                participant_id: id.to_string(),
                role,
                n_obs: obs.len(),
                status: FitStatus::Ok,
                note: String::new(),
                result: None,
                oracle_rho: None,
            };
            match fit_rho(&obs, &cfg.likelihood, cfg.fit.method, cfg.fit.grid_step) {
                Ok(result) => row.result = Some(result),
                Err(Error::UnidentifiableRho) => {
                    row.status = FitStatus::UnidentifiableRho;
                    row.note = "no margin strictly inside (0, 1)".into();
                }
                Err(e) => {
                    row.status = FitStatus::Failed;
                    row.note = e.to_string();
                }
            }
            if cfg.fit.oracle && cfg.fit.method != Method::Grid && row.result.is_some() {
                row.oracle_rho = fit_rho_grid(&obs, &cfg.likelihood, cfg.fit.grid_step)
                    .ok()
                    .map(|r| r.rho_hat.get());
            }
            row
        })
        .collect()
}

/// Diagnostics that deserve a human's attention.
pub fn fit_warnings(rows: &[FitRow], cfg: &RunConfig) -> Vec<String> {
    let mut warnings = Vec::new();
    for row in rows {
        let id = &row.participant_id;
        match row.status {
            FitStatus::Ok => {}
            FitStatus::UnidentifiableRho => warnings.push(format!("{id}: rho is unidentifiable")),
            FitStatus::Failed => warnings.push(format!("{id}: fit failed: {}", row.note)),
        }
        if let Some(result) = &row.result {
            if !result.converged {
                warnings.push(format!("{id}: {} did not converge", result.method.as_str()));
            }
        }
        if let Some(gap) = row.oracle_gap() {
            if gap > cfg.fit.oracle_tolerance {
                warnings.push(format!("{id}: grid oracle differs by {}", fmt_num(gap)));
            }
        }
    }
    warnings
}

pub const FIT_COLUMNS: [&str; 15] = [
    "participant_id",
    "role",
    "status",
    "method",
    "aggregation",
    "n_obs",
    "rho_hat",
    "log_lik",
    "sse",
    "iterations",
    "converged",
    "at_bound",
    "oracle_rho",
    "oracle_gap",
    "note",
];

pub fn fit_table(rows: &[FitRow], cfg: &RunConfig) -> Table {
    let mut table = Table::new(&FIT_COLUMNS);
    for row in rows {
        let r = row.result.as_ref();
        table.push(vec![
            row.participant_id.clone(),
            row.role.to_string(),
            row.status.as_str().into(),
            cfg.fit.method.as_str().into(),
            cfg.fit.aggregation.as_str().into(),
            row.n_obs.to_string(),
            fmt_opt(row.rho_hat()),
            fmt_opt(r.map(|r| r.log_lik)),
            fmt_opt(r.map(|r| r.sse)),
            r.map(|r| r.iterations.to_string()).unwrap_or_default(),
            r.map(|r| r.converged.to_string()).unwrap_or_default(),
            r.map(|r| r.at_bound.to_string()).unwrap_or_default(),
            fmt_opt(row.oracle_rho),
            fmt_opt(row.oracle_gap()),
            row.note.clone(),
        ]);
    }
    table
}

pub fn observation_table(joined: &[JoinedObservation]) -> Table {
    let mut table = Table::new(&[
        "participant_id",
        "role",
        "mode",
        "trial",
        "item",
        "value",
        "scale_points",
        "rating",
        "margin",
    ]);
    for j in joined {
        table.push(vec![
            j.key.participant_id.clone(),
            j.role.to_string(),
            j.key.mode.to_string(),
            j.key.trial.to_string(),
            j.item.clone(),
            j.value.map(|v| v.to_string()).unwrap_or_default(),
            j.scale_points.map(|v| v.to_string()).unwrap_or_default(),
            fmt_num(j.observation.rating),
            fmt_num(j.observation.margin),
        ]);
    }
    table
}

/// The part of a fit report that downstream analysis needs.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct FitSummary {
    pub participant_id: String,
    pub role: Role,
    pub status: String,
    pub rho_hat: Option<f64>,
}

pub fn read_fit_summaries(path: &Path) -> Result<Vec<FitSummary>> {
    let mut reader = csv::Reader::from_reader(open(path)?);
    let mut rows = Vec::new();
    for (i, row) in reader.deserialize().enumerate() {
        let row: FitSummary = row.map_err(|e| Error::Parse {
            line: i + 2,
            message: format!("{}: {e}", path.display()),
        })?;
        if row.status == FitStatus::Ok.as_str() && row.rho_hat.is_none() {
            return Err(Error::Parse {
                line: i + 2,
                message: format!("{}: ok row without rho_hat", path.display()),
            });
        }
        rows.push(row);
    }
    Ok(rows)
}

pub struct FitOutput {
    pub rows: Vec<FitRow>,
    pub joined: Vec<JoinedObservation>,
    pub warnings: Vec<String>,
}

/// Reads both inputs, fits, and writes `fit.csv` and `observations.csv`.
pub fn run_fit(trajectories: &Path, ratings: &Path, cfg: &RunConfig, out_dir: &Path) -> Result<FitOutput> {
    let segments = load_segments(trajectories)?;
    let ratings = load_ratings(ratings)?;
    let joined = join_observations(&segments, &ratings, &cfg.fit.items, cfg.fit.aggregation, &cfg.safety)?;
    let rows = fit_participants(&joined, cfg);
    let warnings = fit_warnings(&rows, cfg);
    create_dir(out_dir)?;
    fit_table(&rows, cfg).write(&out_dir.join("fit.csv"))?;
    observation_table(&joined).write(&out_dir.join("observations.csv"))?;
    Ok(FitOutput { rows, joined, warnings })
}
