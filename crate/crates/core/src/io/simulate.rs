//! Writing synthetic cohorts in the record formats.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::format::{fmt_num, round_sig};
use super::records::{RatingRecord, TrajectoryRecord};
use super::table::{create_dir, open, Table};
use crate::error::{Error, Result};
use crate::simulator::{generate_cohort, CohortDataset, ParticipantData, Role};
use crate::safety::SafetyParams;
use crate::simulator::CohortSpec;

fn sorted(ds: &CohortDataset) -> Vec<&ParticipantData> {
    let mut ps: Vec<&ParticipantData> = ds.participants.iter().collect();
    ps.sort_by(|a, b| a.participant.id.cmp(&b.participant.id));
    ps
}

fn trajectory_records(p: &ParticipantData) -> Vec<TrajectoryRecord> {
    p.trials
        .iter()
        .flat_map(|trial| {
            trial.samples.iter().map(move |s| TrajectoryRecord {
                participant_id: p.participant.id.clone(),
                role: p.participant.role,
                mode: trial.mode,
                trial: trial.trial,
                t: round_sig(s.t),
                d: round_sig(s.d),
                v: round_sig(s.v),
                bearing: s.bearing.map(round_sig),
            })
        })
        .collect()
}

fn rating_records(p: &ParticipantData, item: &str) -> Vec<RatingRecord> {
    p.trials
        .iter()
        .map(|trial| {
            let (value, scale_points, rating) = match trial.likert {
                Some(k) => (Some(k), Some(5), None),
                None => (None, None, Some(round_sig(trial.observation.rating))),
            };
            RatingRecord {
                participant_id: p.participant.id.clone(),
                role: p.participant.role,
                mode: trial.mode,
                trial: trial.trial,
                item: item.to_string(),
                value,
                scale_points,
                rating,
            }
        })
        .collect()
}

/// Trajectory and rating records in participant id order, trials in the
/// order they were run. Numbers are rounded to what the files hold.
pub fn dataset_records(ds: &CohortDataset) -> (Vec<TrajectoryRecord>, Vec<RatingRecord>) {
    let mut trajectories = Vec::new();
    let mut ratings = Vec::new();
    for p in sorted(ds) {
        trajectories.extend(trajectory_records(p));
        ratings.extend(rating_records(p, &ds.spec.item));
    }
    (trajectories, ratings)
}

/// Ground-truth manifest: one row per participant with its record counts.
pub fn truth_table(ds: &CohortDataset) -> Table {
    let mut table = Table::new(&[
        "participant_id",
        "role",
        "rho_star",
        "rating_noise",
        "quantize",
        "n_trials",
        "trajectory_rows",
        "rating_rows",
    ]);
    for p in sorted(ds) {
        let sp = &p.participant;
        table.push(vec![
            sp.id.clone(),
            sp.role.to_string(),
            fmt_num(sp.rho_star.get()),
            fmt_num(sp.rating_noise),
            sp.quantize.to_string(),
            p.trials.len().to_string(),
            p.trials.iter().map(|t| t.samples.len()).sum::<usize>().to_string(),
            p.trials.len().to_string(),
        ]);
    }
    table
}

/// One row of `truth.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthRecord {
    pub participant_id: String,
    pub role: Role,
    pub rho_star: f64,
    pub rating_noise: f64,
    pub quantize: bool,
    pub n_trials: usize,
    pub trajectory_rows: usize,
    pub rating_rows: usize,
}

pub fn read_truth(path: &Path) -> Result<Vec<TruthRecord>> {
    let mut reader = csv::Reader::from_reader(open(path)?);
    reader
        .deserialize()
        .enumerate()
        .map(|(i, row)| {
            row.map_err(|e| Error::Parse {
                line: i + 2,
                message: format!("{}: {e}", path.display()),
            })
        })
        .collect()
}

pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for record in records {
        serde_json::to_writer(&mut w, record).map_err(|e| Error::io(path, e.into()))?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub struct SimulateOutput {
    pub dataset: CohortDataset,
    pub trajectory_rows: usize,
    pub rating_rows: usize,
}

/// Generates a cohort and writes `trajectories.jsonl`, `ratings.jsonl` and
/// `truth.csv` into `out_dir`.
pub fn run_simulate(spec: &CohortSpec, params: &SafetyParams, seed: u64, out_dir: &Path) -> Result<SimulateOutput> {
    let dataset = generate_cohort(spec, params, seed)?;
    let (trajectories, ratings) = dataset_records(&dataset);
    create_dir(out_dir)?;
    write_jsonl(&out_dir.join("trajectories.jsonl"), &trajectories)?;
    write_jsonl(&out_dir.join("ratings.jsonl"), &ratings)?;
    truth_table(&dataset).write(&out_dir.join("truth.csv"))?;
    Ok(SimulateOutput {
        dataset,
        trajectory_rows: trajectories.len(),
        rating_rows: ratings.len(),
    })
}
