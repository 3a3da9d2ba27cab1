//! Cohort analysis on fitted exponents: descriptives, role and trial
//! contrasts, rating/GSI correlations, per-role clusters and KDE series.

use std::collections::BTreeMap;
use std::path::Path;

use super::config::RunConfig;
use super::fit::{join_observations, load_ratings, load_segments, read_fit_summaries, FitSummary, JoinedObservation};
use super::format::{fmt_num, fmt_opt};
use super::records::SegmentKey;
use super::simulate::{read_truth, TruthRecord};
use super::table::{create_dir, Table};
use crate::analytics::{
    describe, kde_1d, mann_whitney_u, mean_shift, pearson, wilcoxon_signed_rank_with, ClusterResult,
    DescriptiveSummary, TestMethod, TestResult,
};
use crate::error::{Error, Result};
use crate::safety::{gsi_from_margin, Rho};
use crate::simulator::{Mode, Role};

/// Report order of the roles.
pub const ROLES: [Role; 2] = [Role::Casualty, Role::Bystander];

#[derive(Debug, Clone, PartialEq)]
pub struct RatedTrial {
    pub key: SegmentKey,
    pub role: Role,
    pub item: String,
    pub margin: f64,
    pub rating: f64,
    /// Index at the participant's fitted exponent.
    pub gsi: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParticipantSummary {
    pub participant_id: String,
    pub role: Role,
    pub rho_hat: f64,
    /// Mean GSI over the participant's trials.
    pub gsi_mean: f64,
    /// Mean GSI over modes for trial 1 and trial 2.
    pub gsi_trial: [Option<f64>; 2],
    pub n_trials: usize,
    pub cluster: Option<usize>,
    pub outlier: bool,
    pub rho_star: Option<f64>,
}

#[derive(Debug)]
pub struct DescriptiveRow {
    pub group: String,
    pub quantity: &'static str,
    pub summary: Result<DescriptiveSummary>,
}

#[derive(Debug)]
pub struct TestRow {
    pub name: &'static str,
    pub groups: String,
    pub method: TestMethod,
    pub outcome: Result<TestResult>,
}

impl TestRow {
    pub fn status(&self) -> &'static str {
        match &self.outcome {
            Ok(_) => "ok",
            Err(Error::DegenerateInput(_)) => "degenerate",
            Err(_) => "not_computable",
        }
    }
}

#[derive(Debug)]
pub struct ClusterSet {
    pub role: Role,
    pub result: Result<ClusterResult>,
}

#[derive(Debug)]
pub struct KdeSeries {
    pub role: Role,
    pub quantity: &'static str,
    pub series: Result<Vec<(f64, f64)>>,
}

#[derive(Debug)]
pub struct Analysis {
    pub participants: Vec<ParticipantSummary>,
    pub trials: Vec<RatedTrial>,
    pub descriptives: Vec<DescriptiveRow>,
    pub tests: Vec<TestRow>,
    pub clusters: Vec<ClusterSet>,
    pub kde: Vec<KdeSeries>,
    pub warnings: Vec<String>,
}

impl Analysis {
    pub fn test(&self, name: &str, groups: &str) -> Option<&TestRow> {
        self.tests.iter().find(|t| t.name == name && t.groups == groups)
    }

    pub fn participants_of(&self, role: Role) -> impl Iterator<Item = &ParticipantSummary> {
        self.participants.iter().filter(move |p| p.role == role)
    }

    pub fn mean_of(&self, role: Role, f: impl Fn(&ParticipantSummary) -> f64) -> Option<f64> {
        let xs: Vec<f64> = self.participants_of(role).map(f).collect();
        (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
    }
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Runs the analysis on participants whose fit succeeded. GSI values use
/// each participant's fitted exponent on the margins of `joined`.
pub fn analyze(
    fits: &[FitSummary],
    joined: &[JoinedObservation],
    truth: Option<&[TruthRecord]>,
    cfg: &RunConfig,
) -> Result<Analysis> {
    let mut warnings = Vec::new();
    let mut fitted: BTreeMap<&str, (Role, f64)> = BTreeMap::new();
    for fit in fits {
        match fit.rho_hat {
            Some(rho) if fit.status == "ok" => {
                fitted.insert(&fit.participant_id, (fit.role, rho));
            }
            _ => warnings.push(format!("{}: excluded ({})", fit.participant_id, fit.status)),
        }
    }
    if fitted.is_empty() {
        return Err(Error::Validation("no successfully fitted participants to analyze".into()));
    }

    let mut trials = Vec::new();
    for j in joined {
        let Some(&(role, rho)) = fitted.get(j.key.participant_id.as_str()) else {
            continue;
        };
        if role != j.role {
            return Err(Error::Validation(format!(
                "{} is {} in the fit report but {} in the data",
                j.key.participant_id, role, j.role
            )));
        }
        trials.push(RatedTrial {
            key: j.key.clone(),
            role,
            item: j.item.clone(),
            margin: j.observation.margin,
            rating: j.observation.rating,
            gsi: gsi_from_margin(j.observation.margin, Rho::clamped(rho)),
        });
    }

    // One GSI per segment, whatever the number of items.
    let mut segment_gsi: BTreeMap<&SegmentKey, (Role, f64)> = BTreeMap::new();
    for t in &trials {
        segment_gsi.insert(&t.key, (t.role, t.gsi));
    }

    let truth: BTreeMap<&str, f64> = truth
        .unwrap_or_default()
        .iter()
        .map(|t| (t.participant_id.as_str(), t.rho_star))
        .collect();

    let mut participants = Vec::new();
    for (&id, &(role, rho_hat)) in &fitted {
        let mine: Vec<(&SegmentKey, f64)> = segment_gsi
            .iter()
            .filter(|(k, _)| k.participant_id == id)
            .map(|(k, (_, g))| (*k, *g))
            .collect();
        if mine.is_empty() {
            warnings.push(format!("{id}: fitted but has no rated segments"));
            continue;
        }
        let by_trial = |n: u8| mean(&mine.iter().filter(|(k, _)| k.trial == n).map(|(_, g)| *g).collect::<Vec<_>>());
        participants.push(ParticipantSummary {
            participant_id: id.to_string(),
            role,
            rho_hat,
            gsi_mean: mean(&mine.iter().map(|(_, g)| *g).collect::<Vec<_>>()).expect("non-empty"),
            gsi_trial: [by_trial(1), by_trial(2)],
            n_trials: mine.len(),
            cluster: None,
            outlier: false,
            rho_star: truth.get(id).copied(),
        });
    }

    let clusters: Vec<ClusterSet> = ROLES
        .iter()
        .map(|&role| {
            let values: Vec<Vec<f64>> = participants
                .iter()
                .filter(|p| p.role == role)
                .map(|p| vec![p.gsi_mean])
                .collect();
            ClusterSet {
                role,
                result: mean_shift(&values, cfg.clustering.bandwidth),
            }
        })
        .collect();
    for set in &clusters {
        if let Ok(result) = &set.result {
            let members = participants.iter_mut().filter(|p| p.role == set.role);
            for (p, &label) in members.zip(&result.labels) {
                p.cluster = Some(label);
                p.outlier = result.is_outlier_cluster(label);
            }
        }
    }

    let descriptives = descriptives(&participants, &trials);
    let tests = tests(&participants, &trials, &segment_gsi, cfg);
    let kde = kde_series(&participants, cfg);

    for row in &descriptives {
        if let Err(e) = &row.summary {
            warnings.push(format!("descriptives {} {}: {e}", row.group, row.quantity));
        }
    }
    for row in &tests {
        if let Err(e) = &row.outcome {
            warnings.push(format!("test {} {}: {e}", row.name, row.groups));
        }
    }
    for set in &clusters {
        if let Err(e) = &set.result {
            warnings.push(format!("clusters {}: {e}", set.role));
        }
    }
    for series in &kde {
        if let Err(e) = &series.series {
            warnings.push(format!("kde {} {}: {e}", series.role, series.quantity));
        }
    }

    Ok(Analysis {
        participants,
        trials,
        descriptives,
        tests,
        clusters,
        kde,
        warnings,
    })
}

type Quantity = (&'static str, fn(&ParticipantSummary) -> Option<f64>);

const PARTICIPANT_QUANTITIES: [Quantity; 5] = [
    ("rho_hat", |p| Some(p.rho_hat)),
    ("gsi", |p| Some(p.gsi_mean)),
    ("gsi_trial1", |p| p.gsi_trial[0]),
    ("gsi_trial2", |p| p.gsi_trial[1]),
    ("abs_error", |p| p.rho_star.map(|s| (p.rho_hat - s).abs())),
];

fn descriptives(participants: &[ParticipantSummary], trials: &[RatedTrial]) -> Vec<DescriptiveRow> {
    let has_truth = participants.iter().any(|p| p.rho_star.is_some());
    let groups: [(String, Option<Role>); 3] = [
        (Role::Casualty.to_string(), Some(Role::Casualty)),
        (Role::Bystander.to_string(), Some(Role::Bystander)),
        ("all".to_string(), None),
    ];
    let mut rows = Vec::new();
    for (group, role) in &groups {
        let in_group = |r: Role| role.is_none_or(|want| want == r);
        for (quantity, get) in PARTICIPANT_QUANTITIES {
            if quantity == "abs_error" && !has_truth {
                continue;
            }
            let values: Vec<f64> = participants.iter().filter(|p| in_group(p.role)).filter_map(get).collect();
            rows.push(DescriptiveRow {
                group: group.clone(),
                quantity,
                summary: describe(&values),
            });
        }
        let ratings: Vec<f64> = trials.iter().filter(|t| in_group(t.role)).map(|t| t.rating).collect();
        rows.push(DescriptiveRow {
            group: group.clone(),
            quantity: "rating",
            summary: describe(&ratings),
        });
    }
    rows
}

fn role_values<'a, T>(items: &'a [T], role: Role, get: impl Fn(&T) -> Option<(Role, f64)> + 'a) -> Vec<f64> {
    items.iter().filter_map(get).filter(|(r, _)| *r == role).map(|(_, x)| x).collect()
}

fn tests(
    participants: &[ParticipantSummary],
    trials: &[RatedTrial],
    segment_gsi: &BTreeMap<&SegmentKey, (Role, f64)>,
    cfg: &RunConfig,
) -> Vec<TestRow> {
    let contrast = format!("{}-{}", Role::Casualty, Role::Bystander);
    let mut rows = Vec::new();

    let by_role = |get: fn(&ParticipantSummary) -> f64| {
        ROLES.map(|role| role_values(participants, role, |p| Some((p.role, get(p)))))
    };
    let [cas, bys] = by_role(|p| p.gsi_mean);
    rows.push(TestRow {
        name: "role_gsi",
        groups: contrast.clone(),
        method: TestMethod::MannWhitneyU,
        outcome: mann_whitney_u(&cas, &bys),
    });
    let segments: Vec<(Role, f64)> = segment_gsi.values().copied().collect();
    let [cas_t, bys_t] = ROLES.map(|role| role_values(&segments, role, |s| Some(*s)));
    rows.push(TestRow {
        name: "role_gsi_trials",
        groups: contrast.clone(),
        method: TestMethod::MannWhitneyU,
        outcome: mann_whitney_u(&cas_t, &bys_t),
    });
    let [cas_rho, bys_rho] = by_role(|p| p.rho_hat);
    rows.push(TestRow {
        name: "role_rho",
        groups: contrast,
        method: TestMethod::MannWhitneyU,
        outcome: mann_whitney_u(&cas_rho, &bys_rho),
    });

    for role in ROLES {
        // Trial 1 against trial 2 of the same participant and mode.
        let mut pairs: BTreeMap<(&str, Mode), [Option<f64>; 2]> = BTreeMap::new();
        for (key, (r, g)) in segment_gsi {
            if *r == role {
                pairs.entry((key.participant_id.as_str(), key.mode)).or_default()[key.trial as usize - 1] = Some(*g);
            }
        }
        let (first, second): (Vec<f64>, Vec<f64>) = pairs
            .values()
            .filter_map(|[a, b]| Some(((*a)?, (*b)?)))
            .unzip();
        rows.push(TestRow {
            name: "trial_gsi",
            groups: role.to_string(),
            method: TestMethod::WilcoxonSignedRank,
            outcome: wilcoxon_signed_rank_with(&first, &second, cfg.analysis.zero_method),
        });
    }

    for role in ROLES {
        let (ratings, gsis): (Vec<f64>, Vec<f64>) =
            trials.iter().filter(|t| t.role == role).map(|t| (t.rating, t.gsi)).unzip();
        rows.push(TestRow {
            name: "rating_gsi",
            groups: role.to_string(),
            method: TestMethod::Pearson,
            outcome: pearson(&ratings, &gsis),
        });
    }
    rows
}

fn kde_series(participants: &[ParticipantSummary], cfg: &RunConfig) -> Vec<KdeSeries> {
    let mut out = Vec::new();
    for role in ROLES {
        for (quantity, get) in &PARTICIPANT_QUANTITIES[..2] {
            let values = role_values(participants, role, |p| Some((p.role, get(p)?)));
            out.push(KdeSeries {
                role,
                quantity,
                series: kde_1d(&values, cfg.analysis.kde_bandwidth, cfg.analysis.kde_points),
            });
        }
    }
    out
}

fn note(e: &Error) -> String {
    e.to_string()
}

impl Analysis {
    pub fn participants_table(&self) -> Table {
        let mut t = Table::new(&[
            "participant_id",
            "role",
            "rho_hat",
            "gsi_mean",
            "gsi_trial1",
            "gsi_trial2",
            "n_trials",
            "cluster",
            "outlier",
            "rho_star",
            "abs_error",
        ]);
        for p in &self.participants {
            t.push(vec![
                p.participant_id.clone(),
                p.role.to_string(),
                fmt_num(p.rho_hat),
                fmt_num(p.gsi_mean),
                fmt_opt(p.gsi_trial[0]),
                fmt_opt(p.gsi_trial[1]),
                p.n_trials.to_string(),
                p.cluster.map(|c| c.to_string()).unwrap_or_default(),
                p.outlier.to_string(),
                fmt_opt(p.rho_star),
                fmt_opt(p.rho_star.map(|s| (p.rho_hat - s).abs())),
            ]);
        }
        t
    }

    pub fn trials_table(&self) -> Table {
        let mut t = Table::new(&["participant_id", "role", "mode", "trial", "item", "margin", "rating", "gsi"]);
        for r in &self.trials {
            t.push(vec![
                r.key.participant_id.clone(),
                r.role.to_string(),
                r.key.mode.to_string(),
                r.key.trial.to_string(),
                r.item.clone(),
                fmt_num(r.margin),
                fmt_num(r.rating),
                fmt_num(r.gsi),
            ]);
        }
        t
    }

    pub fn descriptives_table(&self) -> Table {
        let mut t = Table::new(&["group", "quantity", "n", "mean", "sd", "se", "min", "max", "status", "note"]);
        for row in &self.descriptives {
            let mut cells = vec![row.group.clone(), row.quantity.to_string()];
            match &row.summary {
                Ok(s) => cells.extend([
                    s.n.to_string(),
                    fmt_num(s.mean),
                    fmt_opt(s.sd),
                    fmt_opt(s.se),
                    fmt_num(s.min),
                    fmt_num(s.max),
                    "ok".into(),
                    String::new(),
                ]),
                Err(e) => {
                    cells.extend(std::iter::repeat_n(String::new(), 6));
                    cells.extend(["not_computable".into(), note(e)]);
                }
            }
            t.push(cells);
        }
        t
    }

    pub fn tests_table(&self) -> Table {
        let mut t = Table::new(&[
            "test", "groups", "method", "statistic", "p_value", "effect_r", "n", "exact", "status", "note",
        ]);
        for row in &self.tests {
            let mut cells = vec![row.name.to_string(), row.groups.clone(), row.method.as_str().to_string()];
            match &row.outcome {
                Ok(r) => cells.extend([
                    fmt_num(r.statistic),
                    fmt_num(r.p_value),
                    fmt_num(r.effect_r),
                    r.n.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(";"),
                    r.exact.to_string(),
                    row.status().into(),
                    String::new(),
                ]),
                Err(e) => {
                    cells.extend(std::iter::repeat_n(String::new(), 5));
                    cells.extend([row.status().into(), note(e)]);
                }
            }
            t.push(cells);
        }
        t
    }

    pub fn clusters_table(&self) -> Table {
        let mut t = Table::new(&[
            "role", "cluster", "count", "mode", "min", "max", "outlier", "silhouette", "bandwidth", "status", "note",
        ]);
        for set in &self.clusters {
            let role = set.role.to_string();
            match &set.result {
                Ok(r) => {
                    let values: Vec<f64> = self.participants_of(set.role).map(|p| p.gsi_mean).collect();
                    for c in 0..r.n_clusters() {
                        let members = values.iter().zip(&r.labels).filter(|(_, &l)| l == c).map(|(v, _)| *v);
                        let (lo, hi) = members.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
                        t.push(vec![
                            role.clone(),
                            c.to_string(),
                            r.counts[c].to_string(),
                            fmt_num(r.modes[c][0]),
                            fmt_num(lo),
                            fmt_num(hi),
                            r.is_outlier_cluster(c).to_string(),
                            fmt_opt(r.silhouette),
                            fmt_num(r.bandwidth),
                            "ok".into(),
                            String::new(),
                        ]);
                    }
                }
                Err(e) => {
                    let mut cells = vec![role];
                    cells.extend(std::iter::repeat_n(String::new(), 8));
                    cells.extend(["not_computable".into(), note(e)]);
                    t.push(cells);
                }
            }
        }
        t
    }

    pub fn kde_table(&self) -> Table {
        let mut t = Table::new(&["role", "quantity", "x", "density", "status", "note"]);
        for s in &self.kde {
            let head = [s.role.to_string(), s.quantity.to_string()];
            match &s.series {
                Ok(series) => {
                    for (x, y) in series {
                        let mut cells = head.to_vec();
                        cells.extend([fmt_num(*x), fmt_num(*y), "ok".into(), String::new()]);
                        t.push(cells);
                    }
                }
                Err(e) => {
                    let mut cells = head.to_vec();
                    cells.extend([String::new(), String::new(), "not_computable".into(), note(e)]);
                    t.push(cells);
                }
            }
        }
        t
    }

    /// Writes every table into `out_dir`.
    pub fn write(&self, out_dir: &Path) -> Result<()> {
        create_dir(out_dir)?;
        for (name, table) in [
            ("participants.csv", self.participants_table()),
            ("trials.csv", self.trials_table()),
            ("descriptives.csv", self.descriptives_table()),
            ("tests.csv", self.tests_table()),
            ("clusters.csv", self.clusters_table()),
            ("kde.csv", self.kde_table()),
        ] {
            table.write(&out_dir.join(name))?;
        }
        Ok(())
    }
}

/// Reads a fit report and the data it was fitted on, analyzes, and writes
/// the report bundle.
pub fn run_analyze(
    fit: &Path,
    trajectories: &Path,
    ratings: &Path,
    truth: Option<&Path>,
    cfg: &RunConfig,
    out_dir: &Path,
) -> Result<Analysis> {
    let fits = read_fit_summaries(fit)?;
    let segments = load_segments(trajectories)?;
    let ratings = load_ratings(ratings)?;
    let joined = join_observations(&segments, &ratings, &cfg.fit.items, cfg.fit.aggregation, &cfg.safety)?;
    let truth = truth.map(read_truth).transpose()?;
    let analysis = analyze(&fits, &joined, truth.as_deref(), cfg)?;
    analysis.write(out_dir)?;
    Ok(analysis)
}
