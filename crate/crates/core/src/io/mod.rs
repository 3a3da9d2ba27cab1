//! File formats, run configuration and the command implementations behind
//! the `gsi` binary.
//!
//! Streams are JSON lines, reports are CSV with a header row, and every
//! number written is rounded to six significant digits.

mod analyze;
mod config;
mod curves;
mod fit;
mod format;
mod records;
mod score;
mod simulate;
mod table;

pub use analyze::{
    analyze, run_analyze, Analysis, ClusterSet, DescriptiveRow, KdeSeries, ParticipantSummary, RatedTrial, TestRow,
    ROLES,
};
pub use config::{AnalysisOptions, ClusteringOptions, CurveOptions, FitOptions, RunConfig, ScoreOptions};
pub use curves::{curve_series, curve_table, run_curves};
pub use fit::{
    fit_participants, fit_table, fit_warnings, join_observations, load_ratings, load_segments, observation_table,
    read_fit_summaries, run_fit, FitOutput, FitRow, FitStatus, FitSummary, JoinedObservation, FIT_COLUMNS,
};
pub use format::{fmt_num, round_sig};
pub use records::{
    check_ratings, group_segments, parse_line, read_jsonl, RatingRecord, Segment, SegmentChecker, SegmentKey,
    TrajectoryRecord,
};
pub use score::score_stream;
pub use simulate::{dataset_records, read_truth, run_simulate, truth_table, write_jsonl, SimulateOutput, TruthRecord};
pub use table::Table;
