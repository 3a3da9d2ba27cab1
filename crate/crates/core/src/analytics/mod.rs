//! Statistics behind the cohort reports: summaries, correlation and rank
//! tests, kernel density estimates and mean-shift clustering.

mod cluster;
mod describe;
mod hypothesis;
mod kde;

pub use cluster::{default_bandwidth, mean_shift, silhouette, ClusterResult, MAX_SHIFT_ITERS, SHIFT_TOL};
pub use describe::{describe, silverman_bandwidth, DescriptiveSummary};
pub use hypothesis::{
    mann_whitney_u, midranks, pearson, wilcoxon_signed_rank, wilcoxon_signed_rank_with, TestMethod, TestResult,
    ZeroMethod, MWU_EXACT_MAX, WILCOXON_EXACT_MAX,
};
pub use kde::{kde_1d, trapezoid, KDE_TAIL};
