//! Gaussian-kernel mean-shift clustering and silhouette scores.

use serde::Serialize;

use super::describe::silverman_bandwidth;
use crate::error::{Error, Result};

pub const SHIFT_TOL: f64 = 1e-4;
pub const MAX_SHIFT_ITERS: usize = 300;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterResult {
    /// Cluster id per input point. Ids are ordered by size (largest first),
    /// ties broken by mode coordinate.
    pub labels: Vec<usize>,
    pub modes: Vec<Vec<f64>>,
    pub counts: Vec<usize>,
    /// Indices of points that ended up alone in their cluster.
    pub outliers: Vec<usize>,
    /// `None` when only one cluster was found.
    pub silhouette: Option<f64>,
    pub bandwidth: f64,
}

impl ClusterResult {
    pub fn n_clusters(&self) -> usize {
        self.counts.len()
    }

    pub fn is_outlier_cluster(&self, cluster: usize) -> bool {
        self.counts[cluster] == 1
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn lexical(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(std::cmp::Ordering::Equal)
}

fn validate_points(points: &[Vec<f64>]) -> Result<usize> {
    if points.len() < 2 {
        return Err(Error::Validation(format!("need at least 2 points, got {}", points.len())));
    }
    let dim = points[0].len();
    if dim == 0 {
        return Err(Error::Validation("points must have at least one coordinate".into()));
    }
    if points.iter().any(|p| p.len() != dim || p.iter().any(|x| !x.is_finite())) {
        return Err(Error::Validation("points must share a dimension and be finite".into()));
    }
    Ok(dim)
}

/// Per-coordinate Silverman bandwidths, averaged. Constant data gets 1.
pub fn default_bandwidth(points: &[Vec<f64>]) -> f64 {
    let dim = points[0].len();
    let h = (0..dim)
        .map(|k| silverman_bandwidth(&points.iter().map(|p| p[k]).collect::<Vec<_>>()))
        .sum::<f64>()
        / dim as f64;
    if h > 0.0 {
        h
    } else {
        1.0
    }
}

fn seek_mode(start: &[f64], points: &[Vec<f64>], bandwidth: f64) -> Vec<f64> {
    let inv = 1.0 / (2.0 * bandwidth * bandwidth);
    let mut x = start.to_vec();
    for _ in 0..MAX_SHIFT_ITERS {
        let mut weight_sum = 0.0;
        let mut next = vec![0.0; x.len()];
        for p in points {
            let w = (-sq_dist(&x, p) * inv).exp();
            weight_sum += w;
            for (n, c) in next.iter_mut().zip(p) {
                *n += w * c;
            }
        }
        next.iter_mut().for_each(|n| *n /= weight_sum);
        let shift = sq_dist(&next, &x).sqrt();
        x = next;
        if shift < SHIFT_TOL {
            break;
        }
    }
    x
}

/// Clusters `points`; `bandwidth` defaults to Silverman's rule.
///
/// Each point climbs to its density mode; modes are visited in coordinate
/// order and merged when closer than half a bandwidth to an existing
/// cluster, so the result does not depend on input order.
pub fn mean_shift(points: &[Vec<f64>], bandwidth: Option<f64>) -> Result<ClusterResult> {
    validate_points(points)?;
    let bandwidth = match bandwidth {
        Some(h) if h.is_finite() && h > 0.0 => h,
        Some(h) => return Err(Error::Validation(format!("bandwidth must be > 0, got {h}"))),
        None => default_bandwidth(points),
    };

    let modes: Vec<Vec<f64>> = points.iter().map(|p| seek_mode(p, points, bandwidth)).collect();

    let mut order: Vec<usize> = (0..modes.len()).collect();
    order.sort_by(|&a, &b| lexical(&modes[a], &modes[b]));
    let merge_sq = (bandwidth / 2.0).powi(2);
    // (anchor mode, member points)
    let mut groups: Vec<(Vec<f64>, Vec<usize>)> = Vec::new();
    for &i in &order {
        match groups.iter_mut().find(|(anchor, _)| sq_dist(anchor, &modes[i]) < merge_sq) {
            Some((_, members)) => members.push(i),
            None => groups.push((modes[i].clone(), vec![i])),
        }
    }
    let centres: Vec<Vec<f64>> = groups
        .iter()
        .map(|(_, members)| {
            let dim = modes[0].len();
            let mut c = vec![0.0; dim];
            for &m in members {
                c.iter_mut().zip(&modes[m]).for_each(|(a, b)| *a += b);
            }
            c.iter_mut().for_each(|a| *a /= members.len() as f64);
            c
        })
        .collect();

    // Label each point by the centre nearest its mode.
    let raw: Vec<usize> = modes
        .iter()
        .map(|m| {
            (0..centres.len())
                .min_by(|&a, &b| sq_dist(m, &centres[a]).total_cmp(&sq_dist(m, &centres[b])))
                .unwrap()
        })
        .collect();
    let mut raw_counts = vec![0usize; centres.len()];
    raw.iter().for_each(|&l| raw_counts[l] += 1);

    let mut ids: Vec<usize> = (0..centres.len()).filter(|&c| raw_counts[c] > 0).collect();
    ids.sort_by(|&a, &b| raw_counts[b].cmp(&raw_counts[a]).then_with(|| lexical(&centres[a], &centres[b])));
    let mut relabel = vec![usize::MAX; centres.len()];
    for (new, &old) in ids.iter().enumerate() {
        relabel[old] = new;
    }
    let labels: Vec<usize> = raw.iter().map(|&l| relabel[l]).collect();
    let counts: Vec<usize> = ids.iter().map(|&c| raw_counts[c]).collect();
    let modes: Vec<Vec<f64>> = ids.iter().map(|&c| centres[c].clone()).collect();
    let outliers: Vec<usize> = (0..labels.len()).filter(|&i| counts[labels[i]] == 1).collect();
    let silhouette = if counts.len() >= 2 {
        Some(silhouette(points, &labels)?)
    } else {
        None
    };

    Ok(ClusterResult {
        labels,
        modes,
        counts,
        outliers,
        silhouette,
        bandwidth,
    })
}

/// Mean silhouette over all points with Euclidean distance. Points alone in
/// their cluster score 0.
pub fn silhouette(points: &[Vec<f64>], labels: &[usize]) -> Result<f64> {
    if points.len() != labels.len() {
        return Err(Error::Validation("one label per point is required".into()));
    }
    if points.is_empty() {
        return Err(Error::Validation("no points".into()));
    }
    let n_clusters = labels.iter().max().map_or(0, |m| m + 1);
    let mut sizes = vec![0usize; n_clusters];
    labels.iter().for_each(|&l| sizes[l] += 1);
    if sizes.iter().filter(|&&s| s > 0).count() < 2 {
        return Err(Error::DegenerateInput("silhouette needs at least two clusters".into()));
    }

    let mut total = 0.0;
    for (i, p) in points.iter().enumerate() {
        let own = labels[i];
        if sizes[own] == 1 {
            continue;
        }
        let mut sums = vec![0.0; n_clusters];
        for (j, q) in points.iter().enumerate() {
            if i != j {
                sums[labels[j]] += sq_dist(p, q).sqrt();
            }
        }
        let a = sums[own] / (sizes[own] - 1) as f64;
        let b = (0..n_clusters)
            .filter(|&c| c != own && sizes[c] > 0)
            .map(|c| sums[c] / sizes[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let denom = a.max(b);
        if denom > 0.0 {
            total += (b - a) / denom;
        }
    }
    Ok(total / points.len() as f64)
}
