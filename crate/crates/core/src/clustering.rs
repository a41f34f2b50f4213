//! DBSCAN density clustering and the two quality scores used to pick its
//! parameters: the mean silhouette coefficient and the within-cluster SSE.
//!
//! Neighborhoods are closed Euclidean balls that include the query point, and
//! a point is core when its neighborhood holds at least `min_pts` points.
//! Clusters are numbered in order of discovery while scanning rows by index;
//! a border point reachable from several clusters keeps the first one.

use std::cmp::Ordering;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::preprocess::FeatureMatrix;
use crate::{Error, Result};

/// Default radius grid: 0.05, 0.10, …, 2.00.
pub fn default_eps_grid() -> Vec<f64> {
    (1..=40).map(|i| i as f64 * 0.05).collect()
}

pub fn default_minpts_grid() -> Vec<usize> {
    (1..=5).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeighborhoodParams {
    pub eps: f64,
    pub min_pts: usize,
}

impl NeighborhoodParams {
    pub fn new(eps: f64, min_pts: usize) -> Result<Self> {
        if !(eps >= 0.0) {
            return Err(Error::InvalidInput(format!("eps must be non-negative, got {eps}")));
        }
        if min_pts == 0 {
            return Err(Error::InvalidInput("min_pts must be at least 1".into()));
        }
        Ok(NeighborhoodParams { eps, min_pts })
    }
}

/// DBSCAN output. `None` labels are noise.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    pub labels: Vec<Option<usize>>,
    pub num_clusters: usize,
    pub core_flags: Vec<bool>,
}

impl ClusterAssignment {
    pub fn noise_count(&self) -> usize {
        self.labels.iter().filter(|l| l.is_none()).count()
    }

    pub fn members(&self, cluster: usize) -> Vec<usize> {
        (0..self.labels.len()).filter(|&i| self.labels[i] == Some(cluster)).collect()
    }

    /// Gives every noise point its own singleton cluster, numbered after the
    /// existing clusters in index order.
    pub fn promote_noise(&self) -> Partition {
        let mut next = self.num_clusters;
        let labels = self
            .labels
            .iter()
            .map(|l| {
                l.unwrap_or_else(|| {
                    next += 1;
                    next - 1
                })
            })
            .collect();
        Partition {
            labels,
            num_clusters: next,
        }
    }
}

/// A noise-free grouping of entities into `num_clusters` non-empty groups.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    pub labels: Vec<usize>,
    pub num_clusters: usize,
}

impl Partition {
    pub fn new(labels: Vec<usize>) -> Result<Self> {
        let num_clusters = labels.iter().max().map_or(0, |m| m + 1);
        let mut used = vec![false; num_clusters];
        labels.iter().for_each(|&l| used[l] = true);
        if let Some(gap) = used.iter().position(|u| !u) {
            return Err(Error::InvalidInput(format!("cluster id {gap} has no members")));
        }
        Ok(Partition { labels, num_clusters })
    }

    pub fn members(&self, cluster: usize) -> Vec<usize> {
        (0..self.labels.len()).filter(|&i| self.labels[i] == cluster).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SilhouetteReport {
    /// `s_i` per point; `None` for noise.
    pub per_point: Vec<Option<f64>>,
    /// Mean intra-cluster distance `a_i`; `None` for noise.
    pub a: Vec<Option<f64>>,
    /// Smallest mean distance to another cluster `b_i`; `None` for noise.
    pub b: Vec<Option<f64>>,
    pub mean_sc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringQuality {
    /// Mean silhouette; absent when fewer than two clusters exist.
    pub sc: Option<f64>,
    pub sse: f64,
    pub c: usize,
    pub centroids: Vec<Vec<f64>>,
}

#[inline]
pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Indices within `eps` of row `index`, the row itself included, ascending.
pub fn region_query(points: &FeatureMatrix, index: usize, eps: f64) -> Result<Vec<usize>> {
    if index >= points.nrows() {
        return Err(Error::InvalidInput(format!(
            "index {index} out of range for {} points",
            points.nrows()
        )));
    }
    if !(eps >= 0.0) {
        return Err(Error::InvalidInput(format!("eps must be non-negative, got {eps}")));
    }
    let center = points.row(index);
    Ok((0..points.nrows())
        .filter(|&j| euclidean(center, points.row(j)) <= eps)
        .collect())
}

pub fn dbscan(points: &FeatureMatrix, params: NeighborhoodParams) -> Result<ClusterAssignment> {
    let params = NeighborhoodParams::new(params.eps, params.min_pts)?;
    let n = points.nrows();
    let neighborhoods = (0..n)
        .map(|i| region_query(points, i, params.eps))
        .collect::<Result<Vec<_>>>()?;
    let core_flags: Vec<bool> = neighborhoods.iter().map(|nb| nb.len() >= params.min_pts).collect();

    let mut labels: Vec<Option<usize>> = vec![None; n];
    let mut num_clusters = 0;
    let mut stack = Vec::new();
    for seed in 0..n {
        if labels[seed].is_some() || !core_flags[seed] {
            continue;
        }
        let id = num_clusters;
        num_clusters += 1;
        labels[seed] = Some(id);
        stack.push(seed);
        while let Some(p) = stack.pop() {
            for &q in &neighborhoods[p] {
                if labels[q].is_none() {
                    labels[q] = Some(id);
                    if core_flags[q] {
                        stack.push(q);
                    }
                }
            }
        }
    }

    Ok(ClusterAssignment {
        labels,
        num_clusters,
        core_flags,
    })
}

/// Silhouette coefficients over the non-noise points.
///
/// Noise is left out of every average. Points in singleton clusters score 0.
pub fn silhouette(points: &FeatureMatrix, assignment: &ClusterAssignment) -> Result<SilhouetteReport> {
    check_assignment(points, assignment)?;
    let c = assignment.num_clusters;
    if c < 2 {
        return Err(Error::SilhouetteUndefined(c));
    }
    let n = points.nrows();
    let sizes = cluster_sizes(assignment);
    let mut per_point = vec![None; n];
    let mut a_out = vec![None; n];
    let mut b_out = vec![None; n];
    let mut sums = vec![0.0; c];

    for i in 0..n {
        let Some(own) = assignment.labels[i] else { continue };
        sums.iter_mut().for_each(|s| *s = 0.0);
        for j in 0..n {
            if let Some(other) = assignment.labels[j] {
                if j != i {
                    sums[other] += euclidean(points.row(i), points.row(j));
                }
            }
        }
        let a = if sizes[own] > 1 { sums[own] / (sizes[own] - 1) as f64 } else { 0.0 };
        let b = (0..c)
            .filter(|&k| k != own)
            .map(|k| sums[k] / sizes[k] as f64)
            .fold(f64::INFINITY, f64::min);
        let denom = a.max(b);
        let s = if sizes[own] == 1 || denom <= 0.0 { 0.0 } else { (b - a) / denom };
        per_point[i] = Some(s);
        a_out[i] = Some(a);
        b_out[i] = Some(b);
    }

    let scored: Vec<f64> = per_point.iter().flatten().copied().collect();
    let mean_sc = scored.iter().sum::<f64>() / scored.len() as f64;
    Ok(SilhouetteReport {
        per_point,
        a: a_out,
        b: b_out,
        mean_sc,
    })
}

/// Centroids and within-cluster sum of squared distances; noise contributes 0.
pub fn sse(points: &FeatureMatrix, assignment: &ClusterAssignment) -> Result<ClusteringQuality> {
    check_assignment(points, assignment)?;
    let c = assignment.num_clusters;
    if c == 0 {
        return Err(Error::InvalidInput("SSE needs at least one cluster".into()));
    }
    let p = points.ncols();
    let sizes = cluster_sizes(assignment);
    let mut centroids = vec![vec![0.0; p]; c];
    for (i, label) in assignment.labels.iter().enumerate() {
        if let Some(k) = *label {
            for (acc, v) in centroids[k].iter_mut().zip(points.row(i)) {
                *acc += v;
            }
        }
    }
    for (centroid, &size) in centroids.iter_mut().zip(&sizes) {
        centroid.iter_mut().for_each(|v| *v /= size as f64);
    }
    let sse = assignment
        .labels
        .iter()
        .enumerate()
        .filter_map(|(i, l)| l.map(|k| (i, k)))
        .map(|(i, k)| {
            points
                .row(i)
                .iter()
                .zip(&centroids[k])
                .map(|(x, m)| (x - m) * (x - m))
                .sum::<f64>()
        })
        .sum();
    Ok(ClusteringQuality {
        sc: None,
        sse,
        c,
        centroids,
    })
}

/// SSE plus mean silhouette (when defined).
pub fn evaluate(points: &FeatureMatrix, assignment: &ClusterAssignment) -> Result<ClusteringQuality> {
    let mut quality = sse(points, assignment)?;
    if assignment.num_clusters >= 2 {
        quality.sc = Some(silhouette(points, assignment)?.mean_sc);
    }
    Ok(quality)
}

fn check_assignment(points: &FeatureMatrix, assignment: &ClusterAssignment) -> Result<()> {
    if assignment.labels.len() != points.nrows() {
        return Err(Error::DimensionMismatch {
            expected: points.nrows(),
            got: assignment.labels.len(),
        });
    }
    if let Some(bad) = assignment.labels.iter().flatten().find(|&&l| l >= assignment.num_clusters) {
        return Err(Error::InvalidInput(format!(
            "label {bad} not below cluster count {}",
            assignment.num_clusters
        )));
    }
    Ok(())
}

fn cluster_sizes(assignment: &ClusterAssignment) -> Vec<usize> {
    let mut sizes = vec![0usize; assignment.num_clusters];
    assignment.labels.iter().flatten().for_each(|&k| sizes[k] += 1);
    sizes
}

/// One admissible grid point of a parameter sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub params: NeighborhoodParams,
    pub quality: ClusteringQuality,
    pub assignment: ClusterAssignment,
}

impl SweepEntry {
    pub fn sc(&self) -> f64 {
        self.quality.sc.unwrap_or(f64::NEG_INFINITY)
    }
}

fn rank(a: &SweepEntry, b: &SweepEntry) -> Ordering {
    b.sc()
        .total_cmp(&a.sc())
        .then(a.quality.sse.total_cmp(&b.quality.sse))
        .then(a.quality.c.cmp(&b.quality.c))
}

/// Runs DBSCAN on every `(eps, min_pts)` pair and ranks the admissible ones
/// (at least two clusters) by descending silhouette, then ascending SSE, then
/// ascending cluster count. Exact ties keep grid order (eps-major).
pub fn sweep_params(points: &FeatureMatrix, eps_grid: &[f64], minpts_grid: &[usize]) -> Result<Vec<SweepEntry>> {
    if eps_grid.is_empty() || minpts_grid.is_empty() {
        return Err(Error::InvalidInput("sweep grids must be non-empty".into()));
    }
    let pairs: Vec<NeighborhoodParams> = eps_grid
        .iter()
        .flat_map(|&eps| minpts_grid.iter().map(move |&min_pts| (eps, min_pts)))
        .map(|(eps, min_pts)| NeighborhoodParams::new(eps, min_pts))
        .collect::<Result<_>>()?;

    let evaluated: Vec<Option<SweepEntry>> = pairs
        .par_iter()
        .map(|&params| -> Result<Option<SweepEntry>> {
            let assignment = dbscan(points, params)?;
            if assignment.num_clusters < 2 {
                return Ok(None);
            }
            let quality = evaluate(points, &assignment)?;
            Ok(Some(SweepEntry {
                params,
                quality,
                assignment,
            }))
        })
        .collect::<Result<_>>()?;

    let mut ranked: Vec<SweepEntry> = evaluated.into_iter().flatten().collect();
    if ranked.is_empty() {
        return Err(Error::NoAdmissibleClustering);
    }
    ranked.sort_by(rank);
    Ok(ranked)
}

/// CSV `entity,cluster_id,is_core`; noise is written as cluster `-1`.
pub fn assignment_csv(points: &FeatureMatrix, assignment: &ClusterAssignment) -> String {
    let mut out = String::from("entity,cluster_id,is_core\n");
    for (i, name) in points.entities().iter().enumerate() {
        let id = assignment.labels[i].map_or(-1, |k| k as i64);
        let _ = writeln!(
            out,
            "{},{id},{}",
            crate::dataio::csv_field(name),
            assignment.core_flags[i]
        );
    }
    out
}

/// CSV `eps,min_pts,c,sc,sse` in ranking order.
pub fn quality_csv(entries: &[SweepEntry]) -> String {
    let mut out = String::from("eps,min_pts,c,sc,sse\n");
    for e in entries {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            e.params.eps,
            e.params.min_pts,
            e.quality.c,
            e.quality.sc.map_or(String::new(), |s| s.to_string()),
            e.quality.sse
        );
    }
    out
}

pub fn write_text(path: &Path, body: &str) -> Result<()> {
    std::fs::write(path, body).map_err(|e| Error::io(path, e))
}
