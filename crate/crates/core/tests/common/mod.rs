//! Independent oracles shared by the integration suites. Nothing here calls
//! into the solvers or DBSCAN under test.
#![allow(dead_code)]

use clusterreg::DesignMatrix;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

// ---------------------------------------------------------------------------
// Regression

/// Centered copy of the design: `(Xc, yc, x̄, ȳ)`.
pub fn centered(d: &DesignMatrix) -> (Vec<Vec<f64>>, Vec<f64>, Vec<f64>, f64) {
    let (n, p) = (d.n(), d.p());
    let x_bar: Vec<f64> = (0..p).map(|j| d.x.column(j).sum() / n as f64).collect();
    let y_bar = d.y.sum() / n as f64;
    let xc = (0..n)
        .map(|i| (0..p).map(|j| d.x[(i, j)] - x_bar[j]).collect())
        .collect();
    let yc = d.y.iter().map(|v| v - y_bar).collect();
    (xc, yc, x_bar, y_bar)
}

/// Smallest singular value of the centered design.
pub fn min_singular_centered(d: &DesignMatrix) -> f64 {
    let (xc, _, _, _) = centered(d);
    let m = DMatrix::from_fn(d.n(), d.p(), |i, j| xc[i][j]);
    m.singular_values().min()
}

/// Random well-conditioned instance with `n ≤ 8`, `p ≤ 3`.
pub fn random_instance(rng: &mut impl Rng) -> DesignMatrix {
    loop {
        let p = rng.random_range(1..=3usize);
        let n = rng.random_range(p + 2..=8usize);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..p).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let truth: Vec<f64> = (0..p).map(|_| rng.random_range(-1.5..1.5)).collect();
        let a0 = rng.random_range(-1.0..1.0);
        let y: Vec<f64> = rows
            .iter()
            .map(|r| a0 + r.iter().zip(&truth).map(|(x, b)| x * b).sum::<f64>() + rng.random_range(-0.5..0.5))
            .collect();
        let d = DesignMatrix::from_rows(&rows, &y).unwrap();
        if min_singular_centered(&d) > 0.5 {
            return d;
        }
    }
}

/// Least squares by modified Gram-Schmidt QR on the centered design.
/// Returns `(intercept, β)`.
pub fn ols_qr(d: &DesignMatrix) -> (f64, Vec<f64>) {
    let (xc, yc, x_bar, y_bar) = centered(d);
    let (n, p) = (d.n(), d.p());
    let mut q: Vec<Vec<f64>> = (0..p).map(|j| (0..n).map(|i| xc[i][j]).collect()).collect();
    let mut r = vec![vec![0.0; p]; p];
    for j in 0..p {
        for k in 0..j {
            let dot: f64 = (0..n).map(|i| q[k][i] * q[j][i]).sum();
            r[k][j] = dot;
            for i in 0..n {
                q[j][i] -= dot * q[k][i];
            }
        }
        let norm = q[j].iter().map(|v| v * v).sum::<f64>().sqrt();
        r[j][j] = norm;
        q[j].iter_mut().for_each(|v| *v /= norm);
    }
    let qty: Vec<f64> = (0..p).map(|j| (0..n).map(|i| q[j][i] * yc[i]).sum()).collect();
    let mut beta = vec![0.0; p];
    for j in (0..p).rev() {
        let s: f64 = (j + 1..p).map(|k| r[j][k] * beta[k]).sum();
        beta[j] = (qty[j] - s) / r[j][j];
    }
    let a0 = y_bar - x_bar.iter().zip(&beta).map(|(m, b)| m * b).sum::<f64>();
    (a0, beta)
}

/// `RSS + λ1Σ|β| + λ2Σβ²` with the intercept profiled out.
pub fn objective(xc: &[Vec<f64>], yc: &[f64], beta: &[f64], l1: f64, l2: f64) -> f64 {
    let rss: f64 = xc
        .iter()
        .zip(yc)
        .map(|(row, y)| {
            let r = y - row.iter().zip(beta).map(|(x, b)| x * b).sum::<f64>();
            r * r
        })
        .sum();
    rss + l1 * beta.iter().map(|b| b.abs()).sum::<f64>() + l2 * beta.iter().map(|b| b * b).sum::<f64>()
}

const GRID_SIDE: usize = 17;

/// Coarse-to-fine grid search for the penalized objective. Each level
/// evaluates a 17^p lattice centered on the previous best point, then halves
/// the spacing; the search stops once the spacing drops below `resolution`.
pub fn grid_minimize(d: &DesignMatrix, l1: f64, l2: f64, resolution: f64) -> Vec<f64> {
    let (xc, yc, _, _) = centered(d);
    let p = d.p();
    let (_, ols) = ols_qr(d);
    let half_width = 2.0 * ols.iter().map(|b| b.abs()).sum::<f64>() + 1.0;
    let mut center = vec![0.0; p];
    let mut step = 2.0 * half_width / (GRID_SIDE - 1) as f64;
    let mid = (GRID_SIDE / 2) as f64;
    let mut candidate = vec![0.0; p];
    loop {
        let mut best = (f64::INFINITY, center.clone());
        let total = GRID_SIDE.pow(p as u32);
        for code in 0..total {
            let mut c = code;
            for j in 0..p {
                candidate[j] = center[j] + ((c % GRID_SIDE) as f64 - mid) * step;
                c /= GRID_SIDE;
            }
            let f = objective(&xc, &yc, &candidate, l1, l2);
            if f < best.0 {
                best = (f, candidate.clone());
            }
        }
        center = best.1;
        if step < resolution {
            return center;
        }
        step /= 2.0;
    }
}

// ---------------------------------------------------------------------------
// Clustering

/// Brute-force DBSCAN facts: core flags and, for each core point, a
/// representative of its connected component in the ε-graph over core points.
pub struct DensityOracle {
    pub core: Vec<bool>,
    pub component: Vec<Option<usize>>,
    pub adjacency: Vec<Vec<bool>>,
}

pub fn density_oracle(points: &[Vec<f64>], eps: f64, min_pts: usize) -> DensityOracle {
    let n = points.len();
    let adjacency: Vec<Vec<bool>> = (0..n)
        .map(|i| (0..n).map(|j| dist(&points[i], &points[j]) <= eps).collect())
        .collect();
    let core: Vec<bool> = adjacency.iter().map(|row| row.iter().filter(|&&a| a).count() >= min_pts).collect();

    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for i in 0..n {
        for j in i + 1..n {
            if core[i] && core[j] && adjacency[i][j] {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a] = b;
            }
        }
    }
    let component = (0..n).map(|i| core[i].then(|| find(&mut parent, i))).collect();
    DensityOracle {
        core,
        component,
        adjacency,
    }
}

/// Checks a DBSCAN labeling against the oracle; returns a description of the
/// first disagreement.
pub fn check_against_oracle(
    points: &[Vec<f64>],
    eps: f64,
    min_pts: usize,
    labels: &[Option<usize>],
    core_flags: &[bool],
    num_clusters: usize,
) -> Result<(), String> {
    let o = density_oracle(points, eps, min_pts);
    let n = points.len();
    if core_flags != o.core.as_slice() {
        return Err("core flags differ".into());
    }
    for i in 0..n {
        for j in 0..n {
            if o.core[i] && o.core[j] {
                let same_component = o.component[i] == o.component[j];
                let same_label = labels[i] == labels[j];
                if labels[i].is_none() || same_component != same_label {
                    return Err(format!("core points {i} and {j} disagree with the ε-graph components"));
                }
            }
        }
    }
    for i in (0..n).filter(|&i| !o.core[i]) {
        let adjacent: Vec<usize> = (0..n).filter(|&j| o.core[j] && o.adjacency[i][j]).collect();
        match labels[i] {
            None if adjacent.is_empty() => {}
            None => return Err(format!("point {i} is within eps of a core point but labeled noise")),
            Some(l) if adjacent.iter().any(|&j| labels[j] == Some(l)) => {}
            Some(_) => return Err(format!("border point {i} has no adjacent core point in its cluster")),
        }
    }
    let mut used = vec![false; num_clusters];
    for l in labels.iter().flatten() {
        if *l >= num_clusters {
            return Err(format!("label {l} out of range"));
        }
        used[*l] = true;
    }
    if used.iter().any(|u| !u) {
        return Err("unused cluster id".into());
    }
    Ok(())
}

/// Random point set with some blob structure, coordinates on a 0.05 lattice
/// so distances hit eps exactly now and then.
pub fn random_points(rng: &mut impl Rng) -> (Vec<Vec<f64>>, f64, usize) {
    let n = rng.random_range(1..=50usize);
    let dims = rng.random_range(1..=4usize);
    let blobs: Vec<Vec<f64>> = (0..rng.random_range(1..=4usize))
        .map(|_| (0..dims).map(|_| rng.random_range(0.0..1.0)).collect())
        .collect();
    let spread = rng.random_range(0.02..0.3);
    let points = (0..n)
        .map(|_| {
            let b = &blobs[rng.random_range(0..blobs.len())];
            b.iter()
                .map(|c| ((c + rng.random_range(-spread..spread)) * 20.0).round() / 20.0)
                .collect()
        })
        .collect();
    let eps = (rng.random_range(0.0..0.4f64) * 20.0).round() / 20.0;
    let min_pts = rng.random_range(1..=5usize);
    (points, eps, min_pts)
}

// ---------------------------------------------------------------------------
// Pipeline

/// Writes a generated panel under `dir` and returns a config pointing at it.
pub fn synthetic_config(
    dir: &std::path::Path,
    spec: &clusterreg::synthetic::SyntheticSpec,
) -> (clusterreg::PipelineConfig, clusterreg::synthetic::GroundTruth) {
    let data = clusterreg::synthetic::generate(spec).unwrap();
    let path = dir.join("panel.csv");
    clusterreg::dataio::write_long(&data.panel, &path).unwrap();
    let mut config = clusterreg::PipelineConfig::new(path, clusterreg::Layout::Long);
    config.out_dir = dir.join("out");
    (config, data.truth)
}

/// Planted cluster of every pipeline cluster, or `None` when some pipeline
/// cluster mixes entities from different planted clusters or the cluster
/// counts differ.
pub fn planted_of_clusters(
    partition: &clusterreg::clustering::Partition,
    truth: &clusterreg::synthetic::GroundTruth,
) -> Option<Vec<usize>> {
    if partition.num_clusters != truth.spec.n_clusters {
        return None;
    }
    let mut planted = vec![None; partition.num_clusters];
    for (e, &c) in partition.labels.iter().enumerate() {
        match planted[c] {
            None => planted[c] = Some(truth.labels[e]),
            Some(p) if p == truth.labels[e] => {}
            Some(_) => return None,
        }
    }
    planted.into_iter().collect()
}

/// Planted clusters selected by a fitted model, ascending.
pub fn recovered_support(model: &clusterreg::LinearModel, planted: &[usize]) -> Vec<usize> {
    let mut s: Vec<usize> = model.support().iter().map(|&j| planted[j]).collect();
    s.sort_unstable();
    s
}
