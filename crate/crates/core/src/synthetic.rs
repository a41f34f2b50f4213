//! Seeded generator of panels with a planted cluster structure and a planted
//! sparse log-linear law for the yearly grand total.
//!
//! Entity `e` belongs to cluster `e % n_clusters`. Every member of a cluster
//! shares the cluster's feature profile up to a small jitter and a fixed
//! scale, so row-normalized profiles form tight, well separated groups.
//!
//! The grand total `I(t)` satisfies
//! `ln I(t) = a_0 + Σ_{j∈S} β_j ln x_j(t) + ε_t` exactly, where `x_j` are the
//! totals of the support clusters `S`. Clusters outside `S` follow their own
//! slowly varying paths. The support cluster with the largest coefficient
//! takes whatever makes `Σ_i x_i(t) = I(t)` hold, so the perturbation `ε_t`
//! reaches the regressors only through that cluster.

use std::f64::consts::TAU;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::clustering::euclidean;
use crate::dataio::EnergyPanel;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub seed: u64,
    pub n_entities: usize,
    pub n_features: usize,
    pub n_clusters: usize,
    pub n_years: usize,
    pub support_size: usize,
    /// Standard deviation of the log-target perturbation, as a fraction of
    /// the standard deviation of the noise-free log target.
    pub noise_sd: f64,
    pub start_year: i32,
}

impl SyntheticSpec {
    /// 48 entities in 16 clusters of 3, 16 features, 40 years, 7-sparse law.
    pub fn default_shape(seed: u64) -> Self {
        SyntheticSpec {
            seed,
            n_entities: 48,
            n_features: 16,
            n_clusters: 16,
            n_years: 40,
            support_size: 7,
            noise_sd: 0.0,
            start_year: 1980,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidInput(m.into()));
        if self.n_entities == 0 || self.n_features == 0 || self.n_clusters == 0 || self.n_years == 0 {
            return bad("all sizes must be positive");
        }
        if self.n_entities < self.n_clusters {
            return bad("n_entities must be at least n_clusters");
        }
        if self.n_features < 2 {
            return bad("n_features must be at least 2 for distinguishable profiles");
        }
        if self.support_size == 0 || self.support_size >= self.n_clusters {
            return bad("support_size must be between 1 and n_clusters − 1");
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return bad("noise_sd must be non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub spec: SyntheticSpec,
    pub entities: Vec<String>,
    /// Planted cluster per entity.
    pub labels: Vec<usize>,
    /// Ascending indices of clusters with a nonzero coefficient.
    pub support: Vec<usize>,
    /// One coefficient per cluster; zero off the support.
    pub beta: Vec<f64>,
    pub intercept: f64,
    pub years: Vec<i32>,
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub panel: EnergyPanel,
    pub truth: GroundTruth,
}

/// Minimum distance between row-normalized cluster prototypes.
const MIN_SEPARATION: f64 = 0.5;
const PROFILE_JITTER: f64 = 0.002;
/// Range of planted coefficients.
const BETA_RANGE: (f64, f64) = (0.15, 0.45);
/// Year-to-year log jitter of clusters outside the support.
const CARRIER_WIGGLE: f64 = 0.003;
/// Largest total log change of clusters outside the support over the horizon.
const CARRIER_TREND: f64 = 0.03;
/// Headroom of the law above its smallest attainable value, in log units.
const LAW_MARGIN: f64 = 0.5;

/// Smallest value of `ln(a + x) − β ln x` over `x > 0`, attained at
/// `x = βa / (1 − β)`.
fn law_floor(a: f64, beta: f64) -> f64 {
    let x = beta * a / (1.0 - beta);
    (a + x).ln() - beta * x.ln()
}

/// Balancing value `x` below `βa/(1 − β)` with `ln(a + x) − β ln x = target`.
fn solve_balance(a: f64, beta: f64, target: f64) -> f64 {
    let h = |u: f64| (a + u.exp()).ln() - beta * u;
    let mut hi = (beta * a / (1.0 - beta)).ln();
    let mut lo = hi - 1.0;
    while h(lo) < target {
        lo -= 2.0 * (hi - lo);
    }
    // h decreases on this branch; bisect ln x to full precision.
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if h(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo.exp()
}

pub fn generate(spec: &SyntheticSpec) -> Result<SyntheticData> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (c, f, ny) = (spec.n_clusters, spec.n_features, spec.n_years);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");

    let prototypes = draw_prototypes(&mut rng, c, f)?;

    let mut support: Vec<usize> = sample(&mut rng, c, spec.support_size).into_vec();
    support.sort_unstable();
    let mut beta = vec![0.0; c];
    for &j in &support {
        beta[j] = rng.random_range(BETA_RANGE.0..BETA_RANGE.1);
    }

    // The balancing member closes the law; every other cluster is exogenous.
    let balance = *support
        .iter()
        .max_by(|a, b| beta[**a].total_cmp(&beta[**b]))
        .expect("non-empty support");

    // Log-scale series: support clusters move with a trend and a cycle,
    // the others stay close to a fixed level.
    let mut log_x = vec![vec![0.0; c]; ny];
    for j in 0..c {
        if j == balance {
            continue;
        }
        let in_support = beta[j] != 0.0;
        let level = rng.random_range(0.0..2.0);
        let (trend, amplitude, wiggle) = if in_support {
            (rng.random_range(-0.5..1.5), rng.random_range(0.1..0.4), 0.05)
        } else {
            (rng.random_range(-CARRIER_TREND..CARRIER_TREND), 0.0, CARRIER_WIGGLE)
        };
        let period = rng.random_range(4.0..12.0);
        let phase = rng.random_range(0.0..TAU);
        for (t, row) in log_x.iter_mut().enumerate() {
            let s = t as f64;
            row[j] = level
                + trend * s / ny as f64
                + amplitude * (TAU * s / period + phase).sin()
                + wiggle * unit.sample(&mut rng);
        }
    }

    // Exogenous part of the law and of the total.
    let partial: Vec<f64> = log_x
        .iter()
        .map(|row| support.iter().filter(|&&j| j != balance).map(|&j| beta[j] * row[j]).sum())
        .collect();
    let rest: Vec<f64> = log_x
        .iter()
        .map(|row| (0..c).filter(|&j| j != balance).map(|j| row[j].exp()).sum())
        .collect();
    let floor: Vec<f64> = rest.iter().map(|&a| law_floor(a, beta[balance])).collect();
    let intercept_for = |eps: &[f64]| {
        (0..ny)
            .map(|t| floor[t] - partial[t] - eps[t])
            .fold(f64::NEG_INFINITY, f64::max)
            + LAW_MARGIN
    };

    let solve_all = |a0: f64, eps: &[f64]| -> Vec<f64> {
        (0..ny)
            .map(|t| solve_balance(rest[t], beta[balance], a0 + partial[t] + eps[t]))
            .collect()
    };
    let zeros = vec![0.0; ny];
    let clean = solve_all(intercept_for(&zeros), &zeros);
    let clean_log: Vec<f64> = (0..ny).map(|t| (rest[t] + clean[t]).ln()).collect();
    let mean = clean_log.iter().sum::<f64>() / ny as f64;
    let signal_sd = (clean_log.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / ny as f64).sqrt();
    let noise: Vec<f64> = (0..ny)
        .map(|_| spec.noise_sd * signal_sd * unit.sample(&mut rng))
        .collect();
    let intercept = intercept_for(&noise);
    let balance_total = solve_all(intercept, &noise);

    let mut cluster_totals = vec![vec![0.0; c]; ny];
    for t in 0..ny {
        for j in 0..c {
            cluster_totals[t][j] = if j == balance {
                balance_total[t]
            } else {
                log_x[t][j].exp()
            };
        }
    }

    // Entities: jittered prototype shape and a fixed share of the cluster total.
    let labels: Vec<usize> = (0..spec.n_entities).map(|e| e % c).collect();
    let jitter = Normal::new(0.0, PROFILE_JITTER).expect("jitter");
    let mut shapes = Vec::with_capacity(spec.n_entities);
    let mut shares = vec![0.0; spec.n_entities];
    for (e, &k) in labels.iter().enumerate() {
        let shape: Vec<f64> = prototypes[k]
            .iter()
            .map(|&v| (v + jitter.sample(&mut rng)).max(1e-3))
            .collect();
        let sum: f64 = shape.iter().sum();
        shapes.push(shape.into_iter().map(|v| v / sum).collect::<Vec<f64>>());
        shares[e] = rng.random_range(0.5..1.5);
    }
    for k in 0..c {
        let members: Vec<usize> = (0..spec.n_entities).filter(|&e| labels[e] == k).collect();
        let sum: f64 = members.iter().map(|&e| shares[e]).sum();
        members.iter().for_each(|&e| shares[e] /= sum);
    }

    let years: Vec<i32> = (0..ny as i32).map(|t| spec.start_year + t).collect();
    let entities: Vec<String> = (0..spec.n_entities).map(|e| format!("entity_{e:02}")).collect();
    let features: Vec<String> = (0..f).map(|k| format!("energy_{k:02}")).collect();
    let panel = EnergyPanel::from_fn(years.clone(), entities.clone(), features, |t, e, k| {
        cluster_totals[t][labels[e]] * shares[e] * shapes[e][k]
    })?;

    Ok(SyntheticData {
        panel,
        truth: GroundTruth {
            spec: spec.clone(),
            entities,
            labels,
            support,
            beta,
            intercept,
            years,
        },
    })
}

/// Cluster prototypes in `[0.05, 1]^f`, redrawn until their row-normalized
/// forms are at least [`MIN_SEPARATION`] apart.
fn draw_prototypes(rng: &mut ChaCha8Rng, c: usize, f: usize) -> Result<Vec<Vec<f64>>> {
    let normalize = |v: &[f64]| -> Vec<f64> {
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        v.iter().map(|x| (x - lo) / (hi - lo)).collect()
    };
    let mut prototypes: Vec<Vec<f64>> = Vec::with_capacity(c);
    let mut normalized: Vec<Vec<f64>> = Vec::with_capacity(c);
    let mut attempts = 0;
    while prototypes.len() < c {
        attempts += 1;
        if attempts > 10_000 {
            return Err(Error::InvalidInput(format!(
                "cannot place {c} separated profiles in {f} features"
            )));
        }
        let mut proto: Vec<f64> = (0..f).map(|_| rng.random_range(0.05..1.0)).collect();
        // Pin the extremes so min-max scaling does not magnify the jitter.
        let peak = prototypes.len() % f;
        proto[peak] = 1.0;
        proto[(peak + 1 + prototypes.len() / f) % f] = 0.05;
        let norm = normalize(&proto);
        if normalized.iter().all(|n| euclidean(n, &norm) >= MIN_SEPARATION) {
            prototypes.push(proto);
            normalized.push(norm);
        }
    }
    Ok(prototypes)
}
