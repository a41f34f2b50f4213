//! Cleaning and scaling: zero-series removal, per-entity min-max
//! normalization, and the logarithmic transform used by the regressions.

use serde::{Deserialize, Serialize};

use crate::dataio::EnergyPanel;
use crate::{Error, Result};

/// Default offset added to exact zeros before taking logs (Mt).
pub const DEFAULT_LOG_EPSILON: f64 = 1e-6;

/// Entity × feature matrix; each row is one clustering point.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    entities: Vec<String>,
    features: Vec<String>,
    values: Vec<f64>,
}

impl FeatureMatrix {
    /// `values` is row-major (one row per entity).
    pub fn new(entities: Vec<String>, features: Vec<String>, values: Vec<f64>) -> Result<Self> {
        let expected = entities.len() * features.len();
        if values.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite value at row {}, column {}",
                i / features.len().max(1),
                i % features.len().max(1)
            )));
        }
        Ok(FeatureMatrix {
            entities,
            features,
            values,
        })
    }

    /// Matrix with generated names, for point sets that have no labels.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: bad.len(),
            });
        }
        Self::new(
            (0..rows.len()).map(|i| format!("p{i}")).collect(),
            (0..dim).map(|j| format!("f{j}")).collect(),
            rows.concat(),
        )
    }

    pub fn entities(&self) -> &[String] {
        &self.entities
    }

    pub fn features(&self) -> &[String] {
        &self.features
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn nrows(&self) -> usize {
        self.entities.len()
    }

    pub fn ncols(&self) -> usize {
        self.features.len()
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        let p = self.features.len();
        &self.values[i * p..(i + 1) * p]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.nrows()).map(move |i| self.row(i))
    }

    /// Reorders rows; `order[k]` is the source row placed at position `k`.
    pub fn permute_rows(&self, order: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            entities: order.iter().map(|&i| self.entities[i].clone()).collect(),
            features: self.features.clone(),
            values: order.iter().flat_map(|&i| self.row(i).iter().copied()).collect(),
        }
    }
}

/// Names removed by [`drop_zero_series`].
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DroppedSeries {
    pub features: Vec<String>,
    pub entities: Vec<String>,
}

impl DroppedSeries {
    pub fn is_empty(&self) -> bool {
        self.features.is_empty() && self.entities.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.features.iter().chain(&self.entities).map(String::as_str)
    }
}

/// Removes every feature column and entity row that is zero in all years.
pub fn drop_zero_series(panel: &EnergyPanel) -> Result<(EnergyPanel, DroppedSeries)> {
    let (ny, ne, nf) = panel.shape();
    let mut feature_nonzero = vec![false; nf];
    let mut entity_nonzero = vec![false; ne];
    for t in 0..ny {
        for e in 0..ne {
            for (k, &v) in panel.row(t, e).iter().enumerate() {
                if v != 0.0 {
                    feature_nonzero[k] = true;
                    entity_nonzero[e] = true;
                }
            }
        }
    }

    let keep_features: Vec<usize> = (0..nf).filter(|&k| feature_nonzero[k]).collect();
    let keep_entities: Vec<usize> = (0..ne).filter(|&e| entity_nonzero[e]).collect();
    if keep_features.is_empty() || keep_entities.is_empty() {
        return Err(Error::EmptyAfterCleaning);
    }

    let dropped = DroppedSeries {
        features: (0..nf)
            .filter(|&k| !feature_nonzero[k])
            .map(|k| panel.features()[k].clone())
            .collect(),
        entities: (0..ne)
            .filter(|&e| !entity_nonzero[e])
            .map(|e| panel.entities()[e].clone())
            .collect(),
    };
    if dropped.is_empty() {
        return Ok((panel.clone(), dropped));
    }
    Ok((panel.select(&keep_entities, &keep_features)?, dropped))
}

/// Per-entity feature profile averaged over `years`.
///
/// A single-element `years` anchors the clustering to one reference year.
pub fn profile_matrix(panel: &EnergyPanel, years: &[i32]) -> Result<FeatureMatrix> {
    if years.is_empty() {
        return Err(Error::InvalidInput("profile window has no years".into()));
    }
    let idx = years
        .iter()
        .map(|&y| {
            panel
                .year_index(y)
                .ok_or_else(|| Error::InvalidInput(format!("year {y} not in panel")))
        })
        .collect::<Result<Vec<_>>>()?;
    let (_, ne, nf) = panel.shape();
    let mut values = vec![0.0; ne * nf];
    for &t in &idx {
        for e in 0..ne {
            for (k, &v) in panel.row(t, e).iter().enumerate() {
                values[e * nf + k] += v;
            }
        }
    }
    let n = idx.len() as f64;
    values.iter_mut().for_each(|v| *v /= n);
    FeatureMatrix::new(panel.entities().to_vec(), panel.features().to_vec(), values)
}

/// Scales every row to `[0, 1]` via `(x − min) / (max − min)`.
///
/// Constant rows become all zeros.
pub fn minmax_normalize_rows(m: &FeatureMatrix) -> FeatureMatrix {
    let mut values = m.values.clone();
    let p = m.ncols();
    if p > 0 {
        for row in values.chunks_mut(p) {
            let (lo, hi) = row
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
            let range = hi - lo;
            for v in row.iter_mut() {
                *v = if range > 0.0 { ((*v - lo) / range).clamp(0.0, 1.0) } else { 0.0 };
            }
        }
    }
    FeatureMatrix {
        entities: m.entities.clone(),
        features: m.features.clone(),
        values,
    }
}

/// `ln(x + epsilon)` elementwise.
///
/// `epsilon = 0` is accepted as long as every input is strictly positive.
pub fn log_transform(series: &[f64], epsilon: f64) -> Result<Vec<f64>> {
    check_log_inputs(series, epsilon)?;
    series
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let shifted = x + epsilon;
            if shifted > 0.0 {
                Ok(shifted.ln())
            } else {
                Err(Error::InvalidInput(format!("ln undefined at index {i} ({x} + {epsilon})")))
            }
        })
        .collect()
}

/// `ln(x)`, with `epsilon` substituted for cells that are exactly zero.
///
/// Returns the transformed series and the indices that received the offset.
pub fn log_transform_zero_offset(series: &[f64], epsilon: f64) -> Result<(Vec<f64>, Vec<usize>)> {
    check_log_inputs(series, epsilon)?;
    if epsilon == 0.0 && series.contains(&0.0) {
        return Err(Error::InvalidInput("zero cell with epsilon = 0".into()));
    }
    let mut offset = Vec::new();
    let out = series
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            if x == 0.0 {
                offset.push(i);
                epsilon.ln()
            } else {
                x.ln()
            }
        })
        .collect();
    Ok((out, offset))
}

fn check_log_inputs(series: &[f64], epsilon: f64) -> Result<()> {
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidInput(format!("log epsilon must be non-negative, got {epsilon}")));
    }
    if let Some((i, x)) = series.iter().enumerate().find(|(_, x)| !(**x >= 0.0)) {
        return Err(Error::InvalidInput(format!("negative or NaN input {x} at index {i}")));
    }
    Ok(())
}
