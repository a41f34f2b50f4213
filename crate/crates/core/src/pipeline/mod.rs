//! End-to-end workflow: clean → cluster → aggregate → log → fit → forecast.

mod config;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub use config::{Anchor, PipelineConfig};

use crate::clustering::{self, ClusterAssignment, ClusteringQuality, NeighborhoodParams, Partition, SweepEntry};
use crate::dataio::{self, EnergyPanel};
use crate::preprocess::{self, DroppedSeries};
use crate::regression::{
    self, CvRow, DesignMatrix, FitReport, LinearModel, ModelExport, PathReport, PenaltyKind, PenaltySpec,
};
use crate::{Error, Result};

/// File names written by [`write_artifacts`], in write order.
pub const ARTIFACTS: [&str; 10] = [
    "assignment.csv",
    "cluster_quality.csv",
    "model_ridge.json",
    "model_lasso.json",
    "model_elastic_net.json",
    "path_ridge.csv",
    "path_lasso.csv",
    "path_elastic_net.csv",
    "forecast.csv",
    "pipeline_report.json",
];

/// Cluster-level yearly series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub years: Vec<i32>,
    pub cluster_names: Vec<String>,
    /// `regressors[t][i]`: total of cluster `i` in year `t`.
    pub regressors: Vec<Vec<f64>>,
    /// Grand total per year.
    pub target: Vec<f64>,
}

pub fn cluster_name(id: usize) -> String {
    format!("cluster_{id}")
}

/// Sums every member entity's feature values per cluster and year. The
/// target is the grand total in entity order, so it does not depend on the
/// partition.
pub fn aggregate_by_cluster(panel: &EnergyPanel, partition: &Partition) -> Result<Aggregates> {
    let (ny, ne, _) = panel.shape();
    if partition.labels.len() != ne {
        return Err(Error::InvalidInput(format!(
            "assignment covers {} entities but the panel has {ne}",
            partition.labels.len()
        )));
    }
    let c = partition.num_clusters;
    let mut regressors = vec![vec![0.0; c]; ny];
    let mut target = vec![0.0; ny];
    for (t, row) in regressors.iter_mut().enumerate() {
        for e in 0..ne {
            let total = panel.entity_total(t, e);
            row[partition.labels[e]] += total;
            target[t] += total;
        }
    }
    Ok(Aggregates {
        years: panel.years().to_vec(),
        cluster_names: (0..c).map(cluster_name).collect(),
        regressors,
        target,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterProfile {
    pub cluster: usize,
    pub members: Vec<String>,
    pub count: usize,
    pub sum: f64,
    pub mean: f64,
    /// Sample variance (n − 1 denominator); 0 for a single value.
    pub variance: f64,
    pub min: f64,
    pub p25: f64,
    pub median: f64,
    pub p75: f64,
    pub max: f64,
}

/// Quantile by linear interpolation between order statistics of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Summary statistics of each cluster's pooled member-entity annual totals.
pub fn profile_clusters(panel: &EnergyPanel, partition: &Partition, years: &[i32]) -> Result<Vec<ClusterProfile>> {
    let idx = years
        .iter()
        .map(|&y| panel.year_index(y).ok_or_else(|| Error::InvalidInput(format!("year {y} not in panel"))))
        .collect::<Result<Vec<_>>>()?;
    if idx.is_empty() {
        return Err(Error::InvalidInput("no years to profile".into()));
    }
    (0..partition.num_clusters)
        .map(|k| {
            let members = partition.members(k);
            let mut values: Vec<f64> = members
                .iter()
                .flat_map(|&e| idx.iter().map(move |&t| (t, e)))
                .map(|(t, e)| panel.entity_total(t, e))
                .collect();
            values.sort_by(f64::total_cmp);
            let count = values.len();
            let sum: f64 = values.iter().sum();
            let mean = sum / count as f64;
            let variance = if count > 1 {
                values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (count - 1) as f64
            } else {
                0.0
            };
            Ok(ClusterProfile {
                cluster: k,
                members: members.iter().map(|&e| panel.entities()[e].clone()).collect(),
                count,
                sum,
                mean,
                variance,
                min: values[0],
                p25: quantile_sorted(&values, 0.25),
                median: quantile_sorted(&values, 0.5),
                p75: quantile_sorted(&values, 0.75),
                max: values[count - 1],
            })
        })
        .collect()
}

/// Arithmetic mean and sample variance (n − 1) of forecast differences.
pub fn summarize_forecast(differences: &[f64]) -> Result<(f64, f64)> {
    if differences.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "forecast summary needs at least 2 differences, got {}",
            differences.len()
        )));
    }
    let n = differences.len() as f64;
    let mean = differences.iter().sum::<f64>() / n;
    let variance = differences.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (n - 1.0);
    Ok((mean, variance))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastRow {
    pub year: i32,
    #[serde(rename = "true")]
    pub actual: f64,
    pub predict: f64,
    /// `true − predict`.
    pub difference: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forecast {
    pub model: PenaltyKind,
    pub rows: Vec<ForecastRow>,
    pub mean_error: f64,
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringSection {
    pub params: NeighborhoodParams,
    pub quality: ClusteringQuality,
    pub assignment: ClusterAssignment,
    /// Assignment with noise promoted to singleton clusters.
    pub partition: Partition,
    pub entities: Vec<String>,
    pub admissible_pairs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSection {
    pub kind: PenaltyKind,
    pub penalty: PenaltySpec,
    pub model: LinearModel,
    pub train: FitReport,
    pub kkt_violation: f64,
    pub cv: Vec<CvRow>,
}

/// A log-transformed cell that received the zero offset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OffsetCell {
    pub year: i32,
    pub series: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub data_path: PathBuf,
    pub dropped: DroppedSeries,
    pub train_years: Vec<i32>,
    pub test_years: Vec<i32>,
    pub clustering: ClusteringSection,
    pub profiles: Vec<ClusterProfile>,
    pub aggregates: Aggregates,
    /// Largest |Σ_i x_i(t) − panel total(t)| over all years.
    pub conservation_error: f64,
    pub log_offset_cells: Vec<OffsetCell>,
    pub models: Vec<ModelSection>,
    pub forecast: Forecast,
}

impl PipelineReport {
    pub fn model(&self, kind: PenaltyKind) -> &ModelSection {
        self.models
            .iter()
            .find(|m| m.kind == kind)
            .expect("pipeline fits every penalty kind")
    }
}

/// Everything the pipeline computes, kept in memory until written.
#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub report: PipelineReport,
    pub sweep: Vec<SweepEntry>,
    pub clustering_points: preprocess::FeatureMatrix,
    pub paths: Vec<(PenaltyKind, PathReport)>,
}

trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| e.at_stage(stage))
    }
}

/// Loads, validates and cleans the configured panel.
pub fn load_clean_panel(config: &PipelineConfig) -> Result<(EnergyPanel, DroppedSeries)> {
    let panel = dataio::load_panel(&config.data_path, config.layout).stage("load")?;
    let validation = dataio::validate_panel(&panel);
    if !validation.ok {
        let first = validation.errors().next().expect("not ok implies an error issue");
        return Err(Error::InvalidPanel(format!(
            "{} error(s); first at {}: {}",
            validation.errors().count(),
            first.location,
            first.message
        )))
        .stage("validate");
    }
    preprocess::drop_zero_series(&panel).stage("clean")
}

/// Entity × feature profile over the configured anchor years, before scaling.
pub fn anchor_profile(panel: &EnergyPanel, config: &PipelineConfig, train_years: &[i32]) -> Result<preprocess::FeatureMatrix> {
    let anchor_years = match config.anchor {
        Anchor::TrainMean => train_years.to_vec(),
        Anchor::Year(y) => vec![y],
    };
    preprocess::profile_matrix(panel, &anchor_years).stage("cluster")
}

/// Clustering stage: profile matrix over the anchor years, row-normalized, swept.
pub fn cluster_stage(
    panel: &EnergyPanel,
    config: &PipelineConfig,
    train_years: &[i32],
) -> Result<(preprocess::FeatureMatrix, Vec<SweepEntry>)> {
    let profile = anchor_profile(panel, config, train_years)?;
    let points = preprocess::minmax_normalize_rows(&profile);
    let sweep = clustering::sweep_params(&points, &config.eps_grid, &config.minpts_grid).stage("cluster")?;
    Ok((points, sweep))
}

/// Log design over the cluster aggregates, split into train and test rows.
pub struct LogDesign {
    pub train: DesignMatrix,
    pub test: DesignMatrix,
    pub offsets: Vec<OffsetCell>,
}

pub fn log_design(agg: &Aggregates, train_years: &[i32], test_years: &[i32], epsilon: f64) -> Result<LogDesign> {
    let ny = agg.years.len();
    let c = agg.cluster_names.len();
    let mut offsets = Vec::new();
    let mut logx = DMatrix::<f64>::zeros(ny, c);
    for i in 0..c {
        let column: Vec<f64> = agg.regressors.iter().map(|row| row[i]).collect();
        let (logged, hit) = preprocess::log_transform_zero_offset(&column, epsilon)?;
        offsets.extend(hit.into_iter().map(|t| OffsetCell {
            year: agg.years[t],
            series: agg.cluster_names[i].clone(),
        }));
        logx.set_column(i, &DVector::from_vec(logged));
    }
    let (logy, hit) = preprocess::log_transform_zero_offset(&agg.target, epsilon)?;
    offsets.extend(hit.into_iter().map(|t| OffsetCell {
        year: agg.years[t],
        series: "total".into(),
    }));
    let full = DesignMatrix::new(logx, DVector::from_vec(logy), agg.cluster_names.clone())?;
    let rows = |years: &[i32]| -> Vec<usize> {
        years
            .iter()
            .filter_map(|y| agg.years.iter().position(|v| v == y))
            .collect()
    };
    Ok(LogDesign {
        train: full.select_rows(&rows(train_years))?,
        test: full.select_rows(&rows(test_years))?,
        offsets,
    })
}

/// Candidate penalties for one kind, ascending in strength.
pub fn penalty_grid(kind: PenaltyKind, config: &PipelineConfig, train: &DesignMatrix) -> Result<Vec<PenaltySpec>> {
    let auto = |alpha: f64| -> Result<Vec<f64>> {
        // λ1 = α·λ reaches the dead zone at λ = λ_max / α.
        let top = regression::lambda_max(train, &config.solver) / alpha.max(1e-3);
        if top <= 0.0 {
            return Ok(vec![0.0]);
        }
        regression::log_grid(top * config.auto_grid_ratio, top, config.auto_grid_points)
    };
    let mut grid = match kind {
        PenaltyKind::Ridge => config
            .ridge_lambdas
            .iter()
            .map(|&l| PenaltySpec::ridge(l))
            .collect::<Result<Vec<_>>>()?,
        PenaltyKind::Lasso => match &config.lasso_lambdas {
            Some(ls) => ls.clone(),
            None => auto(1.0)?,
        }
        .into_iter()
        .map(PenaltySpec::lasso)
        .collect::<Result<Vec<_>>>()?,
        PenaltyKind::ElasticNet => {
            let mut specs = Vec::new();
            for &alpha in &config.enet_alphas {
                let lambdas = match &config.enet_lambdas {
                    Some(ls) => ls.clone(),
                    None => auto(alpha)?,
                };
                for l in lambdas {
                    specs.push(PenaltySpec::elastic_net_mix(l, alpha)?);
                }
            }
            specs
        }
    };
    grid.sort_by(|a, b| a.strength().total_cmp(&b.strength()));
    Ok(grid)
}

/// Cross-validates one penalty kind on the training design and refits the winner.
pub fn regress_stage(
    kind: PenaltyKind,
    config: &PipelineConfig,
    train: &DesignMatrix,
) -> Result<(ModelSection, PathReport)> {
    let grid = penalty_grid(kind, config, train)?;
    let cv = regression::cross_validate(train, &grid, config.cv_folds, &config.solver)?;
    let model = regression::fit(train, &cv.best, &config.solver)?;
    let fit = regression::fit_report(&model, train)?;

    // The path traces the winning mix (α) across the grid.
    let path_grid: Vec<PenaltySpec> = grid
        .iter()
        .copied()
        .filter(|p| kind != PenaltyKind::ElasticNet || p.alpha == cv.best.alpha)
        .collect();
    let path = regression::iterate_lambda(train, &path_grid, &config.solver)?;
    let section = ModelSection {
        kind,
        penalty: cv.best,
        kkt_violation: regression::kkt_check(&model, train),
        model,
        train: fit,
        cv: cv.table,
    };
    Ok((section, path))
}

/// Stage tag used in errors from [`regress_stage`].
pub fn regress_stage_name(kind: PenaltyKind) -> &'static str {
    match kind {
        PenaltyKind::Ridge => "regress:ridge",
        PenaltyKind::Lasso => "regress:lasso",
        PenaltyKind::ElasticNet => "regress:elastic_net",
    }
}

/// Stages up to and including the log design.
pub struct Prepared {
    pub dropped: DroppedSeries,
    pub train_years: Vec<i32>,
    pub test_years: Vec<i32>,
    pub points: preprocess::FeatureMatrix,
    pub sweep: Vec<SweepEntry>,
    pub partition: Partition,
    pub aggregates: Aggregates,
    pub conservation_error: f64,
    pub profiles: Vec<ClusterProfile>,
    pub design: LogDesign,
}

/// Largest absolute gap between the aggregated target and the panel's yearly grand total.
pub fn conservation_error(panel: &EnergyPanel, aggregates: &Aggregates) -> f64 {
    let block = panel.entities().len() * panel.features().len();
    panel
        .values()
        .chunks(block.max(1))
        .zip(&aggregates.target)
        .map(|(cells, total)| (total - cells.iter().sum::<f64>()).abs())
        .fold(0.0, f64::max)
}

/// Load, clean, split, cluster, aggregate and log-transform.
pub fn prepare(config: &PipelineConfig) -> Result<Prepared> {
    config.validate()?;
    let (panel, dropped) = load_clean_panel(config)?;
    let (train_years, test_years) = config.split_years(panel.years()).stage("split")?;

    let (points, sweep) = cluster_stage(&panel, config, &train_years)?;
    let partition = sweep[0].assignment.promote_noise();

    let aggregates = aggregate_by_cluster(&panel, &partition).stage("aggregate")?;
    let conservation_error = conservation_error(&panel, &aggregates);
    let profiles = profile_clusters(&panel, &partition, panel.years()).stage("aggregate")?;
    let design = log_design(&aggregates, &train_years, &test_years, config.log_epsilon).stage("transform")?;
    Ok(Prepared {
        dropped,
        train_years,
        test_years,
        points,
        sweep,
        partition,
        aggregates,
        conservation_error,
        profiles,
        design,
    })
}

/// Runs every stage in memory. Nothing is written to disk.
pub fn execute(config: &PipelineConfig) -> Result<PipelineRun> {
    let Prepared {
        dropped,
        train_years,
        test_years,
        points,
        sweep,
        partition,
        aggregates,
        conservation_error,
        profiles,
        design,
    } = prepare(config)?;
    let top = &sweep[0];

    let mut models = Vec::with_capacity(3);
    let mut paths = Vec::with_capacity(3);
    for kind in PenaltyKind::ALL {
        let (section, path) = regress_stage(kind, config, &design.train).stage(regress_stage_name(kind))?;
        models.push(section);
        paths.push((kind, path));
    }

    let forecast = forecast_holdout(&models[2].model, &design.test, &test_years).stage("forecast")?;

    let report = PipelineReport {
        data_path: config.data_path.clone(),
        dropped,
        train_years,
        test_years,
        clustering: ClusteringSection {
            params: top.params,
            quality: top.quality.clone(),
            assignment: top.assignment.clone(),
            partition,
            entities: points.entities().to_vec(),
            admissible_pairs: sweep.len(),
        },
        profiles,
        aggregates,
        conservation_error,
        log_offset_cells: design.offsets,
        models,
        forecast,
    };
    Ok(PipelineRun {
        report,
        sweep,
        clustering_points: points,
        paths,
    })
}

/// Predicts the holdout rows and summarizes `actual − predicted`.
pub fn forecast_holdout(model: &LinearModel, test: &DesignMatrix, years: &[i32]) -> Result<Forecast> {
    if years.len() != test.n() {
        return Err(Error::DimensionMismatch {
            expected: test.n(),
            got: years.len(),
        });
    }
    let predicted = regression::predict(model, &test.x)?;
    let rows: Vec<ForecastRow> = years
        .iter()
        .zip(test.y.iter().zip(predicted.iter()))
        .map(|(&year, (&actual, &predict))| ForecastRow {
            year,
            actual,
            predict,
            difference: actual - predict,
        })
        .collect();
    let differences: Vec<f64> = rows.iter().map(|r| r.difference).collect();
    let (mean_error, variance) = summarize_forecast(&differences)?;
    Ok(Forecast {
        model: model.penalty.kind,
        rows,
        mean_error,
        variance,
    })
}

pub fn forecast_csv(forecast: &Forecast) -> String {
    let mut out = String::from("year,true,predict,difference\n");
    for r in &forecast.rows {
        let _ = writeln!(out, "{},{},{},{}", r.year, r.actual, r.predict, r.difference);
    }
    out
}

/// Serialized artifacts in [`ARTIFACTS`] order.
pub fn render_artifacts(run: &PipelineRun) -> Result<Vec<(&'static str, String)>> {
    let report = &run.report;
    let model_json = |kind: PenaltyKind| -> Result<String> {
        let export: ModelExport = report.model(kind).model.export();
        dataio::report_to_string(&export)
    };
    let path_of = |kind: PenaltyKind| {
        let (_, path) = run.paths.iter().find(|(k, _)| *k == kind).expect("every kind has a path");
        regression::path_csv(path)
    };
    Ok(vec![
        (
            ARTIFACTS[0],
            clustering::assignment_csv(&run.clustering_points, &report.clustering.assignment),
        ),
        (ARTIFACTS[1], clustering::quality_csv(&run.sweep)),
        (ARTIFACTS[2], model_json(PenaltyKind::Ridge)?),
        (ARTIFACTS[3], model_json(PenaltyKind::Lasso)?),
        (ARTIFACTS[4], model_json(PenaltyKind::ElasticNet)?),
        (ARTIFACTS[5], path_of(PenaltyKind::Ridge)),
        (ARTIFACTS[6], path_of(PenaltyKind::Lasso)),
        (ARTIFACTS[7], path_of(PenaltyKind::ElasticNet)),
        (ARTIFACTS[8], forecast_csv(&report.forecast)),
        (ARTIFACTS[9], dataio::report_to_string(report)?),
    ])
}

/// Writes `files` into `dir`; on any failure the files already written (and
/// the directory, if this call created it) are removed again.
pub fn write_files(dir: &Path, files: &[(&str, String)]) -> Result<()> {
    let created = !dir.exists();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written: Vec<PathBuf> = Vec::new();
    for (name, body) in files {
        let path = dir.join(name);
        if let Err(e) = fs::write(&path, body) {
            for p in &written {
                let _ = fs::remove_file(p);
            }
            if created {
                let _ = fs::remove_dir_all(dir);
            }
            return Err(Error::io(&path, e)).stage("write");
        }
        written.push(path);
    }
    Ok(())
}

pub fn write_artifacts(run: &PipelineRun, dir: &Path) -> Result<()> {
    write_files(dir, &render_artifacts(run)?)
}

/// Runs the pipeline and writes every artifact to `config.out_dir`.
pub fn run_pipeline(config: &PipelineConfig) -> Result<PipelineReport> {
    let run = execute(config)?;
    write_artifacts(&run, &config.out_dir)?;
    Ok(run.report)
}
