//! Tidy CSV data behind each figure. Nothing is rendered.
//!
//! | figure          | columns                                   | source                  |
//! |-----------------|-------------------------------------------|-------------------------|
//! | `energy_trends` | `year,feature,value`                      | cleaned panel           |
//! | `heatmap`       | `entity,feature,raw,normalized`           | cleaned panel           |
//! | `cluster_boxes` | `cluster,count,min,p25,median,p75,max,mean,variance` | `pipeline_report.json` |
//! | `lambda_path`   | `lambda,coef_name,value`                  | `path_<kind>.csv`       |
//! | `fit_scatter`   | `year,actual,predicted`                   | `pipeline_report.json`  |
//! | `forecast`      | `year,model,split,actual,predicted`       | `pipeline_report.json`  |
//!
//! Output goes to `<out_dir>/plots/<figure>.csv`.

use std::fmt::Write as _;
use std::path::PathBuf;

use clap::ValueEnum;
use clusterreg::dataio::{self, csv_field};
use clusterreg::pipeline::{self, PipelineConfig, PipelineReport};
use clusterreg::preprocess;
use clusterreg::regression::{self, PenaltyKind};

use crate::{path_file, CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum Figure {
    EnergyTrends,
    Heatmap,
    ClusterBoxes,
    LambdaPath,
    FitScatter,
    Forecast,
    All,
}

impl Figure {
    const EACH: [Figure; 6] = [
        Figure::EnergyTrends,
        Figure::Heatmap,
        Figure::ClusterBoxes,
        Figure::LambdaPath,
        Figure::FitScatter,
        Figure::Forecast,
    ];

    fn file_name(self) -> &'static str {
        match self {
            Figure::EnergyTrends => "energy_trends.csv",
            Figure::Heatmap => "heatmap.csv",
            Figure::ClusterBoxes => "cluster_boxes.csv",
            Figure::LambdaPath => "lambda_path.csv",
            Figure::FitScatter => "fit_scatter.csv",
            Figure::Forecast => "forecast.csv",
            Figure::All => unreachable!("expanded before rendering"),
        }
    }
}

pub fn cmd_plot_data(config: &PipelineConfig, figure: Figure, kind: Option<PenaltyKind>) -> CliResult<()> {
    let figures: Vec<Figure> = if figure == Figure::All {
        Figure::EACH.to_vec()
    } else {
        vec![figure]
    };
    let mut files = Vec::with_capacity(figures.len());
    for f in figures {
        let body = match f {
            Figure::EnergyTrends => energy_trends(config)?,
            Figure::Heatmap => heatmap(config)?,
            Figure::ClusterBoxes => cluster_boxes(&load_report(config)?),
            Figure::LambdaPath => lambda_path(config, kind.unwrap_or(PenaltyKind::Lasso))?,
            Figure::FitScatter => fit_scatter(&load_report(config)?, kind.unwrap_or(PenaltyKind::ElasticNet)),
            Figure::Forecast => forecast(config, &load_report(config)?)?,
            Figure::All => unreachable!(),
        };
        files.push((f.file_name(), body));
    }
    let dir = config.out_dir.join("plots");
    pipeline::write_files(&dir, &files)?;
    for (name, _) in &files {
        println!("{}", dir.join(name).display());
    }
    Ok(())
}

fn require(path: PathBuf, stage: &'static str) -> CliResult<PathBuf> {
    if path.exists() {
        Ok(path)
    } else {
        Err(CliError::MissingArtifact { path, stage })
    }
}

fn load_report(config: &PipelineConfig) -> CliResult<PipelineReport> {
    let path = require(config.out_dir.join("pipeline_report.json"), "pipeline")?;
    Ok(dataio::load_report(path)?)
}

fn energy_trends(config: &PipelineConfig) -> CliResult<String> {
    let (panel, _) = pipeline::load_clean_panel(config)?;
    let (_, ne, nf) = panel.shape();
    let mut out = String::from("year,feature,value\n");
    for (t, year) in panel.years().iter().enumerate() {
        for (k, feature) in panel.features().iter().enumerate() {
            let total: f64 = (0..ne).map(|e| panel.get(t, e, k)).sum();
            let _ = writeln!(out, "{year},{},{total}", csv_field(feature));
        }
    }
    debug_assert_eq!(out.lines().count(), 1 + panel.years().len() * nf);
    Ok(out)
}

fn heatmap(config: &PipelineConfig) -> CliResult<String> {
    let (panel, _) = pipeline::load_clean_panel(config)?;
    let (train_years, _) = config.split_years(panel.years()).map_err(|e| e.at_stage("split"))?;
    let raw = pipeline::anchor_profile(&panel, config, &train_years)?;
    let scaled = preprocess::minmax_normalize_rows(&raw);
    let mut out = String::from("entity,feature,raw,normalized\n");
    for (i, entity) in raw.entities().iter().enumerate() {
        for (j, feature) in raw.features().iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                csv_field(entity),
                csv_field(feature),
                raw.row(i)[j],
                scaled.row(i)[j]
            );
        }
    }
    Ok(out)
}

fn cluster_boxes(report: &PipelineReport) -> String {
    let mut out = String::from("cluster,count,min,p25,median,p75,max,mean,variance\n");
    for p in &report.profiles {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            pipeline::cluster_name(p.cluster),
            p.count,
            p.min,
            p.p25,
            p.median,
            p.p75,
            p.max,
            p.mean,
            p.variance
        );
    }
    out
}

/// Reshapes a wide path CSV (`lambda,<coefs...>,r2,mse`) into long rows.
fn lambda_path(config: &PipelineConfig, kind: PenaltyKind) -> CliResult<String> {
    let path = require(config.out_dir.join(path_file(kind)), "regress")?;
    let malformed = |message: String| {
        CliError::Core(clusterreg::Error::Parse {
            path: path.clone(),
            line: None,
            column: None,
            message,
        })
    };
    let mut reader = csv::Reader::from_path(&path).map_err(|e| malformed(e.to_string()))?;
    let header = reader.headers().map_err(|e| malformed(e.to_string()))?.clone();
    let n = header.len();
    if n < 3 || &header[0] != "lambda" || &header[n - 2] != "r2" || &header[n - 1] != "mse" {
        return Err(malformed("expected header lambda,<coefficients...>,r2,mse".into()));
    }
    let mut out = String::from("lambda,coef_name,value\n");
    for record in reader.records() {
        let record = record.map_err(|e| malformed(e.to_string()))?;
        for j in 1..n - 2 {
            let _ = writeln!(out, "{},{},{}", &record[0], csv_field(&header[j]), &record[j]);
        }
    }
    Ok(out)
}

/// One row per training year: the log target and its in-sample fit.
fn fit_scatter(report: &PipelineReport, kind: PenaltyKind) -> String {
    let train = &report.model(kind).train;
    let mut out = String::from("year,actual,predicted\n");
    for ((year, y_hat), resid) in report.train_years.iter().zip(&train.y_hat).zip(&train.residuals) {
        let _ = writeln!(out, "{year},{},{y_hat}", y_hat + resid);
    }
    out
}

/// Every model's fit over the training years and prediction over the holdout.
fn forecast(config: &PipelineConfig, report: &PipelineReport) -> CliResult<String> {
    let design = pipeline::log_design(
        &report.aggregates,
        &report.train_years,
        &report.test_years,
        config.log_epsilon,
    )?;
    let mut out = String::from("year,model,split,actual,predicted\n");
    for section in &report.models {
        for (split, years, d) in [
            ("train", &report.train_years, &design.train),
            ("test", &report.test_years, &design.test),
        ] {
            let predicted = regression::predict(&section.model, &d.x)?;
            for ((year, actual), pred) in years.iter().zip(d.y.iter()).zip(predicted.iter()) {
                let _ = writeln!(out, "{year},{},{split},{actual},{pred}", section.kind);
            }
        }
    }
    Ok(out)
}
