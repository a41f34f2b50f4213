//! `clusterreg` command-line front end.
//!
//! Exit codes: 0 success, 1 domain failure (invalid panel, no admissible
//! clustering, missing upstream artifact, ...), 2 usage or I/O failure.

mod plot;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use clusterreg::dataio::{self, Layout, Severity};
use clusterreg::pipeline::{self, ModelSection, PipelineConfig};
use clusterreg::regression::PenaltyKind;
use clusterreg::synthetic::{self, SyntheticSpec};
use clusterreg::{clustering, regression};

use plot::Figure;

#[derive(Debug, Parser)]
#[command(name = "clusterreg", version, about = "Density clustering and penalized regression for panel data")]
struct Cli {
    /// Pipeline configuration file (TOML).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory; overrides `[data] out_dir`.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Generator seed (gen-synthetic only).
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check panel files for negative, non-finite or all-zero data.
    Validate {
        /// Panel files (long layout) or directories (wide layout). Defaults to the configured data path.
        paths: Vec<PathBuf>,
        #[arg(long)]
        layout: Option<Layout>,
    },
    /// Sweep DBSCAN parameters and write the selected assignment.
    Cluster,
    /// Cross-validate and fit penalized regressions on the cluster aggregates.
    Regress {
        /// ridge, lasso or elastic_net; all three when omitted.
        #[arg(long)]
        kind: Option<PenaltyKind>,
    },
    /// Run every stage and write the full artifact set.
    Pipeline,
    /// Fit the elastic net and forecast the holdout years.
    Forecast,
    /// Generate a panel with planted clusters and a sparse log-linear law.
    GenSynthetic {
        #[arg(long, default_value_t = 48)]
        entities: usize,
        #[arg(long, default_value_t = 16)]
        features: usize,
        #[arg(long, default_value_t = 16)]
        clusters: usize,
        #[arg(long, default_value_t = 40)]
        years: usize,
        #[arg(long, default_value_t = 7)]
        support: usize,
        /// Law perturbation as a fraction of the noise-free log-total spread.
        #[arg(long, default_value_t = 0.0)]
        noise_sd: f64,
        #[arg(long, default_value_t = 1980)]
        start_year: i32,
        #[arg(long, default_value = "long")]
        layout: Layout,
    },
    /// Emit the CSV data behind a figure.
    PlotData {
        #[arg(long, value_enum)]
        figure: Figure,
        /// Model for lambda_path (default lasso) and fit_scatter (default elastic_net).
        #[arg(long)]
        kind: Option<PenaltyKind>,
    },
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] clusterreg::Error),
    #[error("{0}")]
    Usage(String),
    #[error("missing {}: run `clusterreg {stage}` first", path.display())]
    MissingArtifact { path: PathBuf, stage: &'static str },
    /// Already reported on standard error.
    #[error("panel validation failed")]
    Invalid,
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_input_failure() => 2,
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if !matches!(e, CliError::Invalid) {
                eprintln!("error: {e}");
            }
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let is_gen = matches!(cli.command, Command::GenSynthetic { .. });
    if cli.seed.is_some() && !is_gen {
        return Err(CliError::Usage("--seed only applies to gen-synthetic".into()));
    }
    match &cli.command {
        Command::Validate { paths, layout } => cmd_validate(&cli, paths, *layout),
        Command::Cluster => cmd_cluster(&load_config(&cli)?),
        Command::Regress { kind } => cmd_regress(&load_config(&cli)?, *kind),
        Command::Pipeline => cmd_pipeline(&load_config(&cli)?),
        Command::Forecast => cmd_forecast(&load_config(&cli)?),
        Command::GenSynthetic {
            entities,
            features,
            clusters,
            years,
            support,
            noise_sd,
            start_year,
            layout,
        } => {
            let seed = cli
                .seed
                .ok_or_else(|| CliError::Usage("gen-synthetic requires --seed".into()))?;
            let spec = SyntheticSpec {
                seed,
                n_entities: *entities,
                n_features: *features,
                n_clusters: *clusters,
                n_years: *years,
                support_size: *support,
                noise_sd: *noise_sd,
                start_year: *start_year,
            };
            let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("synthetic"));
            cmd_gen_synthetic(&spec, &out, *layout)
        }
        Command::PlotData { figure, kind } => plot::cmd_plot_data(&load_config(&cli)?, *figure, *kind),
    }
}

fn load_config(cli: &Cli) -> CliResult<PipelineConfig> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Usage("this subcommand needs --config <path>".into()))?;
    let mut config = PipelineConfig::load(path)?;
    if let Some(out) = &cli.out {
        config.out_dir = out.clone();
    }
    Ok(config)
}

fn cmd_validate(cli: &Cli, paths: &[PathBuf], layout: Option<Layout>) -> CliResult<()> {
    let targets: Vec<(PathBuf, Layout)> = if paths.is_empty() {
        let config = load_config(cli)?;
        vec![(config.data_path.clone(), layout.unwrap_or(config.layout))]
    } else {
        paths.iter().map(|p| (p.clone(), layout.unwrap_or(Layout::Long))).collect()
    };
    if cli.out.is_some() && targets.len() > 1 {
        return Err(CliError::Usage("--out takes a single panel to validate".into()));
    }

    let mut all_ok = true;
    for (path, layout) in &targets {
        let panel = dataio::load_panel(path, *layout)?;
        let report = dataio::validate_panel(&panel);
        for issue in &report.issues {
            let level = match issue.severity {
                Severity::Error => "error",
                Severity::Warning => "warning",
            };
            eprintln!("{}: {level} at {}: {}", path.display(), issue.location, issue.message);
        }
        let (errors, warnings) = (report.errors().count(), report.warnings().count());
        if report.ok {
            println!("{}: ok ({warnings} warning(s))", path.display());
        } else {
            println!("{}: {errors} error(s), {warnings} warning(s)", path.display());
        }
        all_ok &= report.ok;
        if let Some(out) = &cli.out {
            pipeline::write_files(out, &[("validation_report.json", dataio::report_to_string(&report)?)])?;
        }
    }
    if all_ok {
        Ok(())
    } else {
        Err(CliError::Invalid)
    }
}

fn cmd_cluster(config: &PipelineConfig) -> CliResult<()> {
    let (panel, _) = pipeline::load_clean_panel(config)?;
    let (train_years, _) = config.split_years(panel.years()).map_err(|e| e.at_stage("split"))?;
    let (points, sweep) = pipeline::cluster_stage(&panel, config, &train_years)?;
    let top = &sweep[0];
    pipeline::write_files(
        &config.out_dir,
        &[
            ("assignment.csv", clustering::assignment_csv(&points, &top.assignment)),
            ("cluster_quality.csv", clustering::quality_csv(&sweep)),
        ],
    )?;
    println!(
        "eps={} min_pts={} C={} SC={} SSE={}",
        top.params.eps,
        top.params.min_pts,
        top.quality.c,
        top.quality.sc.unwrap_or(f64::NAN),
        top.quality.sse
    );
    Ok(())
}

fn metrics_line(section: &ModelSection) -> String {
    format!(
        "{} {} {} {} {}",
        section.kind, section.penalty.lambda, section.train.r2, section.train.mse, section.train.sparsity
    )
}

fn cmd_regress(config: &PipelineConfig, kind: Option<PenaltyKind>) -> CliResult<()> {
    let prepared = pipeline::prepare(config)?;
    let kinds: Vec<PenaltyKind> = kind.map_or_else(|| PenaltyKind::ALL.to_vec(), |k| vec![k]);
    let mut files = Vec::new();
    let mut lines = String::new();
    for kind in kinds {
        let (section, path) = pipeline::regress_stage(kind, config, &prepared.design.train)
            .map_err(|e| e.at_stage(pipeline::regress_stage_name(kind)))?;
        files.push((model_file(kind), dataio::report_to_string(&section.model.export())?));
        files.push((path_file(kind), regression::path_csv(&path)));
        let _ = writeln!(lines, "{}", metrics_line(&section));
    }
    pipeline::write_files(&config.out_dir, &files)?;
    print!("{lines}");
    Ok(())
}

fn cmd_pipeline(config: &PipelineConfig) -> CliResult<()> {
    let run = pipeline::execute(config)?;
    pipeline::write_artifacts(&run, &config.out_dir)?;
    for section in &run.report.models {
        println!("{}", metrics_line(section));
    }
    let f = &run.report.forecast;
    println!("forecast mean_error={} variance={}", f.mean_error, f.variance);
    Ok(())
}

fn cmd_forecast(config: &PipelineConfig) -> CliResult<()> {
    let prepared = pipeline::prepare(config)?;
    let kind = PenaltyKind::ElasticNet;
    let (section, _) = pipeline::regress_stage(kind, config, &prepared.design.train)
        .map_err(|e| e.at_stage(pipeline::regress_stage_name(kind)))?;
    let forecast = pipeline::forecast_holdout(&section.model, &prepared.design.test, &prepared.test_years)
        .map_err(|e| e.at_stage("forecast"))?;
    pipeline::write_files(&config.out_dir, &[("forecast.csv", pipeline::forecast_csv(&forecast))])?;
    println!("{}", metrics_line(&section));
    for row in &forecast.rows {
        println!("{} true={} predict={} difference={}", row.year, row.actual, row.predict, row.difference);
    }
    println!("forecast mean_error={} variance={}", forecast.mean_error, forecast.variance);
    Ok(())
}

fn model_file(kind: PenaltyKind) -> &'static str {
    match kind {
        PenaltyKind::Ridge => "model_ridge.json",
        PenaltyKind::Lasso => "model_lasso.json",
        PenaltyKind::ElasticNet => "model_elastic_net.json",
    }
}

fn path_file(kind: PenaltyKind) -> &'static str {
    match kind {
        PenaltyKind::Ridge => "path_ridge.csv",
        PenaltyKind::Lasso => "path_lasso.csv",
        PenaltyKind::ElasticNet => "path_elastic_net.csv",
    }
}

fn cmd_gen_synthetic(spec: &SyntheticSpec, out: &Path, layout: Layout) -> CliResult<()> {
    let data = synthetic::generate(spec)?;
    std::fs::create_dir_all(out).map_err(|e| clusterreg::Error::io(out, e))?;
    let (data_name, layout_name) = match layout {
        Layout::Long => {
            dataio::write_long(&data.panel, out.join("panel.csv"))?;
            ("panel.csv", "long")
        }
        Layout::Wide => {
            dataio::write_wide(&data.panel, out.join("panel"))?;
            ("panel", "wide")
        }
    };
    let config = format!("[data]\npath = \"{data_name}\"\nlayout = \"{layout_name}\"\nout_dir = \"out\"\n");
    pipeline::write_files(
        out,
        &[
            ("ground_truth.json", dataio::report_to_string(&data.truth)?),
            ("config.toml", config),
        ],
    )?;
    println!(
        "wrote {} entities x {} features x {} years to {}; support {:?}",
        spec.n_entities,
        spec.n_features,
        spec.n_years,
        out.display(),
        data.truth.support
    );
    Ok(())
}
