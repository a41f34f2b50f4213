//! Pipeline configuration.
//!
//! The file is TOML with five sections; every key is optional:
//!
//! ```toml
//! [data]
//! path = "panel.csv"        # relative paths resolve against the config file
//! layout = "long"           # or "wide" (path is then a directory)
//! out_dir = "out"
//!
//! [preprocess]
//! log_epsilon = 1e-6        # substituted for exact zeros before ln
//! anchor = "train_mean"     # or a single year, e.g. anchor = 2010
//!
//! [cluster]
//! eps_grid = [0.05, 0.1]    # default 0.05..=2.00 step 0.05
//! minpts_grid = [1, 2, 3]   # default 1..=5
//!
//! [regress]
//! ridge_lambdas = [0.0, 0.01]   # default 0..=0.5 step 0.01
//! lasso_lambdas = [0.0081]      # default: auto grid below λ_max
//! enet_lambdas = [5.5652e-4]    # total λ1 + λ2; default: auto grid
//! enet_alphas = [0.5]
//! auto_grid_points = 50
//! auto_grid_ratio = 1e-4        # smallest auto λ as a fraction of λ_max
//! cv_folds = 5
//! tol = 1e-10
//! max_iter = 100000
//! standardize = false
//!
//! [forecast]
//! train_years = [2000, 2014]   # inclusive; default: all but the test window
//! test_years = [2015, 2019]    # inclusive; default: the last 5 years
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::clustering::{default_eps_grid, default_minpts_grid};
use crate::dataio::Layout;
use crate::preprocess::DEFAULT_LOG_EPSILON;
use crate::regression::{default_ridge_grid, SolverOptions};
use crate::{Error, Result};

/// Years whose mean feature profile is clustered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Anchor {
    TrainMean,
    Year(i32),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub data_path: PathBuf,
    pub layout: Layout,
    pub out_dir: PathBuf,
    pub log_epsilon: f64,
    pub anchor: Anchor,
    pub eps_grid: Vec<f64>,
    pub minpts_grid: Vec<usize>,
    pub ridge_lambdas: Vec<f64>,
    pub lasso_lambdas: Option<Vec<f64>>,
    pub enet_lambdas: Option<Vec<f64>>,
    pub enet_alphas: Vec<f64>,
    pub auto_grid_points: usize,
    pub auto_grid_ratio: f64,
    pub cv_folds: usize,
    pub solver: SolverOptions,
    /// Inclusive training window; `None` means every year before the test window.
    pub train_years: Option<(i32, i32)>,
    /// Inclusive holdout window; `None` means the last five panel years.
    pub test_years: Option<(i32, i32)>,
}

impl PipelineConfig {
    pub fn new(data_path: impl Into<PathBuf>, layout: Layout) -> Self {
        PipelineConfig {
            data_path: data_path.into(),
            layout,
            out_dir: PathBuf::from("out"),
            log_epsilon: DEFAULT_LOG_EPSILON,
            anchor: Anchor::TrainMean,
            eps_grid: default_eps_grid(),
            minpts_grid: default_minpts_grid(),
            ridge_lambdas: default_ridge_grid(),
            lasso_lambdas: None,
            enet_lambdas: None,
            enet_alphas: vec![0.5],
            auto_grid_points: 50,
            auto_grid_ratio: 1e-4,
            cv_folds: 5,
            solver: SolverOptions::default(),
            train_years: None,
            test_years: None,
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, base)
    }

    /// Parses config text; relative paths resolve against `base`.
    pub fn from_toml(text: &str, base: &Path) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let data_path = raw
            .data
            .path
            .ok_or_else(|| Error::Config("[data] path is required".into()))?;
        let mut cfg = PipelineConfig::new(base.join(data_path), raw.data.layout.unwrap_or(Layout::Long));
        if let Some(out) = raw.data.out_dir {
            cfg.out_dir = base.join(out);
        }

        let pre = raw.preprocess;
        if let Some(eps) = pre.log_epsilon {
            cfg.log_epsilon = eps;
        }
        if let Some(anchor) = pre.anchor {
            cfg.anchor = match anchor {
                RawAnchor::Year(y) => Anchor::Year(y),
                RawAnchor::Named(s) if s == "train_mean" => Anchor::TrainMean,
                RawAnchor::Named(s) => return Err(Error::Config(format!("unknown anchor {s:?}"))),
            };
        }

        if let Some(g) = raw.cluster.eps_grid {
            cfg.eps_grid = g;
        }
        if let Some(g) = raw.cluster.minpts_grid {
            cfg.minpts_grid = g;
        }

        let reg = raw.regress;
        if let Some(g) = reg.ridge_lambdas {
            cfg.ridge_lambdas = g;
        }
        cfg.lasso_lambdas = reg.lasso_lambdas;
        cfg.enet_lambdas = reg.enet_lambdas;
        if let Some(a) = reg.enet_alphas {
            cfg.enet_alphas = a;
        }
        if let Some(v) = reg.auto_grid_points {
            cfg.auto_grid_points = v;
        }
        if let Some(v) = reg.auto_grid_ratio {
            cfg.auto_grid_ratio = v;
        }
        if let Some(v) = reg.cv_folds {
            cfg.cv_folds = v;
        }
        if let Some(v) = reg.tol {
            cfg.solver.tol = v;
        }
        if let Some(v) = reg.max_iter {
            cfg.solver.max_iter = v;
        }
        if let Some(v) = reg.standardize {
            cfg.solver.standardize = v;
        }

        cfg.train_years = raw.forecast.train_years.map(|[a, b]| (a, b));
        cfg.test_years = raw.forecast.test_years.map(|[a, b]| (a, b));
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks everything that does not need the data.
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.eps_grid.is_empty() || self.minpts_grid.is_empty() {
            return fail("clustering grids must be non-empty".into());
        }
        if self.eps_grid.iter().any(|e| !(*e >= 0.0)) || self.minpts_grid.contains(&0) {
            return fail("eps must be non-negative and min_pts at least 1".into());
        }
        if self.ridge_lambdas.is_empty()
            || self.lasso_lambdas.as_ref().is_some_and(Vec::is_empty)
            || self.enet_lambdas.as_ref().is_some_and(Vec::is_empty)
            || self.enet_alphas.is_empty()
        {
            return fail("λ grids must be non-empty".into());
        }
        let all_lambdas = self
            .ridge_lambdas
            .iter()
            .chain(self.lasso_lambdas.iter().flatten())
            .chain(self.enet_lambdas.iter().flatten());
        if all_lambdas.clone().any(|l| !(*l >= 0.0 && l.is_finite())) {
            return fail("λ values must be non-negative".into());
        }
        if self.enet_alphas.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return fail("enet_alphas must lie in [0, 1]".into());
        }
        if self.auto_grid_points == 0 || !(self.auto_grid_ratio > 0.0 && self.auto_grid_ratio < 1.0) {
            return fail("auto grid needs points ≥ 1 and 0 < ratio < 1".into());
        }
        if self.cv_folds < 2 {
            return fail(format!("cv_folds must be at least 2, got {}", self.cv_folds));
        }
        if !(self.log_epsilon > 0.0) {
            return fail(format!("log_epsilon must be positive, got {}", self.log_epsilon));
        }
        self.solver.validate().map_err(|e| Error::Config(e.to_string()))?;
        for (name, window) in [("train_years", self.train_years), ("test_years", self.test_years)] {
            if let Some((a, b)) = window {
                if a > b {
                    return fail(format!("{name} range [{a}, {b}] is reversed"));
                }
            }
        }
        if let (Some(train), Some(test)) = (self.train_years, self.test_years) {
            if train.1 >= test.0 {
                return fail(format!(
                    "train years [{}, {}] must end before test years [{}, {}] begin",
                    train.0, train.1, test.0, test.1
                ));
            }
        }
        Ok(())
    }

    /// Resolves the train and test windows against the panel's years.
    pub fn split_years(&self, years: &[i32]) -> Result<(Vec<i32>, Vec<i32>)> {
        let last = *years.last().ok_or_else(|| Error::Config("panel has no years".into()))?;
        let test_window = match self.test_years {
            Some(w) => w,
            None => {
                let start = years.len().saturating_sub(5);
                (years[start], last)
            }
        };
        let train_window = self
            .train_years
            .unwrap_or((years[0], test_window.0.saturating_sub(1)));
        if train_window.1 >= test_window.0 {
            return Err(Error::Config("train and test windows overlap".into()));
        }
        let pick = |(a, b): (i32, i32)| years.iter().copied().filter(|y| (a..=b).contains(y)).collect::<Vec<_>>();
        let (train, test) = (pick(train_window), pick(test_window));
        if train.len() < self.cv_folds {
            return Err(Error::Config(format!(
                "{} training years cannot fill {} folds",
                train.len(),
                self.cv_folds
            )));
        }
        if test.len() < 2 {
            return Err(Error::Config(format!("holdout window needs at least 2 years, found {}", test.len())));
        }
        Ok((train, test))
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    data: RawData,
    #[serde(default)]
    preprocess: RawPreprocess,
    #[serde(default)]
    cluster: RawCluster,
    #[serde(default)]
    regress: RawRegress,
    #[serde(default)]
    forecast: RawForecast,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawData {
    path: Option<PathBuf>,
    layout: Option<Layout>,
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawAnchor {
    Year(i32),
    Named(String),
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPreprocess {
    log_epsilon: Option<f64>,
    anchor: Option<RawAnchor>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCluster {
    eps_grid: Option<Vec<f64>>,
    minpts_grid: Option<Vec<usize>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRegress {
    ridge_lambdas: Option<Vec<f64>>,
    lasso_lambdas: Option<Vec<f64>>,
    enet_lambdas: Option<Vec<f64>>,
    enet_alphas: Option<Vec<f64>>,
    auto_grid_points: Option<usize>,
    auto_grid_ratio: Option<f64>,
    cv_folds: Option<usize>,
    tol: Option<f64>,
    max_iter: Option<usize>,
    standardize: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawForecast {
    train_years: Option<[i32; 2]>,
    test_years: Option<[i32; 2]>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_fill_missing_keys() {
        let cfg = PipelineConfig::from_toml("[data]\npath = \"p.csv\"\n", Path::new("/tmp/x")).unwrap();
        assert_eq!(cfg.data_path, PathBuf::from("/tmp/x/p.csv"));
        assert_eq!(cfg.layout, Layout::Long);
        assert_eq!(cfg.eps_grid.len(), 40);
        assert_eq!(cfg.minpts_grid, vec![1, 2, 3, 4, 5]);
        assert_eq!(cfg.ridge_lambdas.len(), 51);
        assert_eq!(cfg.cv_folds, 5);
        assert_eq!(cfg.anchor, Anchor::TrainMean);
    }

    #[test]
    fn full_config_parses() {
        let text = r#"
[data]
path = "wide"
layout = "wide"
out_dir = "results"
[preprocess]
log_epsilon = 1e-5
anchor = 2010
[cluster]
eps_grid = [0.1, 0.2]
minpts_grid = [2]
[regress]
lasso_lambdas = [0.0081]
enet_lambdas = [0.00055652]
enet_alphas = [0.5]
cv_folds = 3
standardize = true
[forecast]
train_years = [2000, 2014]
test_years = [2015, 2019]
"#;
        let cfg = PipelineConfig::from_toml(text, Path::new("")).unwrap();
        assert_eq!(cfg.anchor, Anchor::Year(2010));
        assert_eq!(cfg.layout, Layout::Wide);
        assert_eq!(cfg.lasso_lambdas, Some(vec![0.0081]));
        assert!(cfg.solver.standardize);
        assert_eq!(cfg.train_years, Some((2000, 2014)));
    }

    #[test]
    fn overlapping_windows_rejected() {
        let text = "[data]\npath = \"p.csv\"\n[forecast]\ntrain_years = [2000, 2015]\ntest_years = [2015, 2019]\n";
        let err = PipelineConfig::from_toml(text, Path::new("")).unwrap_err();
        assert!(matches!(err, Error::Config(_)), "{err}");
    }

    #[test]
    fn unknown_keys_and_bad_values_rejected() {
        assert!(PipelineConfig::from_toml("[data]\npath = \"p\"\nbogus = 1\n", Path::new("")).is_err());
        assert!(PipelineConfig::from_toml("[data]\npath = \"p\"\n[cluster]\neps_grid = []\n", Path::new("")).is_err());
        assert!(PipelineConfig::from_toml("[data]\npath = \"p\"\n[regress]\ncv_folds = 1\n", Path::new("")).is_err());
        assert!(PipelineConfig::from_toml("[preprocess]\nlog_epsilon = 1.0\n", Path::new("")).is_err());
    }

    #[test]
    fn default_split_holds_out_last_five_years() {
        let cfg = PipelineConfig::new("p.csv", Layout::Long);
        let years: Vec<i32> = (2000..2020).collect();
        let (train, test) = cfg.split_years(&years).unwrap();
        assert_eq!(train, (2000..2015).collect::<Vec<_>>());
        assert_eq!(test, (2015..2020).collect::<Vec<_>>());
    }
}
