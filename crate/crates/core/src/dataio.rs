//! Panel ingestion, validation and report persistence.
//!
//! Two CSV layouts are accepted:
//!
//! - **long**: one file with header `year,entity,feature,value`; cells absent
//!   from the file are structural zeros.
//! - **wide**: a directory of `panel_<year>.csv` files, each with a first
//!   column `entity` followed by one column per feature.
//!
//! Reports are written as pretty-printed UTF-8 JSON.

use std::collections::hash_map::Entry;
use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const LONG_HEADER: [&str; 4] = ["year", "entity", "feature", "value"];

/// On-disk layout of a panel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Layout {
    Long,
    Wide,
}

impl std::str::FromStr for Layout {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "long" => Ok(Layout::Long),
            "wide" => Ok(Layout::Wide),
            other => Err(Error::InvalidInput(format!("unknown layout {other:?}"))),
        }
    }
}

/// Years × entities × features panel of emission values (Mt CO₂).
///
/// Construction enforces the structural invariants (extents, strictly
/// increasing years, unique non-empty names). Value-level checks (sign,
/// finiteness) are reported by [`validate_panel`] so that a bad cell can be
/// located instead of failing the load.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyPanel {
    years: Vec<i32>,
    entities: Vec<String>,
    features: Vec<String>,
    values: Vec<f64>,
}

impl EnergyPanel {
    /// `values` is laid out year-major, then entity, then feature.
    pub fn new(
        years: Vec<i32>,
        entities: Vec<String>,
        features: Vec<String>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if years.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidPanel("years must be strictly increasing".into()));
        }
        check_names("entity", &entities)?;
        check_names("feature", &features)?;
        let expected = years.len() * entities.len() * features.len();
        if values.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: values.len(),
            });
        }
        Ok(EnergyPanel {
            years,
            entities,
            features,
            values,
        })
    }

    /// Builds a panel from a closure evaluated at every (year, entity, feature) index.
    pub fn from_fn(
        years: Vec<i32>,
        entities: Vec<String>,
        features: Vec<String>,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(years.len() * entities.len() * features.len());
        for t in 0..years.len() {
            for e in 0..entities.len() {
                for k in 0..features.len() {
                    values.push(f(t, e, k));
                }
            }
        }
        Self::new(years, entities, features, values)
    }

    pub fn years(&self) -> &[i32] {
        &self.years
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

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.years.len(), self.entities.len(), self.features.len())
    }

    #[inline]
    fn offset(&self, year: usize, entity: usize, feature: usize) -> usize {
        (year * self.entities.len() + entity) * self.features.len() + feature
    }

    /// Value at positional indices.
    #[inline]
    pub fn get(&self, year: usize, entity: usize, feature: usize) -> f64 {
        self.values[self.offset(year, entity, feature)]
    }

    /// Value looked up by labels.
    pub fn value(&self, year: i32, entity: &str, feature: &str) -> Option<f64> {
        let t = self.year_index(year)?;
        let e = self.entities.iter().position(|n| n == entity)?;
        let k = self.features.iter().position(|n| n == feature)?;
        Some(self.get(t, e, k))
    }

    pub fn year_index(&self, year: i32) -> Option<usize> {
        self.years.binary_search(&year).ok()
    }

    /// Feature values of one entity in one year.
    pub fn row(&self, year: usize, entity: usize) -> &[f64] {
        let start = self.offset(year, entity, 0);
        &self.values[start..start + self.features.len()]
    }

    /// Sum over features of one entity in one year.
    pub fn entity_total(&self, year: usize, entity: usize) -> f64 {
        self.row(year, entity).iter().sum()
    }

    /// Keeps the listed entity and feature indices, in the given order.
    pub fn select(&self, entities: &[usize], features: &[usize]) -> Result<EnergyPanel> {
        let names = |src: &[String], idx: &[usize]| idx.iter().map(|&i| src[i].clone()).collect();
        EnergyPanel::from_fn(
            self.years.clone(),
            names(&self.entities, entities),
            names(&self.features, features),
            |t, e, k| self.get(t, entities[e], features[k]),
        )
    }
}

fn check_names(kind: &str, names: &[String]) -> Result<()> {
    let mut seen = HashMap::with_capacity(names.len());
    for (i, name) in names.iter().enumerate() {
        if name.trim().is_empty() {
            return Err(Error::InvalidPanel(format!("{kind} name at position {i} is empty")));
        }
        if let Some(prev) = seen.insert(name.as_str(), i) {
            return Err(Error::InvalidPanel(format!(
                "{kind} name {name:?} repeated at positions {prev} and {i}"
            )));
        }
    }
    Ok(())
}

/// Loads a panel. For [`Layout::Long`] `path` is a CSV file; for
/// [`Layout::Wide`] it is a directory of `panel_<year>.csv` files.
pub fn load_panel(path: impl AsRef<Path>, layout: Layout) -> Result<EnergyPanel> {
    match layout {
        Layout::Long => load_long(path.as_ref()),
        Layout::Wide => load_wide(path.as_ref()),
    }
}

/// Insertion-ordered name interner.
#[derive(Default)]
struct Interner {
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl Interner {
    fn intern(&mut self, name: &str) -> usize {
        if let Some(&i) = self.index.get(name) {
            return i;
        }
        let i = self.names.len();
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), i);
        i
    }
}

/// Accumulates sparse (year, entity, feature) cells, rejecting duplicates.
struct CellSink {
    path: PathBuf,
    entities: Interner,
    features: Interner,
    cells: HashMap<(i32, usize, usize), (f64, u64)>,
}

impl CellSink {
    fn new(path: &Path) -> Self {
        CellSink {
            path: path.to_path_buf(),
            entities: Interner::default(),
            features: Interner::default(),
            cells: HashMap::new(),
        }
    }

    fn insert(&mut self, path: &Path, line: u64, year: i32, entity: &str, feature: &str, value: f64) -> Result<()> {
        if entity.is_empty() || feature.is_empty() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: Some(line),
                column: None,
                message: "empty entity or feature name".into(),
            });
        }
        let e = self.entities.intern(entity);
        let k = self.features.intern(feature);
        match self.cells.entry((year, e, k)) {
            Entry::Occupied(prev) => Err(Error::Parse {
                path: path.to_path_buf(),
                line: Some(line),
                column: None,
                message: format!(
                    "duplicate key ({year}, {entity:?}, {feature:?}) on lines {} and {line}",
                    prev.get().1
                ),
            }),
            Entry::Vacant(slot) => {
                slot.insert((value, line));
                Ok(())
            }
        }
    }

    fn finish(self, mut years: Vec<i32>) -> Result<EnergyPanel> {
        if self.cells.is_empty() {
            return Err(Error::Parse {
                path: self.path,
                line: None,
                column: None,
                message: "no data rows".into(),
            });
        }
        years.sort_unstable();
        years.dedup();
        let cells = self.cells;
        EnergyPanel::from_fn(years.clone(), self.entities.names, self.features.names, |t, e, k| {
            cells.get(&(years[t], e, k)).map_or(0.0, |&(v, _)| v)
        })
    }
}

fn csv_reader(path: &Path) -> Result<csv::Reader<fs::File>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn csv_error(path: &Path, err: csv::Error) -> Error {
    let line = err.position().map(|p| p.line());
    match err.into_kind() {
        csv::ErrorKind::Io(e) => Error::io(path, e),
        kind => Error::Parse {
            path: path.to_path_buf(),
            line,
            column: None,
            message: format!("{kind:?}"),
        },
    }
}

fn parse_value(path: &Path, line: u64, column: usize, raw: &str) -> Result<f64> {
    // `f64::from_str` already rejects thousands separators and decimal commas.
    raw.parse::<f64>().map_err(|_| Error::Parse {
        path: path.to_path_buf(),
        line: Some(line),
        column: Some(column),
        message: format!("non-numeric value {raw:?}"),
    })
}

fn load_long(path: &Path) -> Result<EnergyPanel> {
    let mut reader = csv_reader(path)?;
    let header = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    if header.iter().collect::<Vec<_>>() != LONG_HEADER {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: Some(1),
            column: None,
            message: format!("malformed header; expected `{}`", LONG_HEADER.join(",")),
        });
    }

    let mut sink = CellSink::new(path);
    let mut years = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 4 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: Some(line),
                column: None,
                message: format!("expected 4 fields, found {}", record.len()),
            });
        }
        let year = record[0].parse::<i32>().map_err(|_| Error::Parse {
            path: path.to_path_buf(),
            line: Some(line),
            column: Some(1),
            message: format!("non-integer year {:?}", &record[0]),
        })?;
        let value = parse_value(path, line, 4, &record[3])?;
        sink.insert(path, line, year, &record[1], &record[2], value)?;
        years.push(year);
    }
    sink.finish(years)
}

/// Parses the year out of a `panel_<year>.csv` file name.
fn wide_year(path: &Path) -> Option<i32> {
    let name = path.file_name()?.to_str()?;
    name.strip_prefix("panel_")?.strip_suffix(".csv")?.parse().ok()
}

fn load_wide(dir: &Path) -> Result<EnergyPanel> {
    let mut files: Vec<(i32, PathBuf)> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| {
            let path = entry.ok()?.path();
            wide_year(&path).map(|y| (y, path))
        })
        .collect();
    if files.is_empty() {
        return Err(Error::Parse {
            path: dir.to_path_buf(),
            line: None,
            column: None,
            message: "no panel_<year>.csv files found".into(),
        });
    }
    files.sort();
    if let Some(w) = files.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(Error::Parse {
            path: w[1].1.clone(),
            line: None,
            column: None,
            message: format!("year {} appears in more than one file", w[0].0),
        });
    }

    let mut sink = CellSink::new(dir);
    let mut years = Vec::with_capacity(files.len());
    for (year, path) in &files {
        years.push(*year);
        let mut reader = csv_reader(path)?;
        let header = reader.headers().map_err(|e| csv_error(path, e))?.clone();
        let columns: Vec<&str> = header.iter().collect();
        if columns.first() != Some(&"entity") || columns.len() < 2 {
            return Err(Error::Parse {
                path: path.clone(),
                line: Some(1),
                column: None,
                message: "malformed header; expected `entity,<feature>...`".into(),
            });
        }
        let features = &columns[1..];
        if let Err(Error::InvalidPanel(msg)) =
            check_names("feature", &features.iter().map(|s| s.to_string()).collect::<Vec<_>>())
        {
            return Err(Error::Parse {
                path: path.clone(),
                line: Some(1),
                column: None,
                message: format!("malformed header: {msg}"),
            });
        }
        for record in reader.records() {
            let record = record.map_err(|e| csv_error(path, e))?;
            let line = record.position().map_or(0, |p| p.line());
            if record.len() != columns.len() {
                return Err(Error::Parse {
                    path: path.clone(),
                    line: Some(line),
                    column: None,
                    message: format!("expected {} fields, found {}", columns.len(), record.len()),
                });
            }
            let entity = &record[0];
            for (k, feature) in features.iter().enumerate() {
                let value = parse_value(path, line, k + 2, &record[k + 1])?;
                sink.insert(path, line, *year, entity, feature, value)?;
            }
        }
    }
    sink.finish(years)
}

/// Writes the panel in long layout, year-major then entity then feature.
pub fn write_long(panel: &EnergyPanel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("year,entity,feature,value\n");
    for (t, year) in panel.years.iter().enumerate() {
        for (e, entity) in panel.entities.iter().enumerate() {
            for (k, feature) in panel.features.iter().enumerate() {
                out.push_str(&format!(
                    "{year},{},{},{}\n",
                    csv_field(entity),
                    csv_field(feature),
                    panel.get(t, e, k)
                ));
            }
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Writes one `panel_<year>.csv` per year into `dir`.
pub fn write_wide(panel: &EnergyPanel, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    for (t, year) in panel.years.iter().enumerate() {
        let mut out = String::from("entity");
        for feature in &panel.features {
            out.push(',');
            out.push_str(&csv_field(feature));
        }
        out.push('\n');
        for (e, entity) in panel.entities.iter().enumerate() {
            out.push_str(&csv_field(entity));
            for v in panel.row(t, e) {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        let path = dir.join(format!("panel_{year}.csv"));
        fs::write(&path, out).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

pub fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) || s.trim() != s {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Issue {
    pub severity: Severity,
    pub location: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub issues: Vec<Issue>,
}

impl ValidationReport {
    pub fn errors(&self) -> impl Iterator<Item = &Issue> {
        self.issues.iter().filter(|i| i.severity == Severity::Error)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &Issue> {
        self.issues.iter().filter(|i| i.severity == Severity::Warning)
    }
}

/// Flags negative and non-finite cells (errors) and all-zero feature columns
/// or entity rows (warnings). Never fails.
pub fn validate_panel(panel: &EnergyPanel) -> ValidationReport {
    let (ny, ne, nf) = panel.shape();
    let mut issues = Vec::new();
    let mut feature_nonzero = vec![false; nf];
    let mut entity_nonzero = vec![false; ne];

    for t in 0..ny {
        for e in 0..ne {
            for k in 0..nf {
                let v = panel.get(t, e, k);
                let location = || {
                    format!(
                        "year={} entity={:?} feature={:?}",
                        panel.years[t], panel.entities[e], panel.features[k]
                    )
                };
                if !v.is_finite() {
                    issues.push(Issue {
                        severity: Severity::Error,
                        location: location(),
                        message: format!("non-finite value {v}"),
                    });
                } else if v < 0.0 {
                    issues.push(Issue {
                        severity: Severity::Error,
                        location: location(),
                        message: format!("negative value {v}"),
                    });
                }
                if v != 0.0 {
                    feature_nonzero[k] = true;
                    entity_nonzero[e] = true;
                }
            }
        }
    }

    for (k, _) in feature_nonzero.iter().enumerate().filter(|(_, nz)| !**nz) {
        issues.push(Issue {
            severity: Severity::Warning,
            location: format!("feature={:?}", panel.features[k]),
            message: "feature is zero for every year and entity".into(),
        });
    }
    for (e, _) in entity_nonzero.iter().enumerate().filter(|(_, nz)| !**nz) {
        issues.push(Issue {
            severity: Severity::Warning,
            location: format!("entity={:?}", panel.entities[e]),
            message: "entity is zero for every year and feature".into(),
        });
    }

    let ok = !issues.iter().any(|i| i.severity == Severity::Error);
    ValidationReport { ok, issues }
}

/// Serializes any report record as pretty JSON followed by a newline.
pub fn report_to_string<T: Serialize + ?Sized>(report: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(report)?;
    s.push('\n');
    Ok(s)
}

pub fn save_report<T: Serialize + ?Sized>(report: &T, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let body = report_to_string(report)?;
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(body.as_bytes()).map_err(|e| Error::io(path, e))
}

pub fn load_report<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let body = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&body)?)
}
