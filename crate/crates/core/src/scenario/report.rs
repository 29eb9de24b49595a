//! Metric tables, pass/fail flags and their CSV / JSON encodings.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

use crate::sde::Estimate;

pub const CSV_HEADER: [&str; 7] = ["metric", "scenario", "gamma", "t", "value", "stderr", "details"];

/// Standard error of a metric value, or a marker that the value is exact.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Stderr {
    Exact,
    Value(f64),
}

impl fmt::Display for Stderr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Stderr::Exact => f.write_str("exact"),
            Stderr::Value(v) => write!(f, "{v}"),
        }
    }
}

impl Serialize for Stderr {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Stderr::Exact => s.serialize_str("exact"),
            Stderr::Value(v) => s.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for Stderr {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Stderr::Value(v)),
            Raw::Str(s) if s == "exact" => Ok(Stderr::Exact),
            Raw::Str(s) => Err(serde::de::Error::custom(format!("stderr must be a number or \"exact\", got {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub metric: String,
    pub scenario: String,
    pub gamma: Option<f64>,
    pub t: Option<f64>,
    pub value: f64,
    pub stderr: Stderr,
    pub details: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub version: String,
    pub simulation_passes: usize,
    /// Not part of the CSV, so that the CSV is reproducible.
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: String,
    pub suites: Vec<String>,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub rows: Vec<MetricRow>,
    pub provenance: Provenance,
}

impl RunReport {
    pub fn new(scenario: &str, seed: u64) -> Self {
        Self {
            scenario: scenario.to_string(),
            suites: Vec::new(),
            passed: true,
            checks: Vec::new(),
            rows: Vec::new(),
            provenance: Provenance {
                seed,
                version: env!("CARGO_PKG_VERSION").to_string(),
                simulation_passes: 0,
                wall_time_s: 0.0,
            },
        }
    }

    pub fn row(&mut self, metric: &str, gamma: Option<f64>, t: Option<f64>, value: f64, stderr: Stderr, details: impl Into<String>) {
        self.rows.push(MetricRow {
            metric: metric.to_string(),
            scenario: self.scenario.clone(),
            gamma,
            t,
            value,
            stderr,
            details: details.into(),
        });
    }

    pub fn estimate_row(&mut self, metric: &str, gamma: Option<f64>, t: Option<f64>, e: Estimate, details: impl Into<String>) {
        self.row(metric, gamma, t, e.mean, Stderr::Value(e.stderr), details);
    }

    /// Records a check. Check names are unique within a report.
    pub fn check(&mut self, name: &str, passed: bool, detail: impl Into<String>) {
        assert!(self.checks.iter().all(|c| c.name != name), "duplicate check {name}");
        let detail = detail.into();
        log::info!("{} {name}: {detail}", if passed { "PASS" } else { "FAIL" });
        self.passed &= passed;
        self.checks.push(Check { name: name.to_string(), passed, detail });
    }

    pub fn failed_checks(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn to_csv(&self) -> String {
        rows_to_csv(&self.rows)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Writes `<dir>/<scenario>_<suffix>.csv` and `.json`, returning both paths.
    pub fn emit(&self, dir: &Path, suffix: &str) -> std::io::Result<(PathBuf, PathBuf)> {
        std::fs::create_dir_all(dir)?;
        let stem = if suffix.is_empty() { self.scenario.clone() } else { format!("{}_{suffix}", self.scenario) };
        let csv = dir.join(format!("{stem}.csv"));
        let json = dir.join(format!("{stem}.json"));
        std::fs::write(&csv, self.to_csv())?;
        std::fs::write(&json, self.to_json() + "\n")?;
        Ok((csv, json))
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

pub fn rows_to_csv(rows: &[MetricRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER).expect("in-memory write");
    for r in rows {
        w.write_record([
            r.metric.as_str(),
            r.scenario.as_str(),
            &opt(r.gamma),
            &opt(r.t),
            &r.value.to_string(),
            &r.stderr.to_string(),
            r.details.as_str(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

#[derive(Debug, Error)]
pub enum ReadRowsError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("line {line}: {message}")]
    Field { line: usize, message: String },
}

/// Parses a metrics CSV back into rows.
pub fn rows_from_csv(text: &str) -> Result<Vec<MetricRow>, ReadRowsError> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let bad = |message: String| ReadRowsError::Field { line, message };
        let num = |s: &str| s.parse::<f64>().map_err(|e| bad(format!("{s:?}: {e}")));
        let opt_num = |s: &str| if s.is_empty() { Ok(None) } else { num(s).map(Some) };
        if rec.len() != CSV_HEADER.len() {
            return Err(bad(format!("expected {} fields, got {}", CSV_HEADER.len(), rec.len())));
        }
        rows.push(MetricRow {
            metric: rec[0].to_string(),
            scenario: rec[1].to_string(),
            gamma: opt_num(&rec[2])?,
            t: opt_num(&rec[3])?,
            value: num(&rec[4])?,
            stderr: if &rec[5] == "exact" { Stderr::Exact } else { Stderr::Value(num(&rec[5])?) },
            details: rec[6].to_string(),
        });
    }
    Ok(rows)
}

/// Pass/fail over every JSON report found in a directory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregate {
    pub reports: Vec<(PathBuf, bool, usize, usize)>,
    pub passed: bool,
}

impl Aggregate {
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (path, passed, ok, total) in &self.reports {
            out.push_str(&format!("{} {ok}/{total} {}\n", if *passed { "PASS" } else { "FAIL" }, path.display()));
        }
        out.push_str(if self.passed { "all checks passed\n" } else { "some checks failed\n" });
        out
    }
}

pub fn aggregate_reports(dir: &Path) -> std::io::Result<Aggregate> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    paths.sort();
    let mut reports = Vec::new();
    for path in paths {
        let text = std::fs::read_to_string(&path)?;
        match serde_json::from_str::<RunReport>(&text) {
            Ok(r) => {
                let ok = r.checks.iter().filter(|c| c.passed).count();
                reports.push((path, r.passed, ok, r.checks.len()));
            }
            Err(e) => log::warn!("skipping {}: {e}", path.display()),
        }
    }
    let passed = !reports.is_empty() && reports.iter().all(|r| r.1);
    Ok(Aggregate { reports, passed })
}
