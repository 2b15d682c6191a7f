//! Run report: one JSON document plus a CSV file per table.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::Path;

use robinlab::checks::CheckReport;
use serde::Serialize;

use crate::config::ExperimentConfig;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

/// Wall-clock seconds per phase. Kept apart from everything else so reports
/// of identical runs differ only here.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Timings {
    pub phases: BTreeMap<String, f64>,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub version: &'static str,
    pub config: ExperimentConfig,
    pub passed: bool,
    pub checks: Vec<CheckReport>,
    /// Raw results whose pass/fail is reinterpreted by an entry in `checks`.
    pub observations: Vec<CheckReport>,
    /// Scalar results that are neither checks nor tables.
    pub summary: BTreeMap<String, serde_json::Value>,
    pub tables: BTreeMap<String, Table>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub timings: Timings,
}

impl Report {
    pub fn new(config: ExperimentConfig) -> Self {
        Report {
            version: env!("CARGO_PKG_VERSION"),
            config,
            passed: false,
            checks: Vec::new(),
            observations: Vec::new(),
            summary: BTreeMap::new(),
            tables: BTreeMap::new(),
            error: None,
            timings: Timings::default(),
        }
    }

    pub fn note(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).expect("summary values serialize");
        self.summary.insert(key.to_string(), v);
    }

    pub fn write(&self, dir: &Path) -> io::Result<()> {
        fs::create_dir_all(dir)?;
        let mut json = serde_json::to_string_pretty(self).map_err(io::Error::other)?;
        json.push('\n');
        fs::write(dir.join("report.json"), json)?;
        for (name, table) in &self.tables {
            let mut w = csv::Writer::from_path(dir.join(format!("{name}.csv")))?;
            w.write_record(&table.columns)?;
            for row in &table.rows {
                w.write_record(row.iter().map(|v| v.to_string()))?;
            }
            w.flush()?;
        }
        Ok(())
    }
}
