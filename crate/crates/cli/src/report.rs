//! Report assembly and emission: deterministic JSON plus one CSV per table,
//! with timings kept out of the determinism contract in a separate file.

use crate::scenario::ConfigError;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum EmitError {
    #[error("unknown output format {0:?} (known: json, csv)")]
    UnknownFormat(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// One result table; cells are canonical strings (floats printed with the
/// shortest round-trip representation) so reports are byte-stable.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    /// The invariant this table checks; every row is evidence for it.
    pub invariant: String,
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
    /// Column indices for a plot-ready two-column CSV, when meaningful.
    #[serde(default)]
    pub plot: Option<(usize, usize)>,
}

impl Table {
    pub fn cell(v: f64) -> String {
        format!("{v:?}")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub index: usize,
    pub kind: String,
    pub pass: bool,
    pub detail: String,
    pub tables: Vec<Table>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report {
    pub schema: String,
    pub seed: u64,
    /// The scenario document as given.
    pub scenario: serde_json::Value,
    pub experiments: Vec<ExperimentResult>,
    pub all_pass: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Timings {
    pub wall_seconds: Vec<(usize, f64)>,
    pub total_seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Formats {
    pub json: bool,
    pub csv: bool,
}

pub fn parse_formats(spec: &str) -> Result<Formats, EmitError> {
    let mut f = Formats {
        json: false,
        csv: false,
    };
    for part in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        match part {
            "json" => f.json = true,
            "csv" => f.csv = true,
            other => return Err(EmitError::UnknownFormat(other.to_string())),
        }
    }
    if !f.json && !f.csv {
        return Err(EmitError::UnknownFormat(spec.to_string()));
    }
    Ok(f)
}

/// Write report.json, per-table CSVs, sweep plot CSVs, and timings.json.
pub fn emit(
    report: &Report,
    timings: &Timings,
    out_dir: &Path,
    formats: Formats,
) -> Result<(), EmitError> {
    std::fs::create_dir_all(out_dir)?;
    if formats.json {
        let payload = serde_json::to_string_pretty(report)?;
        std::fs::write(out_dir.join("report.json"), payload)?;
    }
    // timings are variable by nature and live outside the report
    let timing_payload = serde_json::to_string_pretty(timings)?;
    std::fs::write(out_dir.join("timings.json"), timing_payload)?;
    if formats.csv {
        for exp in &report.experiments {
            for table in &exp.tables {
                let path = out_dir.join(format!("{:02}_{}.csv", exp.index, table.name));
                let mut w = csv::Writer::from_path(&path)?;
                w.write_record(&table.headers)?;
                for row in &table.rows {
                    w.write_record(row)?;
                }
                w.flush()?;
                if let Some((xc, yc)) = table.plot {
                    let plot_path =
                        out_dir.join(format!("{:02}_{}_plot.csv", exp.index, table.name));
                    let mut w = csv::Writer::from_path(&plot_path)?;
                    w.write_record([&table.headers[xc], &table.headers[yc]])?;
                    for row in &table.rows {
                        w.write_record([&row[xc], &row[yc]])?;
                    }
                    w.flush()?;
                }
            }
        }
    }
    Ok(())
}

impl From<ConfigError> for EmitError {
    fn from(e: ConfigError) -> Self {
        EmitError::Io(std::io::Error::other(e.to_string()))
    }
}
