//! Study reports and their on-disk form: `report.json`, `table.csv`,
//! `plot_<quantity>.csv` and `series_<name>.csv`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::{StudyConfig, StudyKind};
use crate::error::{Error, Result};
use crate::fit::LogLogFit;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    /// Acceptance criterion label, `C1` to `C10`.
    pub criterion: String,
    pub check: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub quantity: String,
    pub fit: LogLogFit,
    /// Wavenumbers that entered the fit.
    pub k: Vec<f64>,
    pub excluded_k: Vec<f64>,
    pub theory: Option<f64>,
}

/// An auxiliary table, e.g. a residual history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub version: String,
    pub started_unix_ms: u64,
    pub elapsed_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub schema_version: u32,
    pub study: StudyKind,
    pub config: StudyConfig,
    pub provenance: Provenance,
    /// Column names of the per-k table; the first is always `k`.
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
    pub fits: Vec<FitRecord>,
    pub verdicts: Vec<Verdict>,
    pub series: Vec<Series>,
    /// Columns written as log-log plot files.
    pub plots: Vec<String>,
    pub notes: Vec<String>,
}

impl StudyReport {
    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Verdict> {
        self.verdicts.iter().filter(|v| !v.passed)
    }

    pub fn column(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let idx = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[idx]).collect())
    }

    pub fn fit(&self, quantity: &str) -> Option<&FitRecord> {
        self.fits.iter().find(|f| f.quantity == quantity)
    }

    /// Everything except timing, for determinism checks.
    pub fn numeric_payload(&self) -> (Vec<Vec<Option<f64>>>, Vec<FitRecord>, Vec<Verdict>, Vec<Series>) {
        (self.rows.clone(), self.fits.clone(), self.verdicts.clone(), self.series.clone())
    }

    pub fn table_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|c| c.map(format_float).unwrap_or_default()).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

/// 17 significant digits.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn series_csv(s: &Series) -> String {
    let mut out = s.columns.join(",");
    out.push('\n');
    for row in &s.rows {
        let cells: Vec<String> = row.iter().map(|v| format_float(*v)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

fn write(path: PathBuf, content: &str, written: &mut Vec<PathBuf>) -> Result<()> {
    fs::write(&path, content)?;
    written.push(path);
    Ok(())
}

/// Writes the report files into `dir`, creating it if needed.
pub fn emit_report(report: &StudyReport, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    write(dir.join("report.json"), &serde_json::to_string_pretty(report)?, &mut written)?;
    write(dir.join("table.csv"), &report.table_csv(), &mut written)?;
    let k = report.column("k").ok_or_else(|| Error::InvalidArgument("report has no k column".into()))?;
    for name in &report.plots {
        let Some(values) = report.column(name) else {
            return Err(Error::InvalidArgument(format!("plot column `{name}` missing from the table")));
        };
        let mut out = format!("log10_k,log10_{name}\n");
        for (k, v) in k.iter().zip(values) {
            if let (Some(k), Some(v)) = (k, v) {
                if v > 0.0 {
                    let _ = writeln!(out, "{},{}", format_float(k.log10()), format_float(v.log10()));
                }
            }
        }
        write(dir.join(format!("plot_{name}.csv")), &out, &mut written)?;
    }
    for s in &report.series {
        write(dir.join(format!("series_{}.csv", s.name)), &series_csv(s), &mut written)?;
    }
    Ok(written)
}

pub fn read_report(path: &Path) -> Result<StudyReport> {
    let report: StudyReport = serde_json::from_str(&fs::read_to_string(path)?)?;
    if report.schema_version != SCHEMA_VERSION {
        return Err(Error::Unsupported(format!(
            "report schema {} (this build reads {SCHEMA_VERSION})",
            report.schema_version
        )));
    }
    Ok(report)
}
