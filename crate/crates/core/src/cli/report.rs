use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::ledger::{self, Check};
use crate::rational::{self, Rational};

/// Crate version plus `git describe` output when built from a checkout.
pub const VERSION: &str = env!("DYADIC_SPECTRA_VERSION");

pub fn version() -> String {
    VERSION.to_string()
}

/// Everything a run emits in JSON mode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub command: Vec<String>,
    pub version: String,
    pub parameters: Value,
    pub result: Value,
    pub ledger: Vec<Check>,
    pub passed: bool,
}

impl Report {
    pub fn new(command: Vec<String>, parameters: Value, outcome: Outcome) -> Self {
        Report {
            command,
            version: version(),
            parameters,
            passed: ledger::all_pass(&outcome.ledger),
            result: outcome.result,
            ledger: outcome.ledger,
        }
    }

    pub fn failures(&self) -> Vec<&str> {
        ledger::failures(&self.ledger)
    }
}

/// What a subcommand hands back before it is wrapped into a [`Report`].
#[derive(Clone, Debug)]
pub struct Outcome {
    pub result: Value,
    /// CSV view; `None` falls back to the ledger.
    pub table: Option<Table>,
    pub ledger: Vec<Check>,
}

impl Outcome {
    pub fn new<T: Serialize>(result: &T, table: Option<Table>, ledger: Vec<Check>) -> Result<Self> {
        Ok(Outcome {
            result: serde_json::to_value(result)?,
            table,
            ledger,
        })
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(headers: &[&str]) -> Self {
        Table {
            headers: headers.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }

    fn ledger(checks: &[Check]) -> Self {
        let mut t = Table::new(&["name", "lhs", "rhs", "verdict"]);
        for c in checks {
            let verdict = serde_json::to_value(c.verdict)
                .ok()
                .and_then(|v| v.as_str().map(str::to_string))
                .unwrap_or_default();
            t.push(vec![c.name.clone(), c.lhs.clone(), c.rhs.clone(), verdict]);
        }
        t
    }
}

/// A rational as a decimal column and an exact column.
pub fn rat_pair(x: &Rational) -> [String; 2] {
    [format!("{}", rational::to_f64(x)), rational::to_fraction_string(x)]
}

pub fn opt_rat_pair(x: Option<&Rational>) -> [String; 2] {
    x.map(rat_pair).unwrap_or_default()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

pub fn render(report: &Report, table: Option<&Table>, format: Format) -> Result<Vec<u8>> {
    match format {
        Format::Json => {
            let mut out = serde_json::to_vec_pretty(report)?;
            out.push(b'\n');
            Ok(out)
        }
        Format::Csv => {
            let fallback;
            let table = match table {
                Some(t) => t,
                None => {
                    fallback = Table::ledger(&report.ledger);
                    &fallback
                }
            };
            let mut w = csv::Writer::from_writer(Vec::new());
            let csv_err = |e: csv::Error| Error::invalid(format!("csv: {e}"));
            w.write_record(&table.headers).map_err(csv_err)?;
            for row in &table.rows {
                w.write_record(row).map_err(csv_err)?;
            }
            w.into_inner().map_err(|e| Error::invalid(format!("csv: {e}")))
        }
    }
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}
