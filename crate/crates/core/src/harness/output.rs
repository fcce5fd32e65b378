//! Result records and their CSV / JSON serialisation.
//!
//! CSV columns, in order:
//!
//! `experiment, variable, value, n_sites, order, solver, seed, rows,
//! input_locality, measurement_complexity, delta_h, delta_hl, delta_env, s0,
//! gap, ambiguous, truth_residual, system_digest, estimate, ci_low, ci_high`
//!
//! Fields that do not apply to an experiment are left empty. A record with an
//! empty `seed` in a multi-seed sweep holds the mean over seeds.

use std::cmp::Ordering;
use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::config::ExperimentKind;
use crate::error::{Error, Result};
use crate::estimators::SolverKind;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ResultRecord {
    pub experiment: Option<ExperimentKind>,
    /// Name of the swept quantity: `cardinality`, `sigma`, `n_sites`, `dt`
    /// or `samples`.
    pub variable: String,
    pub value: f64,
    pub n_sites: Option<usize>,
    pub order: Option<u8>,
    pub solver: Option<SolverKind>,
    pub seed: Option<u64>,
    pub rows: Option<usize>,
    pub input_locality: Option<usize>,
    pub measurement_complexity: Option<usize>,
    pub delta_h: Option<f64>,
    pub delta_hl: Option<f64>,
    pub delta_env: Option<f64>,
    pub s0: Option<f64>,
    pub gap: Option<f64>,
    pub ambiguous: Option<bool>,
    /// `‖C x_T‖` or `‖C' x_T − W‖`.
    pub truth_residual: Option<f64>,
    /// Hash of the assembled system; equal for records solved from the same
    /// system.
    pub system_digest: Option<String>,
    pub estimate: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
}

impl ResultRecord {
    pub fn new(experiment: ExperimentKind, variable: &str, value: f64) -> Self {
        Self { experiment: Some(experiment), variable: variable.to_owned(), value, ..Self::default() }
    }

    /// Sweep variable, chain length, order, solver, then seed with the
    /// seed-mean record last.
    pub fn sort_key_cmp(&self, other: &Self) -> Ordering {
        self.experiment
            .cmp(&other.experiment)
            .then_with(|| self.variable.cmp(&other.variable))
            .then_with(|| self.value.total_cmp(&other.value))
            .then_with(|| self.n_sites.cmp(&other.n_sites))
            .then_with(|| self.order.cmp(&other.order))
            .then_with(|| self.solver.cmp(&other.solver))
            .then_with(|| match (self.seed, other.seed) {
                (Some(a), Some(b)) => a.cmp(&b),
                (Some(_), None) => Ordering::Less,
                (None, Some(_)) => Ordering::Greater,
                (None, None) => Ordering::Equal,
            })
    }
}

pub fn sort_records(records: &mut [ResultRecord]) {
    records.sort_by(ResultRecord::sort_key_cmp);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputFormat {
    #[default]
    Csv,
    /// Pretty-printed JSON array with the same fields.
    Json,
}

impl FromStr for OutputFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" | "structured" => Ok(OutputFormat::Json),
            _ => Err(Error::InvalidParameter(format!("unknown output format {s:?} (expected csv or json)"))),
        }
    }
}

impl fmt::Display for OutputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        })
    }
}

const CSV_HEADER: [&str; 21] = [
    "experiment",
    "variable",
    "value",
    "n_sites",
    "order",
    "solver",
    "seed",
    "rows",
    "input_locality",
    "measurement_complexity",
    "delta_h",
    "delta_hl",
    "delta_env",
    "s0",
    "gap",
    "ambiguous",
    "truth_residual",
    "system_digest",
    "estimate",
    "ci_low",
    "ci_high",
];

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::Io { path: "<csv>".into(), source },
        other => Error::Format { line: 0, msg: format!("{other:?}") },
    }
}

pub fn write_records<W: Write>(records: &[ResultRecord], format: OutputFormat, w: W) -> Result<()> {
    match format {
        OutputFormat::Csv => {
            let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
            out.write_record(CSV_HEADER).map_err(csv_error)?;
            for r in records {
                out.serialize(r).map_err(csv_error)?;
            }
            out.flush().map_err(|source| Error::Io { path: "<csv>".into(), source })
        }
        OutputFormat::Json => {
            let mut w = w;
            serde_json::to_writer_pretty(&mut w, records).map_err(|e| Error::Format { line: e.line(), msg: e.to_string() })?;
            writeln!(w).map_err(|source| Error::Io { path: "<json>".into(), source })
        }
    }
}

pub fn read_records<R: Read>(format: OutputFormat, r: R) -> Result<Vec<ResultRecord>> {
    match format {
        OutputFormat::Csv => {
            let mut rdr = csv::Reader::from_reader(r);
            let header = rdr.headers().map_err(csv_error)?.clone();
            if header.iter().ne(CSV_HEADER) {
                return Err(Error::Format { line: 1, msg: "unexpected CSV header".into() });
            }
            rdr.deserialize().map(|row| row.map_err(csv_error)).collect()
        }
        OutputFormat::Json => serde_json::from_reader(r).map_err(|e| Error::Format { line: e.line(), msg: e.to_string() }),
    }
}

/// Writes `records` to `path`, naming the path in any I/O error.
pub fn emit_results(records: &[ResultRecord], path: &Path, format: OutputFormat) -> Result<()> {
    let io = |source| Error::Io { path: path.to_owned(), source };
    let file = File::create(path).map_err(io)?;
    let mut w = BufWriter::new(file);
    write_records(records, format, &mut w).map_err(|e| match e {
        Error::Io { source, .. } => io(source),
        other => other,
    })?;
    w.flush().map_err(io)
}
