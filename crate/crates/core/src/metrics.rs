//! Trajectory measurements and run records.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objectives::StochasticObjective;
use crate::smoothing::{surrogate_grad_estimate, SmoothingParams};
use crate::stacked::Stacked;

/// `Σ_i ‖x_i − x̄‖²`.
pub fn consensus_error(x: &Stacked) -> f64 {
    x.deviation_sq()
}

/// Norm of a Monte Carlo surrogate gradient: an upper-bound proxy for the
/// distance of zero to the δ-Goldstein subdifferential.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationarityEstimate {
    pub norm: f64,
    pub std_err: f64,
}

pub fn stationarity_estimate<R: Rng + ?Sized>(
    obj: &dyn StochasticObjective,
    x: &[f64],
    delta: f64,
    n_samples: usize,
    rng: &mut R,
) -> Result<StationarityEstimate> {
    let params = SmoothingParams::new(delta, obj.dim())?;
    let mc = surrogate_grad_estimate(obj, x, &params, n_samples, rng)?;
    Ok(StationarityEstimate {
        norm: mc.norm(),
        std_err: mc.norm_std_err(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordEntry {
    pub iter: u64,
    pub oracle_calls: u64,
    pub comm_rounds: u64,
    /// Full loss at the network average `x̄`.
    pub loss: f64,
    pub consensus_error: f64,
    pub stationarity: Option<f64>,
    pub wall_ms: f64,
}

impl RecordEntry {
    /// Equality ignoring wall-clock time.
    pub fn same_trajectory_point(&self, other: &Self) -> bool {
        self.iter == other.iter
            && self.oracle_calls == other.oracle_calls
            && self.comm_rounds == other.comm_rounds
            && self.loss.to_bits() == other.loss.to_bits()
            && self.consensus_error.to_bits() == other.consensus_error.to_bits()
            && self.stationarity.map(f64::to_bits) == other.stationarity.map(f64::to_bits)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub algorithm: String,
    pub seed: u64,
    pub dataset: String,
    pub topology: String,
    pub rho: f64,
    /// Loss at the common starting point.
    pub initial_loss: f64,
    /// Iterations at which a mega-batch restart fired.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub restarts: Vec<u64>,
    /// Resolved configuration.
    #[serde(default)]
    pub config: serde_json::Value,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub metadata: RunMetadata,
    pub entries: Vec<RecordEntry>,
}

impl RunRecord {
    pub fn push(&mut self, entry: RecordEntry) {
        debug_assert!(self.entries.last().is_none_or(|e| e.iter < entry.iter));
        self.entries.push(entry);
    }

    pub fn last_loss(&self) -> Option<f64> {
        self.entries.last().map(|e| e.loss)
    }

    /// Loss of the last entry whose oracle count does not exceed `budget`
    /// (the initial loss if none does).
    pub fn loss_at_budget(&self, budget: u64) -> f64 {
        self.entries
            .iter()
            .take_while(|e| e.oracle_calls <= budget)
            .last()
            .map_or(self.metadata.initial_loss, |e| e.loss)
    }

    /// Same trajectory ignoring wall-clock time.
    pub fn same_trajectory(&self, other: &Self) -> bool {
        self.entries.len() == other.entries.len()
            && self
                .entries
                .iter()
                .zip(&other.entries)
                .all(|(a, b)| a.same_trajectory_point(b))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordFormat {
    Csv,
    Json,
}

pub const CSV_HEADER: &str = "algo,seed,iter,zo_calls,comm_rounds,loss,consensus_err,stationarity,wall_ms";

/// CSV text for all records; `{}` formatting of `f64` is the shortest
/// representation that parses back to the same value.
pub fn records_to_csv(records: &[RunRecord]) -> String {
    let mut out = String::new();
    out.push_str(CSV_HEADER);
    out.push('\n');
    for rec in records {
        for e in &rec.entries {
            let _ = write!(
                out,
                "{},{},{},{},{},{},{},",
                rec.metadata.algorithm,
                rec.metadata.seed,
                e.iter,
                e.oracle_calls,
                e.comm_rounds,
                e.loss,
                e.consensus_error
            );
            if let Some(s) = e.stationarity {
                let _ = write!(out, "{s}");
            }
            let _ = writeln!(out, ",{}", e.wall_ms);
        }
    }
    out
}

/// One parsed CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub algorithm: String,
    pub seed: u64,
    pub entry: RecordEntry,
}

/// Parse text produced by [`records_to_csv`].
pub fn parse_records_csv(text: &str) -> Result<Vec<CsvRow>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim_end() == CSV_HEADER => {}
        _ => {
            return Err(Error::Parse {
                line: 1,
                msg: "missing or unexpected CSV header".into(),
            })
        }
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let err = |msg: String| Error::Parse { line: line_no, msg };
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 9 {
            return Err(err(format!("expected 9 columns, found {}", cols.len())));
        }
        fn num<T: std::str::FromStr>(s: &str, name: &str, line: usize) -> Result<T> {
            s.parse().map_err(|_| Error::Parse {
                line,
                msg: format!("bad {name} {s:?}"),
            })
        }
        let stationarity = if cols[7].is_empty() {
            None
        } else {
            Some(num(cols[7], "stationarity", line_no)?)
        };
        rows.push(CsvRow {
            algorithm: cols[0].to_string(),
            seed: num(cols[1], "seed", line_no)?,
            entry: RecordEntry {
                iter: num(cols[2], "iter", line_no)?,
                oracle_calls: num(cols[3], "zo_calls", line_no)?,
                comm_rounds: num(cols[4], "comm_rounds", line_no)?,
                loss: num(cols[5], "loss", line_no)?,
                consensus_error: num(cols[6], "consensus_err", line_no)?,
                stationarity,
                wall_ms: num(cols[8], "wall_ms", line_no)?,
            },
        });
    }
    Ok(rows)
}

pub fn records_to_json(records: &[RunRecord]) -> String {
    let mut s = serde_json::to_string_pretty(records).expect("records serialize");
    s.push('\n');
    s
}

pub fn write_records(records: &[RunRecord], path: &Path, format: RecordFormat) -> Result<()> {
    let body = match format {
        RecordFormat::Csv => records_to_csv(records),
        RecordFormat::Json => records_to_json(records),
    };
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(body.as_bytes())
        .and_then(|_| file.flush())
        .map_err(|e| Error::io(path, e))
}
