//! LIBSVM-format ingestion, row normalization and partitioning of samples
//! across agents.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use flate2::read::GzDecoder;
use rand::seq::SliceRandom;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng::{stream, Purpose};

/// A sparse row: strictly increasing 0-based feature indices with values.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseRow {
    pub indices: Vec<u32>,
    pub values: Vec<f64>,
}

impl SparseRow {
    pub fn dot(&self, x: &[f64]) -> f64 {
        self.indices
            .iter()
            .zip(&self.values)
            .map(|(&j, &v)| v * x[j as usize])
            .sum()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseDataset {
    pub rows: Vec<SparseRow>,
    /// Labels in {−1, +1}.
    pub labels: Vec<f64>,
    /// Feature dimension (largest index + 1).
    pub dim: usize,
}

impl SparseDataset {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Serialize back to LIBSVM text with 1-based indices.
    pub fn to_libsvm(&self) -> String {
        let mut out = String::new();
        for (row, &label) in self.rows.iter().zip(&self.labels) {
            out.push_str(if label > 0.0 { "+1" } else { "-1" });
            for (&j, &v) in row.indices.iter().zip(&row.values) {
                let _ = write!(out, " {}:{}", j + 1, v);
            }
            out.push('\n');
        }
        out
    }

    /// First `n` rows.
    pub fn head(&self, n: usize) -> Self {
        let n = n.min(self.len());
        Self {
            rows: self.rows[..n].to_vec(),
            labels: self.labels[..n].to_vec(),
            dim: self.dim,
        }
    }

    /// `n` rows drawn without replacement, kept in file order.
    pub fn sample(&self, n: usize, seed: u64) -> Self {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.shuffle(&mut stream(seed, 0, 0, Purpose::Aux));
        idx.truncate(n.min(self.len()));
        idx.sort_unstable();
        Self {
            rows: idx.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            dim: self.dim,
        }
    }
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

/// Parse LIBSVM text: `label idx:val idx:val ...`, 1-based strictly
/// increasing indices. Binary labels are mapped to {−1, +1} with the smaller
/// label becoming −1; a single-class file maps positive labels to +1.
pub fn parse_libsvm<R: Read>(reader: R) -> Result<SparseDataset> {
    let mut rows = Vec::new();
    let mut raw_labels = Vec::new();
    let mut dim = 0usize;
    let mut reader = BufReader::new(reader);
    let mut buf = String::new();
    let mut lineno = 0usize;
    loop {
        buf.clear();
        let read = reader
            .read_line(&mut buf)
            .map_err(|e| parse_err(lineno + 1, e.to_string()))?;
        if read == 0 {
            break;
        }
        lineno += 1;
        let line = buf.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut toks = line.split_whitespace();
        let label_tok = toks.next().unwrap_or_default();
        let label: f64 = label_tok
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| parse_err(lineno, format!("bad label {label_tok:?}")))?;
        let mut row = SparseRow::default();
        for tok in toks {
            let (i, v) = tok
                .split_once(':')
                .ok_or_else(|| parse_err(lineno, format!("missing ':' in {tok:?}")))?;
            let idx: u32 = i
                .parse()
                .map_err(|_| parse_err(lineno, format!("bad index {i:?}")))?;
            if idx == 0 {
                return Err(parse_err(lineno, "feature indices are 1-based"));
            }
            let val: f64 = v
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| parse_err(lineno, format!("bad value {v:?}")))?;
            let idx = idx - 1;
            if row.indices.last().is_some_and(|&last| idx <= last) {
                return Err(parse_err(
                    lineno,
                    format!("index {} not increasing", idx + 1),
                ));
            }
            dim = dim.max(idx as usize + 1);
            row.indices.push(idx);
            row.values.push(val);
        }
        rows.push(row);
        raw_labels.push(label);
    }
    let labels = map_labels(&raw_labels)?;
    Ok(SparseDataset { rows, labels, dim })
}

fn map_labels(raw: &[f64]) -> Result<Vec<f64>> {
    let mut distinct: Vec<f64> = Vec::new();
    for &l in raw {
        if !distinct.contains(&l) {
            distinct.push(l);
            if distinct.len() > 2 {
                return Err(parse_err(0, "more than two distinct labels"));
            }
        }
    }
    Ok(match distinct.as_slice() {
        [lo, hi] => {
            let (lo, _) = if lo < hi { (*lo, *hi) } else { (*hi, *lo) };
            raw.iter().map(|&l| if l == lo { -1.0 } else { 1.0 }).collect()
        }
        _ => raw.iter().map(|&l| if l > 0.0 { 1.0 } else { -1.0 }).collect(),
    })
}

/// Load a LIBSVM file, decompressing transparently when it ends in `.gz`.
pub fn load_libsvm(path: &Path) -> Result<SparseDataset> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    if path.extension().is_some_and(|e| e == "gz") {
        parse_libsvm(GzDecoder::new(file))
    } else {
        parse_libsvm(file)
    }
}

/// Scale every nonzero row to unit ℓ2 norm.
pub fn normalize_rows(mut ds: SparseDataset) -> SparseDataset {
    for row in &mut ds.rows {
        let n = row.norm();
        if n > 0.0 {
            row.values.iter_mut().for_each(|v| *v /= n);
        }
    }
    ds
}

/// Assignment of global sample indices to agents.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Partition {
    assignment: Vec<Vec<usize>>,
    n: usize,
}

impl Partition {
    /// Shuffle `0..n` with `seed`, then deal round-robin to `m` agents.
    pub fn shuffled(n: usize, m: usize, seed: u64) -> Result<Self> {
        if m == 0 || n < m {
            return Err(Error::InvalidPartition { n, m });
        }
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut stream(seed, 0, 0, Purpose::Partition));
        let mut assignment = vec![Vec::with_capacity(n / m + 1); m];
        for (pos, i) in idx.into_iter().enumerate() {
            assignment[pos % m].push(i);
        }
        Ok(Self { assignment, n })
    }

    /// Build from an explicit assignment; it must be a disjoint cover of
    /// `0..n` with every agent nonempty.
    pub fn from_assignment(assignment: Vec<Vec<usize>>) -> Result<Self> {
        let n: usize = assignment.iter().map(Vec::len).sum();
        let m = assignment.len();
        let mut seen = vec![false; n];
        for &i in assignment.iter().flatten() {
            if i >= n || std::mem::replace(&mut seen[i], true) {
                return Err(Error::InvalidPartition { n, m });
            }
        }
        if m == 0 || assignment.iter().any(Vec::is_empty) {
            return Err(Error::InvalidPartition { n, m });
        }
        Ok(Self { assignment, n })
    }

    pub fn agents(&self) -> usize {
        self.assignment.len()
    }

    pub fn samples(&self) -> usize {
        self.n
    }

    pub fn local(&self, agent: usize) -> &[usize] {
        &self.assignment[agent]
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.assignment.iter().map(Vec::len).collect()
    }
}

pub fn partition(ds: &SparseDataset, m: usize, seed: u64) -> Result<Partition> {
    Partition::shuffled(ds.len(), m, seed)
}
