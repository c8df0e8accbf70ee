//! Doubly stochastic mixing matrices and gossip averaging.
//!
//! A [`MixingMatrix`] is validated at construction and caches its spectral
//! gap `rho = ‖A − J‖₂`, where `J = (1/m)𝟙𝟙ᵀ`. Gossip ([`MixingMatrix::mix`])
//! applies `A ⊗ I_d` to a [`Stacked`] state without forming the Kronecker
//! product.

use std::collections::HashMap;
use std::path::Path;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::stacked::Stacked;

/// Absolute tolerance on row and column sums.
pub const STOCHASTIC_TOL: f64 = 1e-12;

/// `rho` at or above this is treated as a disconnected network.
const CONNECTED_RHO_MAX: f64 = 1.0 - 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct MixingMatrix {
    m: usize,
    weights: Vec<f64>,
    // nonzero (column, weight) per row
    support: Vec<Vec<(usize, f64)>>,
    rho: f64,
}

impl MixingMatrix {
    /// Build from a dense square matrix; fails with `InvalidTopology` unless
    /// every invariant in [`validate`] holds.
    pub fn from_weights(weights: &[Vec<f64>]) -> Result<Self> {
        let report = validate(weights);
        if !report.passed() {
            return Err(Error::InvalidTopology(report.summary()));
        }
        let m = weights.len();
        Ok(Self::from_validated(
            m,
            weights.iter().flatten().copied().collect(),
            report.rho,
        ))
    }

    fn from_validated(m: usize, weights: Vec<f64>, rho: f64) -> Self {
        let support = weights
            .chunks_exact(m)
            .map(|row| {
                row.iter()
                    .enumerate()
                    .filter(|(_, &w)| w != 0.0)
                    .map(|(j, &w)| (j, w))
                    .collect()
            })
            .collect();
        Self {
            m,
            weights,
            support,
            rho,
        }
    }

    /// The trivial single-agent matrix `[1]`.
    pub fn identity_single() -> Self {
        Self::from_validated(1, vec![1.0], 0.0)
    }

    /// Exact averaging matrix `J` (complete graph).
    pub fn complete(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidTopology("m must be positive".into()));
        }
        let w = 1.0 / m as f64;
        let rows = vec![vec![w; m]; m];
        Self::from_weights(&rows)
    }

    #[inline]
    pub fn agents(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn rho(&self) -> f64 {
        self.rho
    }

    #[inline]
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.m + j]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.weights.chunks_exact(self.m).map(<[f64]>::to_vec).collect()
    }

    /// One gossip round: row `i` of the output is `Σ_j a_ij · row_j`.
    pub fn mix(&self, stacked: &Stacked) -> Result<Stacked> {
        let mut out = Stacked::zeros(stacked.rows(), stacked.dim());
        self.mix_into(stacked, &mut out)?;
        Ok(out)
    }

    pub fn mix_into(&self, stacked: &Stacked, out: &mut Stacked) -> Result<()> {
        if stacked.rows() != self.m {
            return Err(Error::shape(format!(
                "stacked state has {} rows, network has {} agents",
                stacked.rows(),
                self.m
            )));
        }
        out.check_same_shape(stacked)?;
        for (i, nbrs) in self.support.iter().enumerate() {
            let dst = out.row_mut(i);
            let mut first = true;
            for &(j, a) in nbrs {
                let src = stacked.row(j);
                if first {
                    dst.iter_mut().zip(src).for_each(|(o, s)| *o = a * s);
                    first = false;
                } else {
                    dst.iter_mut().zip(src).for_each(|(o, s)| *o += a * s);
                }
            }
        }
        Ok(())
    }

    /// `rounds` consecutive gossip rounds with this matrix.
    pub fn mix_rounds(&self, stacked: &Stacked, rounds: usize) -> Result<Stacked> {
        let mut cur = stacked.clone();
        let mut next = Stacked::zeros(stacked.rows(), stacked.dim());
        for _ in 0..rounds {
            self.mix_into(&cur, &mut next)?;
            std::mem::swap(&mut cur, &mut next);
        }
        Ok(cur)
    }
}

/// Ring with weight 1/3 on self and on each of the two neighbours.
pub fn build_ring(m: usize) -> Result<MixingMatrix> {
    if m < 3 {
        return Err(Error::InvalidTopology(format!(
            "ring needs at least 3 agents, got {m}"
        )));
    }
    let third = 1.0 / 3.0;
    let mut rows = vec![vec![0.0; m]; m];
    for (i, row) in rows.iter_mut().enumerate() {
        row[i] = third;
        row[(i + 1) % m] = third;
        row[(i + m - 1) % m] = third;
    }
    MixingMatrix::from_weights(&rows)
}

/// Metropolis-Hastings weights on an undirected graph given by a symmetric
/// adjacency matrix with self-loops.
pub fn build_metropolis_hastings(adjacency: &[Vec<bool>]) -> Result<MixingMatrix> {
    let m = adjacency.len();
    if m == 0 || adjacency.iter().any(|r| r.len() != m) {
        return Err(Error::InvalidTopology("adjacency must be square and nonempty".into()));
    }
    for i in 0..m {
        if !adjacency[i][i] {
            return Err(Error::InvalidTopology(format!("agent {i} has no self-loop")));
        }
        for j in 0..i {
            if adjacency[i][j] != adjacency[j][i] {
                return Err(Error::InvalidTopology(format!(
                    "adjacency not symmetric at ({i}, {j})"
                )));
            }
        }
    }
    if !is_connected(adjacency) {
        return Err(Error::DisconnectedGraph);
    }
    let degree: Vec<usize> = adjacency
        .iter()
        .enumerate()
        .map(|(i, r)| r.iter().enumerate().filter(|&(j, &e)| e && j != i).count())
        .collect();
    let mut rows = vec![vec![0.0; m]; m];
    for i in 0..m {
        let mut off = 0.0;
        for j in 0..m {
            if i != j && adjacency[i][j] {
                let w = 1.0 / (1 + degree[i].max(degree[j])) as f64;
                rows[i][j] = w;
                off += w;
            }
        }
        rows[i][i] = 1.0 - off;
    }
    MixingMatrix::from_weights(&rows)
}

fn is_connected(adjacency: &[Vec<bool>]) -> bool {
    let m = adjacency.len();
    let mut seen = vec![false; m];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(i) = stack.pop() {
        for (j, &e) in adjacency[i].iter().enumerate() {
            if e && !seen[j] {
                seen[j] = true;
                stack.push(j);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

/// Per-invariant diagnostics for a candidate mixing matrix.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub m: usize,
    pub square: bool,
    pub finite: bool,
    /// Largest `|row_sum − 1|`.
    pub max_row_violation: f64,
    /// Largest `|col_sum − 1|`.
    pub max_col_violation: f64,
    /// Most negative entry (0 when all entries are nonnegative).
    pub worst_negative: f64,
    /// Smallest diagonal entry.
    pub min_diagonal: f64,
    /// `‖A − J‖₂`; NaN when the matrix is not square or not finite.
    pub rho: f64,
}

impl ValidationReport {
    pub fn rows_stochastic(&self) -> bool {
        self.max_row_violation <= STOCHASTIC_TOL
    }

    pub fn cols_stochastic(&self) -> bool {
        self.max_col_violation <= STOCHASTIC_TOL
    }

    pub fn nonnegative(&self) -> bool {
        self.worst_negative >= 0.0
    }

    pub fn positive_diagonal(&self) -> bool {
        self.min_diagonal > 0.0
    }

    pub fn connected(&self) -> bool {
        self.rho < CONNECTED_RHO_MAX
    }

    pub fn doubly_stochastic(&self) -> bool {
        self.square && self.finite && self.rows_stochastic() && self.cols_stochastic()
    }

    pub fn passed(&self) -> bool {
        self.doubly_stochastic()
            && self.nonnegative()
            && self.positive_diagonal()
            && self.connected()
    }

    pub fn summary(&self) -> String {
        if !self.square {
            return "matrix is not square".into();
        }
        if !self.finite {
            return "matrix has non-finite entries".into();
        }
        let mut failed = Vec::new();
        if !self.rows_stochastic() {
            failed.push(format!("row sums off by up to {:e}", self.max_row_violation));
        }
        if !self.cols_stochastic() {
            failed.push(format!("column sums off by up to {:e}", self.max_col_violation));
        }
        if !self.nonnegative() {
            failed.push(format!("negative entry {}", self.worst_negative));
        }
        if !self.positive_diagonal() {
            failed.push(format!("diagonal entry {}", self.min_diagonal));
        }
        if !self.connected() {
            failed.push(format!("not connected (rho = {})", self.rho));
        }
        if failed.is_empty() {
            "ok".into()
        } else {
            failed.join("; ")
        }
    }
}

/// Check every mixing-matrix invariant; never fails.
pub fn validate(weights: &[Vec<f64>]) -> ValidationReport {
    let m = weights.len();
    let square = m > 0 && weights.iter().all(|r| r.len() == m);
    let finite = weights.iter().flatten().all(|v| v.is_finite());
    let mut report = ValidationReport {
        m,
        square,
        finite,
        max_row_violation: f64::NAN,
        max_col_violation: f64::NAN,
        worst_negative: 0.0,
        min_diagonal: f64::NAN,
        rho: f64::NAN,
    };
    if !square || !finite {
        return report;
    }
    report.max_row_violation = weights
        .iter()
        .map(|r| (r.iter().sum::<f64>() - 1.0).abs())
        .fold(0.0, f64::max);
    report.max_col_violation = (0..m)
        .map(|j| (weights.iter().map(|r| r[j]).sum::<f64>() - 1.0).abs())
        .fold(0.0, f64::max);
    report.worst_negative = weights.iter().flatten().copied().fold(0.0, f64::min);
    report.min_diagonal = (0..m).map(|i| weights[i][i]).fold(f64::INFINITY, f64::min);
    report.rho = deviation_norm(weights);
    report
}

/// Largest singular value of `A − J` for a doubly stochastic `A`.
pub fn spectral_gap(weights: &[Vec<f64>]) -> Result<f64> {
    let report = validate(weights);
    if !report.doubly_stochastic() {
        return Err(Error::InvalidTopology(report.summary()));
    }
    Ok(report.rho)
}

fn deviation_norm(weights: &[Vec<f64>]) -> f64 {
    let m = weights.len();
    let j = 1.0 / m as f64;
    let dev = DMatrix::from_fn(m, m, |r, c| weights[r][c] - j);
    dev.singular_values().max()
}

/// Per-iteration (and per gossip repetition) mixing matrices.
///
/// `tau = 0` is the tracking/primal mix of an iteration; `tau = 1..` indexes
/// the repeated gossip rounds of a restart. Lookups without an override fall
/// back to the base matrix.
#[derive(Debug, Clone)]
pub struct TopologySchedule {
    base: MixingMatrix,
    overrides: HashMap<(u64, usize), MixingMatrix>,
}

impl TopologySchedule {
    pub fn fixed(base: MixingMatrix) -> Self {
        Self {
            base,
            overrides: HashMap::new(),
        }
    }

    pub fn insert(&mut self, k: u64, tau: usize, matrix: MixingMatrix) -> Result<()> {
        if matrix.agents() != self.base.agents() {
            return Err(Error::InvalidTopology(format!(
                "scheduled matrix has {} agents, base has {}",
                matrix.agents(),
                self.base.agents()
            )));
        }
        self.overrides.insert((k, tau), matrix);
        Ok(())
    }

    pub fn base(&self) -> &MixingMatrix {
        &self.base
    }

    pub fn agents(&self) -> usize {
        self.base.agents()
    }

    pub fn at(&self, k: u64, tau: usize) -> &MixingMatrix {
        self.overrides.get(&(k, tau)).unwrap_or(&self.base)
    }

    /// Worst-case `rho` over every matrix in the schedule.
    pub fn rho(&self) -> f64 {
        self.overrides
            .values()
            .map(MixingMatrix::rho)
            .fold(self.base.rho(), f64::max)
    }
}

impl From<MixingMatrix> for TopologySchedule {
    fn from(m: MixingMatrix) -> Self {
        Self::fixed(m)
    }
}

/// Parse a whitespace-separated dense matrix, one row per line. Blank lines
/// and `#` comments are skipped.
pub fn parse_matrix(text: &str) -> Result<Vec<Vec<f64>>> {
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split_whitespace()
            .map(|tok| {
                tok.parse::<f64>().map_err(|_| Error::Parse {
                    line: lineno + 1,
                    msg: format!("not a number: {tok:?}"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first() {
            let first: &Vec<f64> = first;
            if first.len() != row.len() {
                return Err(Error::Parse {
                    line: lineno + 1,
                    msg: format!("expected {} columns, found {}", first.len(), row.len()),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            line: 0,
            msg: "no matrix rows".into(),
        });
    }
    if rows.len() != rows[0].len() {
        return Err(Error::Parse {
            line: rows.len(),
            msg: format!("matrix is {}x{}, expected square", rows.len(), rows[0].len()),
        });
    }
    Ok(rows)
}

/// Parse an adjacency matrix in the same layout as [`parse_matrix`]; nonzero
/// entries are edges.
pub fn parse_adjacency(text: &str) -> Result<Vec<Vec<bool>>> {
    Ok(parse_matrix(text)?
        .into_iter()
        .map(|r| r.into_iter().map(|v| v != 0.0).collect())
        .collect())
}

pub fn load_matrix(path: &Path) -> Result<MixingMatrix> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    MixingMatrix::from_weights(&parse_matrix(&text)?)
}

pub fn load_metropolis_hastings(path: &Path) -> Result<MixingMatrix> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    build_metropolis_hastings(&parse_adjacency(&text)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn block_of_js() -> Vec<Vec<f64>> {
        vec![
            vec![0.5, 0.5, 0.0, 0.0],
            vec![0.5, 0.5, 0.0, 0.0],
            vec![0.0, 0.0, 0.5, 0.5],
            vec![0.0, 0.0, 0.5, 0.5],
        ]
    }

    #[test]
    fn ring_small_sizes() {
        assert!(matches!(build_ring(2), Err(Error::InvalidTopology(_))));
        let r3 = build_ring(3).unwrap();
        assert!(r3.rho() < 1e-12);
        let r4 = build_ring(4).unwrap();
        assert!((r4.rho() - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn ring_twenty_matches_circulant_spectrum() {
        let expected = 1.0 / 3.0 + 2.0 / 3.0 * (2.0 * PI / 20.0).cos();
        let r = build_ring(20).unwrap();
        assert!((r.rho() - expected).abs() < 1e-10, "{} vs {expected}", r.rho());
    }

    #[test]
    fn metropolis_complete_three_is_averaging() {
        let adj = vec![vec![true; 3]; 3];
        let mm = build_metropolis_hastings(&adj).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!((mm.weight(i, j) - 1.0 / 3.0).abs() < 1e-15);
            }
        }
        assert!(mm.rho() < 1e-12);
    }

    #[test]
    fn metropolis_path_hand_computed() {
        let adj = vec![
            vec![true, true, false],
            vec![true, true, true],
            vec![false, true, true],
        ];
        let mm = build_metropolis_hastings(&adj).unwrap();
        let expect = [
            [2.0 / 3.0, 1.0 / 3.0, 0.0],
            [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
            [0.0, 1.0 / 3.0, 2.0 / 3.0],
        ];
        for i in 0..3 {
            for j in 0..3 {
                assert!((mm.weight(i, j) - expect[i][j]).abs() < 1e-15);
            }
        }
        let rep = validate(&mm.to_rows());
        assert!(rep.max_row_violation <= 1e-12 && rep.max_col_violation <= 1e-12);
    }

    #[test]
    fn metropolis_rejects_bad_graphs() {
        let disconnected = vec![
            vec![true, false, false],
            vec![false, true, true],
            vec![false, true, true],
        ];
        assert!(matches!(
            build_metropolis_hastings(&disconnected),
            Err(Error::DisconnectedGraph)
        ));
        let asym = vec![vec![true, true], vec![false, true]];
        assert!(matches!(
            build_metropolis_hastings(&asym),
            Err(Error::InvalidTopology(_))
        ));
        let no_loop = vec![vec![false, true], vec![true, true]];
        assert!(build_metropolis_hastings(&no_loop).is_err());
    }

    #[test]
    fn validate_identity_is_disconnected() {
        let rep = validate(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert!(rep.doubly_stochastic());
        assert!(!rep.connected());
        assert!(!rep.passed());
    }

    #[test]
    fn validate_row_stochastic_only() {
        let rep = validate(&[vec![0.9, 0.1], vec![0.5, 0.5]]);
        assert!(rep.rows_stochastic());
        assert!(!rep.cols_stochastic());
        assert!((rep.max_col_violation - 0.4).abs() < 1e-12);
    }

    #[test]
    fn validate_ring_passes() {
        let rep = validate(&build_ring(5).unwrap().to_rows());
        assert!(rep.passed(), "{}", rep.summary());
    }

    #[test]
    fn validate_flags_negative_and_zero_diagonal() {
        let rep = validate(&[vec![1.5, -0.5], vec![-0.5, 1.5]]);
        assert!(rep.doubly_stochastic());
        assert!(!rep.nonnegative());
        let rep = validate(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        assert!(!rep.positive_diagonal());
    }

    #[test]
    fn spectral_gap_cases() {
        for m in [1, 2, 5] {
            let j = vec![vec![1.0 / m as f64; m]; m];
            assert!(spectral_gap(&j).unwrap() < 1e-12);
        }
        assert!((spectral_gap(&block_of_js()).unwrap() - 1.0).abs() < 1e-12);
        assert!(spectral_gap(&[vec![0.9, 0.1], vec![0.5, 0.5]]).is_err());
    }

    #[test]
    fn mix_pair_average() {
        let mm = MixingMatrix::from_weights(&[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        let z = Stacked::from_rows(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let out = mm.mix(&z).unwrap();
        assert_eq!(out.row(0), &[0.5, 0.5]);
        assert_eq!(out.row(1), &[0.5, 0.5]);
    }

    #[test]
    fn mix_consensus_is_fixed_point() {
        let mm = build_ring(6).unwrap();
        let z = Stacked::replicate(6, &[0.25, -3.0, 7.5]);
        let out = mm.mix(&z).unwrap();
        for i in 0..6 {
            for (a, b) in out.row(i).iter().zip(z.row(i)) {
                assert!((a - b).abs() <= 1e-15 * b.abs().max(1.0));
            }
        }
    }

    #[test]
    fn mix_shape_error() {
        let mm = build_ring(4).unwrap();
        assert!(matches!(mm.mix(&Stacked::zeros(3, 2)), Err(Error::Shape(_))));
    }

    #[test]
    fn schedule_overrides_and_rejects_mismatched() {
        let mut s = TopologySchedule::fixed(build_ring(4).unwrap());
        s.insert(3, 1, MixingMatrix::complete(4).unwrap()).unwrap();
        assert!(s.at(3, 1).rho() < 1e-12);
        assert!((s.at(3, 0).rho() - 1.0 / 3.0).abs() < 1e-12);
        assert!(s.insert(0, 0, build_ring(5).unwrap()).is_err());
    }

    #[test]
    fn parse_matrix_text() {
        let m = parse_matrix("# ring\n0.5 0.5\n\n0.5 0.5  \n").unwrap();
        assert_eq!(m, vec![vec![0.5, 0.5], vec![0.5, 0.5]]);
        assert!(matches!(parse_matrix("1 x\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_matrix("1 0\n1\n"), Err(Error::Parse { line: 2, .. })));
        assert!(parse_matrix("1 0\n").is_err());
        assert!(parse_matrix("").is_err());
    }
}
