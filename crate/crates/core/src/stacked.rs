use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-agent vectors stacked row-wise: `m` rows of dimension `d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stacked {
    rows: usize,
    dim: usize,
    data: Vec<f64>,
}

impl Stacked {
    pub fn zeros(rows: usize, dim: usize) -> Self {
        Self {
            rows,
            dim,
            data: vec![0.0; rows * dim],
        }
    }

    /// Every row set to `x`.
    pub fn replicate(rows: usize, x: &[f64]) -> Self {
        let mut data = Vec::with_capacity(rows * x.len());
        for _ in 0..rows {
            data.extend_from_slice(x);
        }
        Self {
            rows,
            dim: x.len(),
            data,
        }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::shape("rows of unequal length"));
        }
        let m = rows.len();
        Ok(Self {
            rows: m,
            dim,
            data: rows.into_iter().flatten().collect(),
        })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim.max(1)).take(self.rows)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Network average `(1/m) Σ_i row_i`.
    pub fn mean(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for r in self.iter_rows() {
            for (o, v) in out.iter_mut().zip(r) {
                *o += v;
            }
        }
        let inv = 1.0 / self.rows as f64;
        out.iter_mut().for_each(|o| *o *= inv);
        out
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// `Σ_i ‖row_i − mean‖²`.
    pub fn deviation_sq(&self) -> f64 {
        let mean = self.mean();
        self.iter_rows()
            .map(|r| r.iter().zip(&mean).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
            .sum()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn check_same_shape(&self, other: &Stacked) -> Result<()> {
        if self.rows != other.rows || self.dim != other.dim {
            return Err(Error::shape(format!(
                "{}x{} vs {}x{}",
                self.rows, self.dim, other.rows, other.dim
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_and_deviation() {
        let s = Stacked::from_rows(vec![vec![1.0, 0.0], vec![-1.0, 0.0]]).unwrap();
        assert_eq!(s.mean(), vec![0.0, 0.0]);
        assert_eq!(s.deviation_sq(), 2.0);
    }

    #[test]
    fn ragged_rows_rejected() {
        assert!(Stacked::from_rows(vec![vec![1.0], vec![1.0, 2.0]]).is_err());
    }
}
