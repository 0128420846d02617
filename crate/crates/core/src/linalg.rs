//! Small dense symmetric linear algebra for the full-covariance posterior:
//! rank-1 precision updates and a Gauss-Jordan solve without pivoting.
//!
//! Matrices here are tiny (tens of parameters), so everything is plain
//! row-major `Vec<f64>` with no blocking or packing.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pivots smaller than this in magnitude abort the elimination.
pub const PIVOT_THRESHOLD: f64 = 1e-300;

/// A symmetric positive-definite precision matrix (inverse covariance),
/// stored dense row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrecisionMatrix {
    order: usize,
    entries: Vec<f64>,
}

impl PrecisionMatrix {
    /// Diagonal precision from per-parameter prior spreads: entry `(i,i)`
    /// is `1 / spreads[i]^2`.
    pub fn from_spreads(spreads: &[f64]) -> Result<Self> {
        if spreads.is_empty() {
            return Err(Error::invalid("at least one spread is required"));
        }
        for (i, &s) in spreads.iter().enumerate() {
            if s <= 0.0 || !s.is_finite() {
                return Err(Error::invalid(format!("spread[{i}] must be > 0, got {s}")));
            }
        }
        let n = spreads.len();
        let mut entries = vec![0.0; n * n];
        for (i, &s) in spreads.iter().enumerate() {
            entries[i * n + i] = 1.0 / (s * s);
        }
        Ok(Self { order: n, entries })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.order + j]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    /// Rebuild a matrix from raw row-major entries (checkpoint restore).
    pub fn from_entries(order: usize, entries: Vec<f64>) -> Result<Self> {
        if order == 0 || entries.len() != order * order {
            return Err(Error::invalid(format!(
                "entry count {} does not match order {order}",
                entries.len()
            )));
        }
        for i in 0..order {
            for j in (i + 1)..order {
                let a = entries[i * order + j];
                let b = entries[j * order + i];
                let scale = a.abs().max(b.abs()).max(1.0);
                if (a - b).abs() > 1e-12 * scale {
                    return Err(Error::invalid(format!(
                        "matrix is not symmetric at ({i},{j}): {a} vs {b}"
                    )));
                }
            }
            let diag = entries[i * order + i];
            if diag <= 0.0 || !diag.is_finite() {
                return Err(Error::invalid(format!("diagonal entry {i} must be > 0")));
            }
        }
        Ok(Self { order, entries })
    }

    /// Add the rank-1 term `g g^T / tau^2` in place. Each off-diagonal pair
    /// is written from the same product, so symmetry is preserved exactly.
    pub fn rank1_update(&mut self, g: &[f64], tau: f64) -> Result<()> {
        if g.len() != self.order {
            return Err(Error::invalid(format!(
                "vector length {} does not match order {}",
                g.len(),
                self.order
            )));
        }
        if tau <= 0.0 || !tau.is_finite() {
            return Err(Error::invalid(format!("tau must be > 0, got {tau}")));
        }
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("update vector must be finite"));
        }
        let inv_t2 = 1.0 / (tau * tau);
        let n = self.order;
        for i in 0..n {
            let gi = g[i] * inv_t2;
            self.entries[i * n + i] += gi * g[i];
            for j in (i + 1)..n {
                let upd = gi * g[j];
                self.entries[i * n + j] += upd;
                self.entries[j * n + i] += upd;
            }
        }
        Ok(())
    }

    /// Solve `self * b = rhs` by Gauss-Jordan elimination *without pivoting*.
    ///
    /// The posterior precision stays near-diagonal when the strength scales
    /// are large enough, so pivoting is unnecessary; a vanishing diagonal
    /// pivot is reported as [`Error::SingularMatrix`] instead of dividing
    /// by zero. The matrix itself is left untouched (the elimination runs
    /// on a copy).
    pub fn solve_gauss_jordan(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let n = self.order;
        if rhs.len() != n {
            return Err(Error::invalid(format!(
                "rhs length {} does not match order {n}",
                rhs.len()
            )));
        }
        let mut m = self.entries.clone();
        let mut b = rhs.to_vec();
        for col in 0..n {
            let pivot = m[col * n + col];
            if pivot.abs() < PIVOT_THRESHOLD {
                return Err(Error::SingularMatrix {
                    row: col,
                    threshold: PIVOT_THRESHOLD,
                });
            }
            let inv = 1.0 / pivot;
            for j in col..n {
                m[col * n + j] *= inv;
            }
            b[col] *= inv;
            for row in 0..n {
                if row == col {
                    continue;
                }
                let factor = m[row * n + col];
                if factor == 0.0 {
                    continue;
                }
                for j in col..n {
                    m[row * n + j] -= factor * m[col * n + j];
                }
                b[row] -= factor * b[col];
            }
        }
        Ok(b)
    }

    /// Max-norm residual `||self * b - rhs||_inf`.
    pub fn residual(&self, b: &[f64], rhs: &[f64]) -> f64 {
        let n = self.order;
        let mut worst = 0.0f64;
        for i in 0..n {
            let mut dot = 0.0;
            for j in 0..n {
                dot += self.entries[i * n + j] * b[j];
            }
            worst = worst.max((dot - rhs[i]).abs());
        }
        worst
    }
}
