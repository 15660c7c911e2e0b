//! Vector and matrix discrepancy.
//!
//! Everything here that claims exactness runs in integer arithmetic: colorings
//! are `i8` sign vectors, matrices hold `i64` entries, and `||Ax||_inf` is an
//! integer. Spectral norms of signed matrix sums go through the dense
//! eigensolver.

mod exact;
mod groups;
mod hadamard;
mod spencer;

pub use exact::{disc_exact, disc_exhaustive, disc_heuristic};
pub use groups::{regular_representation, GroupSpec, GroupTable, RegularRepresentation};
pub use hadamard::{hadamard_disc_report, sylvester_hadamard, x_natural, HadamardReport};
pub use spencer::{matrix_spencer_min_norm, spectral_norm, SpencerInstance, SpencerResult};

use std::path::Path;

use serde::Serialize;

use crate::error::{LabError, Result};
use crate::rng::RngStream;

/// Integer matrix, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntMatrix {
    rows: usize,
    cols: usize,
    data: Vec<i64>,
}

impl IntMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<i64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(LabError::DimensionMismatch {
                expected: rows * cols,
                got: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    /// Rejects any entry that is not an exact integer.
    pub fn from_f64(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        let mut out = Vec::with_capacity(data.len());
        for &v in data {
            if !v.is_finite() || v.fract() != 0.0 || v.abs() > 2f64.powi(53) {
                return Err(LabError::InvalidArgument(format!(
                    "exact discrepancy needs integer entries, got {v}"
                )));
            }
            out.push(v as i64);
        }
        Self::new(rows, cols, out)
    }

    /// Parses `"rows cols"` followed by `rows` lines of integers.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header = lines
            .next()
            .ok_or_else(|| LabError::Parse("empty matrix file".into()))?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|t| {
                t.parse()
                    .map_err(|_| LabError::Parse(format!("bad header token `{t}`")))
            })
            .collect::<Result<_>>()?;
        let [rows, cols] = dims[..] else {
            return Err(LabError::Parse("header must be `rows cols`".into()));
        };
        let mut data = Vec::with_capacity(rows * cols);
        for (r, line) in lines.enumerate() {
            let row: Vec<i64> = line
                .split_whitespace()
                .map(|t| {
                    t.parse()
                        .map_err(|_| LabError::Parse(format!("non-integer entry `{t}` in row {r}")))
                })
                .collect::<Result<_>>()?;
            if row.len() != cols {
                return Err(LabError::Parse(format!(
                    "row {r} has {} entries, expected {cols}",
                    row.len()
                )));
            }
            data.extend(row);
        }
        if data.len() != rows * cols {
            return Err(LabError::Parse(format!(
                "expected {rows} rows, got {}",
                data.len() / cols.max(1)
            )));
        }
        Self::new(rows, cols, data)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> i64 {
        self.data[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[i64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for c in 0..self.cols {
            for r in 0..self.rows {
                data.push(self.get(r, c));
            }
        }
        Self {
            rows: self.cols,
            cols: self.rows,
            data,
        }
    }

    /// `A x` for a sign vector.
    pub fn apply_signs(&self, x: &[i8]) -> Vec<i64> {
        (0..self.rows)
            .map(|r| self.row(r).iter().zip(x).map(|(&a, &s)| a * s as i64).sum())
            .collect()
    }

    /// `||A x||_inf`.
    pub fn inf_norm_of(&self, x: &[i8]) -> i64 {
        self.apply_signs(x)
            .into_iter()
            .map(i64::abs)
            .max()
            .unwrap_or(0)
    }
}

/// Matrix with every entry in `{-1, +1}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SignMatrix {
    rows: usize,
    cols: usize,
    data: Vec<i8>,
}

impl SignMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<i8>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(LabError::DimensionMismatch {
                expected: rows * cols,
                got: data.len(),
            });
        }
        if let Some(v) = data.iter().find(|&&v| v != 1 && v != -1) {
            return Err(LabError::InvalidArgument(format!("sign matrix entry {v}")));
        }
        Ok(Self { rows, cols, data })
    }

    /// Uniformly random signs.
    pub fn random(rows: usize, cols: usize, rng: &mut RngStream) -> Self {
        let data = (0..rows * cols).map(|_| rng.sign()).collect();
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> i8 {
        self.data[r * self.cols + c]
    }

    pub fn to_int(&self) -> IntMatrix {
        IntMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| v as i64).collect(),
        }
    }

    pub fn transpose(&self) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for c in 0..self.cols {
            for r in 0..self.rows {
                data.push(self.get(r, c));
            }
        }
        Self {
            rows: self.cols,
            cols: self.rows,
            data,
        }
    }

    /// `A B^T` in integer arithmetic.
    pub fn mul_transpose(&self, other: &SignMatrix) -> Vec<i64> {
        assert_eq!(self.cols, other.cols);
        let mut out = vec![0i64; self.rows * other.rows];
        for i in 0..self.rows {
            for j in 0..other.rows {
                out[i * other.rows + j] = (0..self.cols)
                    .map(|c| self.get(i, c) as i64 * other.get(j, c) as i64)
                    .sum();
            }
        }
        out
    }

    /// `A x` for an integer vector.
    pub fn apply(&self, x: &[i64]) -> Vec<i64> {
        (0..self.rows)
            .map(|r| (0..self.cols).map(|c| self.get(r, c) as i64 * x[c]).sum())
            .collect()
    }
}

impl From<&SignMatrix> for IntMatrix {
    fn from(m: &SignMatrix) -> Self {
        m.to_int()
    }
}

/// A coloring `x` and its value `||Ax||_inf`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ColoringCertificate {
    pub x: Vec<i8>,
    pub value: i64,
    /// True when the search proved that no coloring does better.
    pub exact: bool,
    pub nodes_explored: u64,
}

impl ColoringCertificate {
    /// Recomputes `||Ax||_inf` and compares with the stored value.
    pub fn verify(&self, a: &IntMatrix) -> bool {
        self.x.len() == a.cols() && a.inf_norm_of(&self.x) == self.value
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_matrix_file() {
        let m = IntMatrix::parse("2 3\n1 -1 1\n# comment\n-1 -1 2\n").unwrap();
        assert_eq!((m.rows(), m.cols()), (2, 3));
        assert_eq!(m.get(1, 2), 2);
        assert!(IntMatrix::parse("2 2\n1 1\n").is_err());
        assert!(IntMatrix::parse("1 2\n1 0.5\n").is_err());
    }

    #[test]
    fn non_integer_rejected() {
        assert!(IntMatrix::from_f64(1, 2, &[1.0, 0.5]).is_err());
        assert!(IntMatrix::from_f64(1, 2, &[1.0, -3.0]).is_ok());
    }

    #[test]
    fn sign_matrix_rejects_zero() {
        assert!(SignMatrix::new(1, 2, vec![1, 0]).is_err());
    }
}
