use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{LabError, Result};
use crate::linalg::{eigsym_dense, DenseSymMatrix};

/// A family of square real matrices of equal size, each with spectral norm at
/// most one.
///
/// Matrices need not be symmetric: regular representations of non-abelian
/// groups are permutation matrices. Norms are operator 2-norms throughout.
#[derive(Clone, Debug)]
pub struct SpencerInstance {
    dim: usize,
    matrices: Vec<DMatrix<f64>>,
    symmetric: bool,
}

impl SpencerInstance {
    pub fn new(matrices: Vec<DMatrix<f64>>) -> Result<Self> {
        let dim = matrices.first().map_or(0, |m| m.nrows());
        for m in &matrices {
            if m.nrows() != dim || m.ncols() != dim {
                return Err(LabError::DimensionMismatch {
                    expected: dim,
                    got: m.nrows().max(m.ncols()),
                });
            }
            let norm = spectral_norm(m)?;
            if norm > 1.0 + 1e-12 {
                return Err(LabError::InvalidArgument(format!(
                    "matrix has spectral norm {norm} > 1"
                )));
            }
        }
        let symmetric = matrices.iter().all(|m| m == &m.transpose());
        Ok(Self {
            dim,
            matrices,
            symmetric,
        })
    }

    /// Diagonal instance `A_i = diag(row i of b)`; `b` is `m x dim`.
    pub fn from_diagonal_rows(b: &[Vec<f64>]) -> Result<Self> {
        Self::new(
            b.iter()
                .map(|row| DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(row)))
                .collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.matrices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrices.is_empty()
    }

    pub fn matrices(&self) -> &[DMatrix<f64>] {
        &self.matrices
    }
}

/// Operator 2-norm. Diagonal matrices use `max |d_i|` directly, symmetric
/// matrices `max |lambda|`, and general ones `sqrt(lambda_max(M^T M))`.
pub fn spectral_norm(m: &DMatrix<f64>) -> Result<f64> {
    let n = m.nrows();
    if n == 0 {
        return Ok(0.0);
    }
    let diagonal = (0..n).all(|i| (0..n).all(|j| i == j || m[(i, j)] == 0.0));
    if diagonal {
        return Ok((0..n).map(|i| m[(i, i)].abs()).fold(0.0, f64::max));
    }
    if m == &m.transpose() {
        let s = eigsym_dense(&DenseSymMatrix::from_matrix(m.clone())?, false)?;
        return Ok(s.min().abs().max(s.max().abs()));
    }
    let gram = m.transpose() * m;
    let gram = DenseSymMatrix::from_upper_fn(n, |i, j| gram[(i, j)]);
    Ok(eigsym_dense(&gram, false)?.max().max(0.0).sqrt())
}

#[derive(Clone, Debug, Serialize)]
pub struct SpencerResult {
    pub signs: Vec<i8>,
    /// `||sum_i eps_i A_i||` at the best signs found.
    pub value: f64,
    /// `value / sqrt(m)`.
    pub constant: f64,
    pub exact: bool,
    pub evaluated: u64,
}

/// Minimizes `||sum_i eps_i A_i||` over sign vectors.
///
/// `eps_0` is fixed to `+1` (the norm is invariant under `eps -> -eps`), and the
/// remaining `2^{m-1}` patterns are visited in Gray-code order so each step
/// updates the running sum by a single matrix. At most `budget` patterns are
/// evaluated; a truncated search returns its best pattern with `exact = false`.
pub fn matrix_spencer_min_norm(inst: &SpencerInstance, budget: u64) -> Result<SpencerResult> {
    let m = inst.len();
    if m == 0 {
        return Ok(SpencerResult {
            signs: vec![],
            value: 0.0,
            constant: 0.0,
            exact: true,
            evaluated: 0,
        });
    }
    if m > 63 {
        return Err(LabError::TooLarge(format!(
            "{m} matrices cannot be enumerated"
        )));
    }
    let norm = |s: &DMatrix<f64>| -> Result<f64> {
        if inst.symmetric {
            let d = inst.dim;
            let diagonal = (0..d).all(|i| (0..d).all(|j| i == j || s[(i, j)] == 0.0));
            if diagonal {
                return Ok((0..d).map(|i| s[(i, i)].abs()).fold(0.0, f64::max));
            }
            let e = eigsym_dense(&DenseSymMatrix::from_upper_fn(d, |i, j| s[(i, j)]), false)?;
            Ok(e.min().abs().max(e.max().abs()))
        } else {
            spectral_norm(s)
        }
    };

    let mut signs = vec![1i8; m];
    let mut sum = inst
        .matrices
        .iter()
        .fold(DMatrix::zeros(inst.dim, inst.dim), |acc, a| acc + a);
    let mut best_val = norm(&sum)?;
    let mut best_signs = signs.clone();
    let total: u64 = 1u64 << (m - 1);
    let mut evaluated = 1u64;
    for step in 1..total {
        if evaluated >= budget {
            break;
        }
        // Gray code: flip bit `trailing_zeros(step)` of the free signs 1..m.
        let j = step.trailing_zeros() as usize + 1;
        let old = signs[j] as f64;
        sum -= &inst.matrices[j] * (2.0 * old);
        signs[j] = -signs[j];
        let v = norm(&sum)?;
        evaluated += 1;
        if v < best_val {
            best_val = v;
            best_signs.copy_from_slice(&signs);
        }
    }
    Ok(SpencerResult {
        signs: best_signs,
        value: best_val,
        constant: best_val / (m as f64).sqrt(),
        exact: evaluated >= total,
        evaluated,
    })
}
