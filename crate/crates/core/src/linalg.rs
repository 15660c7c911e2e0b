//! Dense symmetric / Hermitian matrices, their spectra, and Gaussian ensembles.

use nalgebra::{Complex, DMatrix, DVector};
use serde::Serialize;

use crate::error::{LabError, Result};
use crate::rng::RngStream;

/// Real symmetric matrix. Symmetry is exact: construction either mirrors the
/// upper triangle or rejects inputs with `a[i][j] != a[j][i]`.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseSymMatrix {
    inner: DMatrix<f64>,
}

impl DenseSymMatrix {
    /// Builds the matrix from `f(i, j)` evaluated on `i <= j`.
    pub fn from_upper_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut inner = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = f(i, j);
                inner[(i, j)] = v;
                inner[(j, i)] = v;
            }
        }
        Self { inner }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            inner: DMatrix::zeros(n, n),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            inner: DMatrix::identity(n, n),
        }
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        Self {
            inner: DMatrix::from_diagonal(&DVector::from_column_slice(d)),
        }
    }

    /// Wraps `m`, checking exact symmetry.
    pub fn from_matrix(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(LabError::DimensionMismatch {
                expected: m.nrows(),
                got: m.ncols(),
            });
        }
        let n = m.nrows();
        for i in 0..n {
            for j in (i + 1)..n {
                if m[(i, j)] != m[(j, i)] {
                    return Err(LabError::NotSymmetric { row: i, col: j });
                }
            }
        }
        Ok(Self { inner: m })
    }

    /// Row-major constructor.
    pub fn from_rows(n: usize, entries: &[f64]) -> Result<Self> {
        if entries.len() != n * n {
            return Err(LabError::DimensionMismatch {
                expected: n * n,
                got: entries.len(),
            });
        }
        Self::from_matrix(DMatrix::from_row_slice(n, n, entries))
    }

    pub fn n(&self) -> usize {
        self.inner.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.inner[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.inner
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.inner
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            inner: &self.inner * s,
        }
    }

    /// `y = M x`.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        let n = self.n();
        for (i, yi) in y.iter_mut().enumerate().take(n) {
            let row = self.inner.row(i);
            *yi = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.inner.norm()
    }

    pub fn is_finite(&self) -> bool {
        self.inner.iter().all(|v| v.is_finite())
    }
}

/// Complex Hermitian matrix with exact conjugate symmetry.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianMatrix {
    inner: DMatrix<Complex<f64>>,
}

impl HermitianMatrix {
    /// Builds from `f(i, j)` on `i <= j`; the diagonal is forced real.
    pub fn from_upper_fn(n: usize, mut f: impl FnMut(usize, usize) -> Complex<f64>) -> Self {
        let mut inner = DMatrix::from_element(n, n, Complex::new(0.0, 0.0));
        for i in 0..n {
            let d = f(i, i);
            inner[(i, i)] = Complex::new(d.re, 0.0);
            for j in (i + 1)..n {
                let v = f(i, j);
                inner[(i, j)] = v;
                inner[(j, i)] = v.conj();
            }
        }
        Self { inner }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            inner: DMatrix::from_element(n, n, Complex::new(0.0, 0.0)),
        }
    }

    pub fn from_matrix(m: DMatrix<Complex<f64>>) -> Result<Self> {
        if !m.is_square() {
            return Err(LabError::DimensionMismatch {
                expected: m.nrows(),
                got: m.ncols(),
            });
        }
        let n = m.nrows();
        for i in 0..n {
            for j in i..n {
                if m[(i, j)] != m[(j, i)].conj() {
                    return Err(LabError::NotSymmetric { row: i, col: j });
                }
            }
        }
        Ok(Self { inner: m })
    }

    pub fn n(&self) -> usize {
        self.inner.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> Complex<f64> {
        self.inner[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<Complex<f64>> {
        &self.inner
    }

    /// True when every entry has zero imaginary part.
    pub fn is_real(&self) -> bool {
        self.inner.iter().all(|z| z.im == 0.0)
    }

    pub fn is_hermitian(&self) -> bool {
        let n = self.n();
        (0..n).all(|i| (i..n).all(|j| self.inner[(i, j)] == self.inner[(j, i)].conj()))
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            inner: self.inner.map(|z| z * s),
        }
    }

    /// Real part as a symmetric matrix (exact when `is_real`).
    pub fn real_part(&self) -> DenseSymMatrix {
        DenseSymMatrix {
            inner: self.inner.map(|z| z.re),
        }
    }

    /// Applies the `2n x 2n` real embedding `[[Re, -Im], [Im, Re]]` to
    /// `(u, v)` stacked in `x`. Each eigenvalue of the Hermitian matrix
    /// appears twice in the embedding.
    pub fn embedded_matvec(&self, x: &[f64], y: &mut [f64]) {
        let n = self.n();
        let (u, v) = x.split_at(n);
        let (yu, yv) = y.split_at_mut(n);
        for i in 0..n {
            let (mut a, mut b) = (0.0, 0.0);
            for j in 0..n {
                let z = self.inner[(i, j)];
                a += z.re * u[j] - z.im * v[j];
                b += z.im * u[j] + z.re * v[j];
            }
            yu[i] = a;
            yv[i] = b;
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.inner.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.inner
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

/// Eigenvalues in ascending order, optionally with eigenvectors as columns.
#[derive(Clone, Debug, Serialize)]
pub struct Spectrum<T: nalgebra::Scalar = f64> {
    pub eigenvalues: Vec<f64>,
    #[serde(skip)]
    pub eigenvectors: Option<DMatrix<T>>,
}

impl<T: nalgebra::Scalar> Spectrum<T> {
    pub fn min(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(f64::NAN)
    }

    pub fn max(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(f64::NAN)
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }
}

/// Matrices with a dense self-adjoint eigensolver.
pub trait EigSym {
    type Scalar: nalgebra::Scalar;
    fn eigsym(&self, vectors: bool) -> Result<Spectrum<Self::Scalar>>;
}

impl EigSym for DenseSymMatrix {
    type Scalar = f64;

    fn eigsym(&self, vectors: bool) -> Result<Spectrum<f64>> {
        if !self.is_finite() {
            return Err(LabError::NonFinite("eigsym_dense input"));
        }
        if self.n() == 0 {
            return Ok(Spectrum {
                eigenvalues: vec![],
                eigenvectors: vectors.then(|| DMatrix::zeros(0, 0)),
            });
        }
        if vectors {
            let eig = self.inner.clone().symmetric_eigen();
            Ok(sorted(eig.eigenvalues.as_slice(), Some(eig.eigenvectors)))
        } else {
            let vals = self.inner.clone().symmetric_eigenvalues();
            Ok(sorted(vals.as_slice(), None))
        }
    }
}

impl EigSym for HermitianMatrix {
    type Scalar = Complex<f64>;

    fn eigsym(&self, vectors: bool) -> Result<Spectrum<Complex<f64>>> {
        if !self.is_finite() {
            return Err(LabError::NonFinite("eigsym_dense input"));
        }
        if self.n() == 0 {
            return Ok(Spectrum {
                eigenvalues: vec![],
                eigenvectors: vectors.then(|| DMatrix::from_element(0, 0, Complex::new(0.0, 0.0))),
            });
        }
        if vectors {
            let eig = self.inner.clone().symmetric_eigen();
            Ok(sorted(eig.eigenvalues.as_slice(), Some(eig.eigenvectors)))
        } else {
            let vals = self.inner.clone().symmetric_eigenvalues();
            Ok(sorted(vals.as_slice(), None))
        }
    }
}

fn sorted<T: nalgebra::Scalar>(vals: &[f64], vecs: Option<DMatrix<T>>) -> Spectrum<T> {
    let mut order: Vec<usize> = (0..vals.len()).collect();
    order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
    let eigenvalues = order.iter().map(|&k| vals[k]).collect();
    let eigenvectors = vecs.map(|v| v.select_columns(order.iter()));
    Spectrum {
        eigenvalues,
        eigenvectors,
    }
}

/// Full ascending spectrum of a symmetric or Hermitian matrix.
pub fn eigsym_dense<M: EigSym>(m: &M, vectors: bool) -> Result<Spectrum<M::Scalar>> {
    m.eigsym(vectors)
}

/// GOE sample with off-diagonal variance `1/n` and diagonal variance `2/n`, so
/// the bulk spectrum fills `[-2, 2]`. Entries are drawn row by row over the
/// upper triangle.
pub fn sample_goe(n: usize, rng: &mut RngStream) -> Result<DenseSymMatrix> {
    if n == 0 {
        return Err(LabError::InvalidArgument(
            "GOE dimension must be >= 1".into(),
        ));
    }
    let off = (1.0 / n as f64).sqrt();
    let diag = (2.0 / n as f64).sqrt();
    Ok(DenseSymMatrix::from_upper_fn(n, |i, j| {
        let g = rng.normal();
        if i == j {
            g * diag
        } else {
            g * off
        }
    }))
}

/// Unnormalized GUE sample: `E|W_ij|^2 = 1` off the diagonal, real diagonal of
/// variance 1. Divide by `sqrt(n)` for a bulk edge at 2.
pub fn sample_gue_unit(n: usize, rng: &mut RngStream) -> Result<HermitianMatrix> {
    if n == 0 {
        return Err(LabError::InvalidArgument(
            "GUE dimension must be >= 1".into(),
        ));
    }
    Ok(HermitianMatrix::from_upper_fn(n, |i, j| {
        if i == j {
            Complex::new(rng.normal(), 0.0)
        } else {
            rng.complex_normal()
        }
    }))
}

/// Euclidean inner product, accumulated in eight lanes so it vectorizes.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f64; 8];
    let mut ca = a.chunks_exact(8);
    let mut cb = b.chunks_exact(8);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    let tail: f64 = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(x, y)| x * y)
        .sum();
    acc.iter().sum::<f64>() + tail
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
