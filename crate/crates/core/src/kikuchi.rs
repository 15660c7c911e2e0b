//! Spiked tensors and their Kikuchi matrices.
//!
//! For even `r` the Kikuchi matrix at level `ell` has rows and columns indexed
//! by `ell`-subsets of `[n]` and entry `Y_{I delta J}` whenever the symmetric
//! difference `I delta J` has exactly `r` elements. It is applied matrix-free:
//! the neighbours of `I` are obtained by removing `r/2` elements of `I` and
//! adding `r/2` elements of its complement. Subsets are addressed by colex
//! rank throughout.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{LabError, Result};
use crate::lanczos::{lambda_extremes_lanczos, ExtremeEigs, LanczosOptions};
use crate::linalg::DenseSymMatrix;
use crate::rng::{rng_stream, RngStream};
use crate::stats::{mean, std_dev, welch_greater};
use crate::subsets::{binomial, next_subset_colex, unrank_subset_colex, BinomialTable};

/// Largest operator dimension for [`assemble_dense`].
pub const MAX_DENSE_DIM: usize = 4096;
/// Largest tensor (number of `r`-subsets) the generator will store.
pub const MAX_TENSOR_ENTRIES: u64 = 50_000_000;

/// `Y_S = lambda prod_{i in S} x_i + Z_S` for every sorted `r`-subset `S`, the
/// noise `Z` held separately so the signal strength can be changed with the
/// noise fixed.
#[derive(Clone, Debug)]
pub struct SpikedTensor {
    n: usize,
    r: usize,
    lambda: f64,
    x: Vec<i8>,
    /// `prod_{i in S} x_i` by colex rank.
    signs: Vec<i8>,
    noise: Vec<f64>,
}

impl SpikedTensor {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn x(&self) -> &[i8] {
        &self.x
    }

    pub fn len(&self) -> usize {
        self.noise.len()
    }

    pub fn is_empty(&self) -> bool {
        self.noise.is_empty()
    }

    /// Entry for the subset of colex rank `rank`.
    pub fn entry(&self, rank: usize) -> f64 {
        self.lambda * self.signs[rank] as f64 + self.noise[rank]
    }

    pub fn entries(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.entry(k)).collect()
    }

    /// Same noise, different signal strength.
    pub fn with_lambda(&self, lambda: f64) -> Self {
        Self {
            lambda,
            ..self.clone()
        }
    }

    /// Same signal, all noise set to zero.
    pub fn noiseless(&self) -> Self {
        Self {
            noise: vec![0.0; self.noise.len()],
            ..self.clone()
        }
    }
}

/// Draws `Z_S ~ N(0, 1)` in colex order of `S`. `x = None` means all ones.
pub fn gen_spiked_tensor(
    n: usize,
    r: usize,
    lambda: f64,
    x: Option<&[i8]>,
    rng: &mut RngStream,
) -> Result<SpikedTensor> {
    if r % 2 != 0 || r < 2 {
        return Err(LabError::InvalidArgument(format!(
            "tensor order must be even and >= 2, got {r}"
        )));
    }
    if r > n {
        return Err(LabError::InvalidArgument(format!(
            "order {r} exceeds n = {n}"
        )));
    }
    if !lambda.is_finite() {
        return Err(LabError::NonFinite("lambda"));
    }
    let x: Vec<i8> = match x {
        Some(x) if x.len() != n => {
            return Err(LabError::DimensionMismatch {
                expected: n,
                got: x.len(),
            })
        }
        Some(x) if x.iter().any(|&v| v != 1 && v != -1) => {
            return Err(LabError::InvalidArgument(
                "signal must be a sign vector".into(),
            ))
        }
        Some(x) => x.to_vec(),
        None => vec![1; n],
    };
    let count = binomial(n as u64, r as u64);
    if count > MAX_TENSOR_ENTRIES {
        return Err(LabError::TooLarge(format!(
            "C({n}, {r}) = {count} tensor entries"
        )));
    }
    let count = count as usize;
    let mut signs = Vec::with_capacity(count);
    let mut noise = Vec::with_capacity(count);
    let mut s: Vec<usize> = (0..r).collect();
    loop {
        signs.push(s.iter().map(|&i| x[i]).product());
        noise.push(rng.normal());
        if !next_subset_colex(&mut s, n) {
            break;
        }
    }
    Ok(SpikedTensor {
        n,
        r,
        lambda,
        x,
        signs,
        noise,
    })
}

/// The Kikuchi matrix of a tensor at level `ell`, applied without storing it.
#[derive(Clone, Debug)]
pub struct KikuchiOperator {
    n: usize,
    r: usize,
    ell: usize,
    dim: usize,
    values: Vec<f64>,
    table: BinomialTable,
}

impl KikuchiOperator {
    pub fn new(tensor: &SpikedTensor, ell: usize) -> Result<Self> {
        let (n, r) = (tensor.n(), tensor.r());
        if ell < r / 2 || ell > n {
            return Err(LabError::InvalidArgument(format!(
                "level ell = {ell} must satisfy r/2 <= ell <= n"
            )));
        }
        let dim = binomial(n as u64, ell as u64);
        if dim > usize::MAX as u64 / 2 || dim > 1 << 32 {
            return Err(LabError::TooLarge(format!("C({n}, {ell}) = {dim} rows")));
        }
        Ok(Self {
            n,
            r,
            ell,
            dim: dim as usize,
            values: tensor.entries(),
            table: BinomialTable::new(n, r.max(ell)),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn ell(&self) -> usize {
        self.ell
    }

    /// Nonzeros per row: `C(ell, r/2) C(n - ell, r/2)`.
    pub fn row_degree(&self) -> u64 {
        let h = (self.r / 2) as u64;
        binomial(self.ell as u64, h) * binomial((self.n - self.ell) as u64, h)
    }

    /// Calls `f(rank(J), rank(I delta J))` for every neighbour `J` of the row
    /// subset `row`.
    pub fn for_each_neighbor(&self, row: &[usize], mut f: impl FnMut(usize, usize)) {
        let h = self.r / 2;
        let mut comp = Vec::with_capacity(self.n - self.ell);
        let mut k = 0;
        for v in 0..self.n {
            if k < row.len() && row[k] == v {
                k += 1;
            } else {
                comp.push(v);
            }
        }
        if comp.len() < h {
            return;
        }
        let mut j_set = Vec::with_capacity(self.ell);
        let mut d_set = Vec::with_capacity(self.r);
        let mut a: Vec<usize> = (0..h).collect();
        loop {
            let mut b: Vec<usize> = (0..h).collect();
            loop {
                // I \ A (positions a in row) merged with B (positions b in comp).
                j_set.clear();
                d_set.clear();
                let mut ai = 0;
                for (pos, &v) in row.iter().enumerate() {
                    if ai < h && a[ai] == pos {
                        ai += 1;
                        d_set.push(v);
                    } else {
                        j_set.push(v);
                    }
                }
                for &p in &b {
                    j_set.push(comp[p]);
                    d_set.push(comp[p]);
                }
                j_set.sort_unstable();
                d_set.sort_unstable();
                f(self.table.rank(&j_set), self.table.rank(&d_set));
                if !next_subset_colex(&mut b, comp.len()) {
                    break;
                }
            }
            if !next_subset_colex(&mut a, row.len()) {
                break;
            }
        }
    }

    /// `y = M x`, parallel over blocks of rows.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        if x.len() != self.dim || y.len() != self.dim {
            return Err(LabError::DimensionMismatch {
                expected: self.dim,
                got: if x.len() != self.dim {
                    x.len()
                } else {
                    y.len()
                },
            });
        }
        self.apply(x, y);
        Ok(())
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        const BLOCK: usize = 256;
        y.par_chunks_mut(BLOCK).enumerate().for_each(|(b, out)| {
            let start = b * BLOCK;
            let mut row =
                unrank_subset_colex(start as u64, self.ell, self.n).expect("row in range");
            for (k, o) in out.iter_mut().enumerate() {
                if k > 0 {
                    next_subset_colex(&mut row, self.n);
                }
                let mut acc = 0.0;
                self.for_each_neighbor(&row, |j, d| acc += self.values[d] * x[j]);
                *o = acc;
            }
        });
    }
}

/// Materializes the operator; only for `dim <= MAX_DENSE_DIM`.
pub fn assemble_dense(op: &KikuchiOperator) -> Result<DenseSymMatrix> {
    if op.dim > MAX_DENSE_DIM {
        return Err(LabError::TooLarge(format!(
            "dense Kikuchi matrix of dimension {} > {MAX_DENSE_DIM}",
            op.dim
        )));
    }
    let mut m = nalgebra::DMatrix::zeros(op.dim, op.dim);
    let mut row: Vec<usize> = (0..op.ell).collect();
    for i in 0..op.dim {
        op.for_each_neighbor(&row, |j, d| m[(i, j)] = op.values[d]);
        next_subset_colex(&mut row, op.n);
    }
    DenseSymMatrix::from_matrix(m)
}

/// `lambda_max` by Lanczos with a fixed start-vector seed, so the estimate is a
/// function of the operator alone.
pub fn lambda_max_kikuchi(op: &KikuchiOperator, tol: f64) -> Result<ExtremeEigs> {
    let opts = LanczosOptions {
        max_iter: 600,
        tol,
        want_vectors: false,
    };
    lambda_extremes_lanczos(
        |x, y| op.apply(x, y),
        op.dim,
        &opts,
        &mut rng_stream(0x4b49_4b55, 0),
    )
}

#[derive(Clone, Debug, Serialize)]
pub struct ScanRow {
    pub lambda: f64,
    pub mean_lmax: f64,
    pub std_lmax: f64,
    /// One-sided Welch p-value against the `lambda = 0` row (NaN with fewer
    /// than two trials).
    pub p_value: f64,
    pub pop_flag: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ThresholdReport {
    pub n: usize,
    pub r: usize,
    pub ell: usize,
    pub trials: usize,
    pub pop_epsilon: f64,
    pub rows: Vec<ScanRow>,
    /// `lmax[t][k]` for trial `t` at grid point `k`.
    pub lmax: Vec<Vec<f64>>,
    /// First grid value whose row pops out.
    pub lambda_natural: Option<f64>,
    /// Distance to the previous grid value.
    pub uncertainty: Option<f64>,
    /// `n^{r/4} lambda_natural`.
    pub normalized: Option<f64>,
    /// Any Lanczos estimate that missed its tolerance.
    pub unconverged: usize,
}

/// Welch guard level for [`summarize_scan`].
pub const POP_SIGNIFICANCE: f64 = 0.01;

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.first() != Some(&0.0) {
        return Err(LabError::InvalidArgument(
            "lambda grid must start at 0".into(),
        ));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) || grid.iter().any(|v| !v.is_finite()) {
        return Err(LabError::InvalidArgument(
            "lambda grid must be strictly increasing".into(),
        ));
    }
    Ok(())
}

/// One trial of the scan: a single noise draw, `lambda_max` at every grid
/// point. Returns the values and how many estimates were flagged.
pub fn scan_trial(
    n: usize,
    r: usize,
    ell: usize,
    grid: &[f64],
    rng: &mut RngStream,
) -> Result<(Vec<f64>, usize)> {
    let base = gen_spiked_tensor(n, r, 0.0, None, rng)?;
    let mut out = Vec::with_capacity(grid.len());
    let mut flagged = 0;
    for &lambda in grid {
        let op = KikuchiOperator::new(&base.with_lambda(lambda), ell)?;
        let ev = lambda_max_kikuchi(&op, 1e-10)?;
        flagged += (!ev.converged) as usize;
        out.push(ev.max);
    }
    Ok((out, flagged))
}

/// Pop-out rule: a row pops when its mean exceeds `(1 + pop_epsilon)` times
/// the `lambda = 0` mean and, with at least two trials, the one-sided Welch
/// test against the `lambda = 0` row has `p < POP_SIGNIFICANCE`.
pub fn summarize_scan(
    n: usize,
    r: usize,
    ell: usize,
    grid: &[f64],
    lmax: Vec<Vec<f64>>,
    pop_epsilon: f64,
    unconverged: usize,
) -> ThresholdReport {
    let trials = lmax.len();
    let column = |k: usize| -> Vec<f64> { lmax.iter().map(|t| t[k]).collect() };
    let base = column(0);
    let base_mean = mean(&base);
    let rows: Vec<ScanRow> = grid
        .iter()
        .enumerate()
        .map(|(k, &lambda)| {
            let col = column(k);
            let m = mean(&col);
            let p = welch_greater(&col, &base);
            let guard = trials < 2 || p < POP_SIGNIFICANCE;
            ScanRow {
                lambda,
                mean_lmax: m,
                std_lmax: std_dev(&col),
                p_value: p,
                pop_flag: k > 0 && m > (1.0 + pop_epsilon) * base_mean && guard,
            }
        })
        .collect();
    let first = rows.iter().position(|r| r.pop_flag);
    let lambda_natural = first.map(|k| grid[k]);
    ThresholdReport {
        n,
        r,
        ell,
        trials,
        pop_epsilon,
        rows,
        lmax,
        lambda_natural,
        uncertainty: first.map(|k| grid[k] - grid[k - 1]),
        normalized: lambda_natural.map(|l| (n as f64).powf(r as f64 / 4.0) * l),
        unconverged,
    }
}

/// Mean `lambda_max` over a grid with noise frozen per trial; trial `t` uses
/// `RngStream::new(base, t)` with `base` drawn once from `rng`.
#[allow(clippy::too_many_arguments)]
pub fn threshold_scan(
    n: usize,
    r: usize,
    ell: usize,
    grid: &[f64],
    trials: usize,
    pop_epsilon: f64,
    rng: &mut RngStream,
) -> Result<ThresholdReport> {
    check_grid(grid)?;
    if trials == 0 {
        return Err(LabError::InvalidArgument("trials must be >= 1".into()));
    }
    let base = rng.derive_seed();
    let per: Vec<(Vec<f64>, usize)> = (0..trials)
        .into_par_iter()
        .map(|t| scan_trial(n, r, ell, grid, &mut RngStream::new(base, t as u64)))
        .collect::<Result<_>>()?;
    let unconverged = per.iter().map(|p| p.1).sum();
    let lmax = per.into_iter().map(|p| p.0).collect();
    Ok(summarize_scan(
        n,
        r,
        ell,
        grid,
        lmax,
        pop_epsilon,
        unconverged,
    ))
}

/// Validates a grid for [`threshold_scan`]-style runs.
pub fn validate_grid(grid: &[f64]) -> Result<()> {
    check_grid(grid)
}
