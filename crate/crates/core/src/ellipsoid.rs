//! Fitting a centered ellipsoid `{x : x^T S x = 1}`, `S` positive semidefinite,
//! through random Gaussian points.
//!
//! Feasibility is decided by alternating projections between the affine set
//! `{S : x_i^T S x_i = 1}` and the PSD cone with Dykstra's correction on the
//! cone step. The affine projection only needs the Gram matrix
//! `G_ij = (x_i . x_j)^2` of the rank-one constraints, which is factored once.
//! Projections cannot prove infeasibility, so a stalled gap is reported as
//! `infeasible-numerical`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{LabError, Result};
use crate::linalg::{eigsym_dense, DenseSymMatrix};
use crate::rng::RngStream;

/// Iterations over which a non-shrinking gap is read as infeasibility.
pub const STALL_WINDOW: usize = 200;
/// Relative change of the gap over [`STALL_WINDOW`] iterations below which it
/// counts as stalled.
pub const STALL_REL_CHANGE: f64 = 1e-3;

/// `n` points in `R^d`, stored as the rows of an `n x d` matrix.
#[derive(Clone, Debug)]
pub struct PointCloud {
    points: DMatrix<f64>,
}

impl PointCloud {
    pub fn new(points: DMatrix<f64>) -> Result<Self> {
        if points.iter().any(|v| !v.is_finite()) {
            return Err(LabError::NonFinite("point coordinate"));
        }
        Ok(Self { points })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if let Some(r) = rows.iter().find(|r| r.len() != d) {
            return Err(LabError::DimensionMismatch {
                expected: d,
                got: r.len(),
            });
        }
        Self::new(DMatrix::from_fn(rows.len(), d, |i, j| rows[i][j]))
    }

    pub fn d(&self) -> usize {
        self.points.ncols()
    }

    pub fn n(&self) -> usize {
        self.points.nrows()
    }

    pub fn point(&self, i: usize) -> Vec<f64> {
        self.points.row(i).iter().copied().collect()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.points
    }

    /// `x_i^T S x_i` for every point.
    pub fn quadratic_forms(&self, s: &DMatrix<f64>) -> DVector<f64> {
        let xs = &self.points * s;
        DVector::from_iterator(
            self.n(),
            (0..self.n()).map(|i| xs.row(i).dot(&self.points.row(i))),
        )
    }

    /// `max_i |x_i^T S x_i - 1|`.
    pub fn max_residual(&self, s: &DMatrix<f64>) -> f64 {
        self.quadratic_forms(s)
            .iter()
            .fold(0.0, |m, q| m.max((q - 1.0).abs()))
    }

    /// `sum_i c_i x_i x_i^T`.
    fn weighted_outer(&self, c: &DVector<f64>) -> DMatrix<f64> {
        let mut scaled = self.points.clone();
        for (i, mut row) in scaled.row_iter_mut().enumerate() {
            row *= c[i];
        }
        self.points.transpose() * scaled
    }

    /// `G_ij = (x_i . x_j)^2`.
    pub fn constraint_gram(&self) -> DMatrix<f64> {
        let mut g = &self.points * self.points.transpose();
        g.apply(|v| *v *= *v);
        g
    }
}

/// `n` i.i.d. points from `N(0, I_d / d)`.
pub fn gen_points(d: usize, n: usize, rng: &mut RngStream) -> Result<PointCloud> {
    if d == 0 || n == 0 {
        return Err(LabError::InvalidArgument("need d >= 1 and n >= 1".into()));
    }
    let s = 1.0 / (d as f64).sqrt();
    // Row-major draw order so a cloud's first points do not depend on `n`.
    let mut points = DMatrix::zeros(n, d);
    for i in 0..n {
        for j in 0..d {
            points[(i, j)] = s * rng.normal();
        }
    }
    PointCloud::new(points)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Feasible,
    InfeasibleNumerical,
    Unknown,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Feasible => "feasible",
            Verdict::InfeasibleNumerical => "infeasible-numerical",
            Verdict::Unknown => "unknown",
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FitStatus {
    pub verdict: Verdict,
    #[serde(skip)]
    pub s: Option<DMatrix<f64>>,
    pub max_residual: f64,
    pub min_eig: f64,
    pub iterations: usize,
    /// Last Frobenius distance between the affine and PSD iterates.
    pub gap: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SolverParams {
    pub tol_eq: f64,
    pub tol_psd: f64,
    pub max_iter: usize,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            tol_eq: 1e-7,
            tol_psd: 1e-9,
            max_iter: 50_000,
        }
    }
}

/// Orthogonal projection onto `{S symmetric : x_i^T S x_i = 1}`.
struct AffineProjector<'a> {
    cloud: &'a PointCloud,
    chol: Cholesky<f64, Dyn>,
}

impl<'a> AffineProjector<'a> {
    fn new(cloud: &'a PointCloud) -> Result<Self> {
        let g = cloud.constraint_gram();
        let diag_max = g.diagonal().iter().fold(0.0f64, |m, v| m.max(*v));
        let chol = Cholesky::new(g).ok_or(LabError::SingularGram)?;
        // Reject numerically singular systems: the Cholesky pivots bound the
        // smallest eigenvalue from above.
        let l = chol.l_dirty();
        let min_pivot = (0..l.nrows())
            .map(|i| l[(i, i)] * l[(i, i)])
            .fold(f64::INFINITY, f64::min);
        if !(min_pivot > 1e-13 * diag_max) {
            return Err(LabError::SingularGram);
        }
        Ok(Self { cloud, chol })
    }

    /// Returns the projection and the residual vector `A(S) - 1` of the input.
    fn project(&self, s: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>) {
        let r = self.cloud.quadratic_forms(s).add_scalar(-1.0);
        let c = self.chol.solve(&r);
        (s - self.cloud.weighted_outer(&c), r)
    }

    fn least_norm(&self) -> DMatrix<f64> {
        let c = self.chol.solve(&DVector::from_element(self.cloud.n(), 1.0));
        self.cloud.weighted_outer(&c)
    }
}

/// Frobenius-nearest PSD matrix (eigenvalue clipping). The input is
/// symmetrized first.
pub fn project_psd(a: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (a + a.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let clipped = eig.eigenvalues.map(|v| v.max(0.0));
    let v = &eig.eigenvectors;
    let mut vl = v.clone();
    for (j, mut col) in vl.column_iter_mut().enumerate() {
        col *= clipped[j];
    }
    let p = vl * v.transpose();
    (&p + p.transpose()) * 0.5
}

fn min_eig(s: &DMatrix<f64>) -> Result<f64> {
    let n = s.nrows();
    Ok(eigsym_dense(&DenseSymMatrix::from_upper_fn(n, |i, j| s[(i, j)]), false)?.min())
}

/// Whether `x_i^T S x_i = 1` has any symmetric solution, via least squares in
/// the `d(d+1)/2` coordinates. Used when there are more points than
/// coordinates and the Gram matrix is necessarily singular.
fn affine_consistent(cloud: &PointCloud, tol: f64) -> bool {
    let d = cloud.d();
    let dim = d * (d + 1) / 2;
    let x = cloud.as_matrix();
    let m = DMatrix::from_fn(cloud.n(), dim, |i, k| {
        let (a, b) = upper_index(k, d);
        if a == b {
            x[(i, a)] * x[(i, a)]
        } else {
            2.0 * x[(i, a)] * x[(i, b)]
        }
    });
    let ones = DVector::from_element(cloud.n(), 1.0);
    let svd = m.clone().svd(true, true);
    let Ok(sol) = svd.solve(&ones, 1e-12) else {
        return false;
    };
    let res = &m * sol - ones;
    res.amax() <= tol
}

fn upper_index(k: usize, d: usize) -> (usize, usize) {
    let mut k = k;
    for a in 0..d {
        let len = d - a;
        if k < len {
            return (a, a + k);
        }
        k -= len;
    }
    unreachable!("index within d(d+1)/2")
}

/// Alternating projections from `S = I`.
///
/// Verdicts: `Feasible` once the PSD iterate has affine residual at most
/// `tol_eq` (its eigenvalues are non-negative by construction and rechecked);
/// `InfeasibleNumerical` once the gap between the two iterates has stayed above
/// `10 tol_eq` and changed by less than [`STALL_REL_CHANGE`] relative over the
/// last [`STALL_WINDOW`] iterations, or when there are more points than
/// coordinates and the affine system alone is inconsistent; `Unknown` after
/// `max_iter`.
pub fn fit_sdp(cloud: &PointCloud, params: &SolverParams) -> Result<FitStatus> {
    let d = cloud.d();
    if cloud.n() > d * (d + 1) / 2 && !affine_consistent(cloud, params.tol_eq) {
        return Ok(FitStatus {
            verdict: Verdict::InfeasibleNumerical,
            s: None,
            max_residual: f64::NAN,
            min_eig: f64::NAN,
            iterations: 0,
            gap: f64::NAN,
        });
    }
    let proj = AffineProjector::new(cloud)?;
    let mut x = DMatrix::<f64>::identity(d, d);
    let mut q = DMatrix::<f64>::zeros(d, d);
    let mut gaps: Vec<f64> = Vec::new();
    let mut gap = f64::NAN;
    for it in 0..params.max_iter {
        let (y, r) = proj.project(&x);
        if it > 0 && r.amax() <= params.tol_eq {
            let me = min_eig(&x)?;
            if me >= -params.tol_psd {
                return Ok(FitStatus {
                    verdict: Verdict::Feasible,
                    max_residual: r.amax(),
                    min_eig: me,
                    s: Some(x),
                    iterations: it,
                    gap,
                });
            }
        }
        let z = &y + &q;
        let x_new = project_psd(&z);
        q = z - &x_new;
        gap = (&x_new - &y).norm();
        x = x_new;
        gaps.push(gap);
        if gaps.len() > STALL_WINDOW && gap > 10.0 * params.tol_eq {
            let old = gaps[gaps.len() - 1 - STALL_WINDOW];
            if (old - gap).abs() <= STALL_REL_CHANGE * gap {
                return Ok(FitStatus {
                    verdict: Verdict::InfeasibleNumerical,
                    max_residual: cloud.max_residual(&x),
                    min_eig: min_eig(&x)?,
                    s: Some(x),
                    iterations: it + 1,
                    gap,
                });
            }
        }
    }
    Ok(FitStatus {
        verdict: Verdict::Unknown,
        max_residual: cloud.max_residual(&x),
        min_eig: min_eig(&x)?,
        s: Some(x),
        iterations: params.max_iter,
        gap,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct LeastNormCandidate {
    #[serde(skip)]
    pub s_star: DMatrix<f64>,
    pub min_eig: f64,
    pub max_residual: f64,
}

/// The minimum-Frobenius-norm solution `S* = sum_i c_i x_i x_i^T`, `G c = 1`.
/// `min_eig >= 0` certifies that an ellipsoid fit exists.
pub fn least_norm_candidate(cloud: &PointCloud) -> Result<LeastNormCandidate> {
    let proj = AffineProjector::new(cloud)?;
    let s_star = proj.least_norm();
    Ok(LeastNormCandidate {
        min_eig: min_eig(&s_star)?,
        max_residual: cloud.max_residual(&s_star),
        s_star,
    })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct EfpParams {
    pub epsilon: f64,
    pub m: f64,
}

impl EfpParams {
    pub fn new(epsilon: f64, m: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite() && m > 0.0 && m.is_finite()) {
            return Err(LabError::InvalidArgument(format!(
                "EFP parameters must be positive and finite, got eps = {epsilon}, M = {m}"
            )));
        }
        Ok(Self { epsilon, m })
    }
}

/// Spectrum of `S` inside `[0, M]` and mean absolute residual at most
/// `epsilon / sqrt(d)`, both evaluated literally.
pub fn efp_check(cloud: &PointCloud, s: &DMatrix<f64>, params: &EfpParams) -> Result<bool> {
    let d = cloud.d();
    if s.nrows() != d || s.ncols() != d {
        return Err(LabError::DimensionMismatch {
            expected: d,
            got: s.nrows(),
        });
    }
    let spec = eigsym_dense(&DenseSymMatrix::from_upper_fn(d, |i, j| s[(i, j)]), false)?;
    if spec.min() < 0.0 || spec.max() > params.m {
        return Ok(false);
    }
    let mean_abs = cloud
        .quadratic_forms(s)
        .iter()
        .map(|q| (q - 1.0).abs())
        .sum::<f64>()
        / cloud.n() as f64;
    Ok(mean_abs <= params.epsilon / (d as f64).sqrt())
}

/// `n = round(alpha d^2)`, at least 1.
pub fn points_for_alpha(d: usize, alpha: f64) -> usize {
    ((alpha * (d * d) as f64).round() as usize).max(1)
}

#[derive(Clone, Debug, Serialize)]
pub struct ScanTrial {
    pub alpha: f64,
    pub n: usize,
    pub trial: usize,
    pub stream_id: u64,
    pub verdict: Verdict,
    pub iterations: usize,
    pub min_eig: f64,
    pub max_residual: f64,
    pub efp: Option<bool>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScanRow {
    pub alpha: f64,
    pub n: usize,
    pub trials: usize,
    pub feasible_rate: f64,
    pub mean_iterations: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScanReport {
    pub d: usize,
    pub base_seed: u64,
    pub rows: Vec<ScanRow>,
    pub trials: Vec<ScanTrial>,
}

/// One instance: fresh points from `rng`, then [`fit_sdp`] and optionally the
/// EFP check of the returned iterate.
pub fn run_fit_trial(
    d: usize,
    alpha: f64,
    rng: &mut RngStream,
    params: &SolverParams,
    efp: Option<&EfpParams>,
) -> Result<(FitStatus, Option<bool>)> {
    let cloud = gen_points(d, points_for_alpha(d, alpha), rng)?;
    let status = fit_sdp(&cloud, params)?;
    let efp_pass = match (efp, status.s.as_ref()) {
        (Some(p), Some(s)) => Some(efp_check(&cloud, s, p)?),
        (Some(_), None) => Some(false),
        _ => None,
    };
    Ok((status, efp_pass))
}

/// Instance `trial` at one `alpha`, drawn from `RngStream::new(base,
/// stream_id)`. Solver errors are recorded, not propagated.
pub fn scan_point(
    d: usize,
    alpha: f64,
    trial: usize,
    stream_id: u64,
    base: u64,
    params: &SolverParams,
    efp: Option<&EfpParams>,
) -> ScanTrial {
    let mut r = RngStream::new(base, stream_id);
    let n = points_for_alpha(d, alpha);
    match run_fit_trial(d, alpha, &mut r, params, efp) {
        Ok((s, e)) => ScanTrial {
            alpha,
            n,
            trial,
            stream_id,
            verdict: s.verdict,
            iterations: s.iterations,
            min_eig: s.min_eig,
            max_residual: s.max_residual,
            efp: e,
            error: None,
        },
        Err(e) => ScanTrial {
            alpha,
            n,
            trial,
            stream_id,
            verdict: Verdict::Unknown,
            iterations: 0,
            min_eig: f64::NAN,
            max_residual: f64::NAN,
            efp: None,
            error: Some(e.to_string()),
        },
    }
}

/// Feasibility rates over an `alpha = n / d^2` grid. Instance `(a, t)` uses
/// stream `a * trials + t` under a base seed drawn once from `rng`; solver
/// errors are recorded on the trial and count as not feasible.
pub fn transition_scan(
    d: usize,
    alpha_grid: &[f64],
    trials: usize,
    rng: &mut RngStream,
    params: &SolverParams,
    efp: Option<&EfpParams>,
) -> Result<ScanReport> {
    if trials == 0 {
        return Err(LabError::InvalidArgument("trials must be >= 1".into()));
    }
    if alpha_grid.is_empty() || alpha_grid.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
        return Err(LabError::InvalidArgument(
            "alpha grid must be non-empty and positive".into(),
        ));
    }
    let base = rng.derive_seed();
    let jobs: Vec<(usize, usize)> = (0..alpha_grid.len())
        .flat_map(|a| (0..trials).map(move |t| (a, t)))
        .collect();
    let results: Vec<ScanTrial> = jobs
        .par_iter()
        .map(|&(a, t)| {
            scan_point(
                d,
                alpha_grid[a],
                t,
                (a * trials + t) as u64,
                base,
                params,
                efp,
            )
        })
        .collect();
    let rows = alpha_grid
        .iter()
        .enumerate()
        .map(|(a, &alpha)| {
            let chunk = &results[a * trials..(a + 1) * trials];
            let feasible = chunk
                .iter()
                .filter(|t| t.verdict == Verdict::Feasible)
                .count();
            ScanRow {
                alpha,
                n: points_for_alpha(d, alpha),
                trials,
                feasible_rate: feasible as f64 / trials as f64,
                mean_iterations: chunk.iter().map(|t| t.iterations as f64).sum::<f64>()
                    / trials as f64,
            }
        })
        .collect();
    Ok(ScanReport {
        d,
        base_seed: base,
        rows,
        trials: results,
    })
}
