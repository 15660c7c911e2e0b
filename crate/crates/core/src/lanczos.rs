//! Matrix-free Lanczos for the extreme eigenvalues of a symmetric operator.
//!
//! The Krylov basis is kept in memory and every new vector is orthogonalized
//! twice against all previous ones (full reorthogonalization). The start vector
//! is Gaussian, so an early breakdown signals an invariant Krylov space that
//! almost surely touches every eigenspace.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{LabError, Result};
use crate::linalg::{dot, norm2};
use crate::rng::RngStream;

#[derive(Clone, Debug)]
pub struct LanczosOptions {
    /// Maximum Krylov dimension.
    pub max_iter: usize,
    /// Relative residual target: `||A v - theta v|| <= tol * ||A||_est`.
    pub tol: f64,
    /// Also return the Ritz vectors of the two extremes.
    pub want_vectors: bool,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self {
            max_iter: 500,
            tol: 1e-10,
            want_vectors: false,
        }
    }
}

impl LanczosOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }
}

/// Extreme Ritz values. `converged == false` marks an estimate whose residual
/// did not reach the tolerance within `max_iter`.
#[derive(Clone, Debug, Serialize)]
pub struct ExtremeEigs {
    pub min: f64,
    pub max: f64,
    pub residual_min: f64,
    pub residual_max: f64,
    pub norm_estimate: f64,
    pub iterations: usize,
    pub converged: bool,
    #[serde(skip)]
    pub vec_min: Option<Vec<f64>>,
    #[serde(skip)]
    pub vec_max: Option<Vec<f64>>,
}

/// Estimates `(lambda_min, lambda_max)` of the operator `apply(x, y): y = A x`.
pub fn lambda_extremes_lanczos<F>(
    apply: F,
    dim: usize,
    opts: &LanczosOptions,
    rng: &mut RngStream,
) -> Result<ExtremeEigs>
where
    F: Fn(&[f64], &mut [f64]),
{
    if dim == 0 {
        return Err(LabError::InvalidArgument(
            "operator dimension must be >= 1".into(),
        ));
    }
    check_symmetry(&apply, dim, opts.tol, rng)?;

    let max_iter = opts.max_iter.min(dim).max(1);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(max_iter);
    let mut alphas: Vec<f64> = Vec::with_capacity(max_iter);
    // betas[k] couples basis[k] and basis[k + 1].
    let mut betas: Vec<f64> = Vec::with_capacity(max_iter);

    let mut q = random_unit(dim, rng);
    let mut w = vec![0.0; dim];
    let mut next_check = 1usize;

    loop {
        apply(&q, &mut w);
        if w.iter().any(|v| !v.is_finite()) {
            return Err(LabError::NonFinite("Lanczos matvec output"));
        }
        let alpha = dot(&q, &w);
        for (wi, qi) in w.iter_mut().zip(&q) {
            *wi -= alpha * qi;
        }
        if let (Some(prev), Some(&b)) = (basis.last(), betas.last()) {
            for (wi, pi) in w.iter_mut().zip(prev) {
                *wi -= b * pi;
            }
        }
        basis.push(std::mem::take(&mut q));
        alphas.push(alpha);
        for _ in 0..2 {
            for v in &basis {
                let c = dot(v, &w);
                for (wi, vi) in w.iter_mut().zip(v) {
                    *wi -= c * vi;
                }
            }
        }
        let beta = norm2(&w);
        let k = basis.len();

        let scale = alphas
            .iter()
            .map(|a| a.abs())
            .chain(betas.iter().copied())
            .fold(0.0f64, f64::max);
        let breakdown = beta <= 1e-12 * scale.max(f64::MIN_POSITIVE) || beta == 0.0;
        let exhausted = k >= max_iter;

        if k >= next_check || exhausted || breakdown {
            let ritz = ritz_extremes(&alphas, &betas, beta);
            let norm_est = ritz.min.abs().max(ritz.max.abs());
            let target = opts.tol * norm_est;
            let ok = ritz.res_min <= target && ritz.res_max <= target;
            // Breakdown means the Krylov space is invariant: its Ritz values
            // are exact eigenvalues.
            let exact = k >= dim || breakdown;
            if ok || exact || exhausted {
                return Ok(finish(
                    ritz,
                    &basis,
                    k,
                    ok || exact,
                    opts.want_vectors,
                    exact,
                ));
            }
            next_check = k + (k / 8).max(4);
        }

        q = w.iter().map(|x| x / beta).collect();
        betas.push(beta);
    }
}

struct Ritz {
    min: f64,
    max: f64,
    res_min: f64,
    res_max: f64,
    s_min: Vec<f64>,
    s_max: Vec<f64>,
}

fn ritz_extremes(alphas: &[f64], betas: &[f64], beta_next: f64) -> Ritz {
    let k = alphas.len();
    let t = DMatrix::from_fn(k, k, |i, j| {
        if i == j {
            alphas[i]
        } else if j == i + 1 {
            betas[i]
        } else if i == j + 1 {
            betas[j]
        } else {
            0.0
        }
    });
    let eig = t.symmetric_eigen();
    let (mut imin, mut imax) = (0, 0);
    for i in 0..k {
        if eig.eigenvalues[i] < eig.eigenvalues[imin] {
            imin = i;
        }
        if eig.eigenvalues[i] > eig.eigenvalues[imax] {
            imax = i;
        }
    }
    let s_min: Vec<f64> = eig.eigenvectors.column(imin).iter().copied().collect();
    let s_max: Vec<f64> = eig.eigenvectors.column(imax).iter().copied().collect();
    Ritz {
        min: eig.eigenvalues[imin],
        max: eig.eigenvalues[imax],
        res_min: (beta_next * s_min[k - 1]).abs(),
        res_max: (beta_next * s_max[k - 1]).abs(),
        s_min,
        s_max,
    }
}

fn finish(
    ritz: Ritz,
    basis: &[Vec<f64>],
    k: usize,
    converged: bool,
    want_vectors: bool,
    full: bool,
) -> ExtremeEigs {
    let combine = |s: &[f64]| {
        let dim = basis[0].len();
        let mut out = vec![0.0; dim];
        for (c, v) in s.iter().zip(basis) {
            for (o, vi) in out.iter_mut().zip(v) {
                *o += c * vi;
            }
        }
        out
    };
    let (res_min, res_max) = if full {
        (0.0, 0.0)
    } else {
        (ritz.res_min, ritz.res_max)
    };
    ExtremeEigs {
        min: ritz.min,
        max: ritz.max,
        residual_min: res_min,
        residual_max: res_max,
        norm_estimate: ritz.min.abs().max(ritz.max.abs()),
        iterations: k,
        converged,
        vec_min: want_vectors.then(|| combine(&ritz.s_min)),
        vec_max: want_vectors.then(|| combine(&ritz.s_max)),
    }
}

fn random_unit(dim: usize, rng: &mut RngStream) -> Vec<f64> {
    loop {
        let mut v: Vec<f64> = (0..dim).map(|_| rng.normal()).collect();
        let nv = norm2(&v);
        if nv > 0.0 {
            v.iter_mut().for_each(|x| *x /= nv);
            return v;
        }
    }
}

fn check_symmetry<F>(apply: &F, dim: usize, tol: f64, rng: &mut RngStream) -> Result<()>
where
    F: Fn(&[f64], &mut [f64]),
{
    let u = random_unit(dim, rng);
    let v = random_unit(dim, rng);
    let mut au = vec![0.0; dim];
    let mut av = vec![0.0; dim];
    apply(&u, &mut au);
    apply(&v, &mut av);
    let defect = (dot(&u, &av) - dot(&au, &v)).abs();
    let scale = norm2(&au).max(norm2(&av)).max(1.0);
    if defect > tol.max(1e-12) * scale {
        return Err(LabError::AsymmetricOperator { defect });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{eigsym_dense, sample_goe, DenseSymMatrix};
    use crate::rng::rng_stream;

    #[test]
    fn diagonal_operator() {
        let d: Vec<f64> = (1..=100).map(|i| i as f64).collect();
        let apply = |x: &[f64], y: &mut [f64]| {
            for i in 0..x.len() {
                y[i] = d[i] * x[i];
            }
        };
        let r = lambda_extremes_lanczos(
            apply,
            100,
            &LanczosOptions::default(),
            &mut rng_stream(1, 0),
        )
        .unwrap();
        assert!((r.max - 100.0).abs() < 1e-8, "{r:?}");
        assert!((r.min - 1.0).abs() < 1e-8, "{r:?}");
        assert!(r.converged);
    }

    #[test]
    fn zero_operator() {
        let apply = |_: &[f64], y: &mut [f64]| y.iter_mut().for_each(|v| *v = 0.0);
        let r =
            lambda_extremes_lanczos(apply, 17, &LanczosOptions::default(), &mut rng_stream(1, 0))
                .unwrap();
        assert_eq!((r.min, r.max), (0.0, 0.0));
    }

    #[test]
    fn agrees_with_dense_solver() {
        for seed in 0..10 {
            let mut rng = rng_stream(seed, 0);
            let m = sample_goe(50, &mut rng).unwrap();
            let dense = eigsym_dense(&m, false).unwrap();
            let r = lambda_extremes_lanczos(
                |x, y| m.matvec(x, y),
                50,
                &LanczosOptions::default(),
                &mut rng,
            )
            .unwrap();
            assert!((r.max - dense.max()).abs() < 1e-8);
            assert!((r.min - dense.min()).abs() < 1e-8);
        }
    }

    #[test]
    fn early_breakdown_on_repeated_eigenvalues() {
        let m = DenseSymMatrix::from_diagonal(&[5.0, 5.0, 5.0, -3.0, -3.0]);
        let r = lambda_extremes_lanczos(
            |x, y| m.matvec(x, y),
            5,
            &LanczosOptions::default(),
            &mut rng_stream(4, 0),
        )
        .unwrap();
        assert!((r.max - 5.0).abs() < 1e-10 && (r.min + 3.0).abs() < 1e-10);
    }

    #[test]
    fn rejects_asymmetric_operator() {
        let apply = |x: &[f64], y: &mut [f64]| {
            y[0] = x[1];
            y[1] = 0.0;
        };
        let r =
            lambda_extremes_lanczos(apply, 2, &LanczosOptions::default(), &mut rng_stream(0, 0));
        assert!(matches!(r, Err(LabError::AsymmetricOperator { .. })));
    }

    #[test]
    fn non_convergence_is_flagged() {
        let mut rng = rng_stream(3, 0);
        let m = sample_goe(300, &mut rng).unwrap();
        let opts = LanczosOptions {
            max_iter: 5,
            tol: 1e-14,
            want_vectors: false,
        };
        let r = lambda_extremes_lanczos(|x, y| m.matvec(x, y), 300, &opts, &mut rng).unwrap();
        assert!(!r.converged);
        assert_eq!(r.iterations, 5);
    }
}
