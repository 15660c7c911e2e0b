use std::f64::consts::TAU;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use super::{
    check_dims, energy_delta, energy_raw, grad_raw, hessian, hessian_matvec, Graph, PhaseState,
};
use crate::error::Result;
use crate::lanczos::{lambda_extremes_lanczos, LanczosOptions};
use crate::linalg::{eigsym_dense, DenseSymMatrix, Spectrum};
use crate::rng::{rng_stream, RngStream};

/// Largest `n` for which the quotient Hessian is diagonalized densely; larger
/// graphs get a Lanczos estimate of its smallest eigenvalue only.
pub const DENSE_HESSIAN_LIMIT: usize = 600;

/// Mean resultant length at or above which a state counts as synchronized.
pub const SYNC_THRESHOLD: f64 = 1.0 - 1e-6;

#[derive(Clone, Debug, Serialize)]
pub struct StepPolicy {
    pub initial_step: f64,
    pub backtrack: f64,
    pub max_halvings: u32,
    /// Sufficient-decrease constant: a step `s` is accepted when the energy
    /// drops by at least `armijo * s * ||grad||^2`.
    pub armijo: f64,
    /// Keep the energy after every accepted step in the outcome.
    pub record_trace: bool,
}

impl Default for StepPolicy {
    fn default() -> Self {
        Self {
            initial_step: 0.1,
            backtrack: 0.5,
            max_halvings: 60,
            armijo: 1e-4,
            record_trace: false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct DescentOutcome {
    pub state: PhaseState,
    pub converged: bool,
    pub iterations: usize,
    pub energy: f64,
    pub grad_inf_norm: f64,
    /// Energies after each accepted step, starting with the initial energy.
    pub trace: Option<Vec<f64>>,
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Gradient descent with backtracking.
///
/// Each iteration tries `initial_step` and shrinks it by `backtrack` until the
/// Armijo condition holds. Stops once `||grad||_inf <= tol_grad`; after
/// `max_iter` iterations, or if no step size is accepted, the current
/// state is returned with `converged = false`.
pub fn descend(
    g: &Graph,
    start: &PhaseState,
    policy: &StepPolicy,
    tol_grad: f64,
    max_iter: usize,
) -> Result<DescentOutcome> {
    check_dims(g, start.theta())?;
    let n = g.n();
    let mut theta = start.theta().to_vec();
    let mut disp = vec![0.0; n];
    let mut gr = vec![0.0; n];
    let mut e = energy_raw(g, &theta);
    grad_raw(g, &theta, &mut gr);
    let mut trace = policy.record_trace.then(|| vec![e]);
    let mut iterations = 0;
    let mut converged = false;
    let mut stalled = false;
    while iterations < max_iter {
        if inf_norm(&gr) <= tol_grad {
            converged = true;
            break;
        }
        let mut step = policy.initial_step;
        let mut accepted = false;
        let g2: f64 = gr.iter().map(|v| v * v).sum();
        for _ in 0..=policy.max_halvings {
            for (d, gi) in disp.iter_mut().zip(&gr) {
                *d = -step * gi;
            }
            let de = energy_delta(g, &theta, &disp);
            if de <= -policy.armijo * step * g2 {
                theta.iter_mut().zip(&disp).for_each(|(t, d)| *t += d);
                e += de;
                accepted = true;
                break;
            }
            step *= policy.backtrack;
        }
        iterations += 1;
        if !accepted {
            stalled = true;
            break;
        }
        grad_raw(g, &theta, &mut gr);
        if let Some(t) = trace.as_mut() {
            t.push(e);
        }
    }
    if !converged && !stalled && inf_norm(&gr) <= tol_grad {
        converged = true;
    }
    let e = energy_raw(g, &theta);
    Ok(DescentOutcome {
        state: PhaseState::new(theta)?,
        converged,
        iterations,
        energy: e,
        grad_inf_norm: inf_norm(&gr),
        trace,
    })
}

/// Mean resultant length `|1/n sum_j e^{i theta_j}|`.
pub fn order_parameter(theta: &[f64]) -> f64 {
    if theta.is_empty() {
        return 1.0;
    }
    let (c, s) = theta
        .iter()
        .fold((0.0, 0.0), |(c, s), t| (c + t.cos(), s + t.sin()));
    (c * c + s * s).sqrt() / theta.len() as f64
}

pub fn is_synchronized(state: &PhaseState) -> bool {
    order_parameter(state.theta()) >= SYNC_THRESHOLD
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classification {
    SynchronizedGlobal,
    NonglobalLocalMin,
    Saddle,
    Nonconverged,
}

impl Classification {
    pub fn as_str(&self) -> &'static str {
        match self {
            Classification::SynchronizedGlobal => "synchronized-global",
            Classification::NonglobalLocalMin => "nonglobal-local-min",
            Classification::Saddle => "saddle",
            Classification::Nonconverged => "nonconverged",
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CriticalityReport {
    pub grad_inf_norm: f64,
    pub energy: f64,
    pub order_parameter: f64,
    /// Smallest eigenvalue of the Hessian on the complement of the all-ones
    /// direction.
    pub quotient_min_eig: f64,
    /// Full quotient spectrum when it was computed densely.
    pub hessian_eigs: Option<Spectrum>,
    pub classification: Classification,
    /// Zero gradient with a quotient eigenvalue inside `(-tol_hess, tol_hess)`:
    /// linear analysis is inconclusive.
    pub degenerate: bool,
}

/// Orthonormal basis of the complement of the all-ones vector (Helmert
/// contrasts), as columns of an `n x (n - 1)` matrix.
fn helmert_basis(n: usize) -> DMatrix<f64> {
    let mut q = DMatrix::zeros(n, n.saturating_sub(1));
    for k in 1..n {
        let s = 1.0 / ((k * (k + 1)) as f64).sqrt();
        for j in 0..k {
            q[(j, k - 1)] = s;
        }
        q[(k, k - 1)] = -(k as f64) * s;
    }
    q
}

fn quotient_spectrum(g: &Graph, state: &PhaseState) -> Result<(f64, Option<Spectrum>)> {
    let n = g.n();
    if n <= 1 {
        return Ok((
            0.0,
            Some(Spectrum {
                eigenvalues: vec![],
                eigenvectors: None,
            }),
        ));
    }
    if n <= DENSE_HESSIAN_LIMIT {
        let h = hessian(g, state)?;
        let q = helmert_basis(n);
        let r = q.transpose() * h.as_matrix() * &q;
        let r = DenseSymMatrix::from_upper_fn(n - 1, |i, j| r[(i, j)]);
        let s = eigsym_dense(&r, false)?;
        return Ok((s.min(), Some(s)));
    }
    // Lift the all-ones direction above the spectrum (Gershgorin bound) so the
    // smallest eigenvalue of the shifted operator is the quotient minimum.
    let bound = (0..n)
        .map(|i| g.neighbors(i).iter().map(|&(_, w)| w.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let shift = 2.0 * bound + 1.0;
    let theta = state.theta();
    let apply = |x: &[f64], y: &mut [f64]| {
        hessian_matvec(g, theta, x, y);
        let m = shift * x.iter().sum::<f64>() / n as f64;
        y.iter_mut().for_each(|v| *v += m);
    };
    let opts = LanczosOptions {
        max_iter: 2000,
        tol: 1e-9,
        want_vectors: false,
    };
    let ex = lambda_extremes_lanczos(apply, n, &opts, &mut rng_stream(0x4b55_5241, 0))?;
    Ok((ex.min, None))
}

/// Gradient size, quotient Hessian spectrum, and a classification.
///
/// Order of tests: `||grad||_inf > tol_grad` is `Nonconverged`; a synchronized
/// state with no quotient eigenvalue below `-tol_hess` is `SynchronizedGlobal`;
/// any quotient eigenvalue `<= -tol_hess` makes a `Saddle`; otherwise the point
/// is a `NonglobalLocalMin`, flagged `degenerate` when its smallest quotient
/// eigenvalue is below `tol_hess`.
pub fn certify_critical(
    g: &Graph,
    state: &PhaseState,
    tol_grad: f64,
    tol_hess: f64,
) -> Result<CriticalityReport> {
    check_dims(g, state.theta())?;
    let mut gr = vec![0.0; g.n()];
    grad_raw(g, state.theta(), &mut gr);
    let grad_inf_norm = inf_norm(&gr);
    let energy = energy_raw(g, state.theta());
    let r = order_parameter(state.theta());
    let (min_eig, spectrum) = quotient_spectrum(g, state)?;
    let synchronized = r >= SYNC_THRESHOLD;
    let mut degenerate = false;
    let classification = if grad_inf_norm > tol_grad {
        Classification::Nonconverged
    } else if min_eig <= -tol_hess {
        Classification::Saddle
    } else if synchronized {
        Classification::SynchronizedGlobal
    } else {
        degenerate = min_eig < tol_hess;
        Classification::NonglobalLocalMin
    };
    Ok(CriticalityReport {
        grad_inf_norm,
        energy,
        order_parameter: r,
        quotient_min_eig: min_eig,
        hessian_eigs: spectrum,
        classification,
        degenerate,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct SyncParams {
    pub policy: StepPolicy,
    pub tol_grad: f64,
    pub tol_hess: f64,
    pub max_iter: usize,
}

impl Default for SyncParams {
    fn default() -> Self {
        Self {
            policy: StepPolicy::default(),
            tol_grad: 1e-8,
            tol_hess: 1e-6,
            max_iter: 200_000,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SyncTrial {
    pub trial: usize,
    pub energy: f64,
    pub grad_inf_norm: f64,
    pub quotient_min_eig: f64,
    pub classification: Classification,
    pub degenerate: bool,
    pub iterations: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct SyncReport {
    pub trials: usize,
    pub fraction_synchronized: f64,
    pub n_synchronized: usize,
    pub n_nonglobal: usize,
    pub n_saddle: usize,
    pub n_nonconverged: usize,
    /// Lowest final energy seen and whether that run ended synchronized; for
    /// signed couplings the constant states need not be global minimizers.
    pub best_energy: f64,
    pub best_energy_synchronized: bool,
    /// The non-global local minimum with the highest energy, if any.
    pub worst_nonglobal: Option<CriticalityReport>,
    pub per_trial: Vec<SyncTrial>,
    pub note: &'static str,
}

/// Runs descent from `trials` uniform random starts and classifies each
/// endpoint. Trial `t` draws its start from `RngStream::new(base, t)` where
/// `base` is taken once from `rng`, so results do not depend on scheduling.
///
/// This is evidence only: no finite sample of starts proves that a graph is
/// globally synchronizing.
pub fn empirical_global_sync(
    g: &Graph,
    trials: usize,
    rng: &mut RngStream,
    params: &SyncParams,
) -> Result<SyncReport> {
    let base = rng.derive_seed();
    let results: Vec<(SyncTrial, CriticalityReport)> = (0..trials)
        .into_par_iter()
        .map(|t| sync_trial(g, base, t, params))
        .collect::<Result<_>>()?;
    Ok(summarize_sync(results))
}

/// One random start from `RngStream::new(base, t)`, descended and certified.
/// The returned report omits the Hessian spectrum.
pub fn sync_trial(
    g: &Graph,
    base: u64,
    t: usize,
    params: &SyncParams,
) -> Result<(SyncTrial, CriticalityReport)> {
    let mut r = RngStream::new(base, t as u64);
    let start = PhaseState::new((0..g.n()).map(|_| r.uniform() * TAU).collect())?;
    let out = descend(g, &start, &params.policy, params.tol_grad, params.max_iter)?;
    let mut rep = certify_critical(g, &out.state, params.tol_grad, params.tol_hess)?;
    rep.hessian_eigs = None;
    let row = SyncTrial {
        trial: t,
        energy: rep.energy,
        grad_inf_norm: rep.grad_inf_norm,
        quotient_min_eig: rep.quotient_min_eig,
        classification: rep.classification,
        degenerate: rep.degenerate,
        iterations: out.iterations,
    };
    Ok((row, rep))
}

/// Aggregates finished trials, given in trial order.
pub fn summarize_sync(results: Vec<(SyncTrial, CriticalityReport)>) -> SyncReport {
    let trials = results.len();
    let count = |c| {
        results
            .iter()
            .filter(|(r, _)| r.classification == c)
            .count()
    };
    let n_synchronized = count(Classification::SynchronizedGlobal);
    let best = results
        .iter()
        .map(|(r, _)| r)
        .min_by(|a, b| a.energy.total_cmp(&b.energy));
    let worst_nonglobal = results
        .iter()
        .map(|(_, k)| k)
        .filter(|k| k.classification == Classification::NonglobalLocalMin)
        .max_by(|a, b| a.energy.total_cmp(&b.energy))
        .cloned();
    SyncReport {
        trials,
        fraction_synchronized: if trials == 0 {
            f64::NAN
        } else {
            n_synchronized as f64 / trials as f64
        },
        n_synchronized,
        n_nonglobal: count(Classification::NonglobalLocalMin),
        n_saddle: count(Classification::Saddle),
        n_nonconverged: count(Classification::Nonconverged),
        best_energy: best.map_or(f64::NAN, |r| r.energy),
        best_energy_synchronized: best
            .is_some_and(|r| r.classification == Classification::SynchronizedGlobal),
        worst_nonglobal,
        per_trial: results.into_iter().map(|(r, _)| r).collect(),
        note: "evidence only: random starts cannot prove global synchronization",
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kuramoto::{energy, gen_random_regular};
    use std::f64::consts::PI;

    #[test]
    fn constant_start_returns_immediately() {
        let g = Graph::complete(4);
        let out = descend(
            &g,
            &PhaseState::constant(4, 2.0),
            &StepPolicy::default(),
            1e-10,
            100,
        )
        .unwrap();
        assert!(out.converged);
        assert_eq!(out.iterations, 0);
    }

    #[test]
    fn descent_is_monotone() {
        let g = gen_random_regular(30, 3, &mut rng_stream(5, 0)).unwrap();
        let mut r = rng_stream(5, 1);
        let start = PhaseState::new((0..30).map(|_| r.uniform() * TAU).collect()).unwrap();
        let policy = StepPolicy {
            record_trace: true,
            ..StepPolicy::default()
        };
        let out = descend(&g, &start, &policy, 1e-8, 100_000).unwrap();
        let trace = out.trace.unwrap();
        assert!(trace.windows(2).all(|w| w[1] <= w[0]));
        assert!(out.converged);
    }

    #[test]
    fn complete_graph_always_synchronizes() {
        let g = Graph::complete(5);
        let rep =
            empirical_global_sync(&g, 100, &mut rng_stream(3, 0), &SyncParams::default()).unwrap();
        assert_eq!(rep.fraction_synchronized, 1.0);
        assert!(rep.per_trial.iter().all(|t| t.energy <= 1e-8));
    }

    #[test]
    fn twisted_c5_is_a_nonglobal_minimum() {
        let g = Graph::cycle(5);
        let s = PhaseState::twisted(5, 1);
        // Oracle: on a cycle with all neighbour differences 2 pi / 5 the
        // quotient Hessian is cos(2 pi / 5) times the cycle Laplacian, whose
        // smallest nonzero eigenvalue is 2 - 2 cos(2 pi / 5).
        let c = (TAU / 5.0).cos();
        let expect = c * (2.0 - 2.0 * c);
        for tol_hess in [1e-8, 1e-6, 1e-4] {
            let rep = certify_critical(&g, &s, 1e-8, tol_hess).unwrap();
            assert_eq!(rep.classification, Classification::NonglobalLocalMin);
            assert!(!rep.degenerate);
            assert!(rep.grad_inf_norm <= 1e-12);
            assert!((rep.quotient_min_eig - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn perturbed_twist_returns() {
        let g = Graph::cycle(5);
        let mut r = rng_stream(8, 0);
        let twisted = PhaseState::twisted(5, 1);
        let start = PhaseState::new(
            twisted
                .theta()
                .iter()
                .map(|t| t + 1e-3 * r.normal())
                .collect(),
        )
        .unwrap();
        let out = descend(&g, &start, &StepPolicy::default(), 1e-10, 100_000).unwrap();
        assert!(out.converged);
        let e_twist = energy(&g, &twisted).unwrap();
        assert!((out.energy - e_twist).abs() < 1e-9);
        assert!(out.energy > 1.0);
    }

    #[test]
    fn cycle_has_twisted_basin() {
        let g = Graph::cycle(5);
        let rep =
            empirical_global_sync(&g, 500, &mut rng_stream(11, 0), &SyncParams::default()).unwrap();
        assert!(rep.fraction_synchronized < 1.0);
        assert!(rep.n_nonglobal > 0);
        assert!(rep.worst_nonglobal.is_some());
    }

    #[test]
    fn antipodal_edge_is_a_saddle() {
        let g = Graph::from_edges(2, &[(0, 1, 1.0)]).unwrap();
        let rep =
            certify_critical(&g, &PhaseState::new(vec![0.0, PI]).unwrap(), 1e-8, 1e-6).unwrap();
        assert!(rep.grad_inf_norm < 1e-12);
        assert!((rep.quotient_min_eig + 2.0).abs() < 1e-12);
        assert_eq!(rep.classification, Classification::Saddle);
    }

    #[test]
    fn constant_state_certified_for_nonnegative_graphs() {
        for seed in 0..5 {
            let g = gen_random_regular(12, 3, &mut rng_stream(seed, 0)).unwrap();
            let rep = certify_critical(&g, &PhaseState::constant(12, 0.7), 1e-8, 1e-6).unwrap();
            assert_eq!(rep.classification, Classification::SynchronizedGlobal);
        }
        let k3 = Graph::complete(3);
        let rep = certify_critical(&k3, &PhaseState::constant(3, 0.0), 1e-8, 1e-6).unwrap();
        assert_eq!(rep.classification, Classification::SynchronizedGlobal);
    }

    #[test]
    fn single_node() {
        let g = Graph::empty(1);
        let rep =
            empirical_global_sync(&g, 10, &mut rng_stream(0, 0), &SyncParams::default()).unwrap();
        assert_eq!(rep.fraction_synchronized, 1.0);
    }

    #[test]
    fn lanczos_path_matches_dense() {
        let g = gen_random_regular(DENSE_HESSIAN_LIMIT + 40, 3, &mut rng_stream(1, 0)).unwrap();
        let n = g.n();
        let mut r = rng_stream(1, 1);
        let s = PhaseState::new((0..n).map(|_| 0.3 * r.normal()).collect()).unwrap();
        let (lanczos_min, spec) = quotient_spectrum(&g, &s).unwrap();
        assert!(spec.is_none());
        let h = hessian(&g, &s).unwrap();
        let q = helmert_basis(n);
        let red = q.transpose() * h.as_matrix() * &q;
        let dense = eigsym_dense(
            &DenseSymMatrix::from_upper_fn(n - 1, |i, j| red[(i, j)]),
            false,
        )
        .unwrap();
        assert!(
            (lanczos_min - dense.min()).abs() < 1e-7,
            "{lanczos_min} vs {}",
            dense.min()
        );
    }

    #[test]
    fn helmert_is_orthonormal() {
        let q = helmert_basis(7);
        let qtq = q.transpose() * &q;
        assert!((qtq - DMatrix::identity(6, 6)).norm() < 1e-14);
        let ones = DMatrix::from_element(1, 7, 1.0);
        assert!((ones * &q).norm() < 1e-14);
    }
}
