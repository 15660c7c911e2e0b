//! Kuramoto energy landscapes on weighted (possibly signed) graphs.
//!
//! The state is a vector of angles and the energy is
//! `E(theta) = 1/2 sum_{i,j} A_ij (1 - cos(theta_i - theta_j))`. Every
//! quantity is invariant under a global rotation, so second-order analysis
//! happens on the `(n - 1)`-dimensional complement of the all-ones direction.

mod graphs;
mod landscape;

pub use graphs::{gen_erdos_renyi, gen_random_regular, gen_signed_delta, GraphSpec};
pub use landscape::{
    certify_critical, descend, empirical_global_sync, is_synchronized, order_parameter,
    summarize_sync, sync_trial, Classification, CriticalityReport, DescentOutcome, StepPolicy,
    SyncParams, SyncReport, SyncTrial,
};

use std::f64::consts::TAU;
use std::path::Path;

use crate::error::{LabError, Result};
use crate::linalg::DenseSymMatrix;

/// Symmetric weighted graph with zero diagonal, stored as adjacency lists.
#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    n: usize,
    adj: Vec<Vec<(usize, f64)>>,
}

impl Graph {
    pub fn empty(n: usize) -> Self {
        Self {
            n,
            adj: vec![Vec::new(); n],
        }
    }

    /// Builds from undirected edges `(i, j, w)` with `i != j`. Repeated pairs
    /// are rejected.
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let mut g = Self::empty(n);
        let mut seen = std::collections::HashSet::new();
        for &(i, j, w) in edges {
            if i >= n || j >= n {
                return Err(LabError::InvalidArgument(format!(
                    "edge ({i}, {j}) out of range for n = {n}"
                )));
            }
            if i == j {
                return Err(LabError::InvalidArgument(format!("self-loop at {i}")));
            }
            if !w.is_finite() {
                return Err(LabError::NonFinite("edge weight"));
            }
            if !seen.insert((i.min(j), i.max(j))) {
                return Err(LabError::InvalidArgument(format!(
                    "repeated edge ({i}, {j})"
                )));
            }
            if w != 0.0 {
                g.adj[i].push((j, w));
                g.adj[j].push((i, w));
            }
        }
        for row in &mut g.adj {
            row.sort_by_key(|&(j, _)| j);
        }
        Ok(g)
    }

    pub fn from_dense(a: &DenseSymMatrix) -> Result<Self> {
        let n = a.n();
        let mut edges = Vec::new();
        for i in 0..n {
            if a.get(i, i) != 0.0 {
                return Err(LabError::InvalidArgument(format!(
                    "nonzero diagonal at {i}"
                )));
            }
            for j in i + 1..n {
                if a.get(i, j) != 0.0 {
                    edges.push((i, j, a.get(i, j)));
                }
            }
        }
        Self::from_edges(n, &edges)
    }

    pub fn complete(n: usize) -> Self {
        let edges: Vec<_> = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j, 1.0)))
            .collect();
        Self::from_edges(n, &edges).expect("valid complete graph")
    }

    pub fn cycle(n: usize) -> Self {
        let edges: Vec<_> = if n < 3 {
            (0..n.saturating_sub(1)).map(|i| (i, i + 1, 1.0)).collect()
        } else {
            (0..n).map(|i| (i, (i + 1) % n, 1.0)).collect()
        };
        Self::from_edges(n, &edges).expect("valid cycle")
    }

    /// Edge list `i j [weight]` per line, `#` comments; `n` is one more than
    /// the largest index unless a `n <count>` line is present.
    pub fn parse_edge_list(text: &str) -> Result<Self> {
        let mut edges = Vec::new();
        let mut n_decl: Option<usize> = None;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let toks: Vec<&str> = line.split_whitespace().collect();
            let bad = || LabError::Parse(format!("line {}: `{line}`", lineno + 1));
            if toks[0] == "n" && toks.len() == 2 {
                n_decl = Some(toks[1].parse().map_err(|_| bad())?);
                continue;
            }
            if !(2..=3).contains(&toks.len()) {
                return Err(bad());
            }
            let i: usize = toks[0].parse().map_err(|_| bad())?;
            let j: usize = toks[1].parse().map_err(|_| bad())?;
            let w: f64 = match toks.get(2) {
                Some(t) => t.parse().map_err(|_| bad())?,
                None => 1.0,
            };
            edges.push((i, j, w));
        }
        let n_edges = edges
            .iter()
            .map(|&(i, j, _)| i.max(j) + 1)
            .max()
            .unwrap_or(0);
        let n = n_decl.unwrap_or(n_edges);
        Self::from_edges(n, &edges)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse_edge_list(&std::fs::read_to_string(path)?)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.adj[i]
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.adj[i]
            .binary_search_by_key(&j, |&(k, _)| k)
            .map_or(0.0, |p| self.adj[i][p].1)
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adj[i].len()
    }

    pub fn has_negative_weights(&self) -> bool {
        self.adj.iter().flatten().any(|&(_, w)| w < 0.0)
    }

    pub fn to_dense(&self) -> DenseSymMatrix {
        DenseSymMatrix::from_upper_fn(self.n, |i, j| if i == j { 0.0 } else { self.weight(i, j) })
    }
}

/// Angles, reduced into `[0, 2 pi)` on construction.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseState {
    theta: Vec<f64>,
}

impl PhaseState {
    pub fn new(theta: Vec<f64>) -> Result<Self> {
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(LabError::NonFinite("phase"));
        }
        Ok(Self {
            theta: theta.into_iter().map(|t| t.rem_euclid(TAU) % TAU).collect(),
        })
    }

    pub fn constant(n: usize, c: f64) -> Self {
        Self::new(vec![c; n]).expect("finite constant")
    }

    /// `theta_j = 2 pi q j / n`.
    pub fn twisted(n: usize, q: i64) -> Self {
        Self::new(
            (0..n)
                .map(|j| TAU * (q as f64) * j as f64 / n as f64)
                .collect(),
        )
        .expect("finite angles")
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    pub fn rotated(&self, c: f64) -> Self {
        Self::new(self.theta.iter().map(|t| t + c).collect()).expect("finite rotation")
    }
}

fn check_dims(g: &Graph, theta: &[f64]) -> Result<()> {
    if g.n() != theta.len() {
        return Err(LabError::DimensionMismatch {
            expected: g.n(),
            got: theta.len(),
        });
    }
    Ok(())
}

pub fn energy(g: &Graph, state: &PhaseState) -> Result<f64> {
    check_dims(g, state.theta())?;
    Ok(energy_raw(g, state.theta()))
}

pub(crate) fn energy_raw(g: &Graph, theta: &[f64]) -> f64 {
    let mut e = 0.0;
    for i in 0..g.n() {
        for &(j, w) in g.neighbors(i) {
            if j > i {
                e += w * (1.0 - (theta[i] - theta[j]).cos());
            }
        }
    }
    e
}

/// Energy change for the move `theta -> theta + disp`, summed edgewise as
/// `2 w sin(a + c / 2) sin(c / 2)` with `a` the current difference and `c` the
/// change in it. Working from `disp` rather than two rounded states keeps the
/// result accurate when the change is far below the energy's own resolution.
pub(crate) fn energy_delta(g: &Graph, theta: &[f64], disp: &[f64]) -> f64 {
    let mut d = 0.0;
    for i in 0..g.n() {
        for &(j, w) in g.neighbors(i) {
            if j > i {
                let a = theta[i] - theta[j];
                let c = disp[i] - disp[j];
                d += 2.0 * w * (a + 0.5 * c).sin() * (0.5 * c).sin();
            }
        }
    }
    d
}

/// `dE/dtheta_i = sum_j A_ij sin(theta_i - theta_j)`.
pub fn grad(g: &Graph, state: &PhaseState) -> Result<Vec<f64>> {
    check_dims(g, state.theta())?;
    let mut out = vec![0.0; g.n()];
    grad_raw(g, state.theta(), &mut out);
    Ok(out)
}

pub(crate) fn grad_raw(g: &Graph, theta: &[f64], out: &mut [f64]) {
    for (i, o) in out.iter_mut().enumerate() {
        *o = g
            .neighbors(i)
            .iter()
            .map(|&(j, w)| w * (theta[i] - theta[j]).sin())
            .sum();
    }
}

/// Dense Hessian: off-diagonal `-A_ij cos(theta_i - theta_j)`, diagonal the
/// negated row sum, so the all-ones vector is an exact null direction.
pub fn hessian(g: &Graph, state: &PhaseState) -> Result<DenseSymMatrix> {
    check_dims(g, state.theta())?;
    let th = state.theta();
    let n = g.n();
    let mut m = nalgebra::DMatrix::zeros(n, n);
    for i in 0..n {
        let mut diag = 0.0;
        for &(j, w) in g.neighbors(i) {
            let c = w * (th[i] - th[j]).cos();
            m[(i, j)] = -c;
            diag += c;
        }
        m[(i, i)] = diag;
    }
    DenseSymMatrix::from_matrix(m)
}

/// `y = H(theta) x` without forming `H`.
pub fn hessian_matvec(g: &Graph, theta: &[f64], x: &[f64], y: &mut [f64]) {
    for (i, yi) in y.iter_mut().enumerate() {
        *yi = g
            .neighbors(i)
            .iter()
            .map(|&(j, w)| w * (theta[i] - theta[j]).cos() * (x[i] - x[j]))
            .sum();
    }
}
