use super::{ColoringCertificate, IntMatrix};
use crate::rng::RngStream;

/// Exact `disc(A) = min_x ||Ax||_inf` by depth-first branch and bound.
///
/// Columns are assigned in order, `+1` before `-1`, and the first column is
/// fixed to `+1` (`x` and `-x` have the same value). A branch is cut when some
/// row's reachable interval `[s - R, s + R]` (partial sum `s`, remaining
/// absolute mass `R`) contains no value of modulus below the incumbent. The
/// search stops early once the incumbent meets the parity lower bound.
///
/// If more than `node_budget` nodes are needed, the incumbent is returned with
/// `exact = false`.
pub fn disc_exact(a: &IntMatrix, node_budget: u64) -> ColoringCertificate {
    let (m, n) = (a.rows(), a.cols());
    if n == 0 || m == 0 {
        return ColoringCertificate {
            x: vec![1; n],
            value: 0,
            exact: true,
            nodes_explored: 0,
        };
    }

    let cols: Vec<Vec<i64>> = (0..n)
        .map(|j| (0..m).map(|r| a.get(r, j)).collect())
        .collect();
    let mut suffix = vec![0i64; (n + 1) * m];
    for k in (0..n).rev() {
        for r in 0..m {
            suffix[k * m + r] = suffix[(k + 1) * m + r] + cols[k][r].abs();
        }
    }
    // x_j = +-1 is odd, so each row sum keeps the parity of sum_j a_rj.
    let lower = if (0..m).any(|r| a.row(r).iter().sum::<i64>().rem_euclid(2) == 1) {
        1
    } else {
        0
    };

    let (greedy_x, greedy_val) = greedy(&cols, m);
    let mut search = Search {
        cols: &cols,
        suffix: &suffix,
        m,
        n,
        lower,
        best_val: greedy_val,
        best_x: greedy_x,
        x: vec![0; n],
        partial: vec![0; m],
        nodes: 0,
        budget: node_budget,
        aborted: false,
    };
    if search.best_val > lower {
        search.descend(0);
    }
    ColoringCertificate {
        x: search.best_x,
        value: search.best_val,
        exact: !search.aborted,
        nodes_explored: search.nodes,
    }
}

struct Search<'a> {
    cols: &'a [Vec<i64>],
    suffix: &'a [i64],
    m: usize,
    n: usize,
    lower: i64,
    best_val: i64,
    best_x: Vec<i8>,
    x: Vec<i8>,
    partial: Vec<i64>,
    nodes: u64,
    budget: u64,
    aborted: bool,
}

impl Search<'_> {
    fn descend(&mut self, k: usize) {
        self.nodes += 1;
        if self.nodes > self.budget {
            self.aborted = true;
            return;
        }
        if k == self.n {
            let val = self.partial.iter().map(|v| v.abs()).max().unwrap_or(0);
            if val < self.best_val {
                self.best_val = val;
                self.best_x.copy_from_slice(&self.x);
            }
            return;
        }
        let signs: &[i8] = if k == 0 { &[1] } else { &[1, -1] };
        for &s in signs {
            let col = &self.cols[k];
            for (p, &c) in self.partial.iter_mut().zip(col) {
                *p += s as i64 * c;
            }
            self.x[k] = s;
            let rest = &self.suffix[(k + 1) * self.m..(k + 2) * self.m];
            let feasible = self
                .partial
                .iter()
                .zip(rest)
                .all(|(p, r)| p.abs() - r < self.best_val);
            if feasible {
                self.descend(k + 1);
            }
            for (p, &c) in self.partial.iter_mut().zip(col) {
                *p -= s as i64 * c;
            }
            if self.aborted || self.best_val <= self.lower {
                return;
            }
        }
    }
}

fn greedy(cols: &[Vec<i64>], m: usize) -> (Vec<i8>, i64) {
    let mut partial = vec![0i64; m];
    let mut x = Vec::with_capacity(cols.len());
    for col in cols {
        let score = |s: i64| {
            partial
                .iter()
                .zip(col)
                .map(|(p, c)| (p + s * c).abs())
                .max()
                .unwrap_or(0)
        };
        let s = if score(1) <= score(-1) { 1 } else { -1 };
        for (p, c) in partial.iter_mut().zip(col) {
            *p += s * c;
        }
        x.push(s as i8);
    }
    let val = partial.iter().map(|v| v.abs()).max().unwrap_or(0);
    (x, val)
}

/// Reference enumeration of all `2^n` colorings, `+1`-first binary order.
/// Only practical for small `n`.
pub fn disc_exhaustive(a: &IntMatrix) -> ColoringCertificate {
    let n = a.cols();
    assert!(n < 40, "exhaustive enumeration limited to n < 40");
    let mut best: Option<(i64, Vec<i8>)> = None;
    for mask in 0u64..(1u64 << n) {
        let x: Vec<i8> = (0..n)
            .map(|j| if mask >> j & 1 == 0 { 1 } else { -1 })
            .collect();
        let v = a.inf_norm_of(&x);
        if best.as_ref().is_none_or(|(b, _)| v < *b) {
            best = Some((v, x));
        }
    }
    let (value, x) = best.expect("at least one coloring");
    ColoringCertificate {
        x,
        value,
        exact: true,
        nodes_explored: 1u64 << n,
    }
}

/// Upper bound on `disc(A)` from random restarts plus single-flip descent.
///
/// Each restart starts from uniform signs and repeatedly applies the flip that
/// most improves `(||Ax||_inf, #rows attaining it)` lexicographically, stopping
/// at a local minimum. `nodes_explored` counts evaluated flips.
pub fn disc_heuristic(a: &IntMatrix, restarts: usize, rng: &mut RngStream) -> ColoringCertificate {
    let (m, n) = (a.rows(), a.cols());
    let mut best: Option<(i64, Vec<i8>)> = None;
    let mut evaluated = 0u64;
    for _ in 0..restarts.max(1) {
        let mut x: Vec<i8> = (0..n).map(|_| rng.sign()).collect();
        let mut y = a.apply_signs(&x);
        let mut cur = objective(&y);
        loop {
            let mut best_flip: Option<(usize, (i64, usize))> = None;
            for j in 0..n {
                evaluated += 1;
                let s = x[j] as i64;
                let cand = objective_with(|r| y[r] - 2 * s * a.get(r, j), m);
                if cand < best_flip.map_or(cur, |(_, o)| o) {
                    best_flip = Some((j, cand));
                }
            }
            match best_flip {
                Some((j, obj)) => {
                    let s = x[j] as i64;
                    for (r, yr) in y.iter_mut().enumerate() {
                        *yr -= 2 * s * a.get(r, j);
                    }
                    x[j] = -x[j];
                    cur = obj;
                }
                None => break,
            }
        }
        if best.as_ref().is_none_or(|(b, _)| cur.0 < *b) {
            best = Some((cur.0, x));
        }
    }
    let (value, x) = best.expect("at least one restart");
    ColoringCertificate {
        x,
        value,
        exact: false,
        nodes_explored: evaluated,
    }
}

fn objective(y: &[i64]) -> (i64, usize) {
    objective_with(|r| y[r], y.len())
}

fn objective_with(f: impl Fn(usize) -> i64, m: usize) -> (i64, usize) {
    let mut max = 0i64;
    let mut count = 0usize;
    for r in 0..m {
        let v = f(r).abs();
        if v > max {
            max = v;
            count = 1;
        } else if v == max {
            count += 1;
        }
    }
    (max, count)
}
