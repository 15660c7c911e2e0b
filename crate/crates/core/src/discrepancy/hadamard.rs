use serde::Serialize;

use super::{disc_exact, SignMatrix};
use crate::error::{LabError, Result};

/// Largest order accepted by [`sylvester_hadamard`] (a `2^13 x 2^13` matrix of
/// `i8` is 64 MiB).
pub const MAX_SYLVESTER_ORDER: u32 = 13;

/// The `2^k x 2^k` Sylvester matrix `H_k = H_1 (x) H_{k-1}`, `H_0 = [1]`.
///
/// Entry `(i, j)` is `(-1)^{popcount(i & j)}`, which is the closed form of the
/// Kronecker recursion.
pub fn sylvester_hadamard(k: u32) -> Result<SignMatrix> {
    if k > MAX_SYLVESTER_ORDER {
        return Err(LabError::TooLarge(format!(
            "Sylvester order {k} exceeds {MAX_SYLVESTER_ORDER}"
        )));
    }
    let n = 1usize << k;
    let data = (0..n * n)
        .map(|idx| {
            let (i, j) = (idx / n, idx % n);
            if (i & j).count_ones() % 2 == 0 {
                1
            } else {
                -1
            }
        })
        .collect();
    SignMatrix::new(n, n, data)
}

/// The sign vector built from `y = (1, 1, 1, -1)` by `x_k = y (x) x_{k-2}`, with
/// `x_0 = (1)` and `x_1 = (1, 1)`.
pub fn x_natural(k: u32) -> Vec<i8> {
    const Y: [i8; 4] = [1, 1, 1, -1];
    match k {
        0 => vec![1],
        1 => vec![1, 1],
        _ => {
            let inner = x_natural(k - 2);
            Y.iter()
                .flat_map(|&a| inner.iter().map(move |&b| a * b))
                .collect()
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct HadamardReport {
    pub k: u32,
    pub n: usize,
    /// `||H_k x_natural(k)||_inf`, computed by explicit multiplication.
    pub upper: i64,
    /// `sqrt(2^k)` from orthogonality.
    pub lower: f64,
    /// `disc(H_k)` when the exact search finished within its budget.
    pub exact: Option<i64>,
    pub nodes_explored: Option<u64>,
}

/// Upper and lower brackets on `disc(H_k)`, plus the exact value when the
/// branch and bound completes within `exact_budget` nodes (`None` skips it).
pub fn hadamard_disc_report(k: u32, exact_budget: Option<u64>) -> Result<HadamardReport> {
    let h = sylvester_hadamard(k)?;
    let n = h.rows();
    let x: Vec<i64> = x_natural(k).into_iter().map(i64::from).collect();
    let upper = h.apply(&x).into_iter().map(i64::abs).max().unwrap_or(0);
    let lower = (n as f64).sqrt();
    let ratio = upper as f64 / lower;
    let sqrt2 = std::f64::consts::SQRT_2;
    if (ratio - 1.0).abs() > 1e-12 && (ratio - sqrt2).abs() > 1e-12 {
        return Err(LabError::InvalidArgument(format!(
            "upper/lower ratio {ratio} for k = {k} is neither 1 nor sqrt(2)"
        )));
    }
    let (exact, nodes_explored) = match exact_budget {
        Some(budget) => {
            let cert = disc_exact(&h.to_int(), budget);
            if cert.exact {
                (Some(cert.value), Some(cert.nodes_explored))
            } else {
                (None, Some(cert.nodes_explored))
            }
        }
        None => (None, None),
    };
    Ok(HadamardReport {
        k,
        n,
        upper,
        lower,
        exact,
        nodes_explored,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Explicit block recursion `[[H, H], [H, -H]]`, independent of the
    /// popcount closed form.
    fn block_sylvester(k: u32) -> Vec<Vec<i64>> {
        let mut h = vec![vec![1i64]];
        for _ in 0..k {
            let m = h.len();
            let mut next = vec![vec![0i64; 2 * m]; 2 * m];
            for i in 0..m {
                for j in 0..m {
                    next[i][j] = h[i][j];
                    next[i][j + m] = h[i][j];
                    next[i + m][j] = h[i][j];
                    next[i + m][j + m] = -h[i][j];
                }
            }
            h = next;
        }
        h
    }

    #[test]
    fn small_orders() {
        assert_eq!(
            sylvester_hadamard(0).unwrap(),
            SignMatrix::new(1, 1, vec![1]).unwrap()
        );
        assert_eq!(
            sylvester_hadamard(1).unwrap(),
            SignMatrix::new(2, 2, vec![1, 1, 1, -1]).unwrap()
        );
        assert!(sylvester_hadamard(MAX_SYLVESTER_ORDER + 1).is_err());
    }

    #[test]
    fn matches_block_recursion_and_is_orthogonal() {
        for k in 0..=6 {
            let h = sylvester_hadamard(k).unwrap();
            let b = block_sylvester(k);
            let n = h.rows();
            for i in 0..n {
                for j in 0..n {
                    assert_eq!(h.get(i, j) as i64, b[i][j]);
                }
            }
            let g = h.mul_transpose(&h);
            for i in 0..n {
                for j in 0..n {
                    assert_eq!(g[i * n + j], if i == j { n as i64 } else { 0 });
                }
            }
        }
    }

    #[test]
    fn x_natural_base_cases() {
        assert_eq!(x_natural(0), vec![1]);
        assert_eq!(x_natural(1), vec![1, 1]);
        assert_eq!(x_natural(2), vec![1, 1, 1, -1]);
        assert_eq!(x_natural(3), vec![1, 1, 1, 1, 1, 1, -1, -1]);
    }

    #[test]
    fn h3_bound_is_four() {
        let h = sylvester_hadamard(3).unwrap();
        let x: Vec<i64> = x_natural(3).into_iter().map(i64::from).collect();
        assert_eq!(h.apply(&x).iter().map(|v| v.abs()).max(), Some(4));
    }

    #[test]
    fn mixed_product_identity() {
        // H_k x_k == (2y) (x) (H_{k-2} x_{k-2}).
        let y = [2i64, 2, 2, -2];
        for k in 2..=10 {
            let h = sylvester_hadamard(k).unwrap();
            let x: Vec<i64> = x_natural(k).into_iter().map(i64::from).collect();
            let lhs = h.apply(&x);
            let hs = sylvester_hadamard(k - 2).unwrap();
            let xs: Vec<i64> = x_natural(k - 2).into_iter().map(i64::from).collect();
            let inner = hs.apply(&xs);
            let rhs: Vec<i64> = y
                .iter()
                .flat_map(|&a| inner.iter().map(move |&b| a * b))
                .collect();
            assert_eq!(lhs, rhs, "k = {k}");
        }
    }

    #[test]
    fn upper_bound_formula() {
        for k in 0..=12u32 {
            let r = hadamard_disc_report(k, None).unwrap();
            let expect = if k % 2 == 1 {
                (2.0f64 * (1u64 << k) as f64).sqrt()
            } else {
                ((1u64 << k) as f64).sqrt()
            };
            assert!(
                (r.upper as f64 - expect).abs() < 1e-9,
                "k = {k}: {}",
                r.upper
            );
        }
    }

    #[test]
    fn reports_for_small_k() {
        let r2 = hadamard_disc_report(2, Some(u64::MAX)).unwrap();
        assert_eq!((r2.upper, r2.lower, r2.exact), (2, 2.0, Some(2)));
        let r3 = hadamard_disc_report(3, Some(u64::MAX)).unwrap();
        assert_eq!(r3.upper, 4);
        assert!((r3.lower - 8f64.sqrt()).abs() < 1e-15);
        assert!(r3.exact.unwrap() <= 4);
        let r4 = hadamard_disc_report(4, Some(u64::MAX)).unwrap();
        assert_eq!((r4.upper, r4.lower, r4.exact), (4, 4.0, Some(4)));
    }
}
