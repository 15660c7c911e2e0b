//! Colexicographic ranking of fixed-size subsets of `{0, .., n-1}`.
//!
//! The rank of a sorted subset `s_0 < s_1 < .. < s_{k-1}` is
//! `sum_i C(s_i, i + 1)`, a bijection onto `0..C(n, k)` that does not depend
//! on `n`.

use crate::error::{LabError, Result};

/// Binomial coefficient; saturates at `u64::MAX`.
pub fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return u64::MAX;
        }
    }
    acc as u64
}

/// Table of `C(a, b)` for `a <= n`, `b <= k`, for hot loops.
#[derive(Clone, Debug)]
pub struct BinomialTable {
    k_max: usize,
    table: Vec<u64>,
}

impl BinomialTable {
    pub fn new(n: usize, k_max: usize) -> Self {
        let mut table = vec![0u64; (n + 1) * (k_max + 1)];
        for a in 0..=n {
            for b in 0..=k_max {
                table[a * (k_max + 1) + b] = binomial(a as u64, b as u64);
            }
        }
        Self { k_max, table }
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize) -> u64 {
        self.table[a * (self.k_max + 1) + b]
    }

    /// Colex rank of a sorted subset, without validation.
    #[inline]
    pub fn rank(&self, subset: &[usize]) -> usize {
        subset
            .iter()
            .enumerate()
            .map(|(i, &s)| self.get(s, i + 1) as usize)
            .sum()
    }
}

fn validate(subset: &[usize], n: usize) -> Result<()> {
    for w in subset.windows(2) {
        if w[0] >= w[1] {
            return Err(LabError::InvalidArgument(format!(
                "subset must be strictly increasing, got {subset:?}"
            )));
        }
    }
    if let Some(&last) = subset.last() {
        if last >= n {
            return Err(LabError::InvalidArgument(format!(
                "subset element {last} out of range for n = {n}"
            )));
        }
    }
    Ok(())
}

/// Colex rank of a strictly increasing subset of `0..n`.
pub fn rank_subset_colex(subset: &[usize], n: usize) -> Result<u64> {
    validate(subset, n)?;
    Ok(subset
        .iter()
        .enumerate()
        .map(|(i, &s)| binomial(s as u64, i as u64 + 1))
        .sum())
}

/// Inverse of [`rank_subset_colex`] for `k`-subsets of `0..n`.
pub fn unrank_subset_colex(rank: u64, k: usize, n: usize) -> Result<Vec<usize>> {
    let total = binomial(n as u64, k as u64);
    if rank >= total {
        return Err(LabError::InvalidArgument(format!(
            "rank {rank} out of range for C({n}, {k}) = {total}"
        )));
    }
    let mut out = vec![0usize; k];
    let mut r = rank;
    let mut hi = n;
    for i in (1..=k).rev() {
        // Largest c < hi with C(c, i) <= r.
        let mut c = hi - 1;
        while binomial(c as u64, i as u64) > r {
            c -= 1;
        }
        out[i - 1] = c;
        r -= binomial(c as u64, i as u64);
        hi = c;
    }
    Ok(out)
}

/// Advances `subset` to its colex successor within `0..n`; returns false after
/// the last subset.
pub fn next_subset_colex(subset: &mut [usize], n: usize) -> bool {
    let k = subset.len();
    for i in 0..k {
        let limit = if i + 1 < k { subset[i + 1] } else { n };
        if subset[i] + 1 < limit {
            subset[i] += 1;
            for (j, s) in subset.iter_mut().enumerate().take(i) {
                *s = j;
            }
            return true;
        }
    }
    false
}

/// All `k`-subsets of `0..n` in colex order.
pub fn all_subsets_colex(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k > n {
        return vec![];
    }
    let mut cur: Vec<usize> = (0..k).collect();
    let mut out = vec![cur.clone()];
    while next_subset_colex(&mut cur, n) {
        out.push(cur.clone());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_examples() {
        assert_eq!(rank_subset_colex(&[0, 1], 5).unwrap(), 0);
        assert_eq!(rank_subset_colex(&[3, 4], 5).unwrap(), 9);
    }

    #[test]
    fn colex_pairs_of_five_enumerate_in_order() {
        let expect = [
            [0, 1],
            [0, 2],
            [1, 2],
            [0, 3],
            [1, 3],
            [2, 3],
            [0, 4],
            [1, 4],
            [2, 4],
            [3, 4],
        ];
        for (r, s) in expect.iter().enumerate() {
            assert_eq!(rank_subset_colex(s, 5).unwrap(), r as u64);
            assert_eq!(unrank_subset_colex(r as u64, 2, 5).unwrap(), s.to_vec());
        }
    }

    #[test]
    fn bijection_exhaustive_up_to_ten() {
        for n in 0..=10 {
            for k in 0..=n {
                let all = all_subsets_colex(n, k);
                assert_eq!(all.len() as u64, binomial(n as u64, k as u64));
                let table = BinomialTable::new(n, k);
                for (i, s) in all.iter().enumerate() {
                    assert_eq!(rank_subset_colex(s, n).unwrap(), i as u64);
                    assert_eq!(table.rank(s), i);
                    assert_eq!(&unrank_subset_colex(i as u64, k, n).unwrap(), s);
                }
            }
        }
    }

    #[test]
    fn rejects_malformed() {
        assert!(rank_subset_colex(&[2, 1], 5).is_err());
        assert!(rank_subset_colex(&[1, 1], 5).is_err());
        assert!(rank_subset_colex(&[1, 5], 5).is_err());
        assert!(unrank_subset_colex(10, 2, 5).is_err());
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(6, 3), 20);
        assert_eq!(binomial(60, 30), 118264581564861424);
        assert_eq!(binomial(3, 5), 0);
    }
}
