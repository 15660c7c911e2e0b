//! Small finite groups and their left-regular representations.
//!
//! A group is given by its multiplication table. Elements are listed in
//! shortlex order of their shortest generator words (breadth-first search from
//! the identity, generators tried in declaration order), so the identity is
//! element 0 and the ordering is reproducible.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;

use super::spencer::SpencerInstance;
use crate::error::{LabError, Result};

/// Largest group order accepted when building tables.
pub const MAX_GROUP_ORDER: usize = 5040;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GroupSpec {
    Cyclic(usize),
    /// Symmetries of the regular `m`-gon, order `2m`.
    Dihedral(usize),
    Symmetric(usize),
    Product(Vec<GroupSpec>),
}

impl GroupSpec {
    pub fn order(&self) -> usize {
        match self {
            GroupSpec::Cyclic(m) => *m,
            GroupSpec::Dihedral(m) => 2 * m,
            GroupSpec::Symmetric(m) => (1..=*m).product(),
            GroupSpec::Product(fs) => fs.iter().map(GroupSpec::order).product(),
        }
    }
}

impl fmt::Display for GroupSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroupSpec::Cyclic(m) => write!(f, "C{m}"),
            GroupSpec::Dihedral(m) => write!(f, "D{m}"),
            GroupSpec::Symmetric(m) => write!(f, "S{m}"),
            GroupSpec::Product(fs) => {
                let parts: Vec<String> = fs.iter().map(|g| g.to_string()).collect();
                write!(f, "{}", parts.join("x"))
            }
        }
    }
}

/// Parses `C3`, `D4`, `S3`, `cyclic(3)`, `dihedral(4)`, `symmetric(3)`, and
/// products joined by `x`, e.g. `C2xC2xC2`.
impl FromStr for GroupSpec {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        let factors: Vec<&str> = s.split(['x', '*']).map(str::trim).collect();
        if factors.len() > 1 {
            return Ok(GroupSpec::Product(
                factors
                    .into_iter()
                    .map(parse_factor)
                    .collect::<Result<_>>()?,
            ));
        }
        parse_factor(s.trim())
    }
}

fn parse_factor(s: &str) -> Result<GroupSpec> {
    let bad = || LabError::UnsupportedGroup(s.to_string());
    let lower = s.to_ascii_lowercase();
    let (kind, arg) = if let Some(rest) = lower.strip_suffix(')') {
        let (k, a) = rest.split_once('(').ok_or_else(bad)?;
        (k.to_string(), a.to_string())
    } else {
        let split = lower.find(|c: char| c.is_ascii_digit()).ok_or_else(bad)?;
        (lower[..split].to_string(), lower[split..].to_string())
    };
    let m: usize = arg.trim().parse().map_err(|_| bad())?;
    if m == 0 {
        return Err(bad());
    }
    match kind.as_str() {
        "c" | "z" | "cyclic" => Ok(GroupSpec::Cyclic(m)),
        "d" | "dihedral" => Ok(GroupSpec::Dihedral(m)),
        "s" | "symmetric" => Ok(GroupSpec::Symmetric(m)),
        _ => Err(bad()),
    }
}

/// Multiplication table in canonical element order.
#[derive(Clone, Debug)]
pub struct GroupTable {
    order: usize,
    /// `mul[a * order + b]` is the index of `a * b`.
    mul: Vec<usize>,
    generators: Vec<usize>,
}

impl GroupTable {
    pub fn build(spec: &GroupSpec) -> Result<Self> {
        if spec.order() > MAX_GROUP_ORDER {
            return Err(LabError::UnsupportedGroup(format!(
                "{spec} has order {} > {MAX_GROUP_ORDER}",
                spec.order()
            )));
        }
        let raw = raw_table(spec)?;
        Ok(raw.canonical())
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn mul(&self, a: usize, b: usize) -> usize {
        self.mul[a * self.order + b]
    }

    pub fn identity(&self) -> usize {
        0
    }

    pub fn generators(&self) -> &[usize] {
        &self.generators
    }

    pub fn inverse(&self, a: usize) -> usize {
        (0..self.order)
            .find(|&b| self.mul(a, b) == 0)
            .expect("every element has an inverse")
    }

    /// Reorders elements by BFS from the identity over right multiplication
    /// by the generators.
    fn canonical(&self) -> Self {
        let id = (0..self.order)
            .find(|&e| (0..self.order).all(|g| self.mul(e, g) == g))
            .expect("group has an identity");
        let mut pos = vec![usize::MAX; self.order];
        let mut list = Vec::with_capacity(self.order);
        let mut queue = VecDeque::from([id]);
        pos[id] = 0;
        list.push(id);
        while let Some(h) = queue.pop_front() {
            for &g in &self.generators {
                let hg = self.mul(h, g);
                if pos[hg] == usize::MAX {
                    pos[hg] = list.len();
                    list.push(hg);
                    queue.push_back(hg);
                }
            }
        }
        assert_eq!(list.len(), self.order, "generators must generate the group");
        let n = self.order;
        let mut mul = vec![0; n * n];
        for a in 0..n {
            for b in 0..n {
                mul[a * n + b] = pos[self.mul(list[a], list[b])];
            }
        }
        Self {
            order: n,
            mul,
            generators: self.generators.iter().map(|&g| pos[g]).collect(),
        }
    }
}

fn raw_table(spec: &GroupSpec) -> Result<GroupTable> {
    match spec {
        GroupSpec::Cyclic(m) => {
            let m = *m;
            let mul = (0..m * m).map(|i| (i / m + i % m) % m).collect();
            Ok(GroupTable {
                order: m,
                mul,
                generators: vec![1 % m],
            })
        }
        GroupSpec::Dihedral(m) => {
            // Element (k, s) = r^k f^s at index k + m s; f r^k = r^{-k} f.
            let m = *m;
            let n = 2 * m;
            let mut mul = vec![0; n * n];
            for a in 0..n {
                for b in 0..n {
                    let (k1, s1) = (a % m, a / m);
                    let (k2, s2) = (b % m, b / m);
                    let k = if s1 == 0 {
                        (k1 + k2) % m
                    } else {
                        (k1 + m - k2) % m
                    };
                    mul[a * n + b] = k + m * (s1 ^ s2);
                }
            }
            Ok(GroupTable {
                order: n,
                mul,
                generators: vec![1 % m, m],
            })
        }
        GroupSpec::Symmetric(m) => {
            let m = *m;
            let perms = all_permutations(m);
            let index = |p: &[usize]| perms.binary_search_by(|q| q.as_slice().cmp(p)).unwrap();
            let n = perms.len();
            let mut mul = vec![0; n * n];
            for a in 0..n {
                for b in 0..n {
                    // (a * b)(i) = a(b(i)).
                    let c: Vec<usize> = (0..m).map(|i| perms[a][perms[b][i]]).collect();
                    mul[a * n + b] = index(&c);
                }
            }
            let mut gens = Vec::new();
            if m >= 2 {
                let mut t: Vec<usize> = (0..m).collect();
                t.swap(0, 1);
                gens.push(index(&t));
                let cycle: Vec<usize> = (0..m).map(|i| (i + 1) % m).collect();
                gens.push(index(&cycle));
            } else {
                gens.push(0);
            }
            Ok(GroupTable {
                order: n,
                mul,
                generators: gens,
            })
        }
        GroupSpec::Product(factors) => {
            if factors.is_empty() {
                return Err(LabError::UnsupportedGroup("empty product".into()));
            }
            let tables: Vec<GroupTable> = factors.iter().map(raw_table).collect::<Result<_>>()?;
            let mut acc = tables[0].clone();
            for t in &tables[1..] {
                acc = direct_product(&acc, t);
            }
            Ok(acc)
        }
    }
}

fn direct_product(a: &GroupTable, b: &GroupTable) -> GroupTable {
    let (na, nb) = (a.order, b.order);
    let n = na * nb;
    let mut mul = vec![0; n * n];
    for x in 0..n {
        for y in 0..n {
            let (xa, xb) = (x / nb, x % nb);
            let (ya, yb) = (y / nb, y % nb);
            mul[x * n + y] = a.mul(xa, ya) * nb + b.mul(xb, yb);
        }
    }
    let id_a = (0..na)
        .find(|&e| (0..na).all(|g| a.mul(e, g) == g))
        .unwrap();
    let id_b = (0..nb)
        .find(|&e| (0..nb).all(|g| b.mul(e, g) == g))
        .unwrap();
    let mut generators: Vec<usize> = a.generators.iter().map(|&g| g * nb + id_b).collect();
    generators.extend(b.generators.iter().map(|&g| id_a * nb + g));
    GroupTable {
        order: n,
        mul,
        generators,
    }
}

fn all_permutations(m: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..m).collect();
    loop {
        out.push(cur.clone());
        // Next lexicographic permutation.
        let Some(i) = (0..m.saturating_sub(1))
            .rev()
            .find(|&i| cur[i] < cur[i + 1])
        else {
            break;
        };
        let j = (i + 1..m).rev().find(|&j| cur[j] > cur[i]).unwrap();
        cur.swap(i, j);
        cur[i + 1..].reverse();
    }
    out
}

#[derive(Clone, Debug)]
pub struct RegularRepresentation {
    pub table: GroupTable,
    /// `matrices[g]` maps basis vector `e_h` to `e_{gh}`.
    pub matrices: Vec<DMatrix<f64>>,
}

impl RegularRepresentation {
    pub fn to_spencer_instance(&self) -> Result<SpencerInstance> {
        SpencerInstance::new(self.matrices.clone())
    }
}

/// Permutation matrices of left multiplication `h -> gh`, one per element in
/// canonical order.
pub fn regular_representation(spec: &GroupSpec) -> Result<RegularRepresentation> {
    let table = GroupTable::build(spec)?;
    let n = table.order();
    let matrices = (0..n)
        .map(|g| {
            let mut p = DMatrix::zeros(n, n);
            for h in 0..n {
                p[(table.mul(g, h), h)] = 1.0;
            }
            p
        })
        .collect();
    Ok(RegularRepresentation { table, matrices })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_specs() {
        assert_eq!("C3".parse::<GroupSpec>().unwrap(), GroupSpec::Cyclic(3));
        assert_eq!(
            "dihedral(4)".parse::<GroupSpec>().unwrap(),
            GroupSpec::Dihedral(4)
        );
        assert_eq!(
            "C2xS3".parse::<GroupSpec>().unwrap(),
            GroupSpec::Product(vec![GroupSpec::Cyclic(2), GroupSpec::Symmetric(3)])
        );
        assert!("Q8".parse::<GroupSpec>().is_err());
        assert!("C0".parse::<GroupSpec>().is_err());
    }

    #[test]
    fn cyclic3_shift_matrices() {
        let rep = regular_representation(&GroupSpec::Cyclic(3)).unwrap();
        assert_eq!(rep.matrices.len(), 3);
        assert_eq!(rep.matrices[0], DMatrix::identity(3, 3));
        // Element 1 is the generator: e_h -> e_{h+1}.
        let shift = DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        assert_eq!(rep.matrices[1], shift);
    }

    #[test]
    fn identity_first_for_every_group() {
        for spec in ["C5", "D4", "S3", "C2xC2", "S1", "D1"] {
            let rep = regular_representation(&spec.parse().unwrap()).unwrap();
            let n = rep.table.order();
            assert_eq!(rep.matrices[0], DMatrix::identity(n, n), "{spec}");
        }
    }

    #[test]
    fn orders() {
        for (spec, n) in [("S3", 6), ("D4", 8), ("S4", 24), ("C2xC3xC2", 12)] {
            let g: GroupSpec = spec.parse().unwrap();
            assert_eq!(GroupTable::build(&g).unwrap().order(), n);
        }
    }

    #[test]
    fn symmetric3_is_a_homomorphism() {
        let rep = regular_representation(&GroupSpec::Symmetric(3)).unwrap();
        assert_eq!(rep.matrices.len(), 6);
        for m in &rep.matrices {
            assert_eq!(m.nrows(), 6);
            assert_eq!(m * m.transpose(), DMatrix::identity(6, 6));
        }
        let gens = rep.table.generators();
        let (a, b) = (gens[0], gens[1]);
        let ab = rep.table.mul(a, b);
        assert_eq!(&rep.matrices[a] * &rep.matrices[b], rep.matrices[ab]);
        // Non-abelian.
        assert_ne!(ab, rep.table.mul(b, a));
    }

    #[test]
    fn dihedral_relations() {
        let t = GroupTable::build(&GroupSpec::Dihedral(5)).unwrap();
        let (r, f) = (t.generators()[0], t.generators()[1]);
        assert_eq!(t.mul(f, f), t.identity());
        // f r f = r^{-1}.
        assert_eq!(t.mul(t.mul(f, r), f), t.inverse(r));
    }
}
