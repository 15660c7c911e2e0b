use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use super::Graph;
use crate::error::{LabError, Result};
use crate::rng::RngStream;

/// Pairing attempts before the regular-graph sampler gives up.
const MAX_PAIRING_ATTEMPTS: usize = 100_000;

/// `G(n, p)`: every pair independently with probability `p`, weight 1.
pub fn gen_erdos_renyi(n: usize, p: f64, rng: &mut RngStream) -> Result<Graph> {
    if !(0.0..=1.0).contains(&p) {
        return Err(LabError::InvalidArgument(format!(
            "edge probability {p} not in [0, 1]"
        )));
    }
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.uniform() < p {
                edges.push((i, j, 1.0));
            }
        }
    }
    Graph::from_edges(n, &edges)
}

/// Random `d`-regular graph from the configuration model.
///
/// Half-edges are paired by a uniform shuffle and the whole pairing is redrawn
/// whenever it creates a self-loop or a repeated edge. Conditioned on success
/// this is uniform over simple `d`-regular graphs in the limit, but exact
/// uniformity at finite `n` is not claimed.
pub fn gen_random_regular(n: usize, d: usize, rng: &mut RngStream) -> Result<Graph> {
    if (n * d) % 2 != 0 {
        return Err(LabError::InvalidArgument(format!(
            "n d = {} must be even",
            n * d
        )));
    }
    if d >= n.max(1) && !(n == 0 && d == 0) {
        return Err(LabError::InvalidArgument(format!(
            "degree {d} needs more than {n} nodes"
        )));
    }
    let mut stubs: Vec<usize> = (0..n).flat_map(|v| std::iter::repeat_n(v, d)).collect();
    'attempt: for _ in 0..MAX_PAIRING_ATTEMPTS {
        // Fisher-Yates.
        for k in (1..stubs.len()).rev() {
            let r = rng.index(k + 1);
            stubs.swap(k, r);
        }
        let mut seen = std::collections::HashSet::with_capacity(stubs.len() / 2);
        let mut edges = Vec::with_capacity(stubs.len() / 2);
        for pair in stubs.chunks_exact(2) {
            let (a, b) = (pair[0].min(pair[1]), pair[0].max(pair[1]));
            if a == b || !seen.insert((a, b)) {
                continue 'attempt;
            }
            edges.push((a, b, 1.0));
        }
        return Graph::from_edges(n, &edges);
    }
    Err(LabError::InvalidArgument(format!(
        "no simple {d}-regular pairing on {n} nodes after {MAX_PAIRING_ATTEMPTS} attempts"
    )))
}

/// Dense signed coupling: every off-diagonal pair is `+1` with probability
/// `1/2 + delta`, otherwise `-1`.
pub fn gen_signed_delta(n: usize, delta: f64, rng: &mut RngStream) -> Result<Graph> {
    if !(0.0..=0.5).contains(&delta) {
        return Err(LabError::InvalidArgument(format!(
            "delta {delta} not in [0, 1/2]"
        )));
    }
    let mut edges = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            let w = if rng.uniform() < 0.5 + delta {
                1.0
            } else {
                -1.0
            };
            edges.push((i, j, w));
        }
    }
    Graph::from_edges(n, &edges)
}

/// Textual graph description: `er:n,p`, `reg:n,d`, `signed:n,delta`,
/// `complete:n`, `cycle:n`, or `file:PATH`.
#[derive(Clone, Debug, PartialEq)]
pub enum GraphSpec {
    ErdosRenyi { n: usize, p: f64 },
    Regular { n: usize, d: usize },
    Signed { n: usize, delta: f64 },
    Complete(usize),
    Cycle(usize),
    File(PathBuf),
}

impl GraphSpec {
    pub fn build(&self, rng: &mut RngStream) -> Result<Graph> {
        match self {
            GraphSpec::ErdosRenyi { n, p } => gen_erdos_renyi(*n, *p, rng),
            GraphSpec::Regular { n, d } => gen_random_regular(*n, *d, rng),
            GraphSpec::Signed { n, delta } => gen_signed_delta(*n, *delta, rng),
            GraphSpec::Complete(n) => Ok(Graph::complete(*n)),
            GraphSpec::Cycle(n) => Ok(Graph::cycle(*n)),
            GraphSpec::File(p) => Graph::read(p),
        }
    }

    pub fn is_random(&self) -> bool {
        matches!(
            self,
            GraphSpec::ErdosRenyi { .. } | GraphSpec::Regular { .. } | GraphSpec::Signed { .. }
        )
    }
}

impl fmt::Display for GraphSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraphSpec::ErdosRenyi { n, p } => write!(f, "er:{n},{p}"),
            GraphSpec::Regular { n, d } => write!(f, "reg:{n},{d}"),
            GraphSpec::Signed { n, delta } => write!(f, "signed:{n},{delta}"),
            GraphSpec::Complete(n) => write!(f, "complete:{n}"),
            GraphSpec::Cycle(n) => write!(f, "cycle:{n}"),
            GraphSpec::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

impl FromStr for GraphSpec {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || LabError::Parse(format!("graph spec `{s}`"));
        let (kind, rest) = s.split_once(':').ok_or_else(bad)?;
        if kind == "file" {
            return Ok(GraphSpec::File(PathBuf::from(rest)));
        }
        let args: Vec<&str> = rest.split(',').map(str::trim).collect();
        let int = |t: &str| t.parse::<usize>().map_err(|_| bad());
        let real = |t: &str| t.parse::<f64>().map_err(|_| bad());
        match (kind, args.as_slice()) {
            ("er", [n, p]) => Ok(GraphSpec::ErdosRenyi {
                n: int(n)?,
                p: real(p)?,
            }),
            ("reg", [n, d]) => Ok(GraphSpec::Regular {
                n: int(n)?,
                d: int(d)?,
            }),
            ("signed", [n, d]) => Ok(GraphSpec::Signed {
                n: int(n)?,
                delta: real(d)?,
            }),
            ("complete", [n]) => Ok(GraphSpec::Complete(int(n)?)),
            ("cycle", [n]) => Ok(GraphSpec::Cycle(int(n)?)),
            _ => Err(bad()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_stream;

    #[test]
    fn er_extremes() {
        let mut rng = rng_stream(1, 0);
        assert_eq!(
            gen_erdos_renyi(6, 1.0, &mut rng).unwrap(),
            Graph::complete(6)
        );
        assert_eq!(gen_erdos_renyi(6, 0.0, &mut rng).unwrap().edge_count(), 0);
        assert!(gen_erdos_renyi(6, 1.5, &mut rng).is_err());
    }

    #[test]
    fn regular_degrees() {
        for seed in 0..10 {
            let g = gen_random_regular(10, 3, &mut rng_stream(seed, 0)).unwrap();
            assert!((0..10).all(|v| g.degree(v) == 3));
        }
        let g = gen_random_regular(1000, 3, &mut rng_stream(2, 0)).unwrap();
        assert_eq!(g.edge_count(), 1500);
        assert!(gen_random_regular(5, 3, &mut rng_stream(0, 0)).is_err());
        assert!(gen_random_regular(3, 3, &mut rng_stream(0, 0)).is_err());
    }

    #[test]
    fn signed_fraction() {
        let g = gen_signed_delta(500, 0.25, &mut rng_stream(4, 0)).unwrap();
        let (mut plus, mut total) = (0usize, 0usize);
        for i in 0..500 {
            for &(j, w) in g.neighbors(i) {
                if j > i {
                    total += 1;
                    plus += (w > 0.0) as usize;
                }
            }
        }
        assert_eq!(total, 500 * 499 / 2);
        let frac = plus as f64 / total as f64;
        assert!((frac - 0.75).abs() < 0.02, "{frac}");
    }

    #[test]
    fn spec_round_trip() {
        for s in [
            "er:10,0.5",
            "reg:20,3",
            "signed:30,0.1",
            "complete:5",
            "cycle:5",
            "file:/tmp/g.txt",
        ] {
            let spec: GraphSpec = s.parse().unwrap();
            assert_eq!(spec.to_string(), s);
        }
        assert!("er:10".parse::<GraphSpec>().is_err());
        assert!("torus:3".parse::<GraphSpec>().is_err());
    }
}
