//! Synthetic graph generators: circulant skip-link graphs, the built-in
//! counterexample graphs used throughout the test suite, and seeded random
//! families. Everything here is deterministic given its inputs.

use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::LabeledGraph;

/// Circulant skip-link graph: cycle 0-1-...-(n-1)-0 plus chords i to
/// (i + skip) mod n. 4-regular for 1 < skip < n/2, uniform labels.
pub fn generate_csl(n: usize, skip: usize) -> Result<LabeledGraph> {
    if n < 5 {
        return Err(Error::Argument(format!("csl needs n >= 5, got {n}")));
    }
    if skip <= 1 || 2 * skip >= n {
        return Err(Error::Argument(format!(
            "csl skip must satisfy 1 < skip < n/2, got {skip} for n = {n}"
        )));
    }
    let mut pairs = Vec::with_capacity(2 * n);
    for i in 0..n {
        pairs.push((i, (i + 1) % n));
        pairs.push((i, (i + skip) % n));
    }
    LabeledGraph::new_undirected(n, &pairs, vec![0; n])
}

/// The built-in graphs used by the expressivity and influence examples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Counterexample {
    /// C6: 2-regular, one 6-cycle.
    Hexagon,
    /// Two disjoint triangles: 2-regular, same degree sequence as the hexagon.
    TwoTriangles,
    /// C6 with a single marked vertex (label 1 at vertex 0).
    MarkedCycle,
    /// P7 with its center marked (label 1 at vertex 3).
    MarkedPath,
    /// Triangle 0-1-2 with tail 2-3-4; five distinct labels. The unique
    /// smallest graph where depth-2 walk counts and shortest-path counts
    /// give influence 1/8 vs 1/4 for the pair (0, 3).
    TailedTriangle,
}

impl Counterexample {
    pub const ALL: [Counterexample; 5] = [
        Counterexample::Hexagon,
        Counterexample::TwoTriangles,
        Counterexample::MarkedCycle,
        Counterexample::MarkedPath,
        Counterexample::TailedTriangle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Counterexample::Hexagon => "hexagon",
            Counterexample::TwoTriangles => "two-triangles",
            Counterexample::MarkedCycle => "marked-cycle",
            Counterexample::MarkedPath => "marked-path",
            Counterexample::TailedTriangle => "tailed-triangle",
        }
    }
}

impl std::str::FromStr for Counterexample {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Counterexample::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Argument(format!("unknown counterexample `{s}`")))
    }
}

pub fn generate_counterexample(which: Counterexample) -> LabeledGraph {
    let build = |n: usize, pairs: &[(usize, usize)], labels: Vec<u32>| {
        LabeledGraph::new_undirected(n, pairs, labels).expect("built-in graphs are valid")
    };
    match which {
        Counterexample::Hexagon => {
            let pairs: Vec<_> = (0..6).map(|i| (i, (i + 1) % 6)).collect();
            build(6, &pairs, vec![0; 6])
        }
        Counterexample::TwoTriangles => build(
            6,
            &[(0, 1), (1, 2), (2, 0), (3, 4), (4, 5), (5, 3)],
            vec![0; 6],
        ),
        Counterexample::MarkedCycle => {
            let pairs: Vec<_> = (0..6).map(|i| (i, (i + 1) % 6)).collect();
            build(6, &pairs, vec![1, 0, 0, 0, 0, 0])
        }
        Counterexample::MarkedPath => {
            let pairs: Vec<_> = (0..6).map(|i| (i, i + 1)).collect();
            build(7, &pairs, vec![0, 0, 0, 1, 0, 0, 0])
        }
        Counterexample::TailedTriangle => build(
            5,
            &[(0, 1), (0, 2), (1, 2), (2, 3), (3, 4)],
            vec![0, 1, 2, 3, 4],
        ),
    }
}

/// Erdos-Renyi G(n, p); may be disconnected. Labels drawn from
/// 0..num_labels.
pub fn random_gnp<R: Rng>(rng: &mut R, n: usize, p: f64, num_labels: u32) -> LabeledGraph {
    let mut pairs = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            if rng.gen_bool(p) {
                pairs.push((u, v));
            }
        }
    }
    let labels = (0..n).map(|_| rng.gen_range(0..num_labels.max(1))).collect();
    LabeledGraph::new_undirected(n, &pairs, labels).expect("generated edges are in range")
}

/// Connected random graph: a uniform random attachment tree plus extra
/// G(n, p) edges. Always connected, never rejected.
pub fn random_connected<R: Rng>(rng: &mut R, n: usize, extra_p: f64, num_labels: u32) -> LabeledGraph {
    assert!(n >= 1);
    let mut pairs = Vec::new();
    for v in 1..n {
        pairs.push((rng.gen_range(0..v), v));
    }
    for u in 0..n {
        for v in (u + 1)..n {
            if rng.gen_bool(extra_p) {
                pairs.push((u, v));
            }
        }
    }
    pairs.sort_unstable();
    pairs.dedup();
    let labels = (0..n).map(|_| rng.gen_range(0..num_labels.max(1))).collect();
    LabeledGraph::new_undirected(n, &pairs, labels).expect("generated edges are in range")
}
