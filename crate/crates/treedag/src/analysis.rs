//! Expressivity and oversquashing analyses: relative influence with exact
//! rational arithmetic, color-refinement vs tree-signature distinguishability
//! reports, and size audits against the preprocessing bounds.

use num::bigint::BigUint;
use num::rational::Ratio;
use num::{BigInt, Zero};

use crate::canon::Labeling;
use crate::error::{Error, Result};
use crate::graph::{color_multiset, disjoint_union, wl_refinement, GraphCollection, LabeledGraph};
use crate::merge::{merge_trees, multiset_signature};
use crate::par::{try_par_map, Parallelism};
use crate::tree::build_knt_dag;

/// How influence mass is counted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InfluenceMethod {
    /// Exact powers of the self-loop adjacency A + I.
    MpnnHatAdjacency,
    UnfoldingTree,
    ZeroNt,
    OneNt,
}

impl InfluenceMethod {
    pub const ALL: [InfluenceMethod; 4] = [
        InfluenceMethod::MpnnHatAdjacency,
        InfluenceMethod::UnfoldingTree,
        InfluenceMethod::ZeroNt,
        InfluenceMethod::OneNt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            InfluenceMethod::MpnnHatAdjacency => "mpnn-hat-adjacency",
            InfluenceMethod::UnfoldingTree => "unfolding-tree",
            InfluenceMethod::ZeroNt => "0-nt",
            InfluenceMethod::OneNt => "1-nt",
        }
    }

    /// Redundancy parameter of the tree family, if this is a tree method.
    fn tree_k(self) -> Option<Option<usize>> {
        match self {
            InfluenceMethod::MpnnHatAdjacency => None,
            InfluenceMethod::UnfoldingTree => Some(None),
            InfluenceMethod::ZeroNt => Some(Some(0)),
            InfluenceMethod::OneNt => Some(Some(1)),
        }
    }
}

impl std::str::FromStr for InfluenceMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        InfluenceMethod::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Argument(format!("unknown influence method '{s}'")))
    }
}

/// Exact relative influence of origin `v` on root `u` at depth `k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InfluenceReport {
    pub u: usize,
    pub v: usize,
    pub k: usize,
    pub method: InfluenceMethod,
    pub numerator: BigUint,
    pub denominator: BigUint,
}

impl InfluenceReport {
    pub fn value(&self) -> Ratio<BigInt> {
        Ratio::new(
            BigInt::from(self.numerator.clone()),
            BigInt::from(self.denominator.clone()),
        )
    }
}

/// Influence of `v` on `u` after `k` rounds. For the adjacency method this
/// is [Â^k]_{u,v} / Σ_w [Â^k]_{u,w}; for tree methods, the fraction of the
/// expanded height-k tree of `u` occupied by copies of `v`, computed by
/// multiplicity DP on the compact DAG without expanding.
pub fn relative_influence(
    g: &LabeledGraph,
    u: usize,
    v: usize,
    k: usize,
    method: InfluenceMethod,
) -> Result<InfluenceReport> {
    if u >= g.n() || v >= g.n() {
        return Err(Error::Argument(format!(
            "vertices {u}, {v} must be below {}",
            g.n()
        )));
    }
    let (numerator, denominator) = match method.tree_k() {
        None => {
            // Row u of Â^k via k sparse vector-matrix products; Â = A + I
            // is symmetric, so left multiplication walks rows.
            let mut x = vec![BigUint::zero(); g.n()];
            x[u] = BigUint::from(1u32);
            for _ in 0..k {
                let mut y = x.clone();
                for (w, yw) in y.iter_mut().enumerate() {
                    for &t in g.neighbors(w) {
                        *yw += &x[t];
                    }
                }
                x = y;
            }
            let den = x.iter().sum::<BigUint>();
            (x[v].clone(), den)
        }
        Some(tree_k) => {
            let dag = build_knt_dag(g, u, k, tree_k)?;
            // Path counts from the root; node ids ascend with depth, so a
            // forward scan sees every parent before its children.
            let mut counts = vec![BigUint::zero(); dag.len()];
            counts[dag.root] = BigUint::from(1u32);
            for p in 0..dag.len() {
                let cp = counts[p].clone();
                if cp.is_zero() {
                    continue;
                }
                for &(c, mult) in dag.children(p) {
                    counts[c] += &cp * BigUint::from(mult);
                }
            }
            let mut num = BigUint::zero();
            let mut den = BigUint::zero();
            for (i, c) in counts.iter().enumerate() {
                if dag.origins[i] == v {
                    num += c;
                }
                den += c;
            }
            (num, den)
        }
    };
    if denominator.is_zero() {
        return Err(Error::Numeric("influence denominator is zero".into()));
    }
    Ok(InfluenceReport { u, v, k, method, numerator, denominator })
}

/// Checks I_unfolding ≤ I_1NT ≤ I_0NT for a pair at exact distance k.
pub fn influence_ordering_check(
    g: &LabeledGraph,
    u: usize,
    v: usize,
    k: usize,
) -> Result<bool> {
    let dist = g.bfs_distances(u)?[v];
    if dist != Some(k) {
        return Err(Error::Argument(format!(
            "distance from {u} to {v} is {dist:?}, not {k}"
        )));
    }
    let unf = relative_influence(g, u, v, k, InfluenceMethod::UnfoldingTree)?.value();
    let one = relative_influence(g, u, v, k, InfluenceMethod::OneNt)?.value();
    let zero = relative_influence(g, u, v, k, InfluenceMethod::ZeroNt)?.value();
    Ok(unf <= one && one <= zero)
}

/// Renders influence reports as `u,v,k,method,num,den` CSV.
pub fn influence_csv(reports: &[InfluenceReport]) -> String {
    let mut out = String::from("u,v,k,method,num,den\n");
    for r in reports {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.u,
            r.v,
            r.k,
            r.method.name(),
            r.numerator,
            r.denominator
        ));
    }
    out
}

/// One distinguishability record for a graph pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DistinguishabilityRow {
    pub pair: usize,
    pub height: usize,
    pub k: usize,
    /// Color refinement separates the color multisets at this iteration.
    pub wl: bool,
    /// Root-code multiset signatures of height-`height` k-NTs differ.
    pub knt: bool,
}

/// Compares every pair under joint color refinement and under k-NT
/// signatures, for each height and k requested.
pub fn expressivity_report(
    pairs: &[(LabeledGraph, LabeledGraph)],
    heights: &[usize],
    ks: &[usize],
) -> Result<Vec<DistinguishabilityRow>> {
    let max_h = heights.iter().copied().max().unwrap_or(0);
    let mut rows = Vec::new();
    for (pi, (a, b)) in pairs.iter().enumerate() {
        // Joint refinement on the disjoint union keeps color ids comparable
        // across the two graphs.
        let (union, offsets) = disjoint_union(&[a, b]);
        let colors = wl_refinement(&union, max_h);
        let wl_at = |h: usize| -> bool {
            let ac: Vec<u32> = (0..a.n()).map(|v| colors[h][offsets[0] + v]).collect();
            let bc: Vec<u32> = (0..b.n()).map(|v| colors[h][offsets[1] + v]).collect();
            color_multiset(&ac) != color_multiset(&bc)
        };
        for &k in ks {
            for &h in heights {
                let mut trees = Vec::with_capacity(a.n() + b.n());
                for v in 0..a.n() {
                    trees.push(build_knt_dag(a, v, h, Some(k))?.with_graph_id(0));
                }
                for v in 0..b.n() {
                    trees.push(build_knt_dag(b, v, h, Some(k))?.with_graph_id(1));
                }
                let merged = merge_trees(&trees, Labeling::Mu)?;
                let groups = vec![
                    (0..a.n()).collect::<Vec<_>>(),
                    (a.n()..a.n() + b.n()).collect::<Vec<_>>(),
                ];
                let sig = multiset_signature(&merged, &groups)?;
                rows.push(DistinguishabilityRow {
                    pair: pi,
                    height: h,
                    k,
                    wl: wl_at(h),
                    knt: sig[0] != sig[1],
                });
            }
        }
    }
    Ok(rows)
}

/// Renders distinguishability rows as `pair,height,k,wl,knt` CSV.
pub fn expressivity_csv(rows: &[DistinguishabilityRow]) -> String {
    let mut out = String::from("pair,height,k,wl,knt\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.pair, r.height, r.k, r.wl, r.knt
        ));
    }
    out
}

/// Per-graph size measurements against the preprocessing bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct SizeAuditRow {
    pub graph: usize,
    pub n: usize,
    /// Directed edge records.
    pub m: usize,
    pub k: Option<usize>,
    /// Maximum compact-DAG edge count over per-vertex trees.
    pub tree_edges: usize,
    pub merge_nodes: usize,
    pub merge_edges: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SizeAudit {
    pub rows: Vec<SizeAuditRow>,
    /// max over graphs of tree_edges / (m * (k+1)).
    pub max_tree_ratio: f64,
    /// max over graphs of (merge_nodes + merge_edges) / (n * m * (k+1)).
    pub max_merge_ratio: f64,
    /// Both ratios are expected to stay at or below this constant.
    pub slack: f64,
}

/// Builds every vertex's height-`height` tree per graph, merges them under
/// attribute labels, and reports sizes relative to the m(k+1) and nm(k+1)
/// bounds. `k` of None audits plain unfolding trees against the k = height
/// budget.
pub fn size_audit(
    coll: &GraphCollection,
    k: Option<usize>,
    height: usize,
    par: Parallelism,
) -> Result<SizeAudit> {
    let rows = try_par_map(par, coll.graphs.len(), |gi| -> Result<SizeAuditRow> {
        let g = &coll.graphs[gi];
        let mut tree_edges = 0usize;
        let mut trees = Vec::with_capacity(g.n());
        for v in 0..g.n() {
            let dag = build_knt_dag(g, v, height, k)?;
            tree_edges = tree_edges.max(dag.num_edges());
            trees.push(dag);
        }
        let (nodes, edges) = if trees.is_empty() {
            (0, 0)
        } else {
            let merged = merge_trees(&trees, Labeling::Mu)?;
            (merged.len(), merged.num_edges())
        };
        Ok(SizeAuditRow {
            graph: gi,
            n: g.n(),
            m: g.num_edge_records(),
            k,
            tree_edges,
            merge_nodes: nodes,
            merge_edges: edges,
        })
    })?;
    let budget = |row: &SizeAuditRow| (row.k.unwrap_or(height) + 1) as f64;
    let ratio = |size: usize, bound: f64| {
        if bound > 0.0 {
            size as f64 / bound
        } else if size == 0 {
            0.0
        } else {
            f64::INFINITY
        }
    };
    let mut max_tree = 0.0f64;
    let mut max_merge = 0.0f64;
    for row in &rows {
        let per_tree = row.m as f64 * budget(row);
        let per_merge = row.n as f64 * per_tree;
        max_tree = max_tree.max(ratio(row.tree_edges, per_tree));
        max_merge = max_merge.max(ratio(row.merge_nodes + row.merge_edges, per_merge));
    }
    Ok(SizeAudit {
        rows,
        max_tree_ratio: max_tree,
        max_merge_ratio: max_merge,
        slack: 1.0,
    })
}

/// Renders audit rows as `graph,n,m,k,tree_edges,merge_nodes,merge_edges`
/// CSV; k prints as `inf` for unfolding trees.
pub fn size_audit_csv(audit: &SizeAudit) -> String {
    let mut out = String::from("graph,n,m,k,tree_edges,merge_nodes,merge_edges\n");
    for r in &audit.rows {
        let k = r.k.map(|k| k.to_string()).unwrap_or_else(|| "inf".into());
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.graph, r.n, r.m, k, r.tree_edges, r.merge_nodes, r.merge_edges
        ));
    }
    out
}
