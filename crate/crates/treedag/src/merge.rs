//! Merging trees into one shared computation DAG.
//!
//! Nodes are created per distinct canonical code, so isomorphic subtrees
//! across all input trees collapse into a single node and sibling merges
//! show up as edge multiplicities. The root map xi points every input tree
//! at the node whose unfolding reproduces it. Height layers L_0..L_H and
//! edge layers E_1..E_H drive the layered matrix form consumed by the
//! neural engine.

use crate::canon::{sort_key_from_pairs, CanonTable, Labeling};
use crate::error::{Error, Result};
use crate::graph::GraphCollection;
use crate::tree::{CompactTreeDag, RootedTree};

/// Shared DAG over a set of trees. Node ids equal canonical codes from the
/// merge's own interning table and children always have smaller ids, so id
/// order is topological.
#[derive(Debug, Clone)]
pub struct MergeDag {
    /// Attribute label per node (under phi: the origin vertex's label).
    pub labels: Vec<u32>,
    /// (graph, vertex) identity per node; present under phi labeling.
    pub origins: Vec<Option<(usize, usize)>>,
    /// Canonical code per node. Within one merge, code == node id; after a
    /// disjoint union codes are reassigned to stay unique.
    pub codes: Vec<u32>,
    children: Vec<Vec<(usize, u32)>>,
    /// Root node of each input tree, in input order.
    pub xi: Vec<usize>,
    pub labeling: Labeling,
    /// Longest path to a leaf, per node.
    pub heights: Vec<usize>,
    /// L_i: nodes of height i, for i = 0..=H. Filled by [`compute_layers`].
    pub layers: Vec<Vec<usize>>,
    /// E_i as (child, parent, multiplicity), index 0 holding E_1. Every DAG
    /// edge appears in exactly one layer: that of its parent endpoint.
    pub edge_layers: Vec<Vec<(usize, usize, u32)>>,
}

impl MergeDag {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn num_edges(&self) -> usize {
        self.children.iter().map(Vec::len).sum()
    }

    /// Sum of edge multiplicities (parallel edges counted fully).
    pub fn total_multiplicity(&self) -> u64 {
        self.children
            .iter()
            .flatten()
            .map(|&(_, m)| m as u64)
            .sum()
    }

    pub fn children(&self, node: usize) -> &[(usize, u32)] {
        &self.children[node]
    }

    pub fn max_height(&self) -> usize {
        self.heights.iter().copied().max().unwrap_or(0)
    }

    pub fn layers_computed(&self) -> bool {
        !self.layers.is_empty() || self.is_empty()
    }
}

/// Merges compact tree DAGs into one shared DAG under the chosen labeling.
///
/// phi (vertex identity) requires all trees to come from the same graph;
/// use [`union_merge_dags`] to combine per-graph merges of a collection.
/// Under mu, trees from different graphs share nodes freely. Graphs whose
/// only meaningful vertex information is a continuous feature vector must
/// not be merged under mu (interning cannot be injective over reals); the
/// matrix exporter rejects that combination.
pub fn merge_trees(trees: &[CompactTreeDag], labeling: Labeling) -> Result<MergeDag> {
    if labeling == Labeling::Phi {
        if let Some(first) = trees.first() {
            if trees.iter().any(|t| t.graph_id != first.graph_id) {
                return Err(Error::Argument(
                    "vertex-identity labeling cannot merge trees of different graphs".into(),
                ));
            }
        }
    }
    let mut table = CanonTable::new();
    let mut dag = MergeDag {
        labels: Vec::new(),
        origins: Vec::new(),
        codes: Vec::new(),
        children: Vec::new(),
        xi: Vec::with_capacity(trees.len()),
        labeling,
        heights: Vec::new(),
        layers: Vec::new(),
        edge_layers: Vec::new(),
    };
    let mut local = Vec::new();
    for tree in trees {
        local.clear();
        local.resize(tree.len(), 0u32);
        // Node ids are (depth, vertex)-sorted, so reverse id order visits
        // children before parents.
        for node in (0..tree.len()).rev() {
            let label = match labeling {
                Labeling::Mu => tree.labels[node],
                Labeling::Phi => tree.origins[node] as u32,
            };
            let pairs: Vec<(u32, u32)> = tree
                .children(node)
                .iter()
                .map(|&(c, m)| (local[c], m))
                .collect();
            let key = sort_key_from_pairs(label, pairs);
            let code = table.get_or_insert(key);
            if code as usize == dag.len() {
                let child_nodes: Vec<(usize, u32)> = table
                    .key(code)
                    .children
                    .iter()
                    .map(|&(c, m)| (c as usize, m))
                    .collect();
                let height = child_nodes
                    .iter()
                    .map(|&(c, _)| dag.heights[c] + 1)
                    .max()
                    .unwrap_or(0);
                dag.labels.push(tree.labels[node]);
                dag.origins.push(match labeling {
                    Labeling::Phi => Some((tree.graph_id, tree.origins[node])),
                    Labeling::Mu => None,
                });
                dag.codes.push(code);
                dag.children.push(child_nodes);
                dag.heights.push(height);
            }
            local[node] = code;
        }
        dag.xi.push(local[tree.root] as usize);
    }
    Ok(dag)
}

/// Fills the height layers L_0..L_H and edge layers E_1..E_H.
pub fn compute_layers(dag: &mut MergeDag) -> Result<()> {
    if dag.is_empty() {
        dag.layers.clear();
        dag.edge_layers.clear();
        return Ok(());
    }
    let h = dag.max_height();
    let mut layers = vec![Vec::new(); h + 1];
    for v in 0..dag.len() {
        layers[dag.heights[v]].push(v);
    }
    let mut edge_layers = vec![Vec::new(); h];
    for (i, layer) in layers.iter().enumerate().skip(1) {
        for &v in layer {
            for &(c, m) in &dag.children[v] {
                if dag.heights[c] >= i {
                    return Err(Error::Structure(format!(
                        "edge {c} -> {v} does not descend in height"
                    )));
                }
                edge_layers[i - 1].push((c, v, m));
            }
        }
    }
    dag.layers = layers;
    dag.edge_layers = edge_layers;
    Ok(())
}

/// Disjoint union of per-graph phi merges: node ids are offset, codes are
/// reassigned to node ids, xi is concatenated in input order.
pub fn union_merge_dags(dags: Vec<MergeDag>) -> Result<MergeDag> {
    if dags.iter().any(|d| d.labeling != Labeling::Phi) {
        return Err(Error::Argument(
            "only phi-labeled merges can be combined by disjoint union".into(),
        ));
    }
    let mut out = MergeDag {
        labels: Vec::new(),
        origins: Vec::new(),
        codes: Vec::new(),
        children: Vec::new(),
        xi: Vec::new(),
        labeling: Labeling::Phi,
        heights: Vec::new(),
        layers: Vec::new(),
        edge_layers: Vec::new(),
    };
    for dag in dags {
        let base = out.len();
        out.labels.extend(dag.labels);
        out.origins.extend(dag.origins);
        out.codes.extend((base..).map(|i| i as u32).take(dag.children.len()));
        out.children.extend(
            dag.children
                .into_iter()
                .map(|ch| ch.into_iter().map(|(c, m)| (c + base, m)).collect()),
        );
        out.heights.extend(dag.heights);
        out.xi.extend(dag.xi.into_iter().map(|r| r + base));
    }
    compute_layers(&mut out)?;
    Ok(out)
}

/// Per-group sorted multisets of root codes; groups index into xi. Graph
/// distinguishability is multiset inequality. Requires mu labeling (codes
/// must be comparable across graphs).
pub fn multiset_signature(dag: &MergeDag, groups: &[Vec<usize>]) -> Result<Vec<Vec<u32>>> {
    if dag.labeling != Labeling::Mu {
        return Err(Error::Argument(
            "signatures need attribute-label canonization (mu)".into(),
        ));
    }
    let mut out = Vec::with_capacity(groups.len());
    for group in groups {
        let mut sig: Vec<u32> = group.iter().map(|&t| dag.codes[dag.xi[t]]).collect();
        sig.sort_unstable();
        out.push(sig);
    }
    Ok(out)
}

/// Number of nodes in the tree expansion rooted at `node`, saturating.
pub fn merge_expansion_size(dag: &MergeDag, node: usize) -> u128 {
    let mut size = vec![0u128; node + 1];
    for v in 0..=node {
        let mut s: u128 = 1;
        for &(c, m) in &dag.children[v] {
            s = s.saturating_add(size[c].saturating_mul(m as u128));
        }
        size[v] = s;
    }
    size[node]
}

/// Expands the tree encoded at `node`, honoring edge multiplicities.
/// Origins are filled from phi identities when present, node ids otherwise.
pub fn expand_merge_node(dag: &MergeDag, node: usize, max_nodes: u64) -> Result<RootedTree> {
    let needed = merge_expansion_size(dag, node);
    if needed > max_nodes as u128 {
        return Err(Error::Budget {
            needed: needed.min(u64::MAX as u128) as u64,
            budget: max_nodes,
        });
    }
    let mut tree = RootedTree {
        labels: Vec::new(),
        origins: Vec::new(),
        children: Vec::new(),
        root: 0,
    };
    fn rec(dag: &MergeDag, v: usize, tree: &mut RootedTree) -> usize {
        let id = tree.labels.len();
        tree.labels.push(dag.labels[v]);
        tree.origins
            .push(dag.origins[v].map(|(_, vert)| vert).unwrap_or(v));
        tree.children.push(Vec::new());
        for &(c, m) in &dag.children[v] {
            for _ in 0..m {
                let child = rec(dag, c, tree);
                tree.children[id].push(child);
            }
        }
        id
    }
    rec(dag, node, &mut tree);
    Ok(tree)
}

/// How node feature rows are built for the matrix export.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureMode {
    /// One-hot of the node's attribute label, width = label_dimension.
    OneHotLabel,
    /// The origin vertex's dense feature row (phi labeling only).
    RawFeatures,
}

/// Sparse layered form of a merge DAG, ready for the forward recurrence.
#[derive(Debug, Clone)]
pub struct LayeredMatrices {
    pub num_nodes: usize,
    /// H: matrices cover layers 1..=H.
    pub height: usize,
    pub feature_dim: usize,
    /// E_i grouped by parent: for every parent in L_i, its (child,
    /// multiplicity) entries. Index 0 holds E_1.
    pub e_rows: Vec<Vec<(usize, Vec<(usize, f64)>)>>,
    /// L_i node lists for i = 0..=H.
    pub l: Vec<Vec<usize>>,
    /// Dense feature row per node.
    pub f: Vec<Vec<f64>>,
    /// Row of each tree root, in xi order.
    pub root_rows: Vec<usize>,
}

impl LayeredMatrices {
    /// E_i as coordinate triplets (row = parent, col = child, value =
    /// multiplicity), sorted by (row, col). `i` is 1-based.
    pub fn triplets(&self, i: usize) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for (parent, entries) in &self.e_rows[i - 1] {
            for &(child, mult) in entries {
                out.push((*parent, child, mult));
            }
        }
        out.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        out
    }
}

/// Exports the layered sparse matrices of a merge DAG.
pub fn export_matrices(
    dag: &MergeDag,
    coll: &GraphCollection,
    mode: FeatureMode,
) -> Result<LayeredMatrices> {
    if !dag.layers_computed() {
        return Err(Error::Argument(
            "compute_layers must run before export_matrices".into(),
        ));
    }
    let f = match mode {
        FeatureMode::OneHotLabel => {
            let dim = coll.label_dimension;
            let mut f = vec![vec![0.0; dim]; dag.len()];
            for v in 0..dag.len() {
                let label = dag.labels[v] as usize;
                if label >= dim {
                    return Err(Error::Data(format!(
                        "node label {label} outside collection label range {dim}"
                    )));
                }
                f[v][label] = 1.0;
            }
            f
        }
        FeatureMode::RawFeatures => {
            if dag.labeling != Labeling::Phi {
                return Err(Error::Argument(
                    "raw feature rows need vertex-identity labeling (phi)".into(),
                ));
            }
            let mut f = Vec::with_capacity(dag.len());
            for v in 0..dag.len() {
                let (g, vert) = dag.origins[v].expect("phi nodes carry origins");
                let graph = coll.graphs.get(g).ok_or_else(|| {
                    Error::Argument(format!("node origin graph {g} outside collection"))
                })?;
                let feats = graph.features().ok_or_else(|| {
                    Error::Argument("raw-features export but graphs carry no features".into())
                })?;
                f.push(feats[vert].clone());
            }
            f
        }
    };
    let feature_dim = f.first().map(|r| r.len()).unwrap_or(0);
    let height = if dag.is_empty() { 0 } else { dag.max_height() };
    let mut e_rows = Vec::with_capacity(height);
    for i in 1..=height {
        let rows: Vec<(usize, Vec<(usize, f64)>)> = dag.layers[i]
            .iter()
            .map(|&v| {
                (
                    v,
                    dag.children(v)
                        .iter()
                        .map(|&(c, m)| (c, m as f64))
                        .collect(),
                )
            })
            .collect();
        e_rows.push(rows);
    }
    Ok(LayeredMatrices {
        num_nodes: dag.len(),
        height,
        feature_dim,
        e_rows,
        l: dag.layers.clone(),
        f,
        root_rows: dag.xi.clone(),
    })
}
