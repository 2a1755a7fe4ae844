//! Compact per-root DAG encodings of unfolding trees and k-redundant
//! neighborhood trees.
//!
//! A node of the compact DAG is a (vertex, depth) pair; the tree it encodes
//! is recovered by walking child edges from the root and duplicating shared
//! nodes. Keeping one node per (vertex, depth) pair is what avoids the
//! exponential blowup of explicit unfolding trees.

use crate::error::{Error, Result};
use crate::graph::LabeledGraph;

/// Compact DAG for one root vertex. Nodes are stored as parallel arrays,
/// ordered by (depth, origin vertex); the root is node 0.
///
/// A (vertex, depth) pair is present iff some walk of length `depth` from
/// the root reaches the vertex while staying within the redundancy budget:
/// depth <= dist(root, vertex) + k. The walk condition matters: grid slots
/// that pass the depth bound but are unreachable (walk parity on bipartite
/// graphs) encode no tree node and are not materialized.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompactTreeDag {
    /// Graph vertex each DAG node stands for (the map phi).
    pub origins: Vec<usize>,
    pub depths: Vec<usize>,
    /// Attribute label of the origin vertex.
    pub labels: Vec<u32>,
    /// (parent, child, multiplicity); children sit one depth below parents.
    /// Multiplicity is always 1 at construction; parallel edges arise only
    /// by merging isomorphic siblings later.
    pub child_edges: Vec<(usize, usize, u32)>,
    children: Vec<Vec<(usize, u32)>>,
    pub root: usize,
    /// Tree height this DAG was built for.
    pub height: usize,
    /// Redundancy parameter; `None` encodes the unfolding tree (k = infinity).
    pub k: Option<usize>,
    pub source_root_vertex: usize,
    /// Collection index of the source graph; 0 for ad hoc builds. Merging
    /// with vertex-identity labeling refuses mixed graph ids.
    pub graph_id: usize,
}

impl CompactTreeDag {
    pub fn len(&self) -> usize {
        self.origins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.origins.is_empty()
    }

    pub fn num_edges(&self) -> usize {
        self.child_edges.len()
    }

    /// Children of `node` as (child, multiplicity), sorted by child id.
    pub fn children(&self, node: usize) -> &[(usize, u32)] {
        &self.children[node]
    }

    pub fn with_graph_id(mut self, id: usize) -> Self {
        self.graph_id = id;
        self
    }

    /// Re-encodes an explicit rooted tree as a compact DAG (no sharing).
    /// Origins keep the tree's own node ids, so vertex-identity labeling
    /// over a single tree is the identity.
    pub fn from_rooted_tree(t: &RootedTree) -> Self {
        let mut depth = vec![usize::MAX; t.len()];
        depth[t.root] = 0;
        let mut order = vec![t.root];
        let mut head = 0;
        while head < order.len() {
            let v = order[head];
            head += 1;
            for &c in &t.children[v] {
                depth[c] = depth[v] + 1;
                order.push(c);
            }
        }
        // New ids in (depth, old id) order; the root stays node 0.
        let mut by_depth: Vec<usize> = (0..t.len()).collect();
        by_depth.sort_unstable_by_key(|&v| (depth[v], v));
        let mut new_id = vec![0usize; t.len()];
        for (id, &old) in by_depth.iter().enumerate() {
            new_id[old] = id;
        }
        let mut child_edges = Vec::new();
        for old in 0..t.len() {
            for &c in &t.children[old] {
                child_edges.push((new_id[old], new_id[c], 1));
            }
        }
        child_edges.sort_unstable();
        let height = by_depth.last().map(|&v| depth[v]).unwrap_or(0);
        let mut dag = CompactTreeDag {
            origins: by_depth.iter().map(|&v| t.origins[v]).collect(),
            depths: by_depth.iter().map(|&v| depth[v]).collect(),
            labels: by_depth.iter().map(|&v| t.labels[v]).collect(),
            children: vec![Vec::new(); t.len()],
            child_edges,
            root: 0,
            height,
            k: None,
            source_root_vertex: t.origins[t.root],
            graph_id: 0,
        };
        for &(p, c, m) in &dag.child_edges {
            dag.children[p].push((c, m));
        }
        dag
    }
}

/// Builds the compact DAG of the k-redundant neighborhood tree of `v`
/// (unfolding tree for `k = None`), truncated at `height`.
///
/// One BFS fixes shortest-path distances; a second sweep in (vertex, depth)
/// product space then expands only reachable slots with
/// depth <= dist + k. Cost is O(|E| * (k+1)) plus the initial BFS.
pub fn build_knt_dag(
    g: &LabeledGraph,
    v: usize,
    height: usize,
    k: Option<usize>,
) -> Result<CompactTreeDag> {
    if v >= g.n() {
        return Err(Error::Argument(format!(
            "root vertex {v} out of range for n = {}",
            g.n()
        )));
    }
    let dist = g.bfs_distances(v)?;
    let admissible = |u: usize, d: usize| -> bool {
        match (k, dist[u]) {
            (None, _) => d <= height,
            (Some(k), Some(du)) => d <= height && d <= du + k,
            (Some(_), None) => false,
        }
    };

    // Levels of alive vertices, each sorted ascending.
    let mut levels: Vec<Vec<usize>> = vec![vec![v]];
    let mut alive = vec![false; g.n()];
    for d in 0..height {
        for &w in &levels[d] {
            for &u in g.neighbors(w) {
                if admissible(u, d + 1) {
                    alive[u] = true;
                }
            }
        }
        let next: Vec<usize> = (0..g.n()).filter(|&u| alive[u]).collect();
        for &u in &next {
            alive[u] = false;
        }
        if next.is_empty() {
            break;
        }
        levels.push(next);
    }

    let mut offsets = Vec::with_capacity(levels.len() + 1);
    let mut total = 0usize;
    for level in &levels {
        offsets.push(total);
        total += level.len();
    }
    offsets.push(total);
    let id_of = |level: &[usize], base: usize, u: usize| -> Option<usize> {
        level.binary_search(&u).ok().map(|r| base + r)
    };

    let mut origins = Vec::with_capacity(total);
    let mut depths = Vec::with_capacity(total);
    let mut labels = Vec::with_capacity(total);
    let mut child_edges = Vec::new();
    let mut children = vec![Vec::new(); total];
    for (d, level) in levels.iter().enumerate() {
        for &w in level {
            origins.push(w);
            depths.push(d);
            labels.push(g.label(w));
        }
        if d + 1 >= levels.len() {
            continue;
        }
        let (next, next_base) = (&levels[d + 1], offsets[d + 1]);
        for (r, &w) in level.iter().enumerate() {
            let parent = offsets[d] + r;
            for &u in g.neighbors(w) {
                if let Some(child) = id_of(next, next_base, u) {
                    child_edges.push((parent, child, 1));
                    children[parent].push((child, 1));
                }
            }
        }
    }

    Ok(CompactTreeDag {
        origins,
        depths,
        labels,
        child_edges,
        children,
        root: 0,
        height,
        k,
        source_root_vertex: v,
        graph_id: 0,
    })
}

/// Explicit rooted tree with per-node labels and origin vertices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RootedTree {
    pub labels: Vec<u32>,
    pub origins: Vec<usize>,
    pub children: Vec<Vec<usize>>,
    pub root: usize,
}

impl RootedTree {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Builds a tree from a parent array (`None` marks the root); origins
    /// default to node ids.
    pub fn from_parents(parents: &[Option<usize>], labels: Vec<u32>) -> Result<Self> {
        if parents.len() != labels.len() {
            return Err(Error::Data("parents/labels length mismatch".into()));
        }
        let mut children = vec![Vec::new(); parents.len()];
        let mut root = None;
        for (v, p) in parents.iter().enumerate() {
            match p {
                Some(p) => children[*p].push(v),
                None => {
                    if root.replace(v).is_some() {
                        return Err(Error::Data("two roots in parent array".into()));
                    }
                }
            }
        }
        let root = root.ok_or_else(|| Error::Data("no root in parent array".into()))?;
        Ok(RootedTree {
            origins: (0..labels.len()).collect(),
            labels,
            children,
            root,
        })
    }
}

/// Number of nodes the tree expansion of `dag` would have, saturating.
pub fn expansion_size(dag: &CompactTreeDag) -> u128 {
    // Children precede parents in no particular order here, but depths do:
    // a node's expansion count depends only on strictly deeper nodes.
    let mut size = vec![0u128; dag.len()];
    let mut order: Vec<usize> = (0..dag.len()).collect();
    order.sort_unstable_by_key(|&i| std::cmp::Reverse(dag.depths[i]));
    for i in order {
        let mut s: u128 = 1;
        for &(c, m) in dag.children(i) {
            s = s.saturating_add(size[c].saturating_mul(m as u128));
        }
        size[i] = s;
    }
    size[dag.root]
}

/// Unfolds the compact DAG into an explicit tree, duplicating shared
/// nodes. Fails with a budget error instead of materializing an expansion
/// larger than `max_nodes`.
pub fn expand_to_tree(dag: &CompactTreeDag, max_nodes: u64) -> Result<RootedTree> {
    let needed = expansion_size(dag);
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
    expand_rec(dag, dag.root, &mut tree);
    Ok(tree)
}

fn expand_rec(dag: &CompactTreeDag, node: usize, tree: &mut RootedTree) -> usize {
    let id = tree.labels.len();
    tree.labels.push(dag.labels[node]);
    tree.origins.push(dag.origins[node]);
    tree.children.push(Vec::new());
    for &(c, m) in dag.children(node) {
        for _ in 0..m {
            let child_id = expand_rec(dag, c, tree);
            tree.children[id].push(child_id);
        }
    }
    id
}
