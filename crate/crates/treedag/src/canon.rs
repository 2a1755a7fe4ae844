//! Canonization of labeled rooted trees and DAGs by hash consing.
//!
//! Each distinct (label, child-code multiset) key is interned once and
//! assigned the next dense integer code, so equal codes mean isomorphic
//! labeled rooted trees for as long as one table is in scope. Codes are
//! first-seen order: reruns reproduce them, but only the induced partition
//! is contract; absolute values are not.

use std::collections::HashMap;
use std::io::Write;

use crate::error::{Error, Result};
use crate::tree::{CompactTreeDag, RootedTree};

/// Which per-node label feeds canonization and merging.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Labeling {
    /// Vertex identity: nodes of the same graph representing different
    /// vertices never share a code. Meaningful within one graph only.
    Phi,
    /// Attribute label: nodes share codes across vertices and graphs.
    Mu,
}

/// Interning key: node label plus the sorted (child code, multiplicity)
/// multiset.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CanonKey {
    pub label: u32,
    pub children: Box<[(u32, u32)]>,
}

/// Normalizes (label, child codes) into a key: codes ascending, equal codes
/// collapsed into (code, count) pairs.
pub fn sort_key_build(label: u32, child_codes: &[u32]) -> CanonKey {
    let mut codes = child_codes.to_vec();
    codes.sort_unstable();
    let mut children: Vec<(u32, u32)> = Vec::new();
    for c in codes {
        match children.last_mut() {
            Some((code, count)) if *code == c => *count += 1,
            _ => children.push((c, 1)),
        }
    }
    CanonKey {
        label,
        children: children.into_boxed_slice(),
    }
}

/// Like [`sort_key_build`] but for weighted child codes; equal codes merge
/// by summing multiplicities, so a merged parallel edge and repeated
/// children produce the same key.
pub fn sort_key_from_pairs(label: u32, mut pairs: Vec<(u32, u32)>) -> CanonKey {
    pairs.sort_unstable();
    let mut children: Vec<(u32, u32)> = Vec::new();
    for (c, m) in pairs {
        match children.last_mut() {
            Some((code, count)) if *code == c => *count += m,
            _ => children.push((c, m)),
        }
    }
    CanonKey {
        label,
        children: children.into_boxed_slice(),
    }
}

/// Injective map from keys to dense codes 0..len, in first-insertion order.
#[derive(Debug, Default, Clone)]
pub struct CanonTable {
    map: HashMap<CanonKey, u32>,
    rev: Vec<CanonKey>,
}

impl CanonTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.rev.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rev.is_empty()
    }

    pub fn get_or_insert(&mut self, key: CanonKey) -> u32 {
        if let Some(&code) = self.map.get(&key) {
            return code;
        }
        let code = self.rev.len() as u32;
        self.rev.push(key.clone());
        self.map.insert(key, code);
        code
    }

    pub fn get(&self, key: &CanonKey) -> Option<u32> {
        self.map.get(key).copied()
    }

    /// Key that produced `code`.
    pub fn key(&self, code: u32) -> &CanonKey {
        &self.rev[code as usize]
    }

    /// Debug dump, one JSON object per code in code order.
    pub fn dump_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for (code, key) in self.rev.iter().enumerate() {
            let children: Vec<(u32, u32)> = key.children.to_vec();
            let line = serde_json::json!({
                "code": code,
                "label": key.label,
                "children": children,
            });
            writeln!(w, "{line}")?;
        }
        Ok(())
    }
}

/// Codes and heights for every node of a canonized DAG.
#[derive(Debug, Clone)]
pub struct CanonizedDag {
    pub codes: Vec<u32>,
    pub heights: Vec<usize>,
}

impl CanonizedDag {
    pub fn root_code(&self, root: usize) -> u32 {
        self.codes[root]
    }
}

/// Heights (longest path to a leaf) of a DAG given as children lists;
/// errors on cycles. Nodes with no children have height 0.
pub fn dag_heights(children: &[Vec<(usize, u32)>]) -> Result<Vec<usize>> {
    let n = children.len();
    let mut pending = vec![0usize; n];
    let mut parents = vec![Vec::new(); n];
    for (p, ch) in children.iter().enumerate() {
        pending[p] = ch.len();
        for &(c, _) in ch {
            if c >= n {
                return Err(Error::Structure(format!("child {c} out of range")));
            }
            parents[c].push(p);
        }
    }
    let mut heights = vec![0usize; n];
    let mut queue: Vec<usize> = (0..n).filter(|&v| pending[v] == 0).collect();
    let mut head = 0;
    while head < queue.len() {
        let v = queue[head];
        head += 1;
        for &p in &parents[v] {
            heights[p] = heights[p].max(heights[v] + 1);
            pending[p] -= 1;
            if pending[p] == 0 {
                queue.push(p);
            }
        }
    }
    if queue.len() != n {
        return Err(Error::Structure("cycle in DAG".into()));
    }
    Ok(heights)
}

fn canonize_children<L>(
    labels: L,
    children: &[Vec<(usize, u32)>],
    table: &mut CanonTable,
) -> Result<CanonizedDag>
where
    L: Fn(usize) -> u32,
{
    let heights = dag_heights(children)?;
    // Process by (height, id): children always come first, and insertion
    // order into the table is deterministic.
    let mut order: Vec<usize> = (0..children.len()).collect();
    order.sort_unstable_by_key(|&v| (heights[v], v));
    let mut codes = vec![0u32; children.len()];
    for v in order {
        let pairs: Vec<(u32, u32)> = children[v].iter().map(|&(c, m)| (codes[c], m)).collect();
        codes[v] = table.get_or_insert(sort_key_from_pairs(labels(v), pairs));
    }
    Ok(CanonizedDag { codes, heights })
}

/// Canonizes a compact tree DAG bottom-up under the chosen labeling.
/// Two nodes (in any DAGs canonized against the same table) share a code
/// iff their tree expansions are isomorphic labeled rooted trees.
pub fn canonize_dag(
    dag: &CompactTreeDag,
    labeling: Labeling,
    table: &mut CanonTable,
) -> Result<CanonizedDag> {
    let children: Vec<Vec<(usize, u32)>> = (0..dag.len()).map(|v| dag.children(v).to_vec()).collect();
    match labeling {
        Labeling::Mu => canonize_children(|v| dag.labels[v], &children, table),
        Labeling::Phi => canonize_children(|v| dag.origins[v] as u32, &children, table),
    }
}

/// Canonizes an explicit rooted tree (attribute labels).
pub fn canonize_tree(t: &RootedTree, table: &mut CanonTable) -> Result<CanonizedDag> {
    let children: Vec<Vec<(usize, u32)>> = t
        .children
        .iter()
        .map(|ch| ch.iter().map(|&c| (c, 1)).collect())
        .collect();
    canonize_children(|v| t.labels[v], &children, table)
}

/// Labeled rooted tree isomorphism: equal root codes under a shared fresh
/// table. Linear up to hashing.
pub fn trees_isomorphic(t1: &RootedTree, t2: &RootedTree) -> bool {
    if t1.len() != t2.len() {
        return false;
    }
    let mut table = CanonTable::new();
    let c1 = canonize_tree(t1, &mut table).expect("trees are acyclic");
    let c2 = canonize_tree(t2, &mut table).expect("trees are acyclic");
    c1.codes[t1.root] == c2.codes[t2.root]
}
