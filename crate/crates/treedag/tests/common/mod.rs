//! Independent oracles for the integration suites. Everything here is
//! deliberately naive: explicit tree expansion, backtracking bijection
//! search, literal definition-chasing. Slow is fine; different-by-design
//! from the code under test.
//!
//! Each test binary links this module separately, so helpers unused in one
//! binary are expected.
#![allow(dead_code)]

use rand::Rng;

use treedag::graph::LabeledGraph;
use treedag::tree::RootedTree;

/// Rooted-tree isomorphism by recursive backtracking over child matchings.
pub fn rooted_iso(a: &RootedTree, b: &RootedTree) -> bool {
    if a.len() != b.len() {
        return false;
    }
    fn nodes_iso(a: &RootedTree, x: usize, b: &RootedTree, y: usize) -> bool {
        if a.labels[x] != b.labels[y] || a.children[x].len() != b.children[y].len() {
            return false;
        }
        let ca = &a.children[x];
        let cb = &b.children[y];
        let mut used = vec![false; cb.len()];
        fn assign(
            a: &RootedTree,
            ca: &[usize],
            b: &RootedTree,
            cb: &[usize],
            used: &mut [bool],
            i: usize,
        ) -> bool {
            if i == ca.len() {
                return true;
            }
            for j in 0..cb.len() {
                if !used[j] && nodes_iso(a, ca[i], b, cb[j]) {
                    used[j] = true;
                    if assign(a, ca, b, cb, used, i + 1) {
                        return true;
                    }
                    used[j] = false;
                }
            }
            false
        }
        assign(a, ca, b, cb, &mut used, 0)
    }
    nodes_iso(a, a.root, b, b.root)
}

/// Uniform random parent-array tree: node i > 0 hangs under a uniform
/// earlier node.
pub fn random_rooted_tree<R: Rng>(rng: &mut R, max_nodes: usize, num_labels: u32) -> RootedTree {
    let n = rng.gen_range(1..=max_nodes);
    let mut parents = vec![None; n];
    for (i, p) in parents.iter_mut().enumerate().skip(1) {
        *p = Some(rng.gen_range(0..i));
    }
    let labels = (0..n).map(|_| rng.gen_range(0..num_labels)).collect();
    RootedTree::from_parents(&parents, labels).unwrap()
}

/// Structure-preserving relabeling of node ids plus shuffled child order:
/// guaranteed isomorphic to the input.
pub fn shuffled_copy<R: Rng>(rng: &mut R, t: &RootedTree) -> RootedTree {
    let n = t.len();
    let mut perm: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        perm.swap(i, j);
    }
    let mut labels = vec![0; n];
    let mut children = vec![Vec::new(); n];
    for v in 0..n {
        labels[perm[v]] = t.labels[v];
        let mut kids: Vec<usize> = t.children[v].iter().map(|&c| perm[c]).collect();
        for i in (1..kids.len()).rev() {
            let j = rng.gen_range(0..=i);
            kids.swap(i, j);
        }
        children[perm[v]] = kids;
    }
    RootedTree {
        labels,
        origins: (0..n).collect(),
        children,
        root: perm[t.root],
    }
}

/// Every parent array on n nodes (node 0 is the root); enumerates all
/// rooted trees on ordered vertices, covering each shape many times.
pub fn all_parent_arrays(n: usize) -> Vec<Vec<Option<usize>>> {
    let mut out: Vec<Vec<Option<usize>>> = vec![vec![None]];
    for i in 1..n {
        let mut next = Vec::with_capacity(out.len() * i);
        for prefix in &out {
            for p in 0..i {
                let mut arr = prefix.clone();
                arr.push(Some(p));
                next.push(arr);
            }
        }
        out = next;
    }
    out
}

/// Explicit unfolding tree of height `h` rooted at `v`, by recursive
/// neighbor expansion. Exponential; callers keep h small.
pub fn explicit_unfolding(g: &LabeledGraph, v: usize, h: usize) -> RootedTree {
    let mut t = RootedTree {
        labels: vec![g.label(v)],
        origins: vec![v],
        children: vec![Vec::new()],
        root: 0,
    };
    let mut depths = vec![0usize];
    fn expand(
        g: &LabeledGraph,
        t: &mut RootedTree,
        depths: &mut Vec<usize>,
        node: usize,
        h: usize,
    ) {
        if depths[node] == h {
            return;
        }
        for &u in g.neighbors(t.origins[node]) {
            let id = t.len();
            t.labels.push(g.label(u));
            t.origins.push(u);
            t.children.push(Vec::new());
            t.children[node].push(id);
            depths.push(depths[node] + 1);
            expand(g, t, depths, id, h);
        }
    }
    expand(g, &mut t, &mut depths, 0, h);
    t
}

/// Literal redundancy pruning: keep a node iff its depth is at most
/// dist(root vertex, origin) + k; failing nodes drop their whole subtree.
pub fn prune_to_knt(g: &LabeledGraph, t: &RootedTree, k: usize) -> RootedTree {
    let dist = g.bfs_distances(t.origins[t.root]).unwrap();
    let mut out = RootedTree {
        labels: vec![t.labels[t.root]],
        origins: vec![t.origins[t.root]],
        children: vec![Vec::new()],
        root: 0,
    };
    fn copy(
        t: &RootedTree,
        dist: &[Option<usize>],
        k: usize,
        out: &mut RootedTree,
        node: usize,
        depth: usize,
        target: usize,
    ) {
        for &c in &t.children[node] {
            let keep = match dist[t.origins[c]] {
                Some(d) => depth + 1 <= d + k,
                None => false,
            };
            if !keep {
                continue;
            }
            let id = out.len();
            out.labels.push(t.labels[c]);
            out.origins.push(t.origins[c]);
            out.children.push(Vec::new());
            out.children[target].push(id);
            copy(t, dist, k, out, c, depth + 1, id);
        }
    }
    copy(t, &dist, k, &mut out, t.root, 0, 0);
    out
}

/// (occurrences of origin, total nodes) in an explicit tree.
pub fn origin_share(t: &RootedTree, origin: usize) -> (u64, u64) {
    let hits = t.origins.iter().filter(|&&o| o == origin).count() as u64;
    (hits, t.len() as u64)
}
