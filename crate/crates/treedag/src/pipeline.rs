//! End-to-end preprocessing: build every vertex's trees at heights 0..=H,
//! merge them, export matrices, and serialize/reload the artifacts
//! (dag.json, per-layer coordinate files, manifest, classification tasks).

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::canon::Labeling;
use crate::error::{Error, Result};
use crate::graph::GraphCollection;
use crate::merge::{
    compute_layers, export_matrices, merge_trees, union_merge_dags, FeatureMode, LayeredMatrices,
    MergeDag,
};
use crate::mlp::GraphTask;
use crate::par::{try_par_map, Parallelism};
use crate::tree::build_knt_dag;

#[derive(Debug, Clone, Copy)]
pub struct PreprocessConfig {
    /// Redundancy parameter; None builds plain unfolding trees.
    pub k: Option<usize>,
    /// Maximum tree height H. Trees of every height 0..=H are registered
    /// per vertex so both readout modes have their root taps.
    pub height: usize,
    pub labeling: Labeling,
    pub features: FeatureMode,
    pub par: Parallelism,
}

pub struct Prepared {
    pub dag: MergeDag,
    pub matrices: LayeredMatrices,
    pub tasks: Vec<GraphTask>,
}

/// Tree roster order: graphs ascending, vertices ascending, heights 0..=H.
/// Tree index arithmetic below relies on this layout.
pub fn prepare(coll: &GraphCollection, cfg: &PreprocessConfig) -> Result<Prepared> {
    let stride = cfg.height + 1;
    let per_graph = try_par_map(cfg.par, coll.graphs.len(), |gi| -> Result<Vec<_>> {
        let g = &coll.graphs[gi];
        let mut out = Vec::with_capacity(g.n() * stride);
        for v in 0..g.n() {
            for h in 0..stride {
                out.push(build_knt_dag(g, v, h, cfg.k)?.with_graph_id(gi));
            }
        }
        Ok(out)
    })?;
    let mut dag = match cfg.labeling {
        Labeling::Mu => {
            let all: Vec<_> = per_graph.into_iter().flatten().collect();
            merge_trees(&all, Labeling::Mu)?
        }
        Labeling::Phi => {
            let merged = try_par_map(cfg.par, per_graph.len(), |gi| {
                merge_trees(&per_graph[gi], Labeling::Phi)
            })?;
            union_merge_dags(merged)?
        }
    };
    if !dag.layers_computed() {
        compute_layers(&mut dag)?;
    }
    let matrices = export_matrices(&dag, coll, cfg.features)?;
    let mut tasks = Vec::with_capacity(coll.graphs.len());
    let mut base = 0usize;
    for g in &coll.graphs {
        let mut roots_by_height = vec![Vec::with_capacity(g.n()); stride];
        for v in 0..g.n() {
            for (h, rows) in roots_by_height.iter_mut().enumerate() {
                rows.push(dag.xi[base + v * stride + h]);
            }
        }
        base += g.n() * stride;
        tasks.push(GraphTask { class: g.class(), roots_by_height });
    }
    Ok(Prepared { dag, matrices, tasks })
}

/// (graph, vertex, height) -> node, for vertex-identity merges where that
/// triple is unique (unfolding DAGs). Collisions mean the DAG does not
/// have per-vertex-per-height node identity and are rejected.
pub fn origin_height_map(dag: &MergeDag) -> Result<HashMap<(usize, usize, usize), usize>> {
    let mut map = HashMap::new();
    for id in 0..dag.len() {
        let (g, v) = dag.origins[id].ok_or_else(|| {
            Error::Argument("origin map needs vertex-identity labeling".into())
        })?;
        let h = dag.heights[id];
        if map.insert((g, v, h), id).is_some() {
            return Err(Error::Structure(format!(
                "origin ({g},{v}) occurs twice at height {h}"
            )));
        }
    }
    Ok(map)
}

/// Per-node anchor one height down with the same origin vertex, used to
/// run the layered recurrence with plain message-passing semantics.
pub fn gin_anchor_map(dag: &MergeDag) -> Result<Vec<Option<usize>>> {
    let map = origin_height_map(dag)?;
    Ok((0..dag.len())
        .map(|id| {
            let (g, v) = dag.origins[id].expect("checked by origin_height_map");
            match dag.heights[id] {
                0 => None,
                h => map.get(&(g, v, h - 1)).copied(),
            }
        })
        .collect())
}

#[derive(Serialize, Deserialize)]
struct DagJsonNode {
    id: usize,
    label: u32,
    origin_graph: Option<usize>,
    origin_vertex: Option<usize>,
    height: usize,
    code: u32,
}

#[derive(Serialize, Deserialize)]
struct DagJson {
    nodes: Vec<DagJsonNode>,
    /// [child, parent, multiplicity] triples.
    edges: Vec<(usize, usize, u32)>,
    roots: BTreeMap<String, usize>,
}

pub fn write_dag_json<W: Write>(dag: &MergeDag, w: W) -> Result<()> {
    let nodes = (0..dag.len())
        .map(|id| DagJsonNode {
            id,
            label: dag.labels[id],
            origin_graph: dag.origins[id].map(|(g, _)| g),
            origin_vertex: dag.origins[id].map(|(_, v)| v),
            height: dag.heights[id],
            code: dag.codes[id],
        })
        .collect();
    let mut edges = Vec::with_capacity(dag.num_edges());
    for parent in 0..dag.len() {
        for &(child, mult) in dag.children(parent) {
            edges.push((child, parent, mult));
        }
    }
    let roots = dag
        .xi
        .iter()
        .enumerate()
        .map(|(i, &node)| (i.to_string(), node))
        .collect();
    serde_json::to_writer(w, &DagJson { nodes, edges, roots })?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct MatrixManifest {
    height: usize,
    nodes: usize,
    feature_dim: usize,
}

fn write_coo<W: Write>(mut w: W, triplets: &[(usize, usize, f64)]) -> Result<()> {
    for &(row, col, value) in triplets {
        writeln!(w, "{row} {col} {value}")?;
    }
    Ok(())
}

fn read_coo<R: Read>(r: R) -> Result<Vec<(usize, usize, f64)>> {
    let mut out = Vec::new();
    for (ln, line) in BufReader::new(r).lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut it = line.split_whitespace();
        let (Some(row), Some(col), Some(value)) = (it.next(), it.next(), it.next()) else {
            return Err(Error::Parse {
                line: ln + 1,
                msg: "expected `row col value`".into(),
            });
        };
        let bad = |what: &str| Error::Parse { line: ln + 1, msg: format!("bad {what}") };
        out.push((
            row.parse().map_err(|_| bad("row"))?,
            col.parse().map_err(|_| bad("column"))?,
            value.parse().map_err(|_| bad("value"))?,
        ));
    }
    Ok(out)
}

/// Writes dag.json, manifest.json, f.coo, e_1.coo..e_H.coo, and tasks.json
/// into `dir`.
pub fn write_prepared(dir: &Path, prepared: &Prepared) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_dag_json(&prepared.dag, std::fs::File::create(dir.join("dag.json"))?)?;
    let m = &prepared.matrices;
    let manifest = MatrixManifest {
        height: m.height,
        nodes: m.num_nodes,
        feature_dim: m.feature_dim,
    };
    serde_json::to_writer(std::fs::File::create(dir.join("manifest.json"))?, &manifest)?;
    let mut feats = Vec::new();
    for (row, f) in m.f.iter().enumerate() {
        for (col, &value) in f.iter().enumerate() {
            if value != 0.0 {
                feats.push((row, col, value));
            }
        }
    }
    write_coo(std::fs::File::create(dir.join("f.coo"))?, &feats)?;
    for i in 1..=m.height {
        write_coo(
            std::fs::File::create(dir.join(format!("e_{i}.coo")))?,
            &m.triplets(i),
        )?;
    }
    serde_json::to_writer(
        std::fs::File::create(dir.join("tasks.json"))?,
        &prepared.tasks,
    )?;
    Ok(())
}

/// Reloads matrices and tasks written by [`write_prepared`]. Layer
/// membership comes from dag.json heights; edge rows come from the
/// coordinate files and are cross-checked against the layers.
pub fn load_prepared(dir: &Path) -> Result<(LayeredMatrices, Vec<GraphTask>)> {
    let manifest: MatrixManifest =
        serde_json::from_reader(std::fs::File::open(dir.join("manifest.json"))?)?;
    let dag: DagJson = serde_json::from_reader(std::fs::File::open(dir.join("dag.json"))?)?;
    if dag.nodes.len() != manifest.nodes {
        return Err(Error::Data(format!(
            "manifest says {} nodes, dag.json has {}",
            manifest.nodes,
            dag.nodes.len()
        )));
    }
    let mut l = vec![Vec::new(); manifest.height + 1];
    for node in &dag.nodes {
        let layer = l.get_mut(node.height).ok_or_else(|| {
            Error::Data(format!(
                "node {} has height {} beyond manifest height {}",
                node.id, node.height, manifest.height
            ))
        })?;
        layer.push(node.id);
    }
    for layer in &mut l {
        layer.sort_unstable();
    }

    let mut f = vec![vec![0.0; manifest.feature_dim]; manifest.nodes];
    for (row, col, value) in read_coo(std::fs::File::open(dir.join("f.coo"))?)? {
        let cell = f
            .get_mut(row)
            .and_then(|r| r.get_mut(col))
            .ok_or_else(|| Error::Data(format!("feature entry ({row},{col}) out of range")))?;
        *cell = value;
    }

    let mut e_rows = Vec::with_capacity(manifest.height);
    for i in 1..=manifest.height {
        let triplets = read_coo(std::fs::File::open(dir.join(format!("e_{i}.coo")))?)?;
        let mut rows: Vec<(usize, Vec<(usize, f64)>)> = Vec::new();
        for (row, col, value) in triplets {
            if row >= manifest.nodes || col >= manifest.nodes {
                return Err(Error::Data(format!(
                    "edge entry ({row},{col}) out of range in layer {i}"
                )));
            }
            match rows.last_mut() {
                Some((parent, children)) if *parent == row => children.push((col, value)),
                _ => rows.push((row, vec![(col, value)])),
            }
        }
        let parents: Vec<usize> = rows.iter().map(|(p, _)| *p).collect();
        if parents != l[i] {
            return Err(Error::Data(format!(
                "layer {i} edge rows do not cover the height-{i} nodes"
            )));
        }
        e_rows.push(rows);
    }

    let mut root_rows = vec![0usize; dag.roots.len()];
    for (key, &node) in &dag.roots {
        let idx: usize = key
            .parse()
            .map_err(|_| Error::Data(format!("root key '{key}' is not a tree index")))?;
        let slot = root_rows
            .get_mut(idx)
            .ok_or_else(|| Error::Data(format!("root index {idx} out of range")))?;
        *slot = node;
    }

    let tasks: Vec<GraphTask> =
        serde_json::from_reader(std::fs::File::open(dir.join("tasks.json"))?)?;
    Ok((
        LayeredMatrices {
            num_nodes: manifest.nodes,
            height: manifest.height,
            feature_dim: manifest.feature_dim,
            e_rows,
            l,
            f,
            root_rows,
        },
        tasks,
    ))
}
