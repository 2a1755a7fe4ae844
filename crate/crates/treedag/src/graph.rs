//! Labeled graphs, file I/O, and Weisfeiler-Leman color refinement.
//!
//! Undirected graphs are stored as symmetric sets of directed edge records;
//! all neighbor queries go through the in-neighbor lists, matching the
//! in-tree orientation used by the tree builder.

use std::collections::HashMap;
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A graph with discrete vertex labels and optional dense feature rows.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledGraph {
    n: usize,
    /// Directed edge records, sorted and deduplicated. For undirected graphs
    /// both orientations are present.
    edges: Vec<(usize, usize)>,
    undirected: bool,
    /// adj[v] = sorted in-neighbors of v.
    adj: Vec<Vec<usize>>,
    labels: Vec<u32>,
    features: Option<Vec<Vec<f64>>>,
    class: Option<u32>,
}

impl LabeledGraph {
    /// Builds an undirected graph from unordered endpoint pairs; both
    /// orientations are stored. Self-loops are rejected.
    pub fn new_undirected(n: usize, pairs: &[(usize, usize)], labels: Vec<u32>) -> Result<Self> {
        let mut edges = Vec::with_capacity(pairs.len() * 2);
        for &(u, v) in pairs {
            if u >= n || v >= n {
                return Err(Error::Data(format!(
                    "edge ({u}, {v}) has an endpoint >= n = {n}"
                )));
            }
            if u == v {
                return Err(Error::Data(format!("self-loop at vertex {u}")));
            }
            edges.push((u, v));
            edges.push((v, u));
        }
        edges.sort_unstable();
        edges.dedup();
        Self::from_records(n, edges, true, labels)
    }

    fn from_records(
        n: usize,
        edges: Vec<(usize, usize)>,
        undirected: bool,
        labels: Vec<u32>,
    ) -> Result<Self> {
        if labels.len() != n {
            return Err(Error::Data(format!(
                "{} labels for {} vertices",
                labels.len(),
                n
            )));
        }
        let mut adj = vec![Vec::new(); n];
        for &(u, v) in &edges {
            adj[v].push(u);
        }
        Ok(LabeledGraph {
            n,
            edges,
            undirected,
            adj,
            labels,
            features: None,
            class: None,
        })
    }

    /// Attaches per-vertex feature rows; every row must have the same width.
    pub fn with_features(mut self, features: Vec<Vec<f64>>) -> Result<Self> {
        if features.len() != self.n {
            return Err(Error::Data(format!(
                "{} feature rows for {} vertices",
                features.len(),
                self.n
            )));
        }
        if let Some(first) = features.first() {
            let d = first.len();
            if d == 0 || features.iter().any(|row| row.len() != d) {
                return Err(Error::Data("ragged or empty feature rows".into()));
            }
        }
        self.features = Some(features);
        Ok(self)
    }

    pub fn with_class(mut self, class: u32) -> Self {
        self.class = Some(class);
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of directed edge records (twice the undirected edge count).
    pub fn num_edge_records(&self) -> usize {
        self.edges.len()
    }

    pub fn edge_records(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn is_undirected(&self) -> bool {
        self.undirected
    }

    /// Sorted in-neighbors of `v`.
    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adj[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    pub fn label(&self, v: usize) -> u32 {
        self.labels[v]
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn features(&self) -> Option<&Vec<Vec<f64>>> {
        self.features.as_ref()
    }

    pub fn class(&self) -> Option<u32> {
        self.class
    }

    /// BFS distances from `v`; `None` marks unreachable vertices.
    pub fn bfs_distances(&self, v: usize) -> Result<Vec<Option<usize>>> {
        if v >= self.n {
            return Err(Error::Argument(format!(
                "vertex {v} out of range for n = {}",
                self.n
            )));
        }
        let mut dist = vec![None; self.n];
        dist[v] = Some(0);
        let mut frontier = vec![v];
        let mut next = Vec::new();
        let mut d = 0usize;
        while !frontier.is_empty() {
            d += 1;
            for &w in &frontier {
                for &u in self.neighbors(w) {
                    if dist[u].is_none() {
                        dist[u] = Some(d);
                        next.push(u);
                    }
                }
            }
            std::mem::swap(&mut frontier, &mut next);
            next.clear();
        }
        Ok(dist)
    }

    pub fn distance(&self, u: usize, v: usize) -> Result<Option<usize>> {
        Ok(self.bfs_distances(u)?[v])
    }

    pub fn is_connected(&self) -> bool {
        if self.n == 0 {
            return true;
        }
        self.bfs_distances(0)
            .map(|d| d.iter().all(|x| x.is_some()))
            .unwrap_or(false)
    }
}

/// Disjoint union of graphs with vertex ids offset in input order.
/// Returns the union and the id offset of each input graph.
pub fn disjoint_union(graphs: &[&LabeledGraph]) -> (LabeledGraph, Vec<usize>) {
    let mut offsets = Vec::with_capacity(graphs.len());
    let mut n = 0usize;
    let mut pairs = Vec::new();
    let mut labels = Vec::new();
    for g in graphs {
        offsets.push(n);
        for &(u, v) in g.edge_records() {
            if u < v {
                pairs.push((n + u, n + v));
            }
        }
        labels.extend_from_slice(g.labels());
        n += g.n();
    }
    let union =
        LabeledGraph::new_undirected(n, &pairs, labels).expect("union of valid graphs is valid");
    (union, offsets)
}

/// An ordered list of graphs with labels re-indexed densely across the
/// collection (in first-seen scan order), so one-hot widths agree.
#[derive(Debug, Clone)]
pub struct GraphCollection {
    pub graphs: Vec<LabeledGraph>,
    pub name: String,
    /// Number of distinct vertex labels across the collection.
    pub label_dimension: usize,
}

impl GraphCollection {
    pub fn new(name: impl Into<String>, mut graphs: Vec<LabeledGraph>) -> Result<Self> {
        let mut remap: HashMap<u32, u32> = HashMap::new();
        for g in &graphs {
            for &l in g.labels() {
                let next = remap.len() as u32;
                remap.entry(l).or_insert(next);
            }
        }
        for g in &mut graphs {
            for l in &mut g.labels {
                *l = remap[l];
            }
        }
        let with_features = graphs.iter().filter(|g| g.features.is_some()).count();
        if with_features != 0 && with_features != graphs.len() {
            return Err(Error::Data(
                "some graphs have feature rows and some do not".into(),
            ));
        }
        if with_features > 0 {
            let dims: Vec<usize> = graphs
                .iter()
                .filter_map(|g| g.features().and_then(|f| f.first()).map(|r| r.len()))
                .collect();
            if dims.windows(2).any(|w| w[0] != w[1]) {
                return Err(Error::Data(
                    "feature dimension differs across the collection".into(),
                ));
            }
        }
        Ok(GraphCollection {
            label_dimension: remap.len().max(1),
            graphs,
            name: name.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    /// Number of classes implied by the graph targets (max class + 1).
    pub fn num_classes(&self) -> usize {
        self.graphs
            .iter()
            .filter_map(|g| g.class())
            .max()
            .map(|c| c as usize + 1)
            .unwrap_or(0)
    }

    pub fn feature_dimension(&self) -> Option<usize> {
        self.graphs
            .first()
            .and_then(|g| g.features())
            .and_then(|f| f.first())
            .map(|r| r.len())
    }
}

/// On-disk graph formats accepted by [`parse_graph_file`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphFormat {
    /// Sections of `n m d`, n label/feature lines, m `u v` lines.
    EdgeList,
    /// JSON array of `{num_vertices, edges, labels, features, class}`.
    JsonCollection,
}

#[derive(Debug, Serialize, Deserialize)]
struct GraphJson {
    num_vertices: usize,
    edges: Vec<(usize, usize)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    features: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    class: Option<u32>,
}

/// Parses a graph file into a collection. Labels are re-indexed densely and
/// undirected edges are stored in both directions.
pub fn parse_graph_file<R: BufRead>(reader: R, format: GraphFormat) -> Result<GraphCollection> {
    match format {
        GraphFormat::EdgeList => parse_edge_list(reader),
        GraphFormat::JsonCollection => parse_json_collection(reader),
    }
}

fn parse_edge_list<R: BufRead>(reader: R) -> Result<GraphCollection> {
    // Significant lines only; comments (#) and blanks are skipped but line
    // numbers in errors refer to the original file.
    let mut lines = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let content = line.split('#').next().unwrap_or("").trim().to_string();
        if !content.is_empty() {
            lines.push((idx + 1, content));
        }
    }
    let parse_err = |line: usize, msg: &str| Error::Parse {
        line,
        msg: msg.to_string(),
    };

    let mut graphs = Vec::new();
    let mut pos = 0usize;
    while pos < lines.len() {
        let (lineno, header) = &lines[pos];
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(parse_err(*lineno, "expected header `n m d`"));
        }
        let n: usize = fields[0]
            .parse()
            .map_err(|_| parse_err(*lineno, "bad vertex count"))?;
        let m: usize = fields[1]
            .parse()
            .map_err(|_| parse_err(*lineno, "bad edge count"))?;
        let d: usize = fields[2]
            .parse()
            .map_err(|_| parse_err(*lineno, "bad feature dimension"))?;
        pos += 1;

        let mut labels = vec![0u32; n];
        let mut features = if d > 0 {
            Some(Vec::with_capacity(n))
        } else {
            None
        };
        for v in 0..n {
            let (lineno, line) = lines
                .get(pos)
                .ok_or_else(|| parse_err(lines[pos - 1].0, "unexpected end of vertex lines"))?;
            if d == 0 {
                labels[v] = line
                    .parse()
                    .map_err(|_| parse_err(*lineno, "expected integer label"))?;
            } else {
                let row: std::result::Result<Vec<f64>, _> =
                    line.split_whitespace().map(str::parse::<f64>).collect();
                let row = row.map_err(|_| parse_err(*lineno, "expected float features"))?;
                if row.len() != d {
                    return Err(parse_err(*lineno, "feature row width differs from header"));
                }
                features.as_mut().unwrap().push(row);
            }
            pos += 1;
        }

        let mut pairs = Vec::with_capacity(m);
        for _ in 0..m {
            let (lineno, line) = lines
                .get(pos)
                .ok_or_else(|| parse_err(lines[pos - 1].0, "unexpected end of edge lines"))?;
            let mut it = line.split_whitespace();
            let u: usize = it
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| parse_err(*lineno, "expected edge `u v`"))?;
            let v: usize = it
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| parse_err(*lineno, "expected edge `u v`"))?;
            if it.next().is_some() {
                return Err(parse_err(*lineno, "trailing tokens after edge"));
            }
            pairs.push((u, v));
            pos += 1;
        }

        let mut g = LabeledGraph::new_undirected(n, &pairs, labels)?;
        if let Some(f) = features {
            g = g.with_features(f)?;
        }
        graphs.push(g);
    }
    GraphCollection::new("edge-list", graphs)
}

fn parse_json_collection<R: BufRead>(reader: R) -> Result<GraphCollection> {
    let raw: Vec<GraphJson> = serde_json::from_reader(reader)?;
    let mut graphs = Vec::with_capacity(raw.len());
    for item in raw {
        let labels = match item.labels {
            Some(l) => {
                if l.len() != item.num_vertices {
                    return Err(Error::Data(format!(
                        "{} labels for {} vertices",
                        l.len(),
                        item.num_vertices
                    )));
                }
                l
            }
            None => vec![0; item.num_vertices],
        };
        let mut g = LabeledGraph::new_undirected(item.num_vertices, &item.edges, labels)?;
        if let Some(f) = item.features {
            g = g.with_features(f)?;
        }
        if let Some(c) = item.class {
            g = g.with_class(c);
        }
        graphs.push(g);
    }
    GraphCollection::new("json-collection", graphs)
}

/// Serializes a collection in the JSON collection format.
pub fn collection_to_json(coll: &GraphCollection) -> serde_json::Value {
    let items: Vec<GraphJson> = coll
        .graphs
        .iter()
        .map(|g| GraphJson {
            num_vertices: g.n(),
            edges: g
                .edge_records()
                .iter()
                .copied()
                .filter(|&(u, v)| u < v)
                .collect(),
            labels: Some(g.labels().to_vec()),
            features: g.features().cloned(),
            class: g.class(),
        })
        .collect();
    serde_json::to_value(items).expect("graph json is serializable")
}

/// Weisfeiler-Leman color refinement. Returns one color vector per
/// iteration 0..=iterations; iteration 0 is the vertex labeling itself.
///
/// New colors are interned in first-seen order during a vertex-order scan,
/// so runs are reproducible; only the color partition is meaningful.
pub fn wl_refinement(g: &LabeledGraph, iterations: usize) -> Vec<Vec<u32>> {
    let mut rounds = Vec::with_capacity(iterations + 1);
    rounds.push(g.labels().to_vec());
    let mut table: HashMap<(u32, Vec<u32>), u32> = HashMap::new();
    for _ in 0..iterations {
        let prev = rounds.last().unwrap();
        let mut next = Vec::with_capacity(g.n());
        for v in 0..g.n() {
            let mut ms: Vec<u32> = g.neighbors(v).iter().map(|&u| prev[u]).collect();
            ms.sort_unstable();
            let key = (prev[v], ms);
            let fresh = table.len() as u32;
            next.push(*table.entry(key).or_insert(fresh));
        }
        rounds.push(next);
    }
    rounds
}

/// Sorted color multiset at one refinement round; equal multisets mean the
/// round does not distinguish the color sources.
pub fn color_multiset(colors: &[u32]) -> Vec<u32> {
    let mut ms = colors.to_vec();
    ms.sort_unstable();
    ms
}
