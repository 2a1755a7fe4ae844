//! Non-redundant message passing on graphs via compact tree DAGs.
//!
//! The pipeline: build per-vertex unfolding trees or k-redundant
//! neighborhood trees as compact DAGs ([`tree`]), canonize rooted trees
//! with a global interning table ([`canon`]), merge trees into one shared
//! computation DAG with height and edge layers ([`merge`]), export layered
//! sparse matrices, run a small MLP stack over the layers with manual
//! backpropagation ([`mlp`]), and analyze expressivity and influence
//! ([`analysis`]). [`pipeline`] wires preprocessing end to end and owns the
//! on-disk artifact formats.
//!
//! Data-parallel sections run on rayon when the default `parallel` feature
//! is enabled; [`par::Parallelism`] selects the mode per call and results
//! are identical (and byte-stable) in both.

pub mod analysis;
pub mod canon;
pub mod error;
pub mod gen;
pub mod graph;
pub mod merge;
pub mod mlp;
pub mod par;
pub mod pipeline;
pub mod tree;

pub use canon::{trees_isomorphic, CanonTable, Labeling};
pub use error::{Error, Result};
pub use graph::{GraphCollection, LabeledGraph};
pub use merge::{merge_trees, FeatureMode, LayeredMatrices, MergeDag};
pub use par::Parallelism;
pub use tree::{build_knt_dag, CompactTreeDag};
