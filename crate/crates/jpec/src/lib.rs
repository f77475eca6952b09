//! Semi-supervised graph-embedding engine for competitor retrieval.
//!
//! The engine learns company embeddings from a knowledge graph with directed
//! supply-chain edges, sparse undirected competitor edges, and node
//! attributes. A directed-GCN encoder propagates attributes over the supply
//! graph, a Laplacian-sharpening decoder reconstructs them, and pairwise
//! eigenmap losses over competitor / non-competitor pairs shape the embedding
//! so that competitors land close together. Ranked competitor retrieval,
//! dataset splits, synthetic planted-industry graphs, and a full evaluation
//! harness round out the toolkit.
//!
//! Entry points:
//! - [`synth::generate`] — planted-industry benchmark graphs
//! - [`model::train`] / [`model::embed`] — training and embedding
//! - [`evalkit::make_regular_split`] / [`evalkit::make_zero_shot_split`]
//! - [`evalkit::evaluate`] — Hits@K / MRR / MAP over ranked retrieval
//! - [`io`] — file formats, model persistence, run manifests
//!
//! Everything is deterministic given seeds; see `JPEC_THREADS` in the README
//! for the kernel parallelism contract.

pub mod cli;
pub mod error;
pub mod evalkit;
pub mod graph;
pub mod io;
pub mod linalg;
pub mod model;
pub mod sampling;
pub mod synth;

pub use error::{Error, Result};

/// Engine version written into manifests and file headers.
pub const ENGINE_VERSION: &str = env!("CARGO_PKG_VERSION");
