//! Knowledge-graph data model: company nodes with attributes, directed
//! supply-chain edges, and undirected competitor edges.

use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, SparseMatrix};
use std::collections::BTreeSet;

/// A company pair labeled competitor (+1) or non-competitor (−1).
/// Stored in canonical order with the smaller index first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct LabeledPair {
    pub i: usize,
    pub j: usize,
    pub w: i8,
}

impl LabeledPair {
    pub fn new(a: usize, b: usize, w: i8) -> Result<Self> {
        if a == b {
            return Err(Error::SelfPair { i: a });
        }
        if w != 1 && w != -1 {
            return Err(Error::InvalidConfig(format!(
                "pair weight must be +1 or -1, got {w}"
            )));
        }
        Ok(LabeledPair {
            i: a.min(b),
            j: a.max(b),
            w,
        })
    }

    pub fn positive(a: usize, b: usize) -> Result<Self> {
        LabeledPair::new(a, b, 1)
    }

    pub fn negative(a: usize, b: usize) -> Result<Self> {
        LabeledPair::new(a, b, -1)
    }
}

/// The knowledge graph: `n` company nodes, an `n × d` attribute matrix,
/// directed supply edges, and undirected competitor edges stored with the
/// smaller index first.
#[derive(Debug, Clone, PartialEq)]
pub struct CompanyGraph {
    pub n: usize,
    pub attr: DenseMatrix,
    pub supply_edges: Vec<(usize, usize)>,
    pub competitor_edges: Vec<(usize, usize)>,
    pub node_labels: Option<Vec<String>>,
}

impl CompanyGraph {
    /// Construct and validate. Edge lists must already be canonical; use
    /// [`CompanyGraph::build`] to canonicalize raw lists.
    pub fn new(
        n: usize,
        attr: DenseMatrix,
        supply_edges: Vec<(usize, usize)>,
        competitor_edges: Vec<(usize, usize)>,
        node_labels: Option<Vec<String>>,
    ) -> Result<Self> {
        let g = CompanyGraph {
            n,
            attr,
            supply_edges,
            competitor_edges,
            node_labels,
        };
        g.validate()?;
        Ok(g)
    }

    /// Canonicalize raw edge lists (sort, dedup, order competitor pairs with
    /// the smaller index first) and validate.
    pub fn build(
        n: usize,
        attr: DenseMatrix,
        supply_edges: Vec<(usize, usize)>,
        competitor_edges: Vec<(usize, usize)>,
        node_labels: Option<Vec<String>>,
    ) -> Result<Self> {
        let mut supply = supply_edges;
        supply.sort_unstable();
        supply.dedup();
        let mut comp: Vec<(usize, usize)> = competitor_edges
            .into_iter()
            .map(|(a, b)| (a.min(b), a.max(b)))
            .collect();
        comp.sort_unstable();
        comp.dedup();
        CompanyGraph::new(n, attr, supply, comp, node_labels)
    }

    /// Check every structural invariant, reporting the first violation.
    pub fn validate(&self) -> Result<()> {
        if self.attr.rows() != self.n {
            return Err(Error::AttrRowsMismatch {
                rows: self.attr.rows(),
                n: self.n,
            });
        }
        if let Some(labels) = &self.node_labels {
            if labels.len() != self.n {
                return Err(Error::InvalidConfig(format!(
                    "{} node labels for {} nodes",
                    labels.len(),
                    self.n
                )));
            }
        }
        for &(s, d) in &self.supply_edges {
            if s == d {
                return Err(Error::SelfLoop {
                    kind: "supply",
                    i: s,
                    j: d,
                });
            }
            for idx in [s, d] {
                if idx >= self.n {
                    return Err(Error::IndexOutOfRange {
                        index: idx,
                        n: self.n,
                    });
                }
            }
        }
        let mut seen = BTreeSet::new();
        for &(i, j) in &self.competitor_edges {
            if i == j {
                return Err(Error::SelfLoop {
                    kind: "competitor",
                    i,
                    j,
                });
            }
            if i > j {
                return Err(Error::NonCanonicalPair { i, j });
            }
            for idx in [i, j] {
                if idx >= self.n {
                    return Err(Error::IndexOutOfRange {
                        index: idx,
                        n: self.n,
                    });
                }
            }
            if !seen.insert((i, j)) {
                return Err(Error::DuplicatePair { i, j });
            }
        }
        Ok(())
    }

    /// Directed supply adjacency as CSR with unit weights. Duplicate edges
    /// collapse to 1; the matrix is NOT symmetrized.
    pub fn supply_adjacency(&self) -> Result<SparseMatrix> {
        let mut edges = self.supply_edges.clone();
        edges.sort_unstable();
        edges.dedup();
        let triplets: Vec<(usize, usize, f64)> =
            edges.into_iter().map(|(s, d)| (s, d, 1.0)).collect();
        SparseMatrix::from_triplets(self.n, self.n, &triplets)
    }

    /// Number of competitor edges incident to each node.
    pub fn competitor_degrees(&self) -> Vec<usize> {
        let mut deg = vec![0usize; self.n];
        for &(i, j) in &self.competitor_edges {
            deg[i] += 1;
            deg[j] += 1;
        }
        deg
    }

    /// Competitor neighbors of `node`, ascending.
    pub fn competitor_neighbors(&self, node: usize) -> Vec<usize> {
        let mut out = Vec::new();
        for &(i, j) in &self.competitor_edges {
            if i == node {
                out.push(j);
            } else if j == node {
                out.push(i);
            }
        }
        out.sort_unstable();
        out
    }
}

/// Competitor edges as +1 pairs alongside the supplied −1 pairs. Errors if a
/// negative pair contradicts a known competitor edge.
pub fn competitor_pair_sets(
    g: &CompanyGraph,
    negatives: &[LabeledPair],
) -> Result<(Vec<LabeledPair>, Vec<LabeledPair>)> {
    let edge_set: BTreeSet<(usize, usize)> = g.competitor_edges.iter().copied().collect();
    for p in negatives {
        if p.w != -1 {
            return Err(Error::InvalidConfig(format!(
                "pair ({}, {}) passed as negative has weight {}",
                p.i, p.j, p.w
            )));
        }
        if edge_set.contains(&(p.i, p.j)) {
            return Err(Error::NegativeOverlapsPositive { i: p.i, j: p.j });
        }
    }
    let pos = g
        .competitor_edges
        .iter()
        .map(|&(i, j)| LabeledPair { i, j, w: 1 })
        .collect();
    Ok((pos, negatives.to_vec()))
}

/// Evaluation queries: each query node with its held-out competitor set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuerySet {
    pub queries: Vec<Query>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Query {
    pub node: usize,
    pub held_out: Vec<usize>,
}

impl QuerySet {
    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }

    /// Held-out sets must be non-empty and disjoint from the training
    /// competitor edges of `train`.
    pub fn validate_against(&self, train: &CompanyGraph) -> Result<()> {
        let edge_set: BTreeSet<(usize, usize)> = train.competitor_edges.iter().copied().collect();
        for q in &self.queries {
            if q.held_out.is_empty() {
                return Err(Error::EmptyRelevantSet { query: q.node });
            }
            for &c in &q.held_out {
                let key = (q.node.min(c), q.node.max(c));
                if edge_set.contains(&key) {
                    return Err(Error::InvalidConfig(format!(
                        "held-out competitor ({}, {}) still present in training edges",
                        key.0, key.1
                    )));
                }
            }
        }
        Ok(())
    }
}
