//! Planted-industry synthetic graph generator. Competitor edges are strictly
//! intra-industry, supply edges follow a seeded industry-flow matrix, and node
//! attributes are noisy industry centroids, so recovery is measurable and
//! supply structure predicts competitorship by construction.

use crate::error::{Error, Result};
use crate::graph::CompanyGraph;
use crate::linalg::DenseMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Flow-matrix weight for industry pairs off the dominant permutation.
const BACKGROUND_FLOW: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub n: usize,
    pub industries: usize,
    pub attr_dim: usize,
    /// Per-entry Gaussian noise scale added to the industry centroid.
    pub attr_noise: f64,
    /// Probability of a competitor edge between two same-industry nodes.
    pub intra_competitor_prob: f64,
    /// Base probability of a directed supply edge; scaled per ordered
    /// industry pair by the random flow matrix.
    pub supply_edge_prob: f64,
    pub seed: u64,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.industries == 0 {
            return Err(Error::InvalidConfig(
                "industry count must be at least 1".to_string(),
            ));
        }
        if self.industries > self.n {
            return Err(Error::InvalidConfig(format!(
                "{} industries for {} nodes",
                self.industries, self.n
            )));
        }
        if self.attr_dim < self.industries {
            return Err(Error::InvalidConfig(format!(
                "attr_dim {} is smaller than industry count {}",
                self.attr_dim, self.industries
            )));
        }
        for (name, p) in [
            ("intra_competitor_prob", self.intra_competitor_prob),
            ("supply_edge_prob", self.supply_edge_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be in [0, 1], got {p}"
                )));
            }
        }
        if self.attr_noise.is_nan() || self.attr_noise < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "attr_noise must be >= 0, got {}",
                self.attr_noise
            )));
        }
        Ok(())
    }
}

/// Height of the centroid blocks; sized so that typical noise scales leave
/// the industry signal dominant in ‖X‖².
const CENTROID_SCALE: f64 = 2.0;

/// Orthogonal block centroid for an industry: `CENTROID_SCALE` on that
/// industry's slice of the attribute dimensions, zero elsewhere.
fn centroid(industry: usize, industries: usize, attr_dim: usize) -> Vec<f64> {
    let base = attr_dim / industries;
    let extra = attr_dim % industries;
    // industries before `extra` get one extra dimension
    let start = industry * base + industry.min(extra);
    let len = base + usize::from(industry < extra);
    let mut v = vec![0.0; attr_dim];
    for x in v.iter_mut().skip(start).take(len) {
        *x = CENTROID_SCALE;
    }
    v
}

/// Generate a planted graph and its ground-truth industry per node. Nodes are
/// assigned round-robin to industries. Deterministic given the seed.
pub fn generate(spec: &SynthSpec) -> Result<(CompanyGraph, Vec<usize>)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let industry: Vec<usize> = (0..spec.n).map(|i| i % spec.industries).collect();

    // industry-flow matrix: each industry ships predominantly to one other
    // industry (a seeded random permutation) over a weak uniform background,
    // so supply direction carries real industry information
    let k = spec.industries;
    let mut targets: Vec<usize> = (0..k).collect();
    targets.shuffle(&mut rng);
    let mut flow = vec![BACKGROUND_FLOW; k * k];
    for (a, &b) in targets.iter().enumerate() {
        flow[a * k + b] = 1.0;
    }

    // attributes: centroid + noise
    let centroids: Vec<Vec<f64>> = (0..k).map(|g| centroid(g, k, spec.attr_dim)).collect();
    let mut attr_data = Vec::with_capacity(spec.n * spec.attr_dim);
    for &ind in &industry {
        for &c in &centroids[ind] {
            let noise: f64 = StandardNormal.sample(&mut rng);
            attr_data.push(c + spec.attr_noise * noise);
        }
    }
    let attr = DenseMatrix::new(spec.n, spec.attr_dim, attr_data)?;

    // competitor edges: i.i.d. within industries
    let mut competitor_edges = Vec::new();
    for i in 0..spec.n {
        for j in (i + 1)..spec.n {
            if industry[i] == industry[j] && rng.gen::<f64>() < spec.intra_competitor_prob {
                competitor_edges.push((i, j));
            }
        }
    }

    // directed supply edges biased by the flow matrix
    let mut supply_edges = Vec::new();
    for u in 0..spec.n {
        for v in 0..spec.n {
            if u == v {
                continue;
            }
            let p = spec.supply_edge_prob * flow[industry[u] * k + industry[v]];
            if rng.gen::<f64>() < p {
                supply_edges.push((u, v));
            }
        }
    }

    let labels: Vec<String> = (0..spec.n).map(|i| format!("n{i}")).collect();
    let graph = CompanyGraph::new(spec.n, attr, supply_edges, competitor_edges, Some(labels))?;
    Ok((graph, industry))
}
