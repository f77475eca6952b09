//! Negative (non-competitor) pair generation: uniformly sampled unconnected
//! pairs from the competitor network.

use crate::error::{Error, Result};
use crate::graph::{CompanyGraph, LabeledPair};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;

#[derive(Debug, Clone, PartialEq)]
pub struct NegativeSampleSpec {
    /// Negatives per positive competitor edge.
    pub ratio: f64,
    pub seed: u64,
    /// Sample only among nodes that have at least one competitor edge.
    pub restrict_to_labeled: bool,
}

impl Default for NegativeSampleSpec {
    fn default() -> Self {
        NegativeSampleSpec {
            ratio: 1.0,
            seed: 0,
            restrict_to_labeled: true,
        }
    }
}

/// Rejection-sample `round(ratio × |C|)` distinct canonical pairs that are
/// not competitor edges. Attempts are capped at 100× the target before the
/// request is declared infeasible. Output is sorted; deterministic per seed.
pub fn sample_negatives(g: &CompanyGraph, spec: &NegativeSampleSpec) -> Result<Vec<LabeledPair>> {
    g.validate()?;
    if !spec.ratio.is_finite() || spec.ratio <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "negative sampling ratio must be > 0, got {}",
            spec.ratio
        )));
    }
    let target = (spec.ratio * g.competitor_edges.len() as f64).round() as usize;
    if target == 0 {
        return Ok(Vec::new());
    }
    let pool: Vec<usize> = if spec.restrict_to_labeled {
        let deg = g.competitor_degrees();
        (0..g.n).filter(|&i| deg[i] > 0).collect()
    } else {
        (0..g.n).collect()
    };
    let edges: BTreeSet<(usize, usize)> = g.competitor_edges.iter().copied().collect();
    let mut chosen: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let cap = target.saturating_mul(100);
    let mut attempts = 0usize;
    while chosen.len() < target {
        if attempts >= cap || pool.len() < 2 {
            return Err(Error::SamplingInfeasible {
                requested: target,
                found: chosen.len(),
                attempts,
            });
        }
        attempts += 1;
        let a = pool[rng.gen_range(0..pool.len())];
        let b = pool[rng.gen_range(0..pool.len())];
        if a == b {
            continue;
        }
        let key = (a.min(b), a.max(b));
        if edges.contains(&key) {
            continue;
        }
        chosen.insert(key);
    }
    Ok(chosen
        .into_iter()
        .map(|(i, j)| LabeledPair { i, j, w: -1 })
        .collect())
}
