//! Train/test split generation over competitor edges.
//!
//! Regular splits remove a fraction of competitor edges under the visibility
//! constraint (no node loses all of its competitor edges). Zero-shot splits
//! strip a fraction of labeled nodes of every competitor edge while keeping
//! their supply edges.

use crate::error::{Error, Result};
use crate::graph::{CompanyGraph, Query, QuerySet};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitKind {
    Regular,
    ZeroShot,
}

impl SplitKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SplitKind::Regular => "regular",
            SplitKind::ZeroShot => "zero-shot",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "regular" => Ok(SplitKind::Regular),
            "zero-shot" => Ok(SplitKind::ZeroShot),
            other => Err(Error::InvalidConfig(format!(
                "unknown split kind '{other}' (expected regular or zero-shot)"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SplitResult {
    pub train_graph: CompanyGraph,
    pub queries: QuerySet,
    pub removed_edges: Vec<(usize, usize)>,
    pub kind: SplitKind,
    pub seed: u64,
}

fn check_fraction(fraction: f64) -> Result<()> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "fraction must lie strictly between 0 and 1, got {fraction}"
        )));
    }
    Ok(())
}

/// Strip a fraction of the labeled nodes (those with at least one competitor
/// edge) of ALL their competitor edges; supply edges are untouched. Queries
/// are the stripped nodes with at least `min_competitors` held-out edges.
pub fn make_zero_shot_split(
    g: &CompanyGraph,
    node_fraction: f64,
    min_competitors: usize,
    seed: u64,
) -> Result<SplitResult> {
    g.validate()?;
    check_fraction(node_fraction)?;
    let deg = g.competitor_degrees();
    let labeled: Vec<usize> = (0..g.n).filter(|&i| deg[i] > 0).collect();
    let count = (node_fraction * labeled.len() as f64).round() as usize;
    if count == 0 {
        return Err(Error::EmptyQuerySet(format!(
            "selecting {node_fraction} of {} labeled nodes yields zero nodes",
            labeled.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut shuffled = labeled;
    shuffled.shuffle(&mut rng);
    let selected: BTreeSet<usize> = shuffled.into_iter().take(count).collect();

    let mut train_edges = Vec::with_capacity(g.competitor_edges.len());
    let mut removed = Vec::new();
    for &(i, j) in &g.competitor_edges {
        if selected.contains(&i) || selected.contains(&j) {
            removed.push((i, j));
        } else {
            train_edges.push((i, j));
        }
    }

    let mut held: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &(i, j) in &removed {
        if selected.contains(&i) {
            held.entry(i).or_default().push(j);
        }
        if selected.contains(&j) {
            held.entry(j).or_default().push(i);
        }
    }
    let queries: Vec<Query> = held
        .into_iter()
        .filter(|(_, partners)| partners.len() >= min_competitors)
        .map(|(node, mut partners)| {
            partners.sort_unstable();
            Query {
                node,
                held_out: partners,
            }
        })
        .collect();
    if queries.is_empty() {
        return Err(Error::EmptyQuerySet(format!(
            "no stripped node kept >= {min_competitors} held-out competitors"
        )));
    }

    let train_graph = CompanyGraph::new(
        g.n,
        g.attr.clone(),
        g.supply_edges.clone(),
        train_edges,
        g.node_labels.clone(),
    )?;
    let queries = QuerySet { queries };
    queries.validate_against(&train_graph)?;
    Ok(SplitResult {
        train_graph,
        queries,
        removed_edges: removed,
        kind: SplitKind::ZeroShot,
        seed,
    })
}

/// Remove `round(edge_fraction × |C|)` competitor edges uniformly at random,
/// subject to the visibility constraint that no node loses all of its
/// competitor edges. Queries are nodes with at least `min_competitors`
/// removed edges.
pub fn make_regular_split(
    g: &CompanyGraph,
    edge_fraction: f64,
    min_competitors: usize,
    seed: u64,
) -> Result<SplitResult> {
    g.validate()?;
    check_fraction(edge_fraction)?;
    let target = (edge_fraction * g.competitor_edges.len() as f64).round() as usize;
    let mut deg = g.competitor_degrees();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order = g.competitor_edges.clone();
    order.shuffle(&mut rng);

    let mut removed_set: BTreeSet<(usize, usize)> = BTreeSet::new();
    for &(i, j) in &order {
        if removed_set.len() >= target {
            break;
        }
        if deg[i] > 1 && deg[j] > 1 {
            removed_set.insert((i, j));
            deg[i] -= 1;
            deg[j] -= 1;
        }
    }
    if removed_set.len() < target {
        return Err(Error::SplitInfeasible {
            requested: target,
            removed: removed_set.len(),
        });
    }

    let train_edges: Vec<(usize, usize)> = g
        .competitor_edges
        .iter()
        .copied()
        .filter(|e| !removed_set.contains(e))
        .collect();
    let removed: Vec<(usize, usize)> = removed_set.into_iter().collect();

    let mut held: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &(i, j) in &removed {
        held.entry(i).or_default().push(j);
        held.entry(j).or_default().push(i);
    }
    let queries: Vec<Query> = held
        .into_iter()
        .filter(|(_, partners)| partners.len() >= min_competitors)
        .map(|(node, mut partners)| {
            partners.sort_unstable();
            Query {
                node,
                held_out: partners,
            }
        })
        .collect();
    if queries.is_empty() {
        return Err(Error::EmptyQuerySet(format!(
            "no node lost >= {min_competitors} competitor edges"
        )));
    }

    let train_graph = CompanyGraph::new(
        g.n,
        g.attr.clone(),
        g.supply_edges.clone(),
        train_edges,
        g.node_labels.clone(),
    )?;
    let queries = QuerySet { queries };
    queries.validate_against(&train_graph)?;
    Ok(SplitResult {
        train_graph,
        queries,
        removed_edges: removed,
        kind: SplitKind::Regular,
        seed,
    })
}
