//! Retrieval evaluation: candidate ranking over the full company pool and the
//! Hits@K / MRR / MAP metrics, plus train/test split generation.

mod split;

pub use split::{make_regular_split, make_zero_shot_split, SplitKind, SplitResult};

use crate::error::{Error, Result};
use crate::graph::{CompanyGraph, QuerySet};
use crate::linalg::DenseMatrix;
use std::collections::{BTreeMap, BTreeSet};

/// Similarity used to score candidates against a query embedding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoreMode {
    /// −‖y_q − y_c‖²; matches the eigenmap objective geometry.
    NegSqEuclidean,
    Cosine,
}

impl ScoreMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            ScoreMode::NegSqEuclidean => "neg-sq-euclidean",
            ScoreMode::Cosine => "cosine",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "neg-sq-euclidean" => Ok(ScoreMode::NegSqEuclidean),
            "cosine" => Ok(ScoreMode::Cosine),
            other => Err(Error::InvalidConfig(format!(
                "unknown score mode '{other}' (expected neg-sq-euclidean or cosine)"
            ))),
        }
    }
}

/// One query's ranked retrieval output: candidates in non-increasing score
/// order, ties broken by ascending node index; never contains the query.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedList {
    pub query: usize,
    pub candidates: Vec<usize>,
    pub scores: Vec<f64>,
}

fn score_pair(y: &DenseMatrix, q: usize, c: usize, mode: ScoreMode) -> f64 {
    let rq = y.row(q);
    let rc = y.row(c);
    match mode {
        ScoreMode::NegSqEuclidean => {
            let mut acc = 0.0;
            for (a, b) in rq.iter().zip(rc) {
                let d = a - b;
                acc += d * d;
            }
            -acc
        }
        ScoreMode::Cosine => {
            let (mut dot, mut nq, mut nc) = (0.0, 0.0, 0.0);
            for (a, b) in rq.iter().zip(rc) {
                dot += a * b;
                nq += a * a;
                nc += b * b;
            }
            if nq == 0.0 || nc == 0.0 {
                0.0
            } else {
                dot / (nq.sqrt() * nc.sqrt())
            }
        }
    }
}

/// Score every pool member except the query itself and the filter set.
pub fn rank_candidates(
    y: &DenseMatrix,
    query: usize,
    pool: &[usize],
    mode: ScoreMode,
    filter: &BTreeSet<usize>,
) -> Result<RankedList> {
    if query >= y.rows() {
        return Err(Error::IndexOutOfRange {
            index: query,
            n: y.rows(),
        });
    }
    let mut scored: Vec<(usize, f64)> = Vec::with_capacity(pool.len());
    for &c in pool {
        if c == query || filter.contains(&c) {
            continue;
        }
        if c >= y.rows() {
            return Err(Error::IndexOutOfRange {
                index: c,
                n: y.rows(),
            });
        }
        scored.push((c, score_pair(y, query, c, mode)));
    }
    if scored.is_empty() {
        return Err(Error::EmptyPool { query });
    }
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let (candidates, scores) = scored.into_iter().unzip();
    Ok(RankedList {
        query,
        candidates,
        scores,
    })
}

/// Hits@K with denominator min(K, |relevant|): a perfect ranking scores 1.
pub fn hits_at_k(ranked: &RankedList, relevant: &BTreeSet<usize>, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidConfig("hits@k requires k >= 1".to_string()));
    }
    if relevant.is_empty() {
        return Err(Error::EmptyRelevantSet {
            query: ranked.query,
        });
    }
    let found = ranked
        .candidates
        .iter()
        .take(k)
        .filter(|c| relevant.contains(c))
        .count();
    Ok(found as f64 / k.min(relevant.len()) as f64)
}

/// Hits@K with the alternative denominator K (paper wording is ambiguous).
pub fn hits_at_k_by_k(ranked: &RankedList, relevant: &BTreeSet<usize>, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidConfig("hits@k requires k >= 1".to_string()));
    }
    if relevant.is_empty() {
        return Err(Error::EmptyRelevantSet {
            query: ranked.query,
        });
    }
    let found = ranked
        .candidates
        .iter()
        .take(k)
        .filter(|c| relevant.contains(c))
        .count();
    Ok(found as f64 / k as f64)
}

fn first_relevant_rank(ranked: &RankedList, relevant: &BTreeSet<usize>) -> Option<usize> {
    ranked
        .candidates
        .iter()
        .position(|c| relevant.contains(c))
        .map(|p| p + 1)
}

/// Mean over queries of 1 / rank-of-first-relevant. A query whose relevant
/// items never appear in its list contributes 0.
pub fn mean_reciprocal_rank(ranked: &[RankedList], relevant: &[BTreeSet<usize>]) -> Result<f64> {
    aggregate(ranked, relevant, |r, rel| {
        Ok(match first_relevant_rank(r, rel) {
            Some(rank) => 1.0 / rank as f64,
            None => 0.0,
        })
    })
}

fn average_precision(ranked: &RankedList, relevant: &BTreeSet<usize>) -> f64 {
    let mut hits = 0usize;
    let mut acc = 0.0;
    for (pos, c) in ranked.candidates.iter().enumerate() {
        if relevant.contains(c) {
            hits += 1;
            acc += hits as f64 / (pos + 1) as f64;
        }
    }
    // relevant items never retrieved contribute precision 0
    acc / relevant.len() as f64
}

/// Mean over queries of average precision (denominator |relevant|).
pub fn mean_average_precision(ranked: &[RankedList], relevant: &[BTreeSet<usize>]) -> Result<f64> {
    aggregate(ranked, relevant, |r, rel| Ok(average_precision(r, rel)))
}

fn aggregate<F>(ranked: &[RankedList], relevant: &[BTreeSet<usize>], f: F) -> Result<f64>
where
    F: Fn(&RankedList, &BTreeSet<usize>) -> Result<f64>,
{
    if ranked.len() != relevant.len() {
        return Err(Error::InvalidConfig(format!(
            "{} ranked lists vs {} relevant sets",
            ranked.len(),
            relevant.len()
        )));
    }
    if ranked.is_empty() {
        return Err(Error::EmptyQuerySet("no queries to aggregate".to_string()));
    }
    // sum in ascending query order so aggregates are permutation-safe
    let mut order: Vec<usize> = (0..ranked.len()).collect();
    order.sort_by_key(|&i| ranked[i].query);
    let mut acc = 0.0;
    for &i in &order {
        if relevant[i].is_empty() {
            return Err(Error::EmptyRelevantSet {
                query: ranked[i].query,
            });
        }
        acc += f(&ranked[i], &relevant[i])?;
    }
    Ok(acc / ranked.len() as f64)
}

/// Per-query metric values.
#[derive(Debug, Clone)]
pub struct QueryOutcome {
    pub node: usize,
    pub relevant_count: usize,
    pub pool_size: usize,
    pub first_relevant_rank: Option<usize>,
    pub average_precision: f64,
    pub hits: BTreeMap<usize, f64>,
    pub hits_by_k: BTreeMap<usize, f64>,
}

/// Aggregated evaluation over a query set.
#[derive(Debug, Clone)]
pub struct MetricReport {
    pub hits_at_k: BTreeMap<usize, f64>,
    pub hits_at_k_by_k: BTreeMap<usize, f64>,
    pub mrr: f64,
    pub map: f64,
    pub queries: usize,
    pub per_query: Vec<QueryOutcome>,
}

/// Rank every query against the full node pool and aggregate all metrics.
/// With `filtered` set, each query's known training competitors are excluded
/// from its candidate pool.
pub fn evaluate(
    y: &DenseMatrix,
    train: &CompanyGraph,
    queries: &QuerySet,
    ks: &[usize],
    mode: ScoreMode,
    filtered: bool,
) -> Result<MetricReport> {
    if y.rows() != train.n {
        return Err(Error::InvalidConfig(format!(
            "embeddings cover {} nodes but the graph has {}",
            y.rows(),
            train.n
        )));
    }
    if queries.is_empty() {
        return Err(Error::EmptyQuerySet("no queries to evaluate".to_string()));
    }
    if ks.is_empty() || ks.contains(&0) {
        return Err(Error::InvalidConfig(
            "at least one K >= 1 required".to_string(),
        ));
    }
    let pool: Vec<usize> = (0..train.n).collect();
    let mut outcomes = Vec::with_capacity(queries.len());
    for q in &queries.queries {
        let relevant: BTreeSet<usize> = q.held_out.iter().copied().collect();
        if relevant.is_empty() {
            return Err(Error::EmptyRelevantSet { query: q.node });
        }
        let filter: BTreeSet<usize> = if filtered {
            train.competitor_neighbors(q.node).into_iter().collect()
        } else {
            BTreeSet::new()
        };
        let ranked = rank_candidates(y, q.node, &pool, mode, &filter)?;
        let mut hits = BTreeMap::new();
        let mut hits_by_k = BTreeMap::new();
        for &k in ks {
            hits.insert(k, hits_at_k(&ranked, &relevant, k)?);
            hits_by_k.insert(k, hits_at_k_by_k(&ranked, &relevant, k)?);
        }
        outcomes.push(QueryOutcome {
            node: q.node,
            relevant_count: relevant.len(),
            pool_size: ranked.candidates.len(),
            first_relevant_rank: first_relevant_rank(&ranked, &relevant),
            average_precision: average_precision(&ranked, &relevant),
            hits,
            hits_by_k,
        });
    }
    // canonical order keeps aggregation permutation-safe
    outcomes.sort_by_key(|o| o.node);
    let nq = outcomes.len() as f64;
    let mut hits_at_k_agg = BTreeMap::new();
    let mut hits_by_k_agg = BTreeMap::new();
    for &k in ks {
        let mut h = 0.0;
        let mut hk = 0.0;
        for o in &outcomes {
            h += o.hits[&k];
            hk += o.hits_by_k[&k];
        }
        hits_at_k_agg.insert(k, h / nq);
        hits_by_k_agg.insert(k, hk / nq);
    }
    let mut mrr = 0.0;
    let mut map = 0.0;
    for o in &outcomes {
        mrr += o.first_relevant_rank.map_or(0.0, |r| 1.0 / r as f64);
        map += o.average_precision;
    }
    Ok(MetricReport {
        hits_at_k: hits_at_k_agg,
        hits_at_k_by_k: hits_by_k_agg,
        mrr: mrr / nq,
        map: map / nq,
        queries: outcomes.len(),
        per_query: outcomes,
    })
}

/// Expected Hits@K of a uniformly random ranking: the number of relevant
/// items in the top K is hypergeometric over the candidate pool.
pub fn expected_random_hits_at_k(pool: usize, relevant: usize, k: usize) -> f64 {
    if pool == 0 || relevant == 0 || k == 0 {
        return 0.0;
    }
    let draws = k.min(pool) as f64;
    let expected_found = draws * relevant as f64 / pool as f64;
    expected_found / k.min(relevant) as f64
}

/// Variance of Hits@K under a uniformly random ranking.
pub fn random_hits_variance(pool: usize, relevant: usize, k: usize) -> f64 {
    if pool <= 1 || relevant == 0 || k == 0 {
        return 0.0;
    }
    let n = pool as f64;
    let r = relevant as f64 / n;
    let draws = k.min(pool) as f64;
    let var_found = draws * r * (1.0 - r) * (n - draws) / (n - 1.0);
    let denom = k.min(relevant) as f64;
    var_found / (denom * denom)
}
