//! Split artifacts: a training competitor edge list (same format as the
//! competitor file, so it feeds straight back into `train`), a query manifest
//! with one `query_id <TAB> held_out_id` row per held-out competitor, and the
//! removed-edge list.

use super::{data_lines, read_to_string, write_atomic};
use crate::error::{Error, Result};
use crate::evalkit::SplitResult;
use crate::graph::{CompanyGraph, Query, QuerySet};
use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub struct SplitFiles {
    pub train_competitors: PathBuf,
    pub queries: PathBuf,
    pub removed_edges: PathBuf,
}

impl SplitFiles {
    pub fn in_dir(dir: &Path) -> Self {
        SplitFiles {
            train_competitors: dir.join("train_competitors.tsv"),
            queries: dir.join("queries.tsv"),
            removed_edges: dir.join("removed_edges.tsv"),
        }
    }
}

fn label_of(g: &CompanyGraph, i: usize) -> String {
    match &g.node_labels {
        Some(labels) => labels[i].clone(),
        None => format!("n{i}"),
    }
}

pub fn save_split(split: &SplitResult, files: &SplitFiles) -> Result<()> {
    let g = &split.train_graph;
    let mut train = String::new();
    for &(i, j) in &g.competitor_edges {
        let _ = writeln!(train, "{}\t{}", label_of(g, i), label_of(g, j));
    }
    write_atomic(&files.train_competitors, train.as_bytes())?;

    let mut queries = String::new();
    for q in &split.queries.queries {
        for &c in &q.held_out {
            let _ = writeln!(queries, "{}\t{}", label_of(g, q.node), label_of(g, c));
        }
    }
    write_atomic(&files.queries, queries.as_bytes())?;

    let mut removed = String::new();
    for &(i, j) in &split.removed_edges {
        let _ = writeln!(removed, "{}\t{}", label_of(g, i), label_of(g, j));
    }
    write_atomic(&files.removed_edges, removed.as_bytes())?;
    Ok(())
}

/// Read a query manifest back against a graph's id mapping.
pub fn load_queries(path: &Path, g: &CompanyGraph) -> Result<QuerySet> {
    let index: HashMap<&str, usize> = match &g.node_labels {
        Some(labels) => labels.iter().map(|s| s.as_str()).zip(0..).collect(),
        None => {
            return Err(Error::InvalidConfig(
                "graph has no node labels to resolve query ids against".to_string(),
            ))
        }
    };
    let text = read_to_string(path)?;
    let mut held: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (line_no, line) in data_lines(&text, false) {
        let mut parts = line.split('\t');
        let (q, c) = match (parts.next(), parts.next(), parts.next()) {
            (Some(q), Some(c), None) => (q, c),
            _ => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: line_no,
                    msg: "expected exactly two tab-separated ids".to_string(),
                })
            }
        };
        let resolve = |id: &str| {
            index.get(id).copied().ok_or_else(|| Error::UnknownId {
                path: path.to_path_buf(),
                line: line_no,
                id: id.to_string(),
            })
        };
        held.entry(resolve(q)?).or_default().push(resolve(c)?);
    }
    let queries = held
        .into_iter()
        .map(|(node, mut held_out)| {
            held_out.sort_unstable();
            held_out.dedup();
            Query { node, held_out }
        })
        .collect();
    Ok(QuerySet { queries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evalkit::make_regular_split;
    use crate::synth::{generate, SynthSpec};
    use tempfile::tempdir;

    #[test]
    fn split_round_trips_through_files() {
        let spec = SynthSpec {
            n: 50,
            industries: 2,
            attr_dim: 4,
            attr_noise: 0.2,
            intra_competitor_prob: 0.5,
            supply_edge_prob: 0.2,
            seed: 3,
        };
        let (g, _) = generate(&spec).unwrap();
        let split = make_regular_split(&g, 0.2, 2, 11).unwrap();
        let dir = tempdir().unwrap();
        let files = SplitFiles::in_dir(dir.path());
        save_split(&split, &files).unwrap();

        let queries = load_queries(&files.queries, &g).unwrap();
        assert_eq!(queries, split.queries);

        // the train competitor file is a valid competitor file: reload the
        // graph with it and compare edge sets
        let nodes = dir.path().join("nodes.tsv");
        let supply = dir.path().join("supply.tsv");
        let comp = dir.path().join("comp.tsv");
        super::super::save_graph(&g, &nodes, &supply, &comp).unwrap();
        let reloaded =
            super::super::load_graph(&nodes, &supply, &files.train_competitors, false).unwrap();
        assert_eq!(
            reloaded.graph.competitor_edges,
            split.train_graph.competitor_edges
        );
    }

    #[test]
    fn unknown_query_id_errors() {
        let spec = SynthSpec {
            n: 10,
            industries: 2,
            attr_dim: 4,
            attr_noise: 0.2,
            intra_competitor_prob: 0.5,
            supply_edge_prob: 0.2,
            seed: 4,
        };
        let (g, _) = generate(&spec).unwrap();
        let dir = tempdir().unwrap();
        let path = dir.path().join("queries.tsv");
        std::fs::write(&path, "n0\tghost\n").unwrap();
        assert!(matches!(
            load_queries(&path, &g),
            Err(Error::UnknownId { .. })
        ));
    }
}
