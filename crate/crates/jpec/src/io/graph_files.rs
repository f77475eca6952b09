//! Graph ingestion and export.
//!
//! Node file: `id <TAB> f1 <TAB> … <TAB> fd`. Supply file: `src <TAB> dst`.
//! Competitor file: `id_a <TAB> id_b`. External string ids are mapped to
//! dense indices in node-file order; the mapping travels as node labels.

use super::{data_lines, read_to_string, write_atomic};
use crate::error::{Error, Result};
use crate::graph::CompanyGraph;
use crate::linalg::DenseMatrix;
use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

#[derive(Debug)]
pub struct LoadedGraph {
    pub graph: CompanyGraph,
    pub warnings: Vec<String>,
}

fn parse_field<T: std::str::FromStr>(
    field: &str,
    path: &Path,
    line: usize,
    what: &str,
) -> Result<T> {
    field.parse().map_err(|_| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: format!("cannot parse {what} from '{field}'"),
    })
}

fn parse_edge_file(
    path: &Path,
    header: bool,
    index: &HashMap<String, usize>,
) -> Result<Vec<(usize, usize)>> {
    let text = read_to_string(path)?;
    let mut edges = Vec::new();
    for (line_no, line) in data_lines(&text, header) {
        let mut parts = line.split('\t');
        let (a, b) = match (parts.next(), parts.next(), parts.next()) {
            (Some(a), Some(b), None) => (a, b),
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
        edges.push((resolve(a)?, resolve(b)?));
    }
    Ok(edges)
}

/// One-hot bucket features from total degree, 16 log-spaced buckets; the
/// fallback when the node file carries no attribute columns.
fn degree_bucket_features(
    n: usize,
    supply: &[(usize, usize)],
    competitors: &[(usize, usize)],
) -> DenseMatrix {
    const BUCKETS: usize = 16;
    let mut deg = vec![0usize; n];
    for &(s, d) in supply {
        deg[s] += 1;
        deg[d] += 1;
    }
    for &(i, j) in competitors {
        deg[i] += 1;
        deg[j] += 1;
    }
    let mut m = DenseMatrix::zeros(n, BUCKETS);
    for (i, &d) in deg.iter().enumerate() {
        let bucket = (((d + 1) as f64).log2().floor() as usize).min(BUCKETS - 1);
        m.set(i, bucket, 1.0);
    }
    m
}

/// Load and validate a graph from the three TSV files.
pub fn load_graph(
    node_path: &Path,
    supply_path: &Path,
    competitor_path: &Path,
    header: bool,
) -> Result<LoadedGraph> {
    let node_text = read_to_string(node_path)?;
    let mut ids: Vec<String> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut features: Vec<Vec<f64>> = Vec::new();
    let mut dim: Option<usize> = None;
    for (line_no, line) in data_lines(&node_text, header) {
        let mut parts = line.split('\t');
        let id = parts.next().unwrap_or_default();
        if id.is_empty() {
            return Err(Error::Parse {
                path: node_path.to_path_buf(),
                line: line_no,
                msg: "empty node id".to_string(),
            });
        }
        if index.contains_key(id) {
            return Err(Error::DuplicateId {
                path: node_path.to_path_buf(),
                line: line_no,
                id: id.to_string(),
            });
        }
        let row: Vec<f64> = parts
            .map(|f| parse_field(f, node_path, line_no, "attribute"))
            .collect::<Result<_>>()?;
        match dim {
            None => dim = Some(row.len()),
            Some(d) if d != row.len() => {
                return Err(Error::Parse {
                    path: node_path.to_path_buf(),
                    line: line_no,
                    msg: format!("expected {d} attribute columns, found {}", row.len()),
                })
            }
            _ => {}
        }
        index.insert(id.to_string(), ids.len());
        ids.push(id.to_string());
        features.push(row);
    }
    let n = ids.len();
    let supply = parse_edge_file(supply_path, header, &index)?;
    let competitors = parse_edge_file(competitor_path, header, &index)?;

    let mut warnings = Vec::new();
    let attr = if dim.unwrap_or(0) == 0 {
        warnings.push(
            "node file has no attribute columns; using one-hot degree-bucket features (16 log-spaced buckets)"
                .to_string(),
        );
        degree_bucket_features(n, &supply, &competitors)
    } else {
        let d = dim.unwrap();
        let mut data = Vec::with_capacity(n * d);
        for row in features {
            data.extend(row);
        }
        DenseMatrix::new(n, d, data)?
    };

    let graph = CompanyGraph::build(n, attr, supply, competitors, Some(ids))?;
    Ok(LoadedGraph { graph, warnings })
}

fn label_of(g: &CompanyGraph, i: usize) -> String {
    match &g.node_labels {
        Some(labels) => labels[i].clone(),
        None => format!("n{i}"),
    }
}

/// Write the three graph files; attributes use shortest round-trip floats.
pub fn save_graph(
    g: &CompanyGraph,
    node_path: &Path,
    supply_path: &Path,
    competitor_path: &Path,
) -> Result<()> {
    g.validate()?;
    let mut nodes = String::new();
    for i in 0..g.n {
        nodes.push_str(&label_of(g, i));
        for j in 0..g.attr.cols() {
            let _ = write!(nodes, "\t{}", g.attr.get(i, j));
        }
        nodes.push('\n');
    }
    write_atomic(node_path, nodes.as_bytes())?;

    let mut supply = String::new();
    for &(s, d) in &g.supply_edges {
        let _ = writeln!(supply, "{}\t{}", label_of(g, s), label_of(g, d));
    }
    write_atomic(supply_path, supply.as_bytes())?;

    let mut comp = String::new();
    for &(i, j) in &g.competitor_edges {
        let _ = writeln!(comp, "{}\t{}", label_of(g, i), label_of(g, j));
    }
    write_atomic(competitor_path, comp.as_bytes())?;
    Ok(())
}
