//! File formats, model persistence, and run manifests.
//!
//! Text formats are TSV with `#` comment lines. Binary containers carry a
//! magic string and a major.minor version; loading a newer minor version
//! succeeds with a warning, a different major version is an error. All float
//! text output uses shortest round-trip formatting, so graph and split files
//! reload bit-exactly.

mod config_file;
mod embeddings;
mod graph_files;
mod manifest;
mod model_file;
mod split_files;

pub use config_file::{format_config, parse_config, parse_config_file};
pub use embeddings::{export_embeddings_tsv, load_embeddings, save_embeddings, LoadedEmbeddings};
pub use graph_files::{load_graph, save_graph, LoadedGraph};
pub use manifest::RunManifest;
pub use model_file::{load_model, save_model, LoadedModel};
pub use split_files::{load_queries, save_split, SplitFiles};

use crate::error::{Error, Result};
use sha2::{Digest, Sha256};
use std::fs;
use std::path::Path;

/// Write a file through a temp sibling and rename, so error paths never leave
/// partial primary outputs behind.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension(match path.extension() {
        Some(ext) => format!("{}.tmp", ext.to_string_lossy()),
        None => "tmp".to_string(),
    });
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// SHA-256 of a file, hex-encoded.
pub fn file_digest(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    Ok(out)
}

pub(crate) fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Iterate the data lines of a TSV file, skipping comments and blanks and an
/// optional header line. Yields (1-based line number, content).
pub(crate) fn data_lines(text: &str, header: bool) -> impl Iterator<Item = (usize, &str)> {
    let mut skipped_header = !header;
    text.lines().enumerate().filter_map(move |(idx, line)| {
        let trimmed = line.trim_end_matches(['\r', '\n']);
        if trimmed.trim().is_empty() || trimmed.starts_with('#') {
            return None;
        }
        if !skipped_header {
            skipped_header = true;
            return None;
        }
        Some((idx + 1, trimmed))
    })
}
