//! Embedding container: self-describing header plus a row-major little-endian
//! f64 payload. Round trips are bitwise lossless.

use super::write_atomic;
use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use std::fs;
use std::path::Path;

const MAGIC: &[u8; 8] = b"JPECEMB\0";
const MAJOR: u16 = 1;
const MINOR: u16 = 0;

pub struct LoadedEmbeddings {
    pub matrix: DenseMatrix,
    pub ids: Option<Vec<String>>,
    pub seed: u64,
    pub warnings: Vec<String>,
}

pub(crate) struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Cursor<'a> {
    pub(crate) fn new(bytes: &'a [u8], path: &'a Path) -> Self {
        Cursor {
            bytes,
            pos: 0,
            path,
        }
    }

    fn truncated(&self, detail: &str) -> Error {
        Error::Truncated {
            path: self.path.to_path_buf(),
            detail: detail.to_string(),
        }
    }

    pub(crate) fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(self.truncated(&format!("unexpected end of file reading {what}")));
        }
        let slice = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    pub(crate) fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    pub(crate) fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    pub(crate) fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    pub(crate) fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    pub(crate) fn string(&mut self, what: &str) -> Result<String> {
        let len = u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()) as usize;
        let bytes = self.take(len, what)?;
        String::from_utf8(bytes.to_vec()).map_err(|_| self.truncated("invalid UTF-8 id"))
    }

    pub(crate) fn finished(&self) -> bool {
        self.pos == self.bytes.len()
    }
}

pub(crate) fn push_string(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

pub(crate) fn check_header(
    cursor: &mut Cursor<'_>,
    magic: &[u8; 8],
    path: &Path,
) -> Result<Vec<String>> {
    let found = cursor.take(8, "magic")?;
    if found != magic {
        return Err(Error::Truncated {
            path: path.to_path_buf(),
            detail: format!("bad magic, expected {:?}", String::from_utf8_lossy(magic)),
        });
    }
    let major = cursor.u16("major version")?;
    let minor = cursor.u16("minor version")?;
    if major != MAJOR {
        return Err(Error::FormatVersion {
            path: path.to_path_buf(),
            found_major: major,
            found_minor: minor,
            supported_major: MAJOR,
        });
    }
    let mut warnings = Vec::new();
    if minor > MINOR {
        warnings.push(format!(
            "{}: written by a newer minor format version {major}.{minor}; reading as {MAJOR}.{MINOR}",
            path.display()
        ));
    }
    Ok(warnings)
}

pub fn save_embeddings(
    y: &DenseMatrix,
    ids: Option<&[String]>,
    seed: u64,
    path: &Path,
) -> Result<()> {
    if let Some(ids) = ids {
        if ids.len() != y.rows() {
            return Err(Error::InvalidConfig(format!(
                "{} ids for {} embedding rows",
                ids.len(),
                y.rows()
            )));
        }
    }
    let mut out = Vec::with_capacity(32 + y.data().len() * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&MAJOR.to_le_bytes());
    out.extend_from_slice(&MINOR.to_le_bytes());
    out.extend_from_slice(&(y.rows() as u64).to_le_bytes());
    out.extend_from_slice(&(y.cols() as u64).to_le_bytes());
    out.extend_from_slice(&seed.to_le_bytes());
    match ids {
        Some(ids) => {
            out.push(1);
            for id in ids {
                push_string(&mut out, id);
            }
        }
        None => out.push(0),
    }
    for &v in y.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    write_atomic(path, &out)
}

pub fn load_embeddings(path: &Path) -> Result<LoadedEmbeddings> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut cursor = Cursor::new(&bytes, path);
    let warnings = check_header(&mut cursor, MAGIC, path)?;
    let rows = cursor.u64("row count")? as usize;
    let cols = cursor.u64("column count")? as usize;
    let seed = cursor.u64("seed")?;
    let ids = match cursor.u8("id flag")? {
        0 => None,
        1 => {
            let mut ids = Vec::with_capacity(rows);
            for _ in 0..rows {
                ids.push(cursor.string("node id")?);
            }
            Some(ids)
        }
        other => {
            return Err(Error::Truncated {
                path: path.to_path_buf(),
                detail: format!("invalid id flag {other}"),
            })
        }
    };
    let mut data = Vec::with_capacity(rows * cols);
    for _ in 0..rows * cols {
        data.push(cursor.f64("embedding value")?);
    }
    if !cursor.finished() {
        return Err(Error::Truncated {
            path: path.to_path_buf(),
            detail: "trailing bytes after payload (header counts disagree with payload)"
                .to_string(),
        });
    }
    Ok(LoadedEmbeddings {
        matrix: DenseMatrix::new(rows, cols, data)?,
        ids,
        seed,
        warnings,
    })
}

/// Human-readable export: `id <TAB> v1 <TAB> … <TAB> vk`.
pub fn export_embeddings_tsv(y: &DenseMatrix, ids: Option<&[String]>, path: &Path) -> Result<()> {
    use std::fmt::Write as _;
    let mut out = String::new();
    for i in 0..y.rows() {
        match ids {
            Some(ids) => out.push_str(&ids[i]),
            None => {
                let _ = write!(out, "n{i}");
            }
        }
        for j in 0..y.cols() {
            let _ = write!(out, "\t{}", y.get(i, j));
        }
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};
    use tempfile::tempdir;

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
        let mut rng = StdRng::seed_from_u64(seed);
        DenseMatrix::new(
            rows,
            cols,
            (0..rows * cols).map(|_| rng.gen::<f64>() - 0.5).collect(),
        )
        .unwrap()
    }

    #[test]
    fn round_trip_is_bitwise() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("emb.jpe");
        let y = random_matrix(7, 3, 1);
        let ids: Vec<String> = (0..7).map(|i| format!("c{i}")).collect();
        save_embeddings(&y, Some(&ids), 99, &path).unwrap();
        let loaded = load_embeddings(&path).unwrap();
        assert_eq!(loaded.matrix, y);
        assert_eq!(loaded.ids.as_deref(), Some(ids.as_slice()));
        assert_eq!(loaded.seed, 99);
        assert!(loaded.warnings.is_empty());
        for (a, b) in loaded.matrix.data().iter().zip(y.data()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn truncated_payload_is_rejected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("emb.jpe");
        let y = random_matrix(4, 2, 2);
        save_embeddings(&y, None, 0, &path).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        bytes.truncate(bytes.len() - 4);
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            load_embeddings(&path),
            Err(Error::Truncated { .. })
        ));
    }

    #[test]
    fn header_counts_must_match_payload() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("emb.jpe");
        let y = random_matrix(4, 2, 3);
        save_embeddings(&y, None, 0, &path).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        // shrink the declared row count; payload is now too long
        bytes[12..20].copy_from_slice(&2u64.to_le_bytes());
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            load_embeddings(&path),
            Err(Error::Truncated { .. })
        ));
    }

    #[test]
    fn newer_minor_version_warns() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("emb.jpe");
        let y = random_matrix(2, 2, 4);
        save_embeddings(&y, None, 7, &path).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        bytes[10..12].copy_from_slice(&9u16.to_le_bytes());
        fs::write(&path, &bytes).unwrap();
        let loaded = load_embeddings(&path).unwrap();
        assert_eq!(loaded.warnings.len(), 1);
        assert_eq!(loaded.matrix, y);
    }

    #[test]
    fn different_major_version_errors() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("emb.jpe");
        let y = random_matrix(2, 2, 5);
        save_embeddings(&y, None, 7, &path).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        bytes[8..10].copy_from_slice(&2u16.to_le_bytes());
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            load_embeddings(&path),
            Err(Error::FormatVersion { found_major: 2, .. })
        ));
    }

    #[test]
    fn tsv_export_round_trips_through_text() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("emb.tsv");
        let y = random_matrix(3, 2, 6);
        export_embeddings_tsv(&y, None, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        for (i, line) in text.lines().enumerate() {
            let fields: Vec<&str> = line.split('\t').collect();
            assert_eq!(fields.len(), 3);
            for j in 0..2 {
                let parsed: f64 = fields[j + 1].parse().unwrap();
                assert_eq!(parsed.to_bits(), y.get(i, j).to_bits());
            }
        }
    }
}
