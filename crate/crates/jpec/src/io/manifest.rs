//! Run manifests: every CLI run writes exactly one, recording the command,
//! the effective config, seeds, input and output digests, and wall-clock.
//! Re-running with identical inputs reproduces identical output digests;
//! only the wall-clock line may differ.

use super::{file_digest, write_atomic};
use crate::error::Result;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Debug)]
pub struct RunManifest {
    command: String,
    engine_version: String,
    config: Vec<(String, String)>,
    seeds: Vec<(String, u64)>,
    inputs: Vec<(PathBuf, String)>,
    outputs: Vec<(PathBuf, String)>,
    warnings: Vec<String>,
    started: Instant,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        RunManifest {
            command: command.to_string(),
            engine_version: crate::ENGINE_VERSION.to_string(),
            config: Vec::new(),
            seeds: Vec::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            warnings: Vec::new(),
            started: Instant::now(),
        }
    }

    pub fn config(&mut self, key: &str, value: impl ToString) {
        self.config.push((key.to_string(), value.to_string()));
    }

    pub fn seed(&mut self, key: &str, value: u64) {
        self.seeds.push((key.to_string(), value));
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        let digest = file_digest(path)?;
        self.inputs.push((path.to_path_buf(), digest));
        Ok(())
    }

    pub fn output(&mut self, path: &Path) -> Result<()> {
        let digest = file_digest(path)?;
        self.outputs.push((path.to_path_buf(), digest));
        Ok(())
    }

    pub fn warn(&mut self, message: impl Into<String>) {
        self.warnings.push(message.into());
    }

    pub fn warn_all(&mut self, messages: &[String]) {
        for m in messages {
            self.warnings.push(m.clone());
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        let _ = writeln!(out, "command\t{}", self.command);
        let _ = writeln!(out, "engine_version\t{}", self.engine_version);
        for (k, v) in &self.config {
            let _ = writeln!(out, "config.{k}\t{v}");
        }
        for (k, v) in &self.seeds {
            let _ = writeln!(out, "seed.{k}\t{v}");
        }
        for (p, d) in &self.inputs {
            let _ = writeln!(out, "input.{}\t{d}", p.display());
        }
        for (p, d) in &self.outputs {
            let _ = writeln!(out, "output.{}\t{d}", p.display());
        }
        for w in &self.warnings {
            let _ = writeln!(out, "warning\t{w}");
        }
        let _ = writeln!(out, "wall_clock_ms\t{}", self.started.elapsed().as_millis());
        write_atomic(path, out.as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    #[test]
    fn manifest_records_digests_and_config() {
        let dir = tempdir().unwrap();
        let input = dir.path().join("in.tsv");
        let output = dir.path().join("out.tsv");
        std::fs::write(&input, "x\t1\n").unwrap();
        std::fs::write(&output, "y\t2\n").unwrap();

        let mut m = RunManifest::new("generate");
        m.config("nodes", 300);
        m.seed("graph", 7);
        m.input(&input).unwrap();
        m.output(&output).unwrap();
        m.warn("something minor");
        let path = dir.path().join("manifest.tsv");
        m.write(&path).unwrap();

        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("command\tgenerate\n"));
        assert!(text.contains("config.nodes\t300"));
        assert!(text.contains("seed.graph\t7"));
        assert!(text.contains(&format!("input.{}", input.display())));
        assert!(text.contains(&format!("output.{}", output.display())));
        assert!(text.contains("warning\tsomething minor"));
        assert!(text.contains("wall_clock_ms\t"));
    }

    #[test]
    fn identical_outputs_give_identical_digest_lines() {
        let dir = tempdir().unwrap();
        let out1 = dir.path().join("a.bin");
        let out2 = dir.path().join("b.bin");
        std::fs::write(&out1, [1u8, 2, 3]).unwrap();
        std::fs::write(&out2, [1u8, 2, 3]).unwrap();
        let d1 = super::super::file_digest(&out1).unwrap();
        let d2 = super::super::file_digest(&out2).unwrap();
        assert_eq!(d1, d2);
    }
}
