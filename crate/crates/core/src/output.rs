//! Run directories: serialized writes, stage timings and a manifest with
//! content hashes of every file written.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::Config;
use crate::error::{Error, Result};
use crate::grid::{self, Field};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FileEntry {
    /// Path relative to the run directory.
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub verb: String,
    /// Fully resolved configuration; re-running it reproduces the outputs.
    pub config: Config,
    pub grid: String,
    /// SHA-256 of the Riesz multiplier, when a plan was built.
    pub plan_fingerprint: Option<String>,
    pub seed: u64,
    pub threads: usize,
    pub wall_time_seconds: f64,
    pub stages: Vec<StageTiming>,
    pub files: Vec<FileEntry>,
    pub status: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Output directory of one run.
pub struct RunDir {
    root: PathBuf,
    files: Vec<PathBuf>,
    stages: Vec<StageTiming>,
    started: Instant,
}

impl RunDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
        Ok(Self {
            root: root.to_path_buf(),
            files: Vec::new(),
            stages: Vec::new(),
            started: Instant::now(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    fn record(&mut self, path: PathBuf) {
        if !self.files.contains(&path) {
            self.files.push(path);
        }
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.path(name);
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        self.record(path);
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let text = serde_json::to_string_pretty(value).expect("output serializes");
        self.write_bytes(name, (text + "\n").as_bytes())
    }

    pub fn write_csv<I, S>(&mut self, name: &str, header: &str, rows: I) -> Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut text = String::from(header);
        text.push('\n');
        for row in rows {
            text.push_str(row.as_ref());
            text.push('\n');
        }
        self.write_bytes(name, text.as_bytes())
    }

    /// Raw field dump plus its JSON sidecar.
    pub fn write_field(&mut self, name: &str, u: &Field) -> Result<()> {
        let path = self.path(name);
        grid::write_field_dump(u, &path)?;
        self.record(grid::sidecar_path(&path));
        self.record(path);
        Ok(())
    }

    /// Run `f` and record its wall time under `stage`.
    pub fn stage<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let t0 = Instant::now();
        let out = f();
        self.stages.push(StageTiming {
            stage: stage.into(),
            seconds: t0.elapsed().as_secs_f64(),
        });
        out
    }

    fn inventory(&self) -> Result<Vec<FileEntry>> {
        let mut entries = Vec::with_capacity(self.files.len());
        for path in &self.files {
            let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
            let rel = path.strip_prefix(&self.root).unwrap_or(path);
            entries.push(FileEntry {
                path: rel.to_string_lossy().into_owned(),
                bytes: bytes.len() as u64,
                sha256: sha256_hex(&bytes),
            });
        }
        entries.sort_by(|a, b| a.path.cmp(&b.path));
        Ok(entries)
    }

    /// Write `manifest.json` describing everything written so far.
    #[allow(clippy::too_many_arguments)]
    pub fn finish(
        mut self,
        tool: &str,
        verb: &str,
        config: &Config,
        plan_fingerprint: Option<String>,
        seed: u64,
        threads: usize,
        status: &str,
    ) -> Result<RunManifest> {
        let manifest = RunManifest {
            tool: tool.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            verb: verb.into(),
            config: config.clone(),
            grid: config.grid_spec()?.to_string(),
            plan_fingerprint,
            seed,
            threads,
            wall_time_seconds: self.started.elapsed().as_secs_f64(),
            stages: std::mem::take(&mut self.stages),
            files: self.inventory()?,
            status: status.into(),
        };
        self.write_json("manifest.json", &manifest)?;
        Ok(manifest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
