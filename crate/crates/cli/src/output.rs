// Copyright 2026 The QERC Lab Authors
// SPDX-License-Identifier: Apache-2.0

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;

/// Output directory that writes every file through a temporary sibling and a
/// rename, and remembers what it wrote for the manifest.
pub struct OutputDir {
    root: PathBuf,
    written: Vec<WrittenFile>,
}

#[derive(Clone, Debug, Serialize)]
pub struct WrittenFile {
    pub name: String,
    pub sha256: String,
    pub bytes: usize,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
        Ok(Self {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn written(&self) -> &[WrittenFile] {
        &self.written
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.path(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
        }
        qerc_core::dataset::write_atomic(&path, bytes)
            .with_context(|| format!("writing {}", path.display()))?;
        self.written.retain(|f| f.name != name);
        self.written.push(WrittenFile {
            name: name.to_string(),
            sha256: hex::encode(Sha256::digest(bytes)),
            bytes: bytes.len(),
        });
        Ok(path)
    }

    pub fn write_json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<PathBuf> {
        let mut bytes = serde_json::to_vec_pretty(value).context("serializing JSON")?;
        bytes.push(b'\n');
        self.write_bytes(name, &bytes)
    }

    /// Renders into a buffer with `fill` and writes the result atomically.
    pub fn write_with(
        &mut self,
        name: &str,
        fill: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
    ) -> Result<PathBuf> {
        let mut buf = Vec::new();
        fill(&mut buf).with_context(|| format!("rendering {name}"))?;
        self.write_bytes(name, &buf)
    }

    /// Writes `manifest.json` describing the run and every file written so far.
    pub fn finish(mut self, cfg: &ExperimentConfig, extra: ManifestExtra) -> Result<PathBuf> {
        let manifest = Manifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            experiment: cfg.experiment,
            config: cfg.clone(),
            config_toml: cfg.to_toml(),
            encoding: extra
                .pca_sha256
                .as_ref()
                .map(|_| qerc_core::dataset::ENCODING_CONVENTION),
            pca_sha256: extra.pca_sha256,
            seeds: extra.seeds,
            files: self.written.clone(),
        };
        self.write_json("manifest.json", &manifest)
    }
}

/// Run facts that only the experiment knows.
#[derive(Clone, Debug, Default)]
pub struct ManifestExtra {
    pub pca_sha256: Option<String>,
    pub seeds: Vec<SeedRecord>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SeedRecord {
    pub label: String,
    pub model_seed: Option<u64>,
    pub train_seed: Option<u64>,
}

#[derive(Serialize)]
struct Manifest {
    tool: &'static str,
    version: &'static str,
    experiment: crate::config::Experiment,
    config: ExperimentConfig,
    config_toml: String,
    encoding: Option<&'static str>,
    pca_sha256: Option<String>,
    seeds: Vec<SeedRecord>,
    files: Vec<WrittenFile>,
}

/// Minimal CSV writer for numeric tables.
pub fn csv_table<W: Write>(
    mut out: W,
    header: &[&str],
    rows: &[Vec<String>],
) -> std::io::Result<()> {
    writeln!(out, "{}", header.join(","))?;
    for row in rows {
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}
