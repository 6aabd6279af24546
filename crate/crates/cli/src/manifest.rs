// SPDX-FileCopyrightText: Copyright (c) 2026 The acam-core Authors
// SPDX-License-Identifier: Apache-2.0

//! Report writing and the per-run manifest.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Serialize)]
pub struct OutputDigest {
    pub path: String,
    pub bytes: usize,
    pub sha256: String,
}

/// Everything needed to reproduce a run. No timestamps, so identical
/// inputs give a byte-identical manifest.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub args: Vec<String>,
    pub seed: u64,
    pub config_paths: Vec<String>,
    pub outputs: Vec<OutputDigest>,
}

pub struct Run {
    manifest: RunManifest,
    config_dir: Option<PathBuf>,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

impl Run {
    pub fn new(command: &str, args: Vec<String>, seed: u64, config_dir: Option<PathBuf>) -> Self {
        let manifest = RunManifest {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            args,
            seed,
            config_paths: Vec::new(),
            outputs: Vec::new(),
        };
        Self { manifest, config_dir }
    }

    pub fn seed(&self) -> u64 {
        self.manifest.seed
    }

    /// Relative config paths resolve against the config directory when one is set.
    pub fn config_path(&mut self, p: &Path) -> PathBuf {
        let resolved = match &self.config_dir {
            Some(dir) if p.is_relative() => dir.join(p),
            _ => p.to_path_buf(),
        };
        self.manifest.config_paths.push(resolved.display().to_string());
        resolved
    }

    pub fn read_config(&mut self, p: &Path) -> Result<String> {
        let path = self.config_path(p);
        fs::read_to_string(&path).with_context(|| format!("reading config {}", path.display()))
    }

    pub fn write(&mut self, path: &Path, bytes: &[u8]) -> Result<()> {
        fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.manifest.outputs.push(OutputDigest {
            path: path.display().to_string(),
            bytes: bytes.len(),
            sha256: hex(&Sha256::digest(bytes)),
        });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, path: &Path, value: &T) -> Result<()> {
        let mut s = serde_json::to_string_pretty(value)?;
        s.push('\n');
        self.write(path, s.as_bytes())
    }

    /// Writes the manifest next to the first output unless a path is given.
    /// Runs without outputs write none.
    pub fn finish(self, path: Option<&Path>) -> Result<()> {
        let target = match (path, self.manifest.outputs.first()) {
            (Some(p), _) => p.to_path_buf(),
            (None, Some(first)) => default_manifest_path(Path::new(&first.path)),
            (None, None) => return Ok(()),
        };
        let mut s = serde_json::to_string_pretty(&self.manifest)?;
        s.push('\n');
        fs::write(&target, s).with_context(|| format!("writing manifest {}", target.display()))
    }
}

/// `out/m.json` -> `out/m.manifest.json`
pub fn default_manifest_path(output: &Path) -> PathBuf {
    let stem = output.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "run".into());
    output.with_file_name(format!("{stem}.manifest.json"))
}
