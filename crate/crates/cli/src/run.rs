//! Run bookkeeping: input/output digests, atomic writes and the manifest
//! emitted for every successful invocation.

use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

impl FileDigest {
    fn of(path: &Path, bytes: &[u8]) -> Self {
        Self {
            path: path.display().to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: &'static str,
    pub version: &'static str,
    pub config_sha256: String,
    pub config: Value,
    pub seed: Option<u64>,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub wall_time_ms: f64,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn is_stdio(path: &Path) -> bool {
    path.as_os_str() == "-"
}

/// Writes through a temporary file in the target directory, then renames.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// `<path>.manifest.json`, with any trailing separator dropped.
pub fn manifest_path(path: &Path) -> PathBuf {
    let clean: PathBuf = path.components().collect();
    let mut s = clean.into_os_string();
    s.push(".manifest.json");
    PathBuf::from(s)
}

pub struct Run {
    command: &'static str,
    config: Value,
    seed: Option<u64>,
    inputs: Vec<FileDigest>,
    outputs: Vec<FileDigest>,
    started: Instant,
}

impl Run {
    /// `config` holds every flag that affects output bytes; paths stay out of it.
    pub fn new(command: &'static str, config: Value, seed: Option<u64>) -> Self {
        Self {
            command,
            config,
            seed,
            inputs: Vec::new(),
            outputs: Vec::new(),
            started: Instant::now(),
        }
    }

    /// Replaces the config when it depends on what was read.
    pub fn set_config(&mut self, config: Value) {
        self.config = config;
    }

    /// Reads a file, or stdin for `-`, and records its digest.
    pub fn read_input(&mut self, path: &Path) -> Result<Vec<u8>> {
        let bytes = if is_stdio(path) {
            let mut buf = Vec::new();
            io::stdin().read_to_end(&mut buf).context("reading stdin")?;
            buf
        } else {
            fs::read(path).with_context(|| format!("reading {}", path.display()))?
        };
        self.inputs.push(FileDigest::of(path, &bytes));
        Ok(bytes)
    }

    /// Writes a file atomically, or to stdout for `-`, and records its digest.
    pub fn write_output(&mut self, path: &Path, bytes: &[u8]) -> Result<()> {
        if is_stdio(path) {
            let mut out = io::stdout().lock();
            out.write_all(bytes).context("writing stdout")?;
            out.flush().context("writing stdout")?;
        } else {
            atomic_write(path, bytes).with_context(|| format!("writing {}", path.display()))?;
        }
        self.outputs.push(FileDigest::of(path, bytes));
        Ok(())
    }

    /// Records a file that was already written by someone else.
    pub fn record_output(&mut self, path: &Path) -> Result<()> {
        let bytes = fs::read(path).with_context(|| format!("reading back {}", path.display()))?;
        self.outputs.push(FileDigest::of(path, &bytes));
        Ok(())
    }

    pub fn finish(self) -> RunManifest {
        let canonical = serde_json::to_vec(&self.config).expect("config is plain JSON");
        RunManifest {
            command: self.command,
            version: env!("CARGO_PKG_VERSION"),
            config_sha256: sha256_hex(&canonical),
            config: self.config,
            seed: self.seed,
            inputs: self.inputs,
            outputs: self.outputs,
            wall_time_ms: self.started.elapsed().as_secs_f64() * 1e3,
        }
    }

    /// Finishes the run and writes the manifest next to `output`, or to
    /// stderr when the output went to stdout.
    pub fn emit(self, output: &Path) -> Result<()> {
        let manifest = self.finish();
        let json = serde_json::to_vec_pretty(&manifest)?;
        if is_stdio(output) {
            let mut err = io::stderr().lock();
            err.write_all(&json)?;
            err.write_all(b"\n")?;
        } else {
            let path = manifest_path(output);
            atomic_write(&path, &json).with_context(|| format!("writing {}", path.display()))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_path_drops_trailing_slash() {
        assert_eq!(
            manifest_path(Path::new("out/rpc/")),
            PathBuf::from("out/rpc.manifest.json")
        );
        assert_eq!(
            manifest_path(Path::new("a.rpc1")),
            PathBuf::from("a.rpc1.manifest.json")
        );
    }

    #[test]
    fn config_hash_ignores_key_order() {
        let a = Run::new("x", serde_json::json!({"k": 4, "seed": 7}), None).finish();
        let b = Run::new("x", serde_json::json!({"seed": 7, "k": 4}), None).finish();
        assert_eq!(a.config_sha256, b.config_sha256);
    }

    #[test]
    fn atomic_write_replaces_content() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.bin");
        atomic_write(&p, b"one").unwrap();
        atomic_write(&p, b"two").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"two");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
