use std::collections::BTreeMap;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const RUN_FORMAT: &str = "mdcsa-run";
pub const RUN_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileHash {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format: String,
    pub version: u32,
    pub command: String,
    pub config_path: Option<String>,
    pub config_sha256: String,
    pub seed: u64,
    /// Named directories this run read from or depends on.
    pub links: BTreeMap<String, String>,
    /// Command arguments that shape the outputs, such as protocol and variant.
    pub params: BTreeMap<String, String>,
    pub input_manifests: Vec<String>,
    pub inputs: Vec<FileHash>,
    pub outputs: Vec<FileHash>,
    pub wall_clock_s: f64,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut f = fs::File::open(path)?;
    let mut h = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf)?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(hex::encode(h.finalize()))
}

pub fn sha256_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn hash_files(paths: &[PathBuf]) -> Result<Vec<FileHash>> {
    paths
        .iter()
        .map(|p| {
            Ok(FileHash {
                path: p.display().to_string(),
                sha256: sha256_file(p)?,
            })
        })
        .collect()
}

impl RunManifest {
    pub fn path_in(dir: &Path) -> PathBuf {
        dir.join(MANIFEST_FILE)
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = Self::path_in(dir);
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(&path, text)?;
        Ok(path)
    }

    /// Reads the manifest of `dir`, naming the expected file when absent.
    pub fn read(dir: &Path) -> Result<Self> {
        let path = Self::path_in(dir);
        let text = fs::read_to_string(&path).map_err(|e| Error::MissingInput {
            path: path.clone(),
            reason: format!("expected a run manifest ({e})"),
        })?;
        let m: RunManifest = serde_json::from_str(&text).map_err(|e| Error::format(&path, e.to_string()))?;
        if m.format != RUN_FORMAT || m.version != RUN_VERSION {
            return Err(Error::format(&path, format!("unsupported manifest {} v{}", m.format, m.version)));
        }
        Ok(m)
    }

    /// Reads the manifest of `dir` and checks it came from `command`.
    pub fn expect(dir: &Path, command: &str) -> Result<Self> {
        let m = Self::read(dir)?;
        if m.command != command {
            return Err(Error::MissingInput {
                path: Self::path_in(dir),
                reason: format!("expected the manifest of a `{command}` run, found `{}`", m.command),
            });
        }
        Ok(m)
    }

    pub fn param(&self, name: &str) -> Result<&str> {
        self.params.get(name).map(|s| s.as_str()).ok_or_else(|| Error::MissingInput {
            path: PathBuf::from(name),
            reason: format!("`{}` manifest has no {name} parameter", self.command),
        })
    }

    pub fn link(&self, name: &str) -> Result<PathBuf> {
        self.links.get(name).map(PathBuf::from).ok_or_else(|| Error::MissingInput {
            path: PathBuf::from(name),
            reason: format!("`{}` manifest has no {name} link", self.command),
        })
    }
}
