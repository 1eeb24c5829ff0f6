use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, Read};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use leakage_core::{Error, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Artifact {
    pub sha256: String,
    pub bytes: u64,
}

/// Written to `<out>/manifest.json` after every command. Artifacts are keyed
/// by path relative to the output directory; later commands add to the map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    pub config_hash: String,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub artifacts: BTreeMap<String, Artifact>,
}

pub fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

pub fn hash_file(path: &Path) -> Result<Artifact> {
    let mut f = BufReader::new(File::open(path)?);
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 1 << 16];
    let mut bytes = 0u64;
    loop {
        let n = f.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
        bytes += n as u64;
    }
    Ok(Artifact { sha256: hex::encode(hasher.finalize()), bytes })
}

fn relative(root: &Path, path: &Path) -> String {
    let rel = path.strip_prefix(root).unwrap_or(path);
    rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/")
}

impl RunManifest {
    pub fn path(root: &Path) -> PathBuf {
        root.join(MANIFEST_FILE)
    }

    pub fn load(root: &Path) -> Result<Option<Self>> {
        match std::fs::read_to_string(Self::path(root)) {
            Ok(text) => Ok(Some(serde_json::from_str(&text)?)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e.into()),
        }
    }

    /// Hashes `written` and merges them into the existing manifest, if any.
    pub fn record(root: &Path, command: &str, config_hash: &str, started_unix: u64, written: &[PathBuf]) -> Result<Self> {
        let mut artifacts = Self::load(root)?.map(|m| m.artifacts).unwrap_or_default();
        for p in written {
            artifacts.insert(relative(root, p), hash_file(p)?);
        }
        let manifest = RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config_hash: config_hash.to_string(),
            started_unix,
            finished_unix: unix_now(),
            artifacts,
        };
        std::fs::write(Self::path(root), serde_json::to_string_pretty(&manifest)? + "\n")?;
        Ok(manifest)
    }

    /// Paths whose current content no longer matches the recorded hash.
    pub fn mismatches(&self, root: &Path) -> Result<Vec<String>> {
        let mut bad = vec![];
        for (rel, expected) in &self.artifacts {
            match hash_file(&root.join(rel)) {
                Ok(a) if &a == expected => {}
                Ok(_) => bad.push(rel.clone()),
                Err(Error::Io(e)) if e.kind() == std::io::ErrorKind::NotFound => bad.push(format!("{rel} (missing)")),
                Err(e) => return Err(e),
            }
        }
        Ok(bad)
    }
}

/// Fails with a format error naming every artifact that changed.
pub fn verify_against(previous: &RunManifest, root: &Path) -> Result<()> {
    let bad = previous.mismatches(root)?;
    if bad.is_empty() {
        Ok(())
    } else {
        Err(Error::Format(format!("{} artifact(s) differ from the recorded run: {}", bad.len(), bad.join(", "))))
    }
}
