//! Run manifests: enough to reconstruct a fit and to refuse clobbering an
//! output directory with a different configuration.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{HeapError, Result};

/// Stable 64-bit content hash (FNV-1a) of the canonical run configuration.
/// Not cryptographic; used only to detect configuration drift on resume.
pub fn config_hash(bytes: &[u8]) -> String {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    format!("{h:016x}")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub created_unix: u64,
    pub variant: String,
    pub seed: u64,
    pub chains: usize,
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub data_path: String,
    pub config_hash: String,
    pub wall_secs: f64,
}

impl RunManifest {
    pub fn write(&self, path: &Path) -> Result<()> {
        let f = std::io::BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer_pretty(f, self)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<RunManifest> {
        Ok(serde_json::from_reader(std::fs::File::open(path)?)?)
    }

    /// Refuse to reuse an output directory whose manifest hash differs.
    pub fn check_resume(path: &Path, expected_hash: &str) -> Result<()> {
        if !path.exists() {
            return Ok(());
        }
        let prev = RunManifest::read(path)?;
        if prev.config_hash != expected_hash {
            return Err(HeapError::Manifest(format!(
                "output directory holds a run with config hash {} but this run hashes to {}; \
                 use a fresh --out directory or matching settings",
                prev.config_hash, expected_hash
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = config_hash(b"variant=heaping seed=1");
        let b = config_hash(b"variant=heaping seed=1");
        let c = config_hash(b"variant=heaping seed=2");
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn resume_mismatch_is_refused() {
        let dir = std::env::temp_dir().join(format!("heaplab-manifest-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("manifest.json");
        let m = RunManifest {
            created_unix: 0,
            variant: "heaping".into(),
            seed: 1,
            chains: 1,
            iterations: 10,
            burn_in: 2,
            thin: 1,
            data_path: "panel.csv".into(),
            config_hash: config_hash(b"a"),
            wall_secs: 0.0,
        };
        m.write(&path).unwrap();
        assert!(RunManifest::check_resume(&path, &config_hash(b"a")).is_ok());
        assert!(RunManifest::check_resume(&path, &config_hash(b"b")).is_err());
    }
}
