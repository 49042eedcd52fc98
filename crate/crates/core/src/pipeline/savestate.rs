use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Fingerprint of a canonicalized (sorted-key JSON) config section.
pub fn fingerprint(value: &serde_json::Value) -> String {
    sha256_hex(value.to_string().as_bytes())
}

const MANIFEST_FILE: &str = "manifest.json";

/// Content hashes and config fingerprints for every stage output.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    /// Stage name -> fingerprint of the config subsection it depends on.
    pub fingerprints: BTreeMap<String, String>,
    /// Output-relative path -> sha256 of the file contents.
    pub files: BTreeMap<String, String>,
    /// Stage name -> files the stage wrote.
    pub stage_files: BTreeMap<String, Vec<String>>,
}

impl Manifest {
    pub fn load(out_dir: &Path) -> Result<Option<Manifest>> {
        let path = out_dir.join(MANIFEST_FILE);
        if !path.exists() {
            return Ok(None);
        }
        let text = std::fs::read_to_string(path)?;
        Ok(Some(serde_json::from_str(&text)?))
    }

    pub fn save(&self, out_dir: &Path) -> Result<()> {
        std::fs::create_dir_all(out_dir)?;
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(out_dir.join(MANIFEST_FILE), text)?;
        Ok(())
    }

    /// Hash a freshly written stage output into the manifest.
    pub fn record_file(&mut self, out_dir: &Path, stage: &str, rel: &str) -> Result<()> {
        let bytes = std::fs::read(out_dir.join(rel))?;
        self.files.insert(rel.to_string(), sha256_hex(&bytes));
        let entry = self.stage_files.entry(stage.to_string()).or_default();
        if !entry.iter().any(|f| f == rel) {
            entry.push(rel.to_string());
        }
        Ok(())
    }

    /// Forget a stage's outputs before re-running it.
    pub fn clear_stage(&mut self, stage: &str) {
        if let Some(files) = self.stage_files.remove(stage) {
            for rel in files {
                self.files.remove(&rel);
            }
        }
        self.fingerprints.remove(stage);
    }

    /// Check that every recorded output of `stage` still exists with its
    /// recorded hash.
    pub fn verify_stage(&self, out_dir: &Path, stage: &str) -> Result<()> {
        let files = self
            .stage_files
            .get(stage)
            .ok_or_else(|| Error::MissingStage(stage.to_string()))?;
        if files.is_empty() {
            return Err(Error::MissingStage(stage.to_string()));
        }
        for rel in files {
            let path = out_dir.join(rel);
            if !path.exists() {
                return Err(Error::MissingStage(format!("{stage} ({rel} missing)")));
            }
            let bytes = std::fs::read(&path)?;
            let expected = self
                .files
                .get(rel)
                .ok_or_else(|| Error::MissingStage(format!("{stage} ({rel} unhashed)")))?;
            if sha256_hex(&bytes) != *expected {
                return Err(Error::TamperedFile(rel.clone()));
            }
        }
        Ok(())
    }

    /// Compare a stage's stored fingerprint against the current config.
    pub fn verify_fingerprint(&self, stage: &str, current: &str) -> Result<()> {
        match self.fingerprints.get(stage) {
            None => Err(Error::MissingStage(stage.to_string())),
            Some(stored) if stored == current => Ok(()),
            Some(stored) => Err(Error::FingerprintMismatch(format!(
                "stage `{stage}` was produced by a different configuration \
                 (stored {}.., current {}..); re-run from an earlier stage \
                 or restore the config section feeding it",
                &stored[..12.min(stored.len())],
                &current[..12.min(current.len())]
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_known_vector() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn manifest_round_trip_and_verify() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("x.txt"), b"hello").unwrap();
        let mut manifest = Manifest::default();
        manifest.record_file(dir.path(), "pre", "x.txt").unwrap();
        manifest.fingerprints.insert("pre".into(), "f".into());
        manifest.save(dir.path()).unwrap();
        let loaded = Manifest::load(dir.path()).unwrap().unwrap();
        assert_eq!(manifest, loaded);
        loaded.verify_stage(dir.path(), "pre").unwrap();

        std::fs::write(dir.path().join("x.txt"), b"tampered").unwrap();
        assert!(matches!(
            loaded.verify_stage(dir.path(), "pre"),
            Err(Error::TamperedFile(_))
        ));
    }

    #[test]
    fn fingerprint_mismatch_is_reported() {
        let mut manifest = Manifest::default();
        manifest.fingerprints.insert("in".into(), "aaaa".into());
        assert!(manifest.verify_fingerprint("in", "aaaa").is_ok());
        let err = manifest.verify_fingerprint("in", "bbbb").unwrap_err();
        assert!(matches!(err, Error::FingerprintMismatch(_)));
    }
}
