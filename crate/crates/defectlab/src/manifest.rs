//! Run manifests: content digests of every stage input and output, so a
//! finished stage can be recognized and skipped on re-run and two runs can
//! be compared byte-for-byte. Deliberately records no wall-clock time.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[must_use]
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_digest(path: &Path) -> Result<String> {
    Ok(sha256_hex(&std::fs::read(path)?))
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageRecord {
    /// Path (relative to the manifest's directory where possible) -> sha256.
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub config_hash: String,
    pub seed: u64,
    pub stages: BTreeMap<String, StageRecord>,
    /// Cells or projects skipped with a reason; never silently dropped.
    pub skips: Vec<String>,
}

impl RunManifest {
    #[must_use]
    pub fn new(config_hash: &str, seed: u64) -> Self {
        RunManifest {
            tool_version: TOOL_VERSION.to_string(),
            config_hash: config_hash.to_string(),
            seed,
            stages: BTreeMap::new(),
            skips: Vec::new(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let m: RunManifest = serde_json::from_str(&text)?;
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }

    /// True when every recorded output of the stage still exists under
    /// `dir` with an unchanged digest. A stage with no record is stale.
    #[must_use]
    pub fn stage_current(&self, stage: &str, dir: &Path) -> bool {
        let Some(rec) = self.stages.get(stage) else {
            return false;
        };
        if rec.outputs.is_empty() {
            return false;
        }
        rec.outputs.iter().all(|(rel, digest)| {
            file_digest(&dir.join(rel)).is_ok_and(|d| &d == digest)
        })
    }

    /// Digests the named files under `dir` and records them for the stage.
    pub fn record_stage(
        &mut self,
        stage: &str,
        dir: &Path,
        inputs: &[(String, String)],
        outputs: &[String],
    ) -> Result<()> {
        let mut rec = StageRecord::default();
        for (name, digest) in inputs {
            rec.inputs.insert(name.clone(), digest.clone());
        }
        for rel in outputs {
            let digest = file_digest(&dir.join(rel)).map_err(|e| {
                Error::Config(format!("stage {stage} claims missing output {rel}: {e}"))
            })?;
            rec.outputs.insert(rel.clone(), digest);
        }
        self.stages.insert(stage.to_string(), rec);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digests_are_stable_and_hex() {
        let d = sha256_hex(b"abc");
        assert_eq!(
            d,
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn stage_tracking_detects_edits_and_deletions() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("out.csv"), "a,b\n1,2\n").unwrap();
        let mut m = RunManifest::new("cfg", 42);
        assert!(!m.stage_current("rq1", dir.path()), "unrecorded stage is stale");
        m.record_stage("rq1", dir.path(), &[], &["out.csv".into()])
            .unwrap();
        assert!(m.stage_current("rq1", dir.path()));

        std::fs::write(dir.path().join("out.csv"), "a,b\n9,9\n").unwrap();
        assert!(!m.stage_current("rq1", dir.path()), "edit invalidates");
        std::fs::remove_file(dir.path().join("out.csv")).unwrap();
        assert!(!m.stage_current("rq1", dir.path()), "deletion invalidates");
    }

    #[test]
    fn save_load_round_trip_is_identical() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("x"), "payload").unwrap();
        let mut m = RunManifest::new("deadbeef", 7);
        m.record_stage("rq5", dir.path(), &[("in".into(), "d1".into())], &["x".into()])
            .unwrap();
        m.skips.push("projA: too few releases".into());
        let path = dir.path().join("manifest.json");
        m.save(&path).unwrap();
        let back = RunManifest::load(&path).unwrap();
        assert_eq!(m, back);
        // Saving the same state twice produces identical bytes.
        let first = std::fs::read(&path).unwrap();
        back.save(&path).unwrap();
        assert_eq!(first, std::fs::read(&path).unwrap());
    }

    #[test]
    fn missing_output_refuses_to_record() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = RunManifest::new("h", 0);
        let err = m
            .record_stage("rq1", dir.path(), &[], &["ghost.csv".into()])
            .unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }
}
