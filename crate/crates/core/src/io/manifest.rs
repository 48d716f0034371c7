//! Run manifests: everything needed to rerun a command and reproduce its
//! files byte for byte.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{Config, SolverSettings};
use crate::model::Calibration;

pub const MANIFEST_SCHEMA: &str = "fedmr-run/1";
pub const MANIFEST_FILE: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema: String,
    pub software_version: String,
    pub command: String,
    /// Command options as given, after defaults were applied.
    pub arguments: BTreeMap<String, String>,
    /// Full resolved configuration; `config_hash` is its SHA-256.
    pub config_toml: String,
    pub config_hash: String,
    pub calibration: Calibration,
    pub solver: SolverSettings,
    /// Seeds of stochastic steps, by sweep name. The physics pipeline itself
    /// is deterministic.
    pub seeds: BTreeMap<String, u64>,
    /// Result files and their SHA-256.
    pub files: BTreeMap<String, String>,
    /// Unix time of the run (s). Not part of the hash.
    pub wall_clock: Option<f64>,
}

impl RunManifest {
    pub fn new(command: &str, arguments: BTreeMap<String, String>, config: &Config, calibration: Calibration) -> RunManifest {
        let config_toml = config.to_toml();
        RunManifest {
            schema: MANIFEST_SCHEMA.into(),
            software_version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            arguments,
            config_hash: sha256_hex(config_toml.as_bytes()),
            config_toml,
            calibration,
            solver: config.solver.clone(),
            seeds: BTreeMap::new(),
            files: BTreeMap::new(),
            wall_clock: None,
        }
    }

    /// Hash of the run definition. File digests and wall-clock are left out,
    /// so it is known before any file is written and can be embedded in them.
    pub fn hash(&self) -> String {
        let mut key = self.clone();
        key.files.clear();
        key.wall_clock = None;
        sha256_hex(&serde_json::to_vec(&key).expect("manifest serializes"))
    }

    pub fn stamp_wall_clock(&mut self) {
        self.wall_clock = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .ok()
            .map(|d| d.as_secs_f64());
    }

    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        std::fs::write(dir.join(MANIFEST_FILE), text)
    }

    pub fn read(dir: &Path) -> Result<RunManifest, String> {
        let path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Model;

    fn manifest() -> RunManifest {
        let model = Model::new(Config::default()).unwrap();
        let mut args = BTreeMap::new();
        args.insert("power".into(), "400".into());
        RunManifest::new("iv", args, &model.config, model.calibration)
    }

    #[test]
    fn hash_ignores_wall_clock_and_files() {
        let a = manifest();
        let mut b = a.clone();
        b.stamp_wall_clock();
        b.files.insert("iv.csv".into(), "00".into());
        assert_eq!(a.hash(), b.hash());
        b.arguments.insert("rf".into(), "on".into());
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn round_trips_through_disk() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = manifest();
        m.stamp_wall_clock();
        m.write(dir.path()).unwrap();
        assert_eq!(RunManifest::read(dir.path()).unwrap(), m);
    }
}
