use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

/// Provenance attached to every output file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub command_line: Vec<String>,
    /// SHA-256 of the resolved subcommand configuration as JSON.
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
}

impl RunManifest {
    pub fn new<C: Serialize>(command_line: &[String], config: &C, seed: u64) -> Self {
        let json = serde_json::to_vec(config).expect("configs serialize to JSON");
        let hash = Sha256::digest(&json);
        Self {
            command_line: command_line.to_vec(),
            config_hash: hash.iter().map(|b| format!("{b:02x}")).collect(),
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        }
    }
}
