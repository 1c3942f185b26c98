use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

/// Everything needed to replay a command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command_line: Vec<String>,
    pub command: String,
    /// SHA-256 of the canonical JSON of `config`.
    pub config_hash: String,
    pub config: Value,
    pub seeds: Vec<u64>,
    pub threads: usize,
    pub tool_version: String,
    pub timestamp: String,
}

pub fn config_hash(config: &Value) -> String {
    // serde_json maps are ordered by key, so this text is canonical.
    let text = serde_json::to_string(config).unwrap_or_default();
    Sha256::digest(text.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

impl RunManifest {
    pub fn new(command: &str, config: Value, seeds: Vec<u64>, threads: usize) -> Self {
        RunManifest {
            command_line: std::env::args().collect(),
            command: command.to_string(),
            config_hash: config_hash(&config),
            config,
            seeds,
            threads,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: chrono::Utc::now().to_rfc3339(),
        }
    }
}
