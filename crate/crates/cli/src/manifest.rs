use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

/// Everything needed to regenerate a run's outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// Arguments after the program name, exactly as given.
    pub argv: Vec<String>,
    /// Effective parameters after merging the config file and flags.
    pub params: serde_json::Value,
    pub seed: Option<u64>,
    pub version: String,
    pub timestamp: String,
    pub outputs: Vec<PathBuf>,
}

impl RunManifest {
    pub fn new(command: &str, argv: &[String], params: serde_json::Value, seed: Option<u64>) -> Self {
        RunManifest {
            command: command.to_string(),
            argv: argv.to_vec(),
            params,
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
            outputs: Vec::new(),
        }
    }

    pub fn default_path(out: &Path) -> PathBuf {
        let mut name = out.file_name().unwrap_or_default().to_os_string();
        name.push(".manifest.json");
        out.with_file_name(name)
    }
}
