//! Per-run manifest: written before any heavy work starts, finalized with the
//! end timestamp and the list of output files living next to it.

use std::path::Path;

use serde::Serialize;

use tenas::error::Error;

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub space: String,
    pub config: serde_json::Value,
    pub base_seed: u64,
    pub version: String,
    pub started_at: String,
    pub finished_at: Option<String>,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn begin(command: &str, space: &str, config: serde_json::Value, base_seed: u64) -> Self {
        RunManifest {
            command: command.to_string(),
            space: space.to_string(),
            config,
            base_seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            started_at: chrono::Utc::now().to_rfc3339(),
            finished_at: None,
            outputs: Vec::new(),
        }
    }

    pub fn write(&self, dir: &Path) -> Result<(), Error> {
        let path = dir.join("manifest.json");
        std::fs::write(&path, serde_json::to_string_pretty(self).unwrap())
            .map_err(|e| Error::Io(format!("write {}: {e}", path.display())))
    }

    pub fn finish(&mut self, dir: &Path, outputs: &[&str]) -> Result<(), Error> {
        self.finished_at = Some(chrono::Utc::now().to_rfc3339());
        self.outputs = outputs.iter().map(|s| s.to_string()).collect();
        self.write(dir)
    }
}
