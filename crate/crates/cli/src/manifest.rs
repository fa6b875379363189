use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

pub const MANIFEST_FILE: &str = "run_manifest.json";

#[derive(Debug, Serialize)]
pub struct Versions {
    pub morphopt: &'static str,
    pub cli: &'static str,
    pub bundle_schema: u32,
    pub checkpoint: u32,
}

impl Default for Versions {
    fn default() -> Self {
        Self {
            morphopt: morphopt::VERSION,
            cli: env!("CARGO_PKG_VERSION"),
            bundle_schema: morphopt::ommgp::BUNDLE_SCHEMA_VERSION,
            checkpoint: morphopt::optim::CHECKPOINT_VERSION,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub workers: usize,
    pub versions: Versions,
    /// Seconds since the Unix epoch at start.
    pub started_at: u64,
    pub wall_time_s: f64,
    pub exit_code: i32,
    pub error: Option<String>,
}

pub fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

impl RunManifest {
    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        fs::create_dir_all(dir)?;
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        fs::write(dir.join(MANIFEST_FILE), text)
    }
}
