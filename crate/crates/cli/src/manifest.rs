use std::collections::BTreeMap;
use std::path::Path;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use fourier_shap::Result;
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

#[derive(Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub library_version: &'static str,
    pub command: String,
    pub config: Value,
    pub config_hash: String,
    pub started_unix: u64,
    pub wall_seconds: f64,
    pub outputs: Vec<String>,
    pub summary: BTreeMap<String, Value>,
}

/// Clock and config captured when a subcommand starts.
pub struct RunClock {
    started: SystemTime,
    timer: Instant,
    command: String,
    config: Value,
}

impl RunClock {
    pub fn start(command: &impl Serialize) -> Result<Self> {
        let full = serde_json::to_value(command)?;
        let (name, config) = match full {
            Value::Object(map) if map.len() == 1 => map.into_iter().next().expect("one entry"),
            Value::String(name) => (name, Value::Null),
            other => ("unknown".to_string(), other),
        };
        Ok(RunClock {
            started: SystemTime::now(),
            timer: Instant::now(),
            command: name,
            config,
        })
    }

    pub fn finish(self, outputs: Vec<String>, summary: BTreeMap<String, Value>) -> Result<Manifest> {
        // serde_json maps are ordered, so the canonical text is stable
        let canonical = serde_json::to_string(&serde_json::json!({
            "command": self.command,
            "config": self.config,
        }))?;
        Ok(Manifest {
            tool: "fshap",
            library_version: fourier_shap::VERSION,
            config_hash: hex::encode(Sha256::digest(canonical.as_bytes())),
            command: self.command,
            config: self.config,
            started_unix: self.started.duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
            wall_seconds: self.timer.elapsed().as_secs_f64(),
            outputs,
            summary,
        })
    }
}

impl Manifest {
    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }
}
