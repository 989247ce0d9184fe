//! Run manifests: one JSON file per command invocation listing the resolved
//! configuration and every output written. Timestamps live only here.

use std::path::Path;
use std::time::Instant;

use serde::Serialize;

#[derive(Debug, Serialize)]
pub struct Skipped {
    /// `None` when a whole group failed before any problem ran.
    pub problem_id: Option<usize>,
    pub reason: String,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub version: &'static str,
    pub seed: u64,
    pub jobs: Option<usize>,
    pub config: serde_json::Value,
    pub outputs: Vec<String>,
    pub skipped: Vec<Skipped>,
    pub status: &'static str,
    pub error: Option<String>,
    pub started_at: String,
    pub duration_secs: f64,
    #[serde(skip)]
    clock: Option<Instant>,
}

impl Manifest {
    pub fn start(command: &str, seed: u64, jobs: Option<usize>) -> Self {
        Self {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION"),
            seed,
            jobs,
            config: serde_json::Value::Null,
            outputs: Vec::new(),
            skipped: Vec::new(),
            status: "running",
            error: None,
            started_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
            duration_secs: 0.0,
            clock: Some(Instant::now()),
        }
    }

    pub fn set_config<T: Serialize>(&mut self, config: &T) {
        self.config = serde_json::to_value(config).unwrap_or(serde_json::Value::Null);
    }

    pub fn output(&mut self, relative: &str) {
        self.outputs.push(relative.to_string());
    }

    pub fn finish(&mut self, error: Option<String>) {
        self.duration_secs = self.clock.map_or(0.0, |c| c.elapsed().as_secs_f64());
        self.status = match (&error, self.skipped.is_empty()) {
            (Some(_), _) => "failed",
            (None, true) => "ok",
            (None, false) => "partial",
        };
        self.error = error;
    }

    pub fn file_name(&self) -> String {
        format!("{}.manifest.json", self.command)
    }

    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        let mut s = serde_json::to_string_pretty(self).map_err(std::io::Error::other)?;
        s.push('\n');
        std::fs::write(dir.join(self.file_name()), s)
    }
}
