//! Run manifests: one JSON file per command invocation recording what was
//! run and what it wrote.

use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;

use driftwin::io::write_json_file;
use driftwin::Error;

pub const THREADS_VAR: &str = "DRIFTWIN_THREADS";

#[derive(Debug, Serialize)]
pub struct Versions {
    pub driftwin: &'static str,
    pub manifest_format: u32,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub versions: Versions,
    pub threads: usize,
    pub outputs: Vec<PathBuf>,
    pub started_unix: u64,
    pub wall_clock_seconds: f64,
}

impl RunManifest {
    pub fn new<C: Serialize>(command: &str, config: &C, seed: Option<u64>) -> Self {
        RunManifest {
            command: command.into(),
            config: serde_json::to_value(config).unwrap_or(serde_json::Value::Null),
            seed,
            versions: Versions { driftwin: env!("CARGO_PKG_VERSION"), manifest_format: 1 },
            threads: rayon::current_num_threads(),
            outputs: Vec::new(),
            started_unix: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
            wall_clock_seconds: 0.0,
        }
    }

    pub fn outputs(mut self, paths: &[&Path]) -> Self {
        self.outputs = paths.iter().map(|p| p.to_path_buf()).collect();
        self
    }

    pub fn finish(mut self, start: Instant, path: &Path) -> Result<(), Error> {
        self.wall_clock_seconds = start.elapsed().as_secs_f64();
        write_json_file(&self, path)
    }
}

/// `<file>.manifest.json` next to a single-file output.
pub fn beside(output: &Path) -> PathBuf {
    let mut name = output.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    output.with_file_name(name)
}

/// Sizes the global thread pool from `DRIFTWIN_THREADS` when set.
pub fn configure_threads() -> Result<(), String> {
    let Ok(v) = std::env::var(THREADS_VAR) else { return Ok(()) };
    let n: usize = v.trim().parse().map_err(|_| format!("{THREADS_VAR}={v} is not a thread count"))?;
    if n == 0 {
        return Err(format!("{THREADS_VAR} must be at least 1"));
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
}
