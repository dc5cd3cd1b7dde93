use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::Serialize;

use crate::data::Role;

#[derive(Debug, Serialize)]
pub struct DatasetEntry {
    pub role: Role,
    /// Source files with their SHA-256.
    pub files: Vec<(PathBuf, String)>,
    pub records: usize,
    pub class_histogram: Vec<usize>,
    /// SHA-256 over the selected records (samples and labels).
    pub content_sha256: String,
}

/// Everything needed to rerun a command: the fully resolved arguments,
/// input checksums, produced files and timings.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: &'static str,
    pub seed: u64,
    pub threads: usize,
    pub started_unix_s: u64,
    pub config: serde_json::Value,
    pub datasets: Vec<DatasetEntry>,
    pub artifacts: Vec<PathBuf>,
    pub timings_s: BTreeMap<String, f64>,
    #[serde(skip)]
    clock: Option<(String, Instant)>,
}

impl RunManifest {
    pub fn new(command: &str, seed: u64, threads: usize, config: serde_json::Value) -> Self {
        Self {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION"),
            seed,
            threads,
            started_unix_s: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map_or(0, |d| d.as_secs()),
            config,
            datasets: Vec::new(),
            artifacts: Vec::new(),
            timings_s: BTreeMap::new(),
            clock: None,
        }
    }

    /// Starts timing `phase`, closing the previous one.
    pub fn phase(&mut self, phase: &str) {
        self.stop();
        self.clock = Some((phase.to_string(), Instant::now()));
    }

    fn stop(&mut self) {
        if let Some((name, t)) = self.clock.take() {
            self.timings_s.insert(name, t.elapsed().as_secs_f64());
        }
    }

    pub fn artifact(&mut self, path: impl Into<PathBuf>) {
        self.artifacts.push(path.into());
    }

    pub fn write(mut self, out_dir: &Path) -> Result<PathBuf> {
        self.stop();
        let path = out_dir.join(format!("{}.manifest.json", self.command));
        self.artifacts.push(path.clone());
        let json = serde_json::to_string_pretty(&self)?;
        fs::write(&path, json + "\n").with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}
