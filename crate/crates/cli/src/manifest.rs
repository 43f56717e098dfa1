use std::path::{Path, PathBuf};
use std::time::Instant;

use brewsolve::{Error, Result};
use serde::Serialize;

/// Record of one invocation, written next to its outputs.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub tool_version: String,
    pub arguments: Vec<String>,
    pub seed: u64,
    pub jobs: usize,
    pub configs: Vec<(String, PathBuf)>,
    pub inputs: Vec<(String, PathBuf)>,
    pub outputs: Vec<PathBuf>,
    pub wall_seconds: f64,
    #[serde(skip)]
    started: Option<Instant>,
}

impl RunManifest {
    pub fn start(subcommand: &str, seed: u64, jobs: usize) -> Self {
        Self {
            subcommand: subcommand.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            arguments: std::env::args().skip(1).collect(),
            seed,
            jobs,
            configs: Vec::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            wall_seconds: 0.0,
            started: Some(Instant::now()),
        }
    }

    pub fn config(&mut self, role: &str, path: Option<&Path>) {
        if let Some(p) = path {
            self.configs.push((role.to_string(), p.to_path_buf()));
        }
    }

    pub fn input(&mut self, role: &str, path: &Path) {
        self.inputs.push((role.to_string(), path.to_path_buf()));
    }

    /// Writes `text` to `dir/name` and records it.
    pub fn write(&mut self, dir: &Path, name: &str, text: &str) -> Result<PathBuf> {
        let path = dir.join(name);
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        self.outputs.push(path.clone());
        Ok(path)
    }

    pub fn record(&mut self, path: PathBuf) {
        self.outputs.push(path);
    }

    pub fn finish(mut self, dir: &Path) -> Result<PathBuf> {
        self.wall_seconds = self.started.map_or(0.0, |t| t.elapsed().as_secs_f64());
        let path = dir.join(format!("{}.manifest.json", self.subcommand));
        let text = serde_json::to_string_pretty(&self).map_err(|e| Error::Serde(e.to_string()))?;
        std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }
}
