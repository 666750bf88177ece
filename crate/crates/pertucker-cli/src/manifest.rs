//! Per-invocation run manifest: what ran, with which inputs and seed, what
//! it produced, and how long it took. Outputs are reproducible from the
//! manifest (the duration is informational).

use std::path::{Path, PathBuf};
use std::time::Instant;

use pertucker::{Error, Result};
use serde::Serialize;

#[derive(Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config_path: Option<String>,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub seed: Option<u64>,
    pub version: String,
    pub duration_seconds: f64,
}

pub struct RunRecorder {
    start: Instant,
    out_dir: PathBuf,
    manifest: RunManifest,
}

impl RunRecorder {
    pub fn new(command: &str, out_dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(out_dir)?;
        Ok(RunRecorder {
            start: Instant::now(),
            out_dir: out_dir.to_path_buf(),
            manifest: RunManifest {
                command: command.to_string(),
                config_path: None,
                inputs: Vec::new(),
                outputs: Vec::new(),
                seed: None,
                version: env!("CARGO_PKG_VERSION").to_string(),
                duration_seconds: 0.0,
            },
        })
    }

    pub fn config(&mut self, path: &Path) {
        self.manifest.config_path = Some(path.display().to_string());
    }

    pub fn seed(&mut self, seed: u64) {
        self.manifest.seed = Some(seed);
    }

    pub fn input(&mut self, path: &Path) {
        self.manifest.inputs.push(path.display().to_string());
    }

    /// Register an output path under the run's directory.
    pub fn out(&mut self, name: &str) -> PathBuf {
        let path = self.out_dir.join(name);
        self.manifest.outputs.push(path.display().to_string());
        path
    }

    pub fn finish(mut self) -> Result<()> {
        self.manifest.duration_seconds = self.start.elapsed().as_secs_f64();
        let path = self.out_dir.join("run_manifest.json");
        let text = serde_json::to_string_pretty(&self.manifest)
            .map_err(|e| Error::Format(format!("manifest encode: {}", e)))?;
        std::fs::write(path, text)?;
        Ok(())
    }
}

pub fn read_config_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {}", path.display(), e)))
}
