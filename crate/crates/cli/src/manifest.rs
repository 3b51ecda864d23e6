//! Run directories and their manifests.
//!
//! Every command that writes files does so inside one run directory, which ends up holding
//! exactly one `manifest.json`. The manifest records the arguments needed to rerun the
//! command; wall-clock time is confined to the manifest so every other output stays
//! byte-identical across reruns.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_SCHEMA_VERSION: u32 = 1;
/// Environment variable naming the directory under which run directories are created.
pub const OUTPUT_ROOT_ENV: &str = "HOMDP_OUTPUT_ROOT";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    /// Subcommand name, e.g. `train`.
    pub command: String,
    /// Arguments after the program name, replayable by `homdp rerun`.
    pub args: Vec<String>,
    /// Resolved settings of the command; for `train` the full agent configuration.
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub code_version: String,
    /// Files written by the command, relative to the run directory, sorted.
    pub outputs: Vec<String>,
    pub exit_code: i32,
    pub wall_clock_seconds: f64,
}

impl RunManifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let manifest: Self = serde_json::from_str(&text)
            .map_err(|e| CliError::Input(format!("{}: not a run manifest: {e}", path.display())))?;
        if manifest.schema_version != MANIFEST_SCHEMA_VERSION {
            return Err(CliError::Input(format!(
                "{}: manifest schema version {} is not supported (expected {MANIFEST_SCHEMA_VERSION})",
                path.display(),
                manifest.schema_version
            )));
        }
        Ok(manifest)
    }
}

/// A run directory being populated by one command.
pub struct RunDir {
    root: PathBuf,
    outputs: Vec<String>,
    started: Instant,
}

impl RunDir {
    pub fn create(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        std::fs::create_dir_all(&root).map_err(|e| CliError::io(&root, e))?;
        Ok(Self {
            root,
            outputs: Vec::new(),
            started: Instant::now(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.root
    }

    /// Absolute location of `name`, recorded as an output.
    pub fn output(&mut self, name: &str) -> Result<PathBuf> {
        let path = self.root.join(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
        }
        if !self.outputs.iter().any(|o| o == name) {
            self.outputs.push(name.to_string());
        }
        Ok(path)
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> Result<()> {
        let path = self.output(name)?;
        std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))
    }

    pub fn write_json(&mut self, name: &str, value: &impl Serialize) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write_text(name, &text)
    }

    /// Writes the manifest and returns its path.
    pub fn finish(mut self, command: &str, args: &[String], config: serde_json::Value, seed: Option<u64>, exit_code: i32) -> Result<PathBuf> {
        self.outputs.sort();
        let manifest = RunManifest {
            schema_version: MANIFEST_SCHEMA_VERSION,
            command: command.to_string(),
            args: args.to_vec(),
            config,
            seed,
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            outputs: self.outputs,
            exit_code,
            wall_clock_seconds: self.started.elapsed().as_secs_f64(),
        };
        let path = self.root.join(MANIFEST_FILE);
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_round_trips_and_lists_sorted_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let mut run = RunDir::create(dir.path().join("run")).unwrap();
        run.write_text("b.csv", "x\n").unwrap();
        run.write_json("a/report.json", &serde_json::json!({"ok": true})).unwrap();
        run.write_text("b.csv", "y\n").unwrap();
        let args = vec!["verify".to_string(), "--suite".to_string(), "finite".to_string()];
        let path = run.finish("verify", &args, serde_json::json!({"suite": "finite"}), None, 0).unwrap();
        let manifest = RunManifest::load(&path).unwrap();
        assert_eq!(manifest.outputs, vec!["a/report.json", "b.csv"]);
        assert_eq!(manifest.args, args);
        assert_eq!(manifest.schema_version, MANIFEST_SCHEMA_VERSION);
    }

    #[test]
    fn unknown_schema_versions_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(MANIFEST_FILE);
        let text = r#"{"schema_version": 99, "command": "x", "args": [], "config": null, "seed": null,
            "code_version": "0", "outputs": [], "exit_code": 0, "wall_clock_seconds": 0.0}"#;
        std::fs::write(&path, text).unwrap();
        assert!(matches!(RunManifest::load(&path), Err(CliError::Input(_))));
    }
}
