//! Run directories: config snapshot, outputs and a manifest.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use crate::scenario::Scenario;

pub const MANIFEST: &str = "manifest.json";
pub const CONFIG: &str = "config.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub created_unix: u64,
    pub files: Vec<String>,
    /// Sweep points that failed; empty for other commands.
    pub failures: Vec<String>,
    pub status: String,
}

pub struct RunDir {
    path: PathBuf,
    files: Vec<String>,
}

impl RunDir {
    /// Creates `path`. An existing non-empty directory is replaced only with
    /// `overwrite`, and only if it holds a previous run.
    pub fn create(path: &Path, overwrite: bool) -> Result<RunDir> {
        if path.exists() {
            let non_empty = fs::read_dir(path)?.next().is_some();
            if non_empty {
                if !overwrite {
                    bail!("{} exists and is not empty; pass --overwrite to replace it", path.display());
                }
                if !path.join(MANIFEST).is_file() {
                    bail!("{} has no {MANIFEST}; refusing to overwrite a directory that is not a run", path.display());
                }
                fs::remove_dir_all(path).with_context(|| format!("clearing {}", path.display()))?;
            }
        }
        fs::create_dir_all(path).with_context(|| format!("creating {}", path.display()))?;
        Ok(RunDir { path: path.to_path_buf(), files: Vec::new() })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    fn register(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.path.join(name)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let p = self.register(name);
        let f = BufWriter::new(File::create(&p).with_context(|| format!("creating {}", p.display()))?);
        serde_json::to_writer_pretty(f, value)?;
        Ok(())
    }

    pub fn csv(&mut self, name: &str) -> Result<csv::Writer<File>> {
        let p = self.register(name);
        csv::Writer::from_path(&p).with_context(|| format!("creating {}", p.display()))
    }

    pub fn file(&mut self, name: &str) -> Result<BufWriter<File>> {
        let p = self.register(name);
        Ok(BufWriter::new(File::create(&p).with_context(|| format!("creating {}", p.display()))?))
    }

    pub fn snapshot(&mut self, scenario: &Scenario) -> Result<()> {
        self.write_json(CONFIG, scenario)
    }

    pub fn finish(mut self, command: &str, failures: Vec<String>) -> Result<Manifest> {
        self.files.push(MANIFEST.into());
        let m = Manifest {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            created_unix: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
            status: if failures.is_empty() { "ok".into() } else { "partial".into() },
            files: self.files.clone(),
            failures,
        };
        let p = self.path.join(MANIFEST);
        serde_json::to_writer_pretty(BufWriter::new(File::create(&p)?), &m)?;
        Ok(m)
    }
}
