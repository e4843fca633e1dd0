//! Run artifacts: NDJSON records, aggregated CSV tables, JSON reports and the
//! manifest.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::Command as Process;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

/// Output directory that remembers what was written to it.
pub struct Artifacts {
    dir: PathBuf,
    written: Vec<String>,
}

impl Artifacts {
    pub fn create(dir: &Path) -> CliResult<Artifacts> {
        fs::create_dir_all(dir).map_err(|e| CliError::input(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Artifacts { dir: dir.to_path_buf(), written: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn files(&self) -> &[String] {
        &self.written
    }

    fn open(&mut self, name: &str) -> CliResult<BufWriter<File>> {
        let path = self.dir.join(name);
        let file = File::create(&path).map_err(|e| CliError::input(format!("cannot write {}: {e}", path.display())))?;
        if !self.written.iter().any(|w| w == name) {
            self.written.push(name.to_string());
        }
        Ok(BufWriter::new(file))
    }

    /// One JSON document per line.
    pub fn ndjson<T: Serialize>(&mut self, name: &str, records: &[T]) -> CliResult<()> {
        let mut w = self.open(name)?;
        for r in records {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<()> {
        let mut w = self.open(name)?;
        serde_json::to_writer_pretty(&mut w, value)?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }

    pub fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> CliResult<()> {
        let mut w = csv::Writer::from_writer(self.open(name)?);
        w.write_record(header)?;
        for row in rows {
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Marks a file written by other code (e.g. a dataset exporter).
    pub fn register(&mut self, name: &str) {
        self.written.push(name.to_string());
    }
}

pub const MANIFEST_FILE: &str = "manifest.json";

/// Provenance of a run. Replaying `config` reproduces every record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub version: String,
    pub config: RunConfig,
    pub seeds: Vec<u64>,
    pub wall_time_secs: f64,
    pub outputs: Vec<String>,
}

impl Manifest {
    pub fn load(path: &Path) -> CliResult<Manifest> {
        let text = fs::read_to_string(path).map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
    }
}

/// `<crate version>-<git describe>`, or just the crate version outside a
/// checkout.
pub fn version_string() -> String {
    let described = Process::new("git")
        .args(["describe", "--always", "--dirty", "--tags"])
        .current_dir(env!("CARGO_MANIFEST_DIR"))
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty());
    match described {
        Some(d) => format!("{}-{d}", env!("CARGO_PKG_VERSION")),
        None => env!("CARGO_PKG_VERSION").to_string(),
    }
}

pub(crate) fn write_manifest(artifacts: &mut Artifacts, config: &RunConfig, started: Instant) -> CliResult<Manifest> {
    let mut outputs = artifacts.files().to_vec();
    outputs.push(MANIFEST_FILE.to_string());
    let manifest = Manifest {
        version: version_string(),
        config: config.clone(),
        seeds: config.seeds.clone(),
        wall_time_secs: started.elapsed().as_secs_f64(),
        outputs,
    };
    artifacts.json(MANIFEST_FILE, &manifest)?;
    Ok(manifest)
}

/// Formats a float for CSV output, shortest round-trip form.
pub(crate) fn num(v: f64) -> String {
    format!("{v}")
}
