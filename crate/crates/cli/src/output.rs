//! Writing artifacts under the output directory.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::PipelineConfig;
use crate::error::{CliError, CliResult};

/// Envelope shared by every JSON run report. Field order is fixed by the
/// struct, so reports diff cleanly between runs.
#[derive(Serialize)]
pub struct RunReport<'a, T: Serialize> {
    pub command: &'a str,
    pub tool_version: &'a str,
    pub inputs: Vec<String>,
    pub config: &'a PipelineConfig,
    pub warnings: Vec<String>,
    pub result: T,
}

pub struct OutputDir {
    root: PathBuf,
}

impl OutputDir {
    pub fn create(root: &Path) -> CliResult<Self> {
        fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        Ok(OutputDir { root: root.to_path_buf() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write(&self, name: &str, bytes: &[u8]) -> CliResult<PathBuf> {
        let p = self.path(name);
        if let Some(parent) = p.parent() {
            fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
        }
        fs::write(&p, bytes).map_err(|e| CliError::io(&p, e))?;
        Ok(p)
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> CliResult<PathBuf> {
        let mut bytes =
            serde_json::to_vec_pretty(value).map_err(|e| CliError::Internal(format!("serializing {name}: {e}")))?;
        bytes.push(b'\n');
        self.write(name, &bytes)
    }

    pub fn write_csv(&self, name: &str, header: &[&str], rows: &[Vec<String>]) -> CliResult<PathBuf> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Internal(e.to_string()))?;
        self.write(name, &bytes)
    }
}

/// Read an input file, saying where it comes from when it is absent.
pub fn read_input(path: &Path, source: &str) -> CliResult<Vec<u8>> {
    if !path.exists() {
        return Err(CliError::MissingInput { path: path.to_path_buf(), hint: format!("file not found; {source}") });
    }
    fs::read(path).map_err(|e| CliError::io(path, e))
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn display(p: &Path) -> String {
    p.display().to_string()
}
