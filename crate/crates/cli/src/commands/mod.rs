pub mod analysis;
pub mod data;
pub mod model;

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::PipelineConfig;
use crate::error::{CliError, CliResult};
use crate::output::{OutputDir, RunReport};
use crate::Command;

pub fn dispatch(command: &Command, cfg: &PipelineConfig) -> CliResult<()> {
    match command {
        Command::Validate(a) => data::validate(a, cfg),
        Command::Features(a) => data::features(&a.data, cfg),
        Command::Segscore(a) => data::segscore(&a.data, cfg),
        Command::Phantom(a) => data::phantom(a, cfg),
        Command::SslEval(a) => analysis::ssl_eval(a, cfg),
        Command::Agreement(a) => analysis::agreement(a, cfg),
        Command::Train(a) => model::train(a, cfg),
        Command::Predict(a) => model::predict(a, cfg),
        Command::Report(a) => model::report(a, cfg),
    }
}

/// Data directory from the command line, falling back to the configuration.
fn data_root(cfg: &PipelineConfig, arg: Option<&Path>) -> CliResult<PathBuf> {
    arg.map(Path::to_path_buf)
        .or_else(|| cfg.data_root.clone())
        .ok_or_else(|| CliError::Usage("no data directory: pass DATA or set `data_root` in the config".into()))
}

/// Write `<command>_run.json` with the effective configuration.
fn finish<T: Serialize>(
    out: &OutputDir,
    command: &str,
    inputs: Vec<String>,
    cfg: &PipelineConfig,
    warnings: Vec<String>,
    result: T,
) -> CliResult<()> {
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    let report = RunReport {
        command,
        tool_version: env!("CARGO_PKG_VERSION"),
        inputs,
        config: cfg,
        warnings,
        result,
    };
    out.write_json(&format!("{}_run.json", command.replace('-', "_")), &report)?;
    Ok(())
}
