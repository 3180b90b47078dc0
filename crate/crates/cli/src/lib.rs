//! `cmrdx`: batch pipeline from cardiac MRI label volumes to diagnosis.
//!
//! Stages communicate through files in the output directory: `features`
//! writes a feature CSV, `train` reads it and writes a model file, `predict`
//! writes a predictions CSV and `report` scores it. Exit codes are 0 on
//! success (warnings allowed), 1 for usage or configuration errors, 2 for
//! data errors and 3 for internal errors.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::ffi::OsString;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::{LengthUnit, MwtPhaseMode, Phase, PipelineConfig, SurfaceDistanceUnit};
use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "cmrdx", version, about = "Cardiac MRI segmentation analysis and disease classification")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for the data split, tuning and model training.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (0 = one per core).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load every case and report header summaries and spacing warnings.
    Validate(DataArgs),
    /// Compute clinical indices and the feature table.
    Features(FeatureArgs),
    /// Score predicted segmentations against reference segmentations.
    Segscore(SegscoreArgs),
    /// Evaluate the consistency and Dice losses on three decoder probability maps.
    SslEval(SslArgs),
    /// Bland-Altman agreement between two feature tables.
    Agreement(AgreementArgs),
    /// Split, tune and train the dual-layer classifier.
    Train(TrainArgs),
    /// Apply a trained model to a feature table.
    Predict(PredictArgs),
    /// Confusion matrix and accuracy of a predictions file.
    Report(ReportArgs),
    /// Write a synthetic labelled corpus.
    Phantom(PhantomArgs),
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Directory of case folders (overrides `data_root`).
    pub data: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FeatureArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_enum)]
    pub ratio_phase: Option<Phase>,
    #[arg(long, value_enum)]
    pub mass_phase: Option<Phase>,
    #[arg(long, value_enum)]
    pub mwt_phases: Option<MwtPhaseMode>,
    #[arg(long, value_enum)]
    pub mwt_unit: Option<LengthUnit>,
}

#[derive(Debug, Args)]
pub struct SegscoreArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_enum)]
    pub unit: Option<SurfaceDistanceUnit>,
}

#[derive(Debug, Args)]
pub struct SslArgs {
    pub main: PathBuf,
    pub aux_a: PathBuf,
    pub aux_b: PathBuf,
    /// Reference label volume for the supervised Dice loss.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long)]
    pub temperature: Option<f64>,
}

#[derive(Debug, Args)]
pub struct AgreementArgs {
    /// Feature CSV of the automatic measurements.
    pub auto: PathBuf,
    /// Feature CSV of the reference measurements.
    pub reference: PathBuf,
    /// Columns to compare (default: the clinical indices present in both).
    #[arg(long, value_delimiter = ',')]
    pub indices: Vec<String>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    pub features: PathBuf,
    /// Skip the grid search even when `tune` lists values.
    #[arg(long)]
    pub no_tune: bool,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    pub model: PathBuf,
    pub features: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    pub predictions: PathBuf,
    /// Feature CSV whose `group` column holds the true classes.
    pub truth: PathBuf,
    /// Split assignment written by `train`.
    #[arg(long)]
    pub split: Option<PathBuf>,
    /// Which split to score when `--split` is given.
    #[arg(long, value_enum, default_value = "test")]
    pub subset: commands::model::Subset,
}

#[derive(Debug, Args)]
pub struct PhantomArgs {
    #[arg(long, default_value_t = 10)]
    pub per_class: usize,
    /// Boundary relabelling probability of the predicted copies.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
}

impl Cli {
    /// Configuration from the file, then global flags, then command flags.
    pub fn effective_config(&self) -> CliResult<PipelineConfig> {
        let mut cfg = match &self.global.config {
            Some(p) => PipelineConfig::load(p)?,
            None => PipelineConfig::default(),
        };
        let g = &self.global;
        if let Some(s) = g.seed {
            cfg.seed = s;
        }
        if let Some(w) = g.workers {
            cfg.workers = w;
        }
        if let Some(o) = &g.output {
            cfg.output = o.clone();
        }
        match &self.command {
            Command::Validate(a) | Command::Segscore(SegscoreArgs { data: a, .. }) => {
                if let Some(d) = &a.data {
                    cfg.data_root = Some(d.clone());
                }
            }
            Command::Features(a) => {
                if let Some(d) = &a.data.data {
                    cfg.data_root = Some(d.clone());
                }
                let f = &mut cfg.features;
                f.ratio_phase = a.ratio_phase.unwrap_or(f.ratio_phase);
                f.mass_phase = a.mass_phase.unwrap_or(f.mass_phase);
                f.mwt_phases = a.mwt_phases.unwrap_or(f.mwt_phases);
                f.mwt_unit = a.mwt_unit.unwrap_or(f.mwt_unit);
            }
            Command::SslEval(a) => {
                if let Some(t) = a.temperature {
                    cfg.ssl.temperature = t;
                }
            }
            _ => {}
        }
        if let Command::Segscore(SegscoreArgs { unit: Some(u), .. }) = &self.command {
            cfg.segscore.unit = *u;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn execute(cli: &Cli) -> CliResult<()> {
    let cfg = cli.effective_config()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| CliError::Internal(format!("thread pool: {e}")))?;
    pool.install(|| commands::dispatch(&cli.command, &cfg))
}

/// Parse `args` (including the program name), run the command and return
/// the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match catch_unwind(AssertUnwindSafe(|| execute(&cli))) {
        Ok(Ok(())) => 0,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
        Err(_) => {
            eprintln!("error: internal failure (panic)");
            3
        }
    }
}
