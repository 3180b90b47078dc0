//! Pipeline configuration: TOML file, command-line overrides, validation.
//!
//! Every section is optional; missing keys take their defaults. The effective
//! configuration is echoed into each run report.

use std::fs;
use std::path::{Path, PathBuf};

use cmr_core::features::MwtPhases;
use cmr_core::mwt::DistanceUnit;
use cmr_core::segmetrics::SurfaceUnit;
use cmr_core::{CardiacPhase, FeatureConfig};
use cmr_learn::{DualConfig, TuneGrid};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
pub enum Phase {
    #[serde(rename = "ED")]
    #[value(name = "ED", alias = "ed")]
    Ed,
    #[serde(rename = "ES")]
    #[value(name = "ES", alias = "es")]
    Es,
}

impl From<Phase> for CardiacPhase {
    fn from(p: Phase) -> Self {
        match p {
            Phase::Ed => CardiacPhase::Ed,
            Phase::Es => CardiacPhase::Es,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum MwtPhaseMode {
    Both,
    EsOnly,
}

/// Unit of wall-thickness distances.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum LengthUnit {
    Mm,
    Pixel,
}

/// Unit of surface distances in segmentation scores.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SurfaceDistanceUnit {
    Voxel,
    Mm,
}

impl From<SurfaceDistanceUnit> for SurfaceUnit {
    fn from(u: SurfaceDistanceUnit) -> Self {
        match u {
            SurfaceDistanceUnit::Voxel => SurfaceUnit::Voxel,
            SurfaceDistanceUnit::Mm => SurfaceUnit::Millimetre,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureSection {
    pub ratio_phase: Phase,
    pub mass_phase: Phase,
    pub mwt_phases: MwtPhaseMode,
    pub mwt_unit: LengthUnit,
}

impl Default for FeatureSection {
    fn default() -> Self {
        FeatureSection {
            ratio_phase: Phase::Ed,
            mass_phase: Phase::Ed,
            mwt_phases: MwtPhaseMode::Both,
            mwt_unit: LengthUnit::Mm,
        }
    }
}

impl FeatureSection {
    pub fn to_core(&self) -> FeatureConfig {
        FeatureConfig {
            ratio_phase: self.ratio_phase.into(),
            mass_phase: self.mass_phase.into(),
            mwt_phases: match self.mwt_phases {
                MwtPhaseMode::Both => MwtPhases::Both,
                MwtPhaseMode::EsOnly => MwtPhases::EsOnly,
            },
            mwt_unit: match self.mwt_unit {
                LengthUnit::Mm => DistanceUnit::Millimetre,
                LengthUnit::Pixel => DistanceUnit::Pixel,
            },
        }
    }
}

/// Acquisition ranges outside which `validate` warns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QcSection {
    pub in_plane_mm: [f64; 2],
    pub slice_mm: [f64; 2],
}

impl Default for QcSection {
    fn default() -> Self {
        QcSection { in_plane_mm: [1.37, 1.68], slice_mm: [5.0, 10.0] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSection {
    /// Train, validation and test fractions.
    pub ratios: [f64; 3],
}

impl Default for SplitSection {
    fn default() -> Self {
        SplitSection { ratios: [0.7, 0.1, 0.2] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegscoreSection {
    pub unit: SurfaceDistanceUnit,
}

impl Default for SegscoreSection {
    fn default() -> Self {
        SegscoreSection { unit: SurfaceDistanceUnit::Voxel }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SslSection {
    pub temperature: f64,
}

impl Default for SslSection {
    fn default() -> Self {
        SslSection { temperature: 0.1 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    /// Worker threads; 0 uses one per core.
    pub workers: usize,
    pub data_root: Option<PathBuf>,
    pub output: PathBuf,
    pub features: FeatureSection,
    pub qc: QcSection,
    pub split: SplitSection,
    pub segscore: SegscoreSection,
    pub ssl: SslSection,
    pub learn: DualConfig,
    /// Hyperparameter grid searched on the validation split; empty lists keep
    /// the `learn` values.
    pub tune: TuneGrid,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 0,
            workers: 0,
            data_root: None,
            output: PathBuf::from("cmrdx-out"),
            features: FeatureSection::default(),
            qc: QcSection::default(),
            split: SplitSection::default(),
            segscore: SegscoreSection::default(),
            ssl: SslSection::default(),
            learn: DualConfig::default(),
            tune: TuneGrid::default(),
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))
    }

    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes to TOML")
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |msg: String| Err(CliError::Usage(msg));
        let r = self.split.ratios;
        if r.iter().any(|v| v.is_nan() || *v <= 0.0) || (r.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return bad(format!("split.ratios must be positive and sum to 1, got {r:?}"));
        }
        if !(self.ssl.temperature > 0.0 && self.ssl.temperature.is_finite()) {
            return bad(format!("ssl.temperature must be positive, got {}", self.ssl.temperature));
        }
        for (name, [lo, hi]) in [("qc.in_plane_mm", self.qc.in_plane_mm), ("qc.slice_mm", self.qc.slice_mm)] {
            if lo.is_nan() || hi.is_nan() || lo > hi {
                return bad(format!("{name}: lower bound {lo} exceeds upper bound {hi}"));
            }
        }
        let w = self.learn.voting_weights;
        if w.iter().any(|v| v.is_nan() || *v < 0.0) || w.iter().sum::<f64>() <= 0.0 {
            return bad(format!("learn.voting_weights must be non-negative with a positive sum, got {w:?}"));
        }
        Ok(())
    }
}
