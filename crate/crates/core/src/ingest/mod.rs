//! Reading cases from disk and generating synthetic phantom cases.
//!
//! A case directory `<id>/` holds `Info.cfg` plus
//! `<id>_frameNN_pred.nii` for the ED and ES frames, and optionally the
//! matching `_gt.nii` reference segmentations.

pub mod nifti;
pub mod phantom;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::features::DiseaseClass;
use crate::scalar::Scalar;
use crate::volmodel::{CardiacPhase, LabelVolume};

pub use nifti::{read_probability_map, read_volume, write_probability_map, write_volume};
pub use phantom::{generate_phantom, phantom_corpus, PhaseGeometry, PhantomSpec};

pub const METADATA_FILE: &str = "Info.cfg";

#[derive(Clone, Debug, PartialEq)]
pub struct CaseMetadata {
    pub case_id: String,
    /// cm
    pub height: f64,
    /// kg
    pub weight: f64,
    pub ed_frame: usize,
    pub es_frame: usize,
    pub group: Option<DiseaseClass>,
}

impl CaseMetadata {
    /// Parse `Key: value` lines. Unknown keys are ignored.
    pub fn parse(case_id: &str, text: &str) -> Result<Self> {
        let (mut ed, mut es, mut height, mut weight, mut group) = (None, None, None, None, None);
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once(':').ok_or_else(|| {
                Error::Parse(format!("line {}: expected `Key: value`, got {line:?}", lineno + 1))
            })?;
            let value = value.trim();
            let number = |v: &str| -> Result<f64> {
                v.parse::<f64>()
                    .map_err(|_| Error::Parse(format!("line {}: `{key}` is not a number: {v:?}", lineno + 1)))
            };
            let frame = |v: &str| -> Result<usize> {
                v.parse::<usize>()
                    .map_err(|_| Error::Parse(format!("line {}: `{key}` is not a frame index: {v:?}", lineno + 1)))
            };
            match key.trim() {
                "ED" => ed = Some(frame(value)?),
                "ES" => es = Some(frame(value)?),
                "Height" => height = Some(number(value)?),
                "Weight" => weight = Some(number(value)?),
                "Group" => group = Some(value.parse::<DiseaseClass>()?),
                _ => {}
            }
        }
        let meta = CaseMetadata {
            case_id: case_id.to_string(),
            ed_frame: ed.ok_or(Error::MissingField("ED"))?,
            es_frame: es.ok_or(Error::MissingField("ES"))?,
            height: height.ok_or(Error::MissingField("Height"))?,
            weight: weight.ok_or(Error::MissingField("Weight"))?,
            group,
        };
        meta.validate()?;
        Ok(meta)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.height.is_finite() && self.height > 0.0 && self.weight.is_finite() && self.weight > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "case {}: height and weight must be positive",
                self.case_id
            )));
        }
        if self.ed_frame == self.es_frame {
            return Err(Error::InvalidArgument(format!(
                "case {}: ED and ES frames are both {}",
                self.case_id, self.ed_frame
            )));
        }
        Ok(())
    }

    pub fn to_cfg(&self) -> String {
        let mut s = String::new();
        writeln!(s, "ED: {}", self.ed_frame).unwrap();
        writeln!(s, "ES: {}", self.es_frame).unwrap();
        if let Some(g) = self.group {
            writeln!(s, "Group: {g}").unwrap();
        }
        writeln!(s, "Height: {:?}", self.height).unwrap();
        writeln!(s, "Weight: {:?}", self.weight).unwrap();
        s
    }

    pub fn frame(&self, phase: CardiacPhase) -> usize {
        match phase {
            CardiacPhase::Ed => self.ed_frame,
            CardiacPhase::Es => self.es_frame,
        }
    }
}

/// One patient: predicted ED/ES segmentations and optional references.
#[derive(Clone, Debug, PartialEq)]
pub struct CaseRecord<T = f64> {
    pub metadata: CaseMetadata,
    pub ed_volume: LabelVolume<T>,
    pub es_volume: LabelVolume<T>,
    pub ed_truth: Option<LabelVolume<T>>,
    pub es_truth: Option<LabelVolume<T>>,
}

impl<T: Scalar> CaseRecord<T> {
    pub fn new(
        metadata: CaseMetadata,
        ed_volume: LabelVolume<T>,
        es_volume: LabelVolume<T>,
        ed_truth: Option<LabelVolume<T>>,
        es_truth: Option<LabelVolume<T>>,
    ) -> Result<Self> {
        let case = CaseRecord { metadata, ed_volume, es_volume, ed_truth, es_truth };
        case.check_consistency()?;
        Ok(case)
    }

    fn check_consistency(&self) -> Result<()> {
        let id = &self.metadata.case_id;
        let (ed, es) = (&self.ed_volume, &self.es_volume);
        if ed.dims() != es.dims() || ed.spacing() != es.spacing() {
            return Err(Error::InconsistentCase(format!(
                "{id}: ED is {} voxels, ES is {} voxels (or spacing differs)",
                ed.dims(),
                es.dims()
            )));
        }
        for (name, truth) in [("ED", &self.ed_truth), ("ES", &self.es_truth)] {
            if let Some(t) = truth {
                if t.dims() != ed.dims() {
                    return Err(Error::InconsistentCase(format!(
                        "{id}: {name} reference is {} voxels, prediction is {}",
                        t.dims(),
                        ed.dims()
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn volume(&self, phase: CardiacPhase) -> &LabelVolume<T> {
        match phase {
            CardiacPhase::Ed => &self.ed_volume,
            CardiacPhase::Es => &self.es_volume,
        }
    }

    pub fn truth(&self, phase: CardiacPhase) -> Option<&LabelVolume<T>> {
        match phase {
            CardiacPhase::Ed => self.ed_truth.as_ref(),
            CardiacPhase::Es => self.es_truth.as_ref(),
        }
    }

    /// The same case with the reference segmentations promoted to predictions.
    pub fn reference_view(&self) -> Option<CaseRecord<T>> {
        Some(CaseRecord {
            metadata: self.metadata.clone(),
            ed_volume: self.ed_truth.clone()?,
            es_volume: self.es_truth.clone()?,
            ed_truth: None,
            es_truth: None,
        })
    }
}

pub fn volume_file_name(case_id: &str, frame: usize, truth: bool) -> String {
    let kind = if truth { "gt" } else { "pred" };
    format!("{case_id}_frame{frame:02}_{kind}.nii")
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn load_volume_file<T: Scalar>(path: &Path) -> Result<LabelVolume<T>> {
    read_volume(&read_file(path)?).map_err(|e| match e {
        Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Load a case directory; the directory name is the case id.
pub fn load_case<T: Scalar>(dir: &Path) -> Result<CaseRecord<T>> {
    let case_id = dir
        .file_name()
        .and_then(|s| s.to_str())
        .ok_or_else(|| Error::InvalidArgument(format!("no case id in path {}", dir.display())))?
        .to_string();
    let cfg_path = dir.join(METADATA_FILE);
    let text = fs::read_to_string(&cfg_path).map_err(|e| Error::io(&cfg_path, e))?;
    let metadata = CaseMetadata::parse(&case_id, &text)?;
    let path = |frame, truth| dir.join(volume_file_name(&case_id, frame, truth));
    let ed_volume = load_volume_file(&path(metadata.ed_frame, false))?;
    let es_volume = load_volume_file(&path(metadata.es_frame, false))?;
    let optional = |p: PathBuf| -> Result<Option<LabelVolume<T>>> {
        if p.exists() {
            load_volume_file(&p).map(Some)
        } else {
            Ok(None)
        }
    };
    let ed_truth = optional(path(metadata.ed_frame, true))?;
    let es_truth = optional(path(metadata.es_frame, true))?;
    CaseRecord::new(metadata, ed_volume, es_volume, ed_truth, es_truth)
}

/// Case directories under `root`, sorted by name.
pub fn list_cases(root: &Path) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(root).map_err(|e| Error::io(root, e))?;
    let mut dirs = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(root, e))?;
        if entry.path().is_dir() {
            dirs.push(entry.path());
        }
    }
    dirs.sort();
    Ok(dirs)
}

/// Write `case` under `root/<case_id>/`, returning the case directory.
pub fn write_case<T: Scalar>(root: &Path, case: &CaseRecord<T>) -> Result<PathBuf> {
    let meta = &case.metadata;
    let dir = root.join(&meta.case_id);
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let write = |name: String, bytes: Vec<u8>| -> Result<()> {
        let p = dir.join(name);
        fs::write(&p, bytes).map_err(|e| Error::io(&p, e))
    };
    write(METADATA_FILE.to_string(), meta.to_cfg().into_bytes())?;
    write(volume_file_name(&meta.case_id, meta.ed_frame, false), write_volume(&case.ed_volume)?)?;
    write(volume_file_name(&meta.case_id, meta.es_frame, false), write_volume(&case.es_volume)?)?;
    if let Some(t) = &case.ed_truth {
        write(volume_file_name(&meta.case_id, meta.ed_frame, true), write_volume(t)?)?;
    }
    if let Some(t) = &case.es_truth {
        write(volume_file_name(&meta.case_id, meta.es_frame, true), write_volume(t)?)?;
    }
    Ok(dir)
}
