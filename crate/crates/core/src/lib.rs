//! Quantification of cardiac MRI segmentations.
//!
//! Label volumes (ED and ES, per patient) are turned into clinical indices,
//! myocardial wall-thickness statistics and a fixed feature vector for
//! disease classification. The crate also scores segmentations against
//! references, evaluates the semi-supervised consistency losses on decoder
//! probability maps, and computes Bland-Altman agreement statistics.
//!
//! Numeric routines are generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the common `f64` instantiations.

pub mod agreement;
pub mod error;
pub mod features;
pub mod indices;
pub mod ingest;
pub mod mwt;
pub mod scalar;
pub mod segmetrics;
pub mod ssl_math;
pub mod volmodel;

pub use error::{Error, Result};
pub use features::{DiseaseClass, FeatureConfig, FeatureSchema, FeatureTable, FeatureVector};
pub use ingest::{CaseMetadata, CaseRecord, PhantomSpec};
pub use scalar::Scalar;
pub use volmodel::{BinaryMask, CardiacPhase, Dims, LabelVolume, ProbabilityMap, TissueClass, VoxelSpacing};

pub type Volume = volmodel::LabelVolume<f64>;
pub type Volume32 = volmodel::LabelVolume<f32>;
pub type ProbMap = volmodel::ProbabilityMap<f64>;
pub type ProbMap32 = volmodel::ProbabilityMap<f32>;
pub type Mask = volmodel::BinaryMask<f64>;
pub type Spacing = volmodel::VoxelSpacing<f64>;
pub type Case = ingest::CaseRecord<f64>;
pub type Indices = indices::ClinicalIndices<f64>;
pub type Agreement = agreement::AgreementResult<f64>;
pub type MwtStats = mwt::MwtFeatures<f64>;
pub type Score = segmetrics::SegScore<f64>;
