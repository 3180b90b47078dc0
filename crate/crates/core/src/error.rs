use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the quantification pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("format error: {0}")]
    Format(String),
    #[error("unsupported NIfTI datatype code {0}")]
    UnsupportedDatatype(i16),
    #[error("unsupported rank: dim[0] = {0}")]
    UnsupportedRank(i16),
    #[error("invalid label value {0} (expected 0..=3)")]
    InvalidLabel(f64),
    #[error("length mismatch: expected {expected} bytes, found {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("missing field `{0}`")]
    MissingField(&'static str),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("unknown disease class `{0}`")]
    UnknownClass(String),
    #[error("inconsistent case: {0}")]
    InconsistentCase(String),
    #[error("file not found: {}", .0.display())]
    NotFound(PathBuf),
    #[error("invalid phantom spec: {0}")]
    InvalidSpec(String),
    #[error("division domain error: {0}")]
    DivisionDomain(String),
    #[error("slice has no myocardium")]
    EmptySlice,
    #[error("slice has myocardium but no left ventricle")]
    NoInnerContour,
    #[error("contour set is empty")]
    NoContour,
    #[error("no valid myocardium slice in case")]
    NoMyocardium,
    #[error("surface set is empty")]
    EmptySurface,
    #[error("feature undefined: {0}")]
    FeatureUndefined(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::NotFound(path)
        } else {
            Error::Io { path, source }
        }
    }

    /// True when the failure comes from the input data rather than the caller.
    pub fn is_data_error(&self) -> bool {
        !matches!(self, Error::InvalidArgument(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
