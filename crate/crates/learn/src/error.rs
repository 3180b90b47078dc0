use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("degenerate training data: {0}")]
    DegenerateTraining(String),
    #[error("SVM for class {class} did not converge after {iterations} iterations (KKT gap {gap:.3e})")]
    Convergence { class: usize, iterations: usize, gap: f64 },
    #[error("MLP training diverged at epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("schema mismatch: {0}")]
    Schema(String),
    #[error("unsupported model format version {found} (expected {expected})")]
    UnsupportedVersion { found: u64, expected: u64 },
    #[error("model file integrity check failed: {0}")]
    Integrity(String),
    #[error(transparent)]
    Core(#[from] cmr_core::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Validate a design matrix and label vector; returns the feature count.
pub(crate) fn check_xy(x: &[Vec<f64>], y: &[usize], n_classes: usize) -> Result<usize> {
    if x.is_empty() {
        return Err(Error::DegenerateTraining("no training rows".into()));
    }
    if x.len() != y.len() {
        return Err(Error::InvalidArgument(format!("{} rows but {} labels", x.len(), y.len())));
    }
    let nf = x[0].len();
    if nf == 0 {
        return Err(Error::InvalidArgument("rows have no features".into()));
    }
    for (i, row) in x.iter().enumerate() {
        if row.len() != nf {
            return Err(Error::InvalidArgument(format!("row {i} has {} features, expected {nf}", row.len())));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("row {i} contains non-finite values")));
        }
    }
    if let Some(&bad) = y.iter().find(|&&c| c >= n_classes) {
        return Err(Error::InvalidArgument(format!("label {bad} outside {n_classes} classes")));
    }
    let first = y[0];
    if y.iter().all(|&c| c == first) {
        return Err(Error::DegenerateTraining(format!("only class {first} present")));
    }
    Ok(nf)
}

pub(crate) fn check_width(x: &[Vec<f64>], nf: usize, what: &str) -> Result<()> {
    match x.iter().position(|r| r.len() != nf) {
        Some(i) => Err(Error::Schema(format!(
            "{what} expects {nf} features, row {i} has {}",
            x[i].len()
        ))),
        None => Ok(()),
    }
}
