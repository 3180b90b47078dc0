//! Learners for cardiac disease classification from feature tables: a
//! Gini random forest, one-vs-rest SVMs with Platt calibration, and a small
//! MLP, combined into a two-stage classifier where a MINF/DCM specialist
//! refines the soft-voted first stage.
//!
//! Everything is deterministic for a given seed, including parallel
//! training.

pub mod dual;
pub mod error;
pub mod eval;
pub mod forest;
pub mod mlp;
pub mod persist;
pub mod svm;
pub mod tune;
pub mod vote;

pub use dual::{predict_dual, train_dual, DualConfig, DualLayerModel, Prediction};
pub use error::{Error, Result};
pub use eval::{evaluate, EvalReport};
pub use forest::{train_random_forest, ForestParams, RandomForestModel};
pub use mlp::{train_mlp, MlpModel, MlpParams};
pub use persist::{load_model, save_model, FORMAT_VERSION};
pub use svm::{train_svm_ovr, Kernel, KernelChoice, SvmModel, SvmParams};
pub use tune::{grid_search, TuneGrid, TuneResult};
pub use vote::soft_vote;
