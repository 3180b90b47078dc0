//! Grid search over learner hyperparameters, scored by validation accuracy.

use cmr_core::{DiseaseClass, FeatureTable};
use serde::{Deserialize, Serialize};

use crate::dual::{predict_dual, train_dual, DualConfig};
use crate::error::{Error, Result};
use crate::eval::evaluate;
use crate::svm::KernelChoice;

/// Candidate values per hyperparameter; an empty list keeps the base value.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TuneGrid {
    pub forest_trees: Vec<usize>,
    pub svm_c: Vec<f64>,
    pub svm_gamma: Vec<f64>,
    pub mlp_hidden: Vec<usize>,
    pub mlp_learning_rate: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Trial {
    pub config: DualConfig,
    pub val_accuracy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TuneResult {
    pub best: DualConfig,
    pub best_accuracy: f64,
    pub trials: Vec<Trial>,
}

fn or_base<T: Clone>(grid: &[T], base: T) -> Vec<T> {
    if grid.is_empty() {
        vec![base]
    } else {
        grid.to_vec()
    }
}

/// Every combination of the grid applied to `base`, in lexicographic order.
pub fn expand(base: &DualConfig, grid: &TuneGrid) -> Vec<DualConfig> {
    let base_gamma = match base.svm.kernel {
        KernelChoice::Rbf { gamma } => gamma,
        KernelChoice::Linear => None,
    };
    let gammas: Vec<Option<f64>> = if grid.svm_gamma.is_empty() {
        vec![base_gamma]
    } else {
        grid.svm_gamma.iter().map(|&g| Some(g)).collect()
    };
    let mut out = Vec::new();
    for trees in or_base(&grid.forest_trees, base.forest.trees) {
        for c in or_base(&grid.svm_c, base.svm.c) {
            for &gamma in &gammas {
                for hidden in or_base(&grid.mlp_hidden, base.mlp.hidden.first().copied().unwrap_or(16)) {
                    for lr in or_base(&grid.mlp_learning_rate, base.mlp.learning_rate) {
                        let mut cfg = base.clone();
                        cfg.forest.trees = trees;
                        cfg.svm.c = c;
                        if matches!(cfg.svm.kernel, KernelChoice::Rbf { .. }) {
                            cfg.svm.kernel = KernelChoice::Rbf { gamma };
                        }
                        if !grid.mlp_hidden.is_empty() {
                            cfg.mlp.hidden = vec![hidden];
                        }
                        cfg.mlp.learning_rate = lr;
                        out.push(cfg);
                    }
                }
            }
        }
    }
    out
}

/// Train every grid point on `train` and keep the first configuration with
/// the highest validation accuracy.
pub fn grid_search(train: &FeatureTable, val: &FeatureTable, base: &DualConfig, grid: &TuneGrid, seed: u64) -> Result<TuneResult> {
    let truth: Vec<DiseaseClass> = val
        .rows
        .iter()
        .map(|r| r.group.ok_or_else(|| Error::InvalidArgument(format!("validation case {} has no diagnosis", r.case_id))))
        .collect::<Result<_>>()?;
    if truth.is_empty() {
        return Err(Error::InvalidArgument("validation split is empty".into()));
    }
    let mut trials = Vec::new();
    let mut best: Option<(DualConfig, f64)> = None;
    for cfg in expand(base, grid) {
        let model = train_dual(train, &cfg, seed)?;
        let preds: Vec<DiseaseClass> = predict_dual(&model, val)?.into_iter().map(|p| p.class).collect();
        let acc = evaluate(&preds, &truth)?.accuracy;
        if best.as_ref().is_none_or(|(_, b)| acc > *b) {
            best = Some((cfg.clone(), acc));
        }
        trials.push(Trial { config: cfg, val_accuracy: acc });
    }
    let (best, best_accuracy) = best.expect("grid has at least one point");
    Ok(TuneResult { best, best_accuracy, trials })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_grid_is_base() {
        let base = DualConfig::default();
        assert_eq!(expand(&base, &TuneGrid::default()), vec![base]);
    }

    #[test]
    fn grid_size_is_product() {
        let grid = TuneGrid { forest_trees: vec![10, 50], svm_c: vec![0.1, 1.0, 10.0], mlp_hidden: vec![8], ..Default::default() };
        let cfgs = expand(&DualConfig::default(), &grid);
        assert_eq!(cfgs.len(), 6);
        assert_eq!(cfgs[0].forest.trees, 10);
        assert_eq!(cfgs[5].svm.c, 10.0);
        assert!(cfgs.iter().all(|c| c.mlp.hidden == vec![8]));
    }
}
