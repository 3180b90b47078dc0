//! Two-stage classifier. Layer 1 soft-votes a random forest and an SVM over
//! all standardized features for the five classes. Whenever layer 1 picks
//! MINF or DCM, an MLP trained only on those two classes, over a subset of
//! wall-thickness and LV features, decides between them.

use cmr_core::features::{fit_standardizer, StandardizationParams};
use cmr_core::volmodel::argmax;
use cmr_core::{DiseaseClass, FeatureSchema, FeatureTable};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forest::{train_random_forest, ForestParams, RandomForestModel};
use crate::mlp::{train_mlp, MlpModel, MlpParams};
use crate::svm::{train_svm_ovr, SvmModel, SvmParams};
use crate::vote::soft_vote;

/// Layer-2 output order.
pub const LAYER2_CLASSES: [DiseaseClass; 2] = [DiseaseClass::Minf, DiseaseClass::Dcm];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DualConfig {
    pub forest: ForestParams,
    pub svm: SvmParams,
    pub mlp: MlpParams,
    /// Weights of (forest, SVM) in the layer-1 vote.
    pub voting_weights: [f64; 2],
    /// Layer-2 inputs; `None` selects [`default_layer2_features`].
    pub layer2_features: Option<Vec<String>>,
}

impl Default for DualConfig {
    fn default() -> Self {
        DualConfig {
            forest: ForestParams::default(),
            svm: SvmParams::default(),
            mlp: MlpParams::default(),
            voting_weights: [0.5, 0.5],
            layer2_features: None,
        }
    }
}

/// Every wall-thickness column of the schema plus LV volumes and LV EF.
pub fn default_layer2_features(schema: &FeatureSchema) -> Vec<String> {
    schema
        .names
        .iter()
        .filter(|n| n.starts_with("mwt_") || ["lv_vol_ed", "lv_vol_es", "lv_ef"].contains(&n.as_str()))
        .cloned()
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualLayerModel {
    /// Hash of the feature schema the model was trained on.
    pub schema_hash: String,
    pub standardizer: StandardizationParams,
    pub rf: RandomForestModel,
    pub svm: SvmModel,
    pub mlp: MlpModel,
    pub voting_weights: [f64; 2],
    /// Names of the layer-2 inputs, in MLP input order.
    pub layer2_schema: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Prediction {
    pub case_id: String,
    pub class: DiseaseClass,
    pub layer1_class: DiseaseClass,
    /// Layer-1 probabilities in class-code order.
    pub layer1: Vec<f64>,
    /// (MINF, DCM) probabilities when layer 2 was consulted.
    pub layer2: Option<[f64; 2]>,
}

/// Final class from layer-1 probabilities and, for MINF/DCM, the layer-2 vote.
pub fn route(layer1: &[f64], layer2: Option<[f64; 2]>) -> DiseaseClass {
    let first = DiseaseClass::from_index(argmax(layer1)).expect("five layer-1 classes");
    match (first, layer2) {
        (DiseaseClass::Minf | DiseaseClass::Dcm, Some(p)) => LAYER2_CLASSES[argmax(&p)],
        _ => first,
    }
}

fn labels(table: &FeatureTable) -> Result<Vec<usize>> {
    table
        .rows
        .iter()
        .map(|r| {
            r.group
                .map(DiseaseClass::index)
                .ok_or_else(|| Error::DegenerateTraining(format!("case {} has no diagnosis", r.case_id)))
        })
        .collect()
}

fn layer2_columns(standardizer: &StandardizationParams, names: &[String]) -> Result<Vec<usize>> {
    names
        .iter()
        .map(|n| {
            standardizer
                .names
                .iter()
                .position(|m| m == n)
                .ok_or_else(|| Error::Schema(format!("layer-2 feature `{n}` is not among the standardized features")))
        })
        .collect()
}

fn select(rows: &[Vec<f64>], cols: &[usize]) -> Vec<Vec<f64>> {
    rows.iter().map(|r| cols.iter().map(|&c| r[c]).collect()).collect()
}

/// Fit the standardizer and both layers on a labelled training table.
pub fn train_dual(train: &FeatureTable, cfg: &DualConfig, seed: u64) -> Result<DualLayerModel> {
    let y = labels(train)?;
    for c in DiseaseClass::ALL {
        if !y.contains(&c.index()) {
            return Err(Error::DegenerateTraining(format!("no {c} cases in the training data")));
        }
    }
    let standardizer = fit_standardizer(train)?;
    let z: Vec<Vec<f64>> = train.rows.iter().map(|r| standardizer.transform_row(&r.values)).collect();
    let k = DiseaseClass::ALL.len();
    let rf = train_random_forest(&z, &y, k, &cfg.forest, seed)?;
    let svm = train_svm_ovr(&z, &y, k, &cfg.svm)?;

    let requested = cfg.layer2_features.clone().unwrap_or_else(|| default_layer2_features(&train.schema));
    let layer2_schema: Vec<String> = requested.into_iter().filter(|n| !standardizer.dropped.contains(n)).collect();
    if layer2_schema.is_empty() {
        return Err(Error::Schema("no usable layer-2 features".into()));
    }
    let cols = layer2_columns(&standardizer, &layer2_schema)?;
    let (mut x2, mut y2) = (Vec::new(), Vec::new());
    for (row, &label) in z.iter().zip(&y) {
        if let Some(k2) = LAYER2_CLASSES.iter().position(|c| c.index() == label) {
            x2.push(cols.iter().map(|&c| row[c]).collect::<Vec<f64>>());
            y2.push(k2);
        }
    }
    let mlp = train_mlp(&x2, &y2, 2, &cfg.mlp, seed.wrapping_add(1))?;
    Ok(DualLayerModel {
        schema_hash: train.schema.hash(),
        standardizer,
        rf,
        svm,
        mlp,
        voting_weights: cfg.voting_weights,
        layer2_schema,
    })
}

/// Classify every row of `table`.
pub fn predict_dual(model: &DualLayerModel, table: &FeatureTable) -> Result<Vec<Prediction>> {
    if table.schema.hash() != model.schema_hash {
        return Err(Error::Schema(format!(
            "feature table schema {} differs from the model's {}",
            table.schema.hash(),
            model.schema_hash
        )));
    }
    let z: Vec<Vec<f64>> = table.rows.iter().map(|r| model.standardizer.transform_row(&r.values)).collect();
    if z.is_empty() {
        return Ok(Vec::new());
    }
    let p_rf = model.rf.predict_proba(&z)?;
    let p_svm = model.svm.predict_proba(&z)?;
    let layer1 = soft_vote(&[p_rf, p_svm], &model.voting_weights)?;
    let cols = layer2_columns(&model.standardizer, &model.layer2_schema)?;
    let p2 = model.mlp.predict_proba(&select(&z, &cols))?;
    Ok(table
        .rows
        .iter()
        .zip(layer1)
        .zip(p2)
        .map(|((row, l1), l2)| {
            let layer1_class = DiseaseClass::from_index(argmax(&l1)).expect("five classes");
            let layer2 = matches!(layer1_class, DiseaseClass::Minf | DiseaseClass::Dcm).then(|| [l2[0], l2[1]]);
            Prediction { case_id: row.case_id.clone(), class: route(&l1, layer2), layer1_class, layer1: l1, layer2 }
        })
        .collect())
}
