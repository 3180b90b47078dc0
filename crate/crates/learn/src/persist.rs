//! Model files: pretty-printed JSON with a format version and a SHA-256
//! checksum of the file as written with an empty checksum field.

use cmr_core::features::StandardizationParams;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dual::DualLayerModel;
use crate::error::{Error, Result};
use crate::forest::RandomForestModel;
use crate::mlp::MlpModel;
use crate::svm::SvmModel;

pub const FORMAT_VERSION: u64 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u64,
    schema_hash: String,
    standardizer: StandardizationParams,
    rf: RandomForestModel,
    svm: SvmModel,
    mlp: MlpModel,
    voting_weights: [f64; 2],
    layer2_schema: Vec<String>,
    checksum: String,
}

fn digest(file: &ModelFile) -> Result<String> {
    let bytes = serde_json::to_vec_pretty(file).map_err(|e| Error::InvalidArgument(format!("cannot serialize model: {e}")))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub fn save_model(model: &DualLayerModel) -> Result<Vec<u8>> {
    let mut file = ModelFile {
        format_version: FORMAT_VERSION,
        schema_hash: model.schema_hash.clone(),
        standardizer: model.standardizer.clone(),
        rf: model.rf.clone(),
        svm: model.svm.clone(),
        mlp: model.mlp.clone(),
        voting_weights: model.voting_weights,
        layer2_schema: model.layer2_schema.clone(),
        checksum: String::new(),
    };
    file.checksum = digest(&file)?;
    let mut out = serde_json::to_vec_pretty(&file).map_err(|e| Error::InvalidArgument(format!("cannot serialize model: {e}")))?;
    out.push(b'\n');
    Ok(out)
}

pub fn load_model(bytes: &[u8]) -> Result<DualLayerModel> {
    let value: serde_json::Value =
        serde_json::from_slice(bytes).map_err(|e| Error::Integrity(format!("not a model file: {e}")))?;
    match value.get("format_version").and_then(|v| v.as_u64()) {
        Some(FORMAT_VERSION) => {}
        Some(found) => return Err(Error::UnsupportedVersion { found, expected: FORMAT_VERSION }),
        None => return Err(Error::Integrity("missing format_version".into())),
    }
    let mut file: ModelFile =
        serde_json::from_value(value).map_err(|e| Error::Integrity(format!("malformed model file: {e}")))?;
    let stored = std::mem::take(&mut file.checksum);
    let actual = digest(&file)?;
    if stored != actual {
        return Err(Error::Integrity(format!("checksum {stored} does not match content {actual}")));
    }
    Ok(DualLayerModel {
        schema_hash: file.schema_hash,
        standardizer: file.standardizer,
        rf: file.rf,
        svm: file.svm,
        mlp: file.mlp,
        voting_weights: file.voting_weights,
        layer2_schema: file.layer2_schema,
    })
}
