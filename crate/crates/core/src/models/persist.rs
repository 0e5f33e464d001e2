use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{AcceptanceModel, ModelError};

pub const MODEL_FORMAT: &str = "cdhf-acceptance-model";
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    /// sha256 of the compact JSON encoding of `model`.
    checksum: String,
    model: AcceptanceModel,
}

fn digest(model: &AcceptanceModel) -> Result<String, ModelError> {
    let body = serde_json::to_string(model).map_err(|e| ModelError::Format(e.to_string()))?;
    Ok(hex::encode(Sha256::digest(body.as_bytes())))
}

pub fn model_to_json(model: &AcceptanceModel) -> Result<String, ModelError> {
    let file = ModelFile {
        format: MODEL_FORMAT.to_owned(),
        version: MODEL_FORMAT_VERSION,
        checksum: digest(model)?,
        model: model.clone(),
    };
    let mut s = serde_json::to_string_pretty(&file).map_err(|e| ModelError::Format(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn model_from_json(text: &str) -> Result<AcceptanceModel, ModelError> {
    let file: ModelFile = serde_json::from_str(text).map_err(|e| ModelError::Format(e.to_string()))?;
    if file.format != MODEL_FORMAT {
        return Err(ModelError::Format(format!("unknown format `{}`", file.format)));
    }
    if file.version != MODEL_FORMAT_VERSION {
        return Err(ModelError::Format(format!("unsupported version {}", file.version)));
    }
    let computed = digest(&file.model)?;
    if computed != file.checksum {
        return Err(ModelError::Checksum {
            recorded: file.checksum,
            computed,
        });
    }
    if file.model.schema.schema_id() != file.model.schema_id {
        return Err(ModelError::Format("schema manifest does not match schema id".into()));
    }
    Ok(file.model)
}

pub fn save_model(model: &AcceptanceModel, path: &Path) -> Result<(), ModelError> {
    fs::write(path, model_to_json(model)?)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<AcceptanceModel, ModelError> {
    model_from_json(&fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{FeatureSchema, Stage, TrainingDataset};
    use crate::models::{train_logistic, train_tree_ensemble, LogisticParams, TreeParams};
    use rand::{Rng, SeedableRng};

    fn data() -> TrainingDataset {
        let schema = FeatureSchema::new(Stage::PromptOnly, 2);
        let n = schema.arity();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let rows: Vec<Vec<f64>> = (0..300)
            .map(|_| (0..n).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let labels = rows.iter().map(|r| u8::from(r[0] + r[3] * r[5] > 0.0)).collect();
        TrainingDataset::from_rows(schema, rows, labels).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let ds = data();
        let trees = train_tree_ensemble(
            &ds,
            &TreeParams {
                n_trees: 20,
                ..Default::default()
            },
        )
        .unwrap();
        let lin = train_logistic(&ds, &LogisticParams::default()).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for m in [trees, lin] {
            let back = model_from_json(&model_to_json(&m).unwrap()).unwrap();
            assert_eq!(back, m);
            for _ in 0..1000 {
                let row: Vec<f64> = (0..ds.n_features).map(|_| rng.random_range(-3.0..3.0)).collect();
                assert_eq!(back.predict_row(&row).to_bits(), m.predict_row(&row).to_bits());
            }
        }
    }

    #[test]
    fn tampering_is_detected() {
        let m = train_logistic(&data(), &LogisticParams::default()).unwrap();
        let text = model_to_json(&m).unwrap().replace("\"rows\": 300", "\"rows\": 301");
        assert!(matches!(model_from_json(&text), Err(ModelError::Checksum { .. })));
        assert!(matches!(model_from_json("{}"), Err(ModelError::Format(_))));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.json");
        let m = train_logistic(&data(), &LogisticParams::default()).unwrap();
        save_model(&m, &p).unwrap();
        assert_eq!(load_model(&p).unwrap(), m);
    }
}
