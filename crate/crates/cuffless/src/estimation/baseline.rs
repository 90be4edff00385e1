//! Trained baseline models: one regressor per BP component, a feature
//! schema with hash, and a versioned JSON serialization.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::adaboost::{AdaBoostParams, AdaBoostR2};
use super::tree::{RegressionTree, TreeParams};
use super::BPReading;
use crate::error::{Error, Result};
use crate::features::{FeatureVector, FEATURE_NAMES};
use crate::ingest::Gender;

const MODEL_FORMAT_VERSION: u32 = 1;
const MIN_TRAINING_ROWS: usize = 20;
/// Pulse-pressure floor applied when a model predicts sbp <= dbp.
const CLAMP_PP_MMHG: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselineKind {
    Dtr,
    Adaboost,
}

impl std::str::FromStr for BaselineKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "dtr" => Ok(BaselineKind::Dtr),
            "adaboost" => Ok(BaselineKind::Adaboost),
            other => Err(format!("unknown baseline kind {other:?}")),
        }
    }
}

/// Hyperparameters for both baseline families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineHyper {
    pub dtr: TreeParams,
    pub adaboost: AdaBoostParams,
}

impl Default for BaselineHyper {
    fn default() -> Self {
        Self {
            dtr: TreeParams::default(),
            adaboost: AdaBoostParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Regressor {
    Tree(RegressionTree),
    Ada(AdaBoostR2),
}

impl Regressor {
    fn predict(&self, row: &[f64]) -> f64 {
        match self {
            Regressor::Tree(t) => t.predict(row),
            Regressor::Ada(a) => a.predict(row),
        }
    }
}

/// A trained SBP/DBP regressor pair bound to a feature schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedBaseline {
    pub kind: BaselineKind,
    pub schema: Vec<String>,
    pub schema_hash: String,
    pub seed: u64,
    sbp_model: Regressor,
    dbp_model: Regressor,
}

/// Input columns for one record: the 31 features plus, when every record
/// carries a profile, the five user columns.
pub fn design_matrix(rows: &[FeatureVector]) -> (Vec<Vec<f64>>, Vec<String>) {
    let with_profile = !rows.is_empty() && rows.iter().all(|r| r.user.is_some());
    let mut schema: Vec<String> = FEATURE_NAMES.iter().map(|s| s.to_string()).collect();
    if with_profile {
        schema.extend(
            ["age_years", "gender", "height_cm", "weight_kg", "hypertension"]
                .iter()
                .map(|s| s.to_string()),
        );
    }
    let matrix = rows
        .iter()
        .map(|fv| {
            let mut row: Vec<f64> = fv.values.to_vec();
            if with_profile {
                let p = fv.user.as_ref().expect("checked above");
                row.push(p.age_years);
                row.push(match p.gender {
                    Gender::Male => 0.0,
                    Gender::Female => 1.0,
                });
                row.push(p.height_cm);
                row.push(p.weight_kg);
                row.push(if p.hypertension_history { 1.0 } else { 0.0 });
            }
            row
        })
        .collect();
    (matrix, schema)
}

pub fn schema_hash(schema: &[String]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(schema.join("\n").as_bytes());
    let digest = hasher.finalize();
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

/// Train both component regressors on feature rows with reference targets.
pub fn train_baseline(
    kind: BaselineKind,
    rows: &[FeatureVector],
    hyper: &BaselineHyper,
    seed: u64,
) -> Result<TrainedBaseline> {
    if rows.len() < MIN_TRAINING_ROWS {
        return Err(Error::TooFewRows {
            need: MIN_TRAINING_ROWS,
            got: rows.len(),
        });
    }
    let (x, schema) = design_matrix(rows);
    let sbp: Vec<f64> = rows.iter().map(|r| r.ref_sbp_mmhg).collect();
    let dbp: Vec<f64> = rows.iter().map(|r| r.ref_dbp_mmhg).collect();

    let fit = |y: &[f64], stream: u64| -> Result<Regressor> {
        match kind {
            BaselineKind::Dtr => Ok(Regressor::Tree(RegressionTree::fit(&x, y, &hyper.dtr)?)),
            BaselineKind::Adaboost => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(stream);
                Ok(Regressor::Ada(AdaBoostR2::fit(
                    &x,
                    y,
                    &hyper.adaboost,
                    &mut rng,
                )?))
            }
        }
    };

    Ok(TrainedBaseline {
        kind,
        schema_hash: schema_hash(&schema),
        schema,
        seed,
        sbp_model: fit(&sbp, 0)?,
        dbp_model: fit(&dbp, 1)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictedReading {
    pub reading: BPReading,
    /// True when the raw prediction had sbp <= dbp and was widened to a
    /// 10 mmHg pulse pressure around the component mean.
    pub clamped: bool,
}

pub fn predict_baseline(model: &TrainedBaseline, fv: &FeatureVector) -> Result<PredictedReading> {
    let (matrix, schema) = design_matrix(std::slice::from_ref(fv));
    if schema_hash(&schema) != model.schema_hash {
        return Err(Error::SchemaMismatch {
            expected: model.schema.join(","),
            got: schema.join(","),
        });
    }
    let row = &matrix[0];
    let sbp = model.sbp_model.predict(row);
    let dbp = model.dbp_model.predict(row);
    if sbp > dbp {
        Ok(PredictedReading {
            reading: BPReading::new(sbp, dbp)?,
            clamped: false,
        })
    } else {
        let mid = 0.5 * (sbp + dbp);
        Ok(PredictedReading {
            reading: BPReading::new(mid + CLAMP_PP_MMHG / 2.0, mid - CLAMP_PP_MMHG / 2.0)?,
            clamped: true,
        })
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    model: TrainedBaseline,
}

pub fn save_baseline(model: &TrainedBaseline, path: &Path) -> Result<()> {
    let file = ModelFile {
        format_version: MODEL_FORMAT_VERSION,
        model: model.clone(),
    };
    std::fs::write(path, serde_json::to_vec_pretty(&file)?).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_baseline(path: &Path) -> Result<TrainedBaseline> {
    let raw = std::fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let file: ModelFile = serde_json::from_slice(&raw)?;
    if file.format_version != MODEL_FORMAT_VERSION {
        return Err(Error::UnsupportedModelVersion(file.format_version));
    }
    if schema_hash(&file.model.schema) != file.model.schema_hash {
        return Err(Error::SchemaMismatch {
            expected: file.model.schema_hash.clone(),
            got: schema_hash(&file.model.schema),
        });
    }
    Ok(file.model)
}
