//! Training-set assembly and the linear SVM segment model.

mod dataset;
pub mod solver;

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::query::QueryError;
use crate::vector::{FeatureSetMask, FeatureSpace, SparseVector, VectorError};

pub use dataset::{assemble_training_set, Example, Provenance, TrainingSet};

pub const MODEL_FORMAT: &str = "segmodel-svm";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum SvmError {
    #[error("the segment has no users with enough visits")]
    EmptySegment,
    #[error("no users outside the segment are available as negatives")]
    NoNegativesAvailable,
    #[error("training data contains a single class")]
    SingleClass,
    #[error("objective became non-finite")]
    NonFiniteObjective,
    #[error("dimension mismatch: model has {expected}, input needs {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("model was trained on feature space {model}, not {space}")]
    SpaceMismatch { model: String, space: String },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("unsupported model format {found}")]
    VersionMismatch { found: String },
    #[error("corrupt model file: {0}")]
    CorruptModel(String),
    #[error(transparent)]
    Query(#[from] QueryError),
    #[error(transparent)]
    Vector(#[from] VectorError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmConfig {
    pub lambda: f64,
    pub epochs: usize,
    pub seed: u64,
    pub tolerance: f64,
    pub class_weight_pos: f64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        Self {
            lambda: 1e-2,
            epochs: 50,
            seed: 0,
            tolerance: 1e-6,
            class_weight_pos: 1.0,
        }
    }
}

impl SvmConfig {
    pub fn validate(&self) -> Result<(), SvmError> {
        let bad = |m: String| Err(SvmError::InvalidConfig(m));
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return bad(format!("lambda must be positive, got {}", self.lambda));
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1".into());
        }
        if !(self.tolerance.is_finite() && self.tolerance >= 0.0) {
            return bad(format!("tolerance must be non-negative, got {}", self.tolerance));
        }
        if !(self.class_weight_pos.is_finite() && self.class_weight_pos >= 0.0) {
            return bad(format!("class_weight_pos must be non-negative, got {}", self.class_weight_pos));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingInfo {
    pub objective: f64,
    pub examples: usize,
    pub positives: usize,
    pub negatives: usize,
    pub outer_steps: usize,
    pub epochs: usize,
    pub provenance: Provenance,
}

/// A trained hyperplane `w·x + b` over one feature space.
#[derive(Clone, Debug, PartialEq)]
pub struct SvmModel {
    pub w: Vec<f64>,
    pub b: f64,
    pub feature_space_id: String,
    pub mask: FeatureSetMask,
    pub config: SvmConfig,
    pub training: TrainingInfo,
    /// Centroid of the positive training examples, used for explanations.
    pub positive_centroid: SparseVector,
}

pub fn train(ts: &TrainingSet, cfg: &SvmConfig) -> Result<SvmModel, SvmError> {
    let xs: Vec<SparseVector> = ts.examples.iter().map(|e| e.x.clone()).collect();
    let ys: Vec<f64> = ts.examples.iter().map(|e| f64::from(e.y)).collect();
    let sol = solver::solve(&xs, &ys, ts.dim, cfg)?;
    Ok(SvmModel {
        w: sol.w,
        b: sol.b,
        feature_space_id: ts.provenance.feature_space_id.clone(),
        mask: ts.provenance.mask,
        config: cfg.clone(),
        training: TrainingInfo {
            objective: sol.objective,
            examples: ts.len(),
            positives: ts.positives(),
            negatives: ts.negatives(),
            outer_steps: sol.outer_steps,
            epochs: sol.epochs,
            provenance: ts.provenance.clone(),
        },
        positive_centroid: ts.positive_centroid(),
    })
}

impl SvmModel {
    pub fn dim(&self) -> usize {
        self.w.len()
    }

    pub fn score(&self, x: &SparseVector) -> Result<f64, SvmError> {
        if x.min_dim() > self.dim() {
            return Err(SvmError::DimensionMismatch {
                expected: self.dim(),
                found: x.min_dim(),
            });
        }
        Ok(x.dot_dense(&self.w) + self.b)
    }

    /// `+1` for a strictly positive score, `-1` otherwise.
    pub fn classify(&self, x: &SparseVector) -> Result<i8, SvmError> {
        Ok(if self.score(x)? > 0.0 { 1 } else { -1 })
    }

    /// Fails unless `space` is the one the model was trained on.
    pub fn check_space(&self, space: &FeatureSpace) -> Result<(), SvmError> {
        if space.id() != self.feature_space_id {
            return Err(SvmError::SpaceMismatch {
                model: self.feature_space_id.clone(),
                space: space.id().to_string(),
            });
        }
        if space.dim() != self.dim() {
            return Err(SvmError::DimensionMismatch {
                expected: self.dim(),
                found: space.dim(),
            });
        }
        Ok(())
    }

    pub fn write<W: Write>(&self, mut out: W) -> Result<(), SvmError> {
        let file = ModelFile {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_VERSION,
            feature_space_id: self.feature_space_id.clone(),
            dim: self.dim(),
            b: self.b,
            w: SparseVector::from_dense(&self.w)?,
            mask: self.mask,
            config: self.config.clone(),
            training: self.training.clone(),
            positive_centroid: self.positive_centroid.clone(),
        };
        serde_json::to_writer_pretty(&mut out, &file).map_err(|e| SvmError::CorruptModel(e.to_string()))?;
        out.write_all(b"\n")?;
        out.flush()?;
        Ok(())
    }

    pub fn read<R: Read>(mut input: R) -> Result<Self, SvmError> {
        let mut text = String::new();
        input
            .read_to_string(&mut text)
            .map_err(|e| SvmError::CorruptModel(e.to_string()))?;
        let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| SvmError::CorruptModel(e.to_string()))?;
        let format = value.get("format").and_then(|f| f.as_str()).unwrap_or("");
        let version = value.get("version").and_then(|v| v.as_u64());
        if format != MODEL_FORMAT || version != Some(MODEL_VERSION as u64) {
            return Err(SvmError::VersionMismatch {
                found: format!("{format} v{}", version.map_or("?".to_string(), |v| v.to_string())),
            });
        }
        let file: ModelFile = serde_json::from_value(value).map_err(|e| SvmError::CorruptModel(e.to_string()))?;
        if file.w.min_dim() > file.dim {
            return Err(SvmError::CorruptModel("weight index exceeds dimension".into()));
        }
        if !file.b.is_finite() {
            return Err(SvmError::CorruptModel("bias is not finite".into()));
        }
        Ok(SvmModel {
            w: file.w.to_dense(file.dim),
            b: file.b,
            feature_space_id: file.feature_space_id,
            mask: file.mask,
            config: file.config,
            training: file.training,
            positive_centroid: file.positive_centroid,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    feature_space_id: String,
    dim: usize,
    b: f64,
    w: SparseVector,
    mask: FeatureSetMask,
    config: SvmConfig,
    training: TrainingInfo,
    positive_centroid: SparseVector,
}

pub fn save_model(m: &SvmModel, path: impl AsRef<Path>) -> Result<(), SvmError> {
    let f = std::fs::File::create(path)?;
    m.write(std::io::BufWriter::new(f))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<SvmModel, SvmError> {
    let f = std::fs::File::open(path)?;
    SvmModel::read(std::io::BufReader::new(f))
}
