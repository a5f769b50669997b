//! Self-describing model checkpoints.
//!
//! One JSON document per trained model: a format/version header, the model
//! kind, the config echo, the training log and every parameter tensor by
//! name (row-major float32, base64). Loading rebuilds the architecture from
//! the echoed config and fills the tensors by name, so a checkpoint is
//! valid exactly when it matches the architecture its config describes.

use crate::dataio::FeatureLayout;
use crate::nn::{ParamId, ParamSet};
use crate::rot::{RotConfig, RotError, RotModel, RotTrainingRecord};
use crate::svae::model::ENCODER_PREFIX;
use crate::svae::{SvaeConfig, SvaeError, SvaeModel, TrainingRecord, TrainingStage};
use crate::timing::{TimingConfig, TimingError, TimingModel, TimingTrainingRecord};
use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fs;
use std::path::Path;
use thiserror::Error;

pub const CHECKPOINT_FORMAT: &str = "handover-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("not a model checkpoint (format '{0}')")]
    Format(String),
    #[error("unsupported checkpoint version {0}")]
    Version(u32),
    #[error("checkpoint holds a {got} model, expected {expected}")]
    WrongKind {
        expected: &'static str,
        got: &'static str,
    },
    #[error("duplicate tensor '{0}'")]
    DuplicateTensor(String),
    #[error("checkpoint is missing tensor '{0}'")]
    MissingTensor(String),
    #[error("tensor '{0}' does not belong to this architecture")]
    UnknownTensor(String),
    #[error("tensor '{name}': shape {got:?} does not match {expected:?}")]
    TensorShape {
        name: String,
        expected: [usize; 2],
        got: [usize; 2],
    },
    #[error("tensor '{name}': payload holds {got} bytes, shape needs {expected}")]
    TensorData {
        name: String,
        expected: usize,
        got: usize,
    },
    #[error("tensor payload is not valid base64: {0}")]
    Base64(#[from] base64::DecodeError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Svae(#[from] SvaeError),
    #[error(transparent)]
    Rot(#[from] RotError),
    #[error(transparent)]
    Timing(#[from] TimingError),
}

/// One named parameter matrix: `data` is the row-major float32 buffer in
/// little-endian byte order, base64-encoded.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorRecord {
    pub name: String,
    pub shape: [usize; 2],
    pub data: String,
}

/// Kind-specific half of the document: config echo, feature layout and the
/// training log of the model that produced the checkpoint.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelPayload {
    Svae {
        config: SvaeConfig,
        layout: FeatureLayout,
        stage: TrainingStage,
        log: Vec<TrainingRecord>,
    },
    Rot {
        config: RotConfig,
        layout: FeatureLayout,
        log: Vec<RotTrainingRecord>,
    },
    Timing {
        config: TimingConfig,
        layout: FeatureLayout,
        log: Vec<TimingTrainingRecord>,
    },
}

/// The on-disk document. `model` carries the kind tag, so a reader can
/// dispatch without guessing from tensor names.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub model: ModelPayload,
    pub tensors: Vec<TensorRecord>,
}

fn encode_params(params: &ParamSet) -> Vec<TensorRecord> {
    params
        .iter()
        .map(|(name, value)| {
            let (rows, cols) = value.dim();
            let mut bytes = Vec::with_capacity(rows * cols * 4);
            for &v in value.iter() {
                bytes.extend_from_slice(&(v as f32).to_le_bytes());
            }
            TensorRecord {
                name: name.to_string(),
                shape: [rows, cols],
                data: STANDARD.encode(&bytes),
            }
        })
        .collect()
}

fn decode_tensor(record: &TensorRecord) -> Result<Array2<f64>, CheckpointError> {
    let bytes = STANDARD.decode(&record.data)?;
    let expected = record.shape[0] * record.shape[1] * 4;
    if bytes.len() != expected {
        return Err(CheckpointError::TensorData {
            name: record.name.clone(),
            expected,
            got: bytes.len(),
        });
    }
    let values = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    Ok(Array2::from_shape_vec((record.shape[0], record.shape[1]), values)
        .expect("length checked against shape"))
}

/// Fill `params` from the checkpoint tensors, strictly: every parameter must
/// be present with its exact shape and no tensor may be left over.
fn load_params(params: &mut ParamSet, tensors: &[TensorRecord]) -> Result<(), CheckpointError> {
    let mut by_name: HashMap<&str, &TensorRecord> = HashMap::new();
    for record in tensors {
        if by_name.insert(record.name.as_str(), record).is_some() {
            return Err(CheckpointError::DuplicateTensor(record.name.clone()));
        }
    }
    let slots: Vec<(ParamId, String, (usize, usize))> = params
        .ids()
        .map(|id| (id, params.name(id).to_string(), params.get(id).dim()))
        .collect();
    for (id, name, dim) in slots {
        let record = by_name
            .remove(name.as_str())
            .ok_or_else(|| CheckpointError::MissingTensor(name.clone()))?;
        if record.shape != [dim.0, dim.1] {
            return Err(CheckpointError::TensorShape {
                name,
                expected: [dim.0, dim.1],
                got: record.shape,
            });
        }
        *params.get_mut(id) = decode_tensor(record)?;
    }
    if let Some(name) = by_name.keys().next() {
        return Err(CheckpointError::UnknownTensor((*name).to_string()));
    }
    Ok(())
}

impl Checkpoint {
    pub fn from_svae(model: &SvaeModel) -> Self {
        Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            model: ModelPayload::Svae {
                config: model.config.clone(),
                layout: model.layout,
                stage: model.stage,
                log: model.log.clone(),
            },
            tensors: encode_params(&model.params),
        }
    }

    pub fn from_rot(model: &RotModel) -> Self {
        Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            model: ModelPayload::Rot {
                config: model.config.clone(),
                layout: model.layout,
                log: model.log.clone(),
            },
            tensors: encode_params(&model.params),
        }
    }

    pub fn from_timing(model: &TimingModel) -> Self {
        Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            model: ModelPayload::Timing {
                config: model.config.clone(),
                layout: model.layout,
                log: model.log.clone(),
            },
            tensors: encode_params(&model.params),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self.model {
            ModelPayload::Svae { .. } => "svae",
            ModelPayload::Rot { .. } => "rot",
            ModelPayload::Timing { .. } => "timing",
        }
    }

    fn validate(&self) -> Result<(), CheckpointError> {
        if self.format != CHECKPOINT_FORMAT {
            return Err(CheckpointError::Format(self.format.clone()));
        }
        if self.version != CHECKPOINT_VERSION {
            return Err(CheckpointError::Version(self.version));
        }
        Ok(())
    }

    /// Rebuild the generator from the config echo. A stage-2 checkpoint
    /// comes back with the full encoder frozen, exactly as it trained.
    pub fn to_svae(&self) -> Result<SvaeModel, CheckpointError> {
        self.validate()?;
        let ModelPayload::Svae {
            config,
            layout,
            stage,
            log,
        } = &self.model
        else {
            return Err(CheckpointError::WrongKind {
                expected: "svae",
                got: self.kind(),
            });
        };
        let mut model = SvaeModel::new(config.clone(), *layout)?;
        load_params(&mut model.params, &self.tensors)?;
        model.stage = *stage;
        if *stage == TrainingStage::Stage2 {
            model.params.freeze_prefix(ENCODER_PREFIX);
        }
        model.log = log.clone();
        Ok(model)
    }

    pub fn to_rot(&self) -> Result<RotModel, CheckpointError> {
        self.validate()?;
        let ModelPayload::Rot {
            config,
            layout,
            log,
        } = &self.model
        else {
            return Err(CheckpointError::WrongKind {
                expected: "rot",
                got: self.kind(),
            });
        };
        let mut model = RotModel::new(config.clone(), *layout)?;
        load_params(&mut model.params, &self.tensors)?;
        model.log = log.clone();
        Ok(model)
    }

    pub fn to_timing(&self) -> Result<TimingModel, CheckpointError> {
        self.validate()?;
        let ModelPayload::Timing {
            config,
            layout,
            log,
        } = &self.model
        else {
            return Err(CheckpointError::WrongKind {
                expected: "timing",
                got: self.kind(),
            });
        };
        let mut model = TimingModel::new(config.clone(), *layout)?;
        load_params(&mut model.params, &self.tensors)?;
        model.log = log.clone();
        Ok(model)
    }

    pub fn to_json(&self) -> Result<String, CheckpointError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self, CheckpointError> {
        let checkpoint: Checkpoint = serde_json::from_str(text)?;
        checkpoint.validate()?;
        Ok(checkpoint)
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        Ok(fs::write(path, self.to_json()?)?)
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}
