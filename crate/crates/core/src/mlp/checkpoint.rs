use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use super::{fit, kaiming_init, Dataset, EpochRecord, Layer, MlpConfig, MlpError, MlpModel, Standardizer};

pub const CHECKPOINT_FORMAT: &str = "moodstack-mlp-v1";

/// A trained network bundled with the tag vocabulary it predicts and the
/// input standardization it was trained with.
#[derive(Debug, Clone, PartialEq)]
pub struct Classifier {
    tags: Vec<String>,
    standardizer: Standardizer,
    model: MlpModel<f32>,
}

/// Result of [`Classifier::train`].
#[derive(Debug, Clone)]
pub struct TrainingRun {
    pub classifier: Classifier,
    pub history: Vec<EpochRecord>,
    pub best_epoch: Option<usize>,
}

#[derive(Serialize, Deserialize)]
struct LayerFile {
    weights: Array2<f32>,
    bias: Array1<f32>,
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    format: String,
    config: MlpConfig,
    tags: Vec<String>,
    standardizer: Standardizer,
    layers: Vec<LayerFile>,
}

impl Classifier {
    pub fn new(tags: Vec<String>, standardizer: Standardizer, model: MlpModel<f32>) -> Result<Self, MlpError> {
        let cfg = model.config();
        if tags.len() != cfg.output_dim {
            return Err(MlpError::Shape(format!("{} tags for {} outputs", tags.len(), cfg.output_dim)));
        }
        if standardizer.dim() != cfg.input_dim {
            return Err(MlpError::Shape(format!(
                "standardizer has {} dimensions, model input {}",
                standardizer.dim(),
                cfg.input_dim
            )));
        }
        Ok(Self {
            tags,
            standardizer,
            model,
        })
    }

    /// Fits the standardizer on `train_x`, initializes from `seed` and trains
    /// with model selection on the validation split.
    #[allow(clippy::too_many_arguments)]
    pub fn train(
        config: &MlpConfig,
        tags: Vec<String>,
        train_x: ArrayView2<'_, f64>,
        train_y: ArrayView2<'_, f32>,
        val_x: ArrayView2<'_, f64>,
        val_y: ArrayView2<'_, f32>,
        seed: u64,
        on_epoch: impl FnMut(&EpochRecord),
    ) -> Result<TrainingRun, MlpError> {
        let standardizer = Standardizer::fit(train_x)?;
        let xt = standardizer.apply(train_x)?.mapv(|v| v as f32);
        let xv = standardizer.apply(val_x)?.mapv(|v| v as f32);
        let model = kaiming_init::<f32>(config, seed)?;
        let out = fit(
            model,
            Dataset { x: xt.view(), y: train_y },
            Dataset { x: xv.view(), y: val_y },
            &tags,
            seed.wrapping_add(1),
            on_epoch,
        )?;
        Ok(TrainingRun {
            classifier: Self::new(tags, standardizer, out.model)?,
            history: out.history,
            best_epoch: out.best_epoch,
        })
    }

    pub fn tags(&self) -> &[String] {
        &self.tags
    }

    pub fn config(&self) -> &MlpConfig {
        self.model.config()
    }

    pub fn model(&self) -> &MlpModel<f32> {
        &self.model
    }

    pub fn standardizer(&self) -> &Standardizer {
        &self.standardizer
    }

    /// Ranking scores (logits) for raw, unstandardized embeddings.
    pub fn scores(&self, embeddings: ArrayView2<'_, f64>) -> Result<Array2<f64>, MlpError> {
        let x = self.standardizer.apply(embeddings)?.mapv(|v| v as f32);
        Ok(self.model.logits(x.view())?.mapv(f64::from))
    }

    pub fn probabilities(&self, embeddings: ArrayView2<'_, f64>) -> Result<Array2<f64>, MlpError> {
        Ok(self.scores(embeddings)?.mapv(super::sigmoid))
    }

    pub fn save(&self, path: &Path) -> Result<(), MlpError> {
        let err = |message: String| MlpError::Checkpoint {
            path: path.display().to_string(),
            message,
        };
        let file = CheckpointFile {
            format: CHECKPOINT_FORMAT.to_owned(),
            config: self.model.config().clone(),
            tags: self.tags.clone(),
            standardizer: self.standardizer.clone(),
            layers: self
                .model
                .layers()
                .iter()
                .map(|l| LayerFile {
                    weights: l.weights.clone(),
                    bias: l.bias.clone(),
                })
                .collect(),
        };
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).map_err(|e| err(e.to_string()))?;
        }
        let body = serde_json::to_string(&file).map_err(|e| err(e.to_string()))?;
        fs::write(path, body).map_err(|e| err(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, MlpError> {
        let err = |message: String| MlpError::Checkpoint {
            path: path.display().to_string(),
            message,
        };
        let body = fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        let file: CheckpointFile = serde_json::from_str(&body).map_err(|e| err(e.to_string()))?;
        if file.format != CHECKPOINT_FORMAT {
            return Err(err(format!("unsupported format {:?}", file.format)));
        }
        let layers = file
            .layers
            .into_iter()
            .map(|l| Layer {
                weights: l.weights,
                bias: l.bias,
            })
            .collect();
        let model = MlpModel::from_layers(file.config, layers).map_err(|e| err(e.to_string()))?;
        Self::new(file.tags, file.standardizer, model).map_err(|e| err(e.to_string()))
    }
}
