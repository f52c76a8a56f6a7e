use serde::{Deserialize, Serialize};

use super::MlpError;

pub const DEFAULT_EPOCHS: usize = 100;
pub const DEFAULT_WARMUP_EPOCHS: usize = 1;
pub const DEFAULT_BATCH_SIZE: usize = 256;

/// Architecture and training hyper-parameters of the mood classifier.
///
/// `n_layers` counts hidden layers, all `n_units` wide, between the input
/// embedding and the sigmoid output layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub n_layers: usize,
    pub n_units: usize,
    pub learning_rate: f64,
    pub dropout: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub warmup_epochs: usize,
    pub batch_size: usize,
    pub input_dim: usize,
    pub output_dim: usize,
}

impl MlpConfig {
    /// Best configuration found for factorized listening embeddings.
    pub fn listening_best(input_dim: usize, output_dim: usize) -> Self {
        Self {
            n_layers: 4,
            n_units: 3909,
            learning_rate: 4e-4,
            dropout: 0.25,
            weight_decay: 0.0,
            epochs: DEFAULT_EPOCHS,
            warmup_epochs: DEFAULT_WARMUP_EPOCHS,
            batch_size: DEFAULT_BATCH_SIZE,
            input_dim,
            output_dim,
        }
    }

    /// Best configuration found for the large pre-trained audio tagger's embeddings.
    pub fn audio_best(input_dim: usize, output_dim: usize) -> Self {
        Self {
            n_units: 3933,
            learning_rate: 5e-4,
            weight_decay: 1e-6,
            ..Self::listening_best(input_dim, output_dim)
        }
    }

    /// `(fan_in, fan_out)` of every affine layer, input to output.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let mut dims = vec![self.input_dim];
        dims.extend(std::iter::repeat_n(self.n_units, self.n_layers));
        dims.push(self.output_dim);
        dims.windows(2).map(|w| (w[0], w[1])).collect()
    }

    pub fn validate(&self) -> Result<(), MlpError> {
        let bad = |msg: String| Err(MlpError::InvalidConfig(msg));
        if self.input_dim == 0 || self.output_dim == 0 {
            return bad("input and output dimensions must be positive".into());
        }
        if self.n_layers > 0 && self.n_units == 0 {
            return bad("hidden layers need at least one unit".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning rate must be > 0, got {}", self.learning_rate));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout must be in [0, 1), got {}", self.dropout));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad(format!("weight decay must be >= 0, got {}", self.weight_decay));
        }
        if self.batch_size == 0 {
            return bad("batch size must be positive".into());
        }
        if self.epochs > 0 && self.warmup_epochs >= self.epochs {
            return bad(format!(
                "warm-up ({} epochs) must be shorter than training ({} epochs)",
                self.warmup_epochs, self.epochs
            ));
        }
        Ok(())
    }
}
