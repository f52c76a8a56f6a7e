//! Multi-label mood classifier on top of track embeddings.

mod checkpoint;
mod config;
mod model;
mod schedule;
mod standardize;
mod train;

use std::fmt::Debug;

pub use checkpoint::{Classifier, TrainingRun, CHECKPOINT_FORMAT};
pub use config::{MlpConfig, DEFAULT_BATCH_SIZE, DEFAULT_EPOCHS, DEFAULT_WARMUP_EPOCHS};
pub use model::{bce_loss, kaiming_init, sigmoid, ForwardCache, Gradients, Layer, MlpModel, BCE_EPS};
pub use schedule::LrSchedule;
pub use standardize::{Standardizer, STD_FLOOR};
pub use train::{fit, AdamW, Dataset, EpochRecord, FitOutcome};

use crate::eval::EvalError;

#[derive(Debug, thiserror::Error)]
pub enum MlpError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("step {step} is outside the schedule of {total} steps")]
    StepOutOfRange { step: usize, total: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("not enough data: {0}")]
    EmptyData(String),
    #[error("training diverged: {0}")]
    NonFinite(String),
    #[error("validation scoring failed: {0}")]
    Eval(#[from] EvalError),
    #[error("checkpoint {path}: {message}")]
    Checkpoint { path: String, message: String },
}

/// Floating-point element type of a network: `f32` for training, `f64` for
/// numerical checks.
pub trait Real:
    num_traits::Float
    + ndarray::LinalgScalar
    + ndarray::ScalarOperand
    + std::ops::MulAssign
    + Send
    + Sync
    + Debug
    + 'static
{
    fn of(v: f64) -> Self;
    fn as_f64(self) -> f64;
}

impl Real for f32 {
    fn of(v: f64) -> Self {
        v as f32
    }
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    fn of(v: f64) -> Self {
        v
    }
    fn as_f64(self) -> f64 {
        self
    }
}
