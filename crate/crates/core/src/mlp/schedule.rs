use std::f64::consts::PI;

use super::MlpError;

/// Linear warm-up to `base_lr`, then a single cosine decay to zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LrSchedule {
    base_lr: f64,
    total_steps: usize,
    warmup_steps: usize,
}

impl LrSchedule {
    pub fn new(base_lr: f64, total_steps: usize, warmup_steps: usize) -> Result<Self, MlpError> {
        if warmup_steps >= total_steps {
            return Err(MlpError::InvalidConfig(format!(
                "warm-up steps ({warmup_steps}) must be fewer than total steps ({total_steps})"
            )));
        }
        Ok(Self {
            base_lr,
            total_steps,
            warmup_steps,
        })
    }

    pub fn total_steps(&self) -> usize {
        self.total_steps
    }

    pub fn warmup_steps(&self) -> usize {
        self.warmup_steps
    }

    pub fn lr_at(&self, step: usize) -> Result<f64, MlpError> {
        if step > self.total_steps {
            return Err(MlpError::StepOutOfRange {
                step,
                total: self.total_steps,
            });
        }
        if step < self.warmup_steps {
            return Ok(self.base_lr * step as f64 / self.warmup_steps as f64);
        }
        let progress = (step - self.warmup_steps) as f64 / (self.total_steps - self.warmup_steps) as f64;
        Ok(self.base_lr * 0.5 * (1.0 + (PI * progress).cos()))
    }
}
