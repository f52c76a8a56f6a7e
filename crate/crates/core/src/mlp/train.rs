use std::time::Instant;

use ndarray::{ArrayView2, Axis, Zip};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{bce_loss, Gradients, Layer, LrSchedule, MlpError, MlpModel};
use crate::eval::{macro_ap, RankedPredictions};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// Standardized inputs with their 0/1 multi-label targets.
#[derive(Debug, Clone, Copy)]
pub struct Dataset<'a> {
    pub x: ArrayView2<'a, f32>,
    pub y: ArrayView2<'a, f32>,
}

impl Dataset<'_> {
    pub fn len(&self) -> usize {
        self.x.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.x.nrows() == 0
    }

    fn check(&self, what: &str, input_dim: usize, output_dim: usize) -> Result<(), MlpError> {
        if self.x.nrows() != self.y.nrows() {
            return Err(MlpError::Shape(format!(
                "{what}: {} inputs but {} label rows",
                self.x.nrows(),
                self.y.nrows()
            )));
        }
        if self.x.ncols() != input_dim || self.y.ncols() != output_dim {
            return Err(MlpError::Shape(format!(
                "{what}: got {}→{} columns, model is {input_dim}→{output_dim}",
                self.x.ncols(),
                self.y.ncols()
            )));
        }
        if self.is_empty() {
            return Err(MlpError::EmptyData(format!("{what} set is empty")));
        }
        Ok(())
    }
}

/// Adam with decoupled weight decay.
#[derive(Debug, Clone)]
pub struct AdamW {
    first: Vec<Layer<f32>>,
    second: Vec<Layer<f32>>,
    steps: i32,
}

impl AdamW {
    pub fn new(model: &MlpModel<f32>) -> Self {
        let zeros = || {
            model
                .layers()
                .iter()
                .map(|l| Layer {
                    weights: ndarray::Array2::zeros(l.weights.dim()),
                    bias: ndarray::Array1::zeros(l.bias.len()),
                })
                .collect::<Vec<_>>()
        };
        Self {
            first: zeros(),
            second: zeros(),
            steps: 0,
        }
    }

    pub fn step(&mut self, model: &mut MlpModel<f32>, grads: &Gradients<f32>, lr: f64, weight_decay: f64) {
        self.steps += 1;
        let (b1, b2) = (ADAM_BETA1 as f32, ADAM_BETA2 as f32);
        let c1 = 1.0 - ADAM_BETA1.powi(self.steps);
        let c2 = 1.0 - ADAM_BETA2.powi(self.steps);
        let lr32 = lr as f32;
        let decay = (1.0 - lr * weight_decay) as f32;
        let (c1, c2, eps) = (c1 as f32, c2 as f32, ADAM_EPS as f32);
        let update = |p: &mut f32, &g: &f32, m: &mut f32, v: &mut f32| {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            *p *= decay;
            *p -= lr32 * (*m / c1) / ((*v / c2).sqrt() + eps);
        };
        for (((layer, g), m), v) in model
            .layers_mut()
            .iter_mut()
            .zip(grads)
            .zip(&mut self.first)
            .zip(&mut self.second)
        {
            Zip::from(&mut layer.weights)
                .and(&g.weights)
                .and(&mut m.weights)
                .and(&mut v.weights)
                .par_for_each(update);
            Zip::from(&mut layer.bias)
                .and(&g.bias)
                .and(&mut m.bias)
                .and(&mut v.bias)
                .for_each(update);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_macro_ap: f64,
    pub learning_rate: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct FitOutcome {
    /// Parameters from the epoch with the highest validation macro-AP.
    pub model: MlpModel<f32>,
    pub history: Vec<EpochRecord>,
    pub best_epoch: Option<usize>,
}

impl FitOutcome {
    pub fn best_val_macro_ap(&self) -> Option<f64> {
        self.best_epoch.map(|e| self.history[e - 1].val_macro_ap)
    }
}

pub(crate) fn validation_macro_ap(model: &MlpModel<f32>, val: Dataset<'_>, tags: &[String]) -> Result<f64, MlpError> {
    let scores = model.logits(val.x)?.mapv(f64::from);
    let preds = RankedPredictions::from_dense(tags.to_vec(), scores, &val.y.to_owned())?;
    Ok(macro_ap(&preds)?.macro_ap)
}

/// Mini-batch AdamW training with warm-up + cosine learning rate, keeping the
/// snapshot that scores best on the validation set. `seed` drives shuffling
/// and dropout.
pub fn fit(
    mut model: MlpModel<f32>,
    train: Dataset<'_>,
    val: Dataset<'_>,
    tags: &[String],
    seed: u64,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<FitOutcome, MlpError> {
    let cfg = model.config().clone();
    cfg.validate()?;
    train.check("training", cfg.input_dim, cfg.output_dim)?;
    val.check("validation", cfg.input_dim, cfg.output_dim)?;
    if tags.len() != cfg.output_dim {
        return Err(MlpError::Shape(format!("{} tag names for {} outputs", tags.len(), cfg.output_dim)));
    }
    if cfg.epochs == 0 {
        return Ok(FitOutcome {
            model,
            history: Vec::new(),
            best_epoch: None,
        });
    }

    let n = train.len();
    let steps_per_epoch = n.div_ceil(cfg.batch_size);
    let schedule = LrSchedule::new(
        cfg.learning_rate,
        cfg.epochs * steps_per_epoch,
        cfg.warmup_epochs * steps_per_epoch,
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut optimizer = AdamW::new(&model);
    let mut order: Vec<usize> = (0..n).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, usize, MlpModel<f32>)> = None;
    let mut step = 0;

    for epoch in 1..=cfg.epochs {
        let started = Instant::now();
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut lr = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let xb = train.x.select(Axis(0), batch);
            let yb = train.y.select(Axis(0), batch);
            let cache = model.forward_cached(xb.view(), Some(&mut rng))?;
            let loss = f64::from(bce_loss(cache.probabilities.view(), yb.view())?);
            if !loss.is_finite() {
                return Err(MlpError::NonFinite(format!("loss {loss} at epoch {epoch}")));
            }
            loss_sum += loss * batch.len() as f64;
            let grads = model.backward(&cache, yb.view(), 0.0)?;
            step += 1;
            lr = schedule.lr_at(step)?;
            optimizer.step(&mut model, &grads, lr, cfg.weight_decay);
        }
        let val_ap = validation_macro_ap(&model, val, tags)?;
        let record = EpochRecord {
            epoch,
            train_loss: loss_sum / n as f64,
            val_macro_ap: val_ap,
            learning_rate: lr,
            seconds: started.elapsed().as_secs_f64(),
        };
        log::debug!(
            "epoch {epoch}: loss {:.5}, val macro-AP {:.4}",
            record.train_loss,
            record.val_macro_ap
        );
        on_epoch(&record);
        history.push(record);
        if best.as_ref().is_none_or(|(b, _, _)| val_ap > *b) {
            best = Some((val_ap, epoch, model.clone()));
        }
    }
    let (_, best_epoch, model) = best.expect("at least one epoch");
    Ok(FitOutcome {
        model,
        history,
        best_epoch: Some(best_epoch),
    })
}
