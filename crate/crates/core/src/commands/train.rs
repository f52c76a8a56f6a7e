use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{create_parent, load_annotations, load_embeddings, load_splits, num, split_data, write_csv, SplitData};
use crate::corpus::SplitName;
use crate::error::{Error, Result};
use crate::manifest::{sidecar_path, RunManifest};
use crate::mlp::{Classifier, EpochRecord, MlpConfig};

/// Classifier hyper-parameters as given on the command line or in a config.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainHyper {
    pub layers: usize,
    pub units: usize,
    pub lr: f64,
    pub dropout: f64,
    pub wd: f64,
    pub epochs: usize,
    pub warmup_epochs: usize,
    pub batch_size: usize,
}

impl Default for TrainHyper {
    fn default() -> Self {
        Self::from_config(&MlpConfig::listening_best(1, 1))
    }
}

impl TrainHyper {
    pub fn from_config(c: &MlpConfig) -> Self {
        Self {
            layers: c.n_layers,
            units: c.n_units,
            lr: c.learning_rate,
            dropout: c.dropout,
            wd: c.weight_decay,
            epochs: c.epochs,
            warmup_epochs: c.warmup_epochs,
            batch_size: c.batch_size,
        }
    }

    pub fn config(&self, input_dim: usize, output_dim: usize) -> MlpConfig {
        MlpConfig {
            n_layers: self.layers,
            n_units: self.units,
            learning_rate: self.lr,
            dropout: self.dropout,
            weight_decay: self.wd,
            epochs: self.epochs,
            warmup_epochs: self.warmup_epochs,
            batch_size: self.batch_size,
            input_dim,
            output_dim,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainParams {
    pub embeddings: PathBuf,
    pub annotations: PathBuf,
    pub splits: PathBuf,
    pub hyper: TrainHyper,
    pub seed: u64,
    pub out: PathBuf,
}

/// Tag order plus the training and validation matrices.
#[derive(Debug, Clone)]
pub struct TrainingData {
    pub tags: Vec<String>,
    pub train: SplitData,
    pub val: SplitData,
}

pub fn load_training_data(embeddings: &Path, annotations: &Path, splits: &Path) -> Result<TrainingData> {
    let emb = load_embeddings(embeddings)?;
    let ann = load_annotations(annotations)?;
    let split = load_splits(splits)?;
    let tags = ann.vocabulary().tags().to_vec();
    let train = split_data(&emb, &ann, &tags, &split.train, SplitName::Train)?;
    let val = split_data(&emb, &ann, &tags, &split.val, SplitName::Val)?;
    Ok(TrainingData { tags, train, val })
}

/// `<model>.train_log.csv`: one row per epoch.
pub fn train_log_path(model: &Path) -> PathBuf {
    let mut name = model.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".train_log.csv");
    model.with_file_name(name)
}

pub fn write_train_log(path: &Path, history: &[EpochRecord]) -> Result<()> {
    write_csv(
        path,
        &["epoch", "train_loss", "val_macro_ap", "learning_rate", "seconds"],
        history.iter().map(|r| {
            [
                r.epoch.to_string(),
                num(r.train_loss),
                num(r.val_macro_ap),
                num(r.learning_rate),
                format!("{:.3}", r.seconds),
            ]
        }),
    )
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub classifier: Classifier,
    pub history: Vec<EpochRecord>,
    pub best_epoch: Option<usize>,
    pub val_macro_ap: Option<f64>,
}

/// Trains on prepared data and writes the checkpoint and its epoch log.
pub fn train_and_save(data: &TrainingData, hyper: &TrainHyper, seed: u64, out: &Path) -> Result<TrainOutput> {
    let config = hyper.config(data.train.x.ncols(), data.tags.len());
    config.validate()?;
    log::info!(
        "training {} x {} on {} tracks ({} validation)",
        config.n_layers,
        config.n_units,
        data.train.ids.len(),
        data.val.ids.len()
    );
    let run = Classifier::train(
        &config,
        data.tags.clone(),
        data.train.x.view(),
        data.train.y.view(),
        data.val.x.view(),
        data.val.y.view(),
        seed,
        |r| {
            log::info!(
                "epoch {:>3}: loss {:.4}, val macro-AP {:.4}, lr {:.2e}",
                r.epoch,
                r.train_loss,
                r.val_macro_ap,
                r.learning_rate
            )
        },
    )?;
    let val_macro_ap = run.best_epoch.map(|e| run.history[e - 1].val_macro_ap);
    if let Some(e) = run.best_epoch {
        log::info!("keeping epoch {e} (val macro-AP {:.4})", val_macro_ap.unwrap_or(f64::NAN));
    }
    create_parent(out)?;
    run.classifier.save(out)?;
    write_train_log(&train_log_path(out), &run.history)?;
    Ok(TrainOutput {
        classifier: run.classifier,
        history: run.history,
        best_epoch: run.best_epoch,
        val_macro_ap,
    })
}

pub fn run(p: &TrainParams) -> Result<TrainOutput> {
    let mut manifest = RunManifest::start("train", p, Some(p.seed))?;
    manifest.add_input("embeddings", &p.embeddings)?;
    manifest.add_input("annotations", &p.annotations)?;
    manifest.add_input("splits", &p.splits)?;
    let data = load_training_data(&p.embeddings, &p.annotations, &p.splits)?;
    if data.train.ids.len() < 2 {
        return Err(Error::Data("training needs at least two tracks".into()));
    }
    let out = train_and_save(&data, &p.hyper, p.seed, &p.out)?;
    manifest.finish(&sidecar_path(&p.out))?;
    Ok(out)
}
