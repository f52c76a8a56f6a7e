use std::path::PathBuf;

use serde::Serialize;

use super::train::{load_training_data, train_and_save, TrainHyper, TrainOutput};
use crate::error::Result;
use crate::hpo::{run_search, Budget, SearchData, SearchOutcome, SearchSpace};
use crate::manifest::{sidecar_path, RunManifest};

pub const DEFAULT_TRIALS: usize = 200;

#[derive(Debug, Clone, Serialize)]
pub struct HpoParams {
    pub embeddings: PathBuf,
    pub annotations: PathBuf,
    pub splits: PathBuf,
    pub space: SearchSpace,
    pub budget: Budget,
    /// Epochs, warm-up and batch size of every trial; searched fields are overwritten.
    pub trial: TrainHyper,
    pub seed: u64,
    /// JSON-lines trial log; an existing log is resumed.
    pub out: PathBuf,
    /// Retrain the winning configuration for `final_epochs` and save it here.
    pub final_model: Option<PathBuf>,
    pub final_epochs: usize,
}

#[derive(Debug, Clone)]
pub struct HpoOutput {
    pub search: SearchOutcome,
    pub final_model: Option<TrainOutput>,
}

pub fn run(p: &HpoParams) -> Result<HpoOutput> {
    let mut manifest = RunManifest::start("hpo", p, Some(p.seed))?;
    manifest.add_input("embeddings", &p.embeddings)?;
    manifest.add_input("annotations", &p.annotations)?;
    manifest.add_input("splits", &p.splits)?;
    let data = load_training_data(&p.embeddings, &p.annotations, &p.splits)?;
    super::create_parent(&p.out)?;
    let base = p.trial.config(data.train.x.ncols(), data.tags.len());
    let search = run_search(
        &p.space,
        p.budget,
        SearchData {
            train_x: data.train.x.view(),
            train_y: data.train.y.view(),
            val_x: data.val.x.view(),
            val_y: data.val.y.view(),
            tags: &data.tags,
        },
        &base,
        p.seed,
        Some(&p.out),
    )?;
    let best = &search.best;
    log::info!(
        "best of {} trials: #{} with val macro-AP {:.4}",
        search.trials.len(),
        best.trial,
        best.val_macro_ap.unwrap_or(f64::NAN)
    );

    let final_model = match &p.final_model {
        Some(path) => {
            let hyper = TrainHyper {
                epochs: p.final_epochs,
                ..TrainHyper::from_config(&best.config)
            };
            let out = train_and_save(&data, &hyper, best.seed, path)?;
            manifest.clone().finish(&sidecar_path(path))?;
            Some(out)
        }
        None => None,
    };
    manifest.finish(&sidecar_path(&p.out))?;
    Ok(HpoOutput { search, final_model })
}
