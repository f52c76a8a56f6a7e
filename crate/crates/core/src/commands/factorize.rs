use std::path::PathBuf;
use std::time::Instant;

use serde::Serialize;

use super::{create_parent, load_triplets};
use crate::embeddings::Embeddings;
use crate::error::Result;
use crate::factorization::{
    als_fit_with, default_lambda, track_embeddings, wmf_objective, ConfidenceParams, DEFAULT_ALPHA, DEFAULT_ITERATIONS,
    DEFAULT_RANK,
};
use crate::manifest::{sidecar_path, RunManifest};

#[derive(Debug, Clone, Serialize)]
pub struct FactorizeParams {
    pub triplets: PathBuf,
    pub rank: usize,
    pub alpha: f64,
    /// `None` derives lambda from the mean confidence of the data.
    pub lambda: Option<f64>,
    pub iterations: usize,
    pub seed: u64,
    pub out: PathBuf,
}

impl FactorizeParams {
    pub fn new(triplets: PathBuf, out: PathBuf) -> Self {
        Self {
            triplets,
            rank: DEFAULT_RANK,
            alpha: DEFAULT_ALPHA,
            lambda: None,
            iterations: DEFAULT_ITERATIONS,
            seed: 0,
            out,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
struct Resolved<'a> {
    #[serde(flatten)]
    given: &'a FactorizeParams,
    resolved: ConfidenceParams,
}

#[derive(Debug, Clone)]
pub struct FactorizeOutput {
    pub embeddings: Embeddings,
    pub params: ConfidenceParams,
    pub objective: f64,
}

pub fn run(p: &FactorizeParams) -> Result<FactorizeOutput> {
    let listening = load_triplets(&p.triplets)?;
    let params = ConfidenceParams {
        alpha: p.alpha,
        lambda: p.lambda.unwrap_or_else(|| default_lambda(p.alpha, &listening)),
        rank: p.rank,
        iterations: p.iterations,
    };
    params.validate()?;
    let mut manifest = RunManifest::start(
        "factorize",
        &Resolved {
            given: p,
            resolved: params,
        },
        Some(p.seed),
    )?;
    manifest.add_input("triplets", &p.triplets)?;
    log::info!(
        "factorizing: rank {}, alpha {}, lambda {:.4}, {} sweeps",
        params.rank,
        params.alpha,
        params.lambda,
        params.iterations
    );

    let started = Instant::now();
    let model = als_fit_with(&listening, params, p.seed, |step, _| {
        log::debug!("sweep {} {} side done", step.sweep, step.side);
    })?;
    let objective = wmf_objective(&listening, &model)?;
    log::info!(
        "objective {objective:.6e} after {:.1}s",
        started.elapsed().as_secs_f64()
    );

    let embeddings = track_embeddings(&model, listening.track_ids())?;
    create_parent(&p.out)?;
    embeddings.write(&p.out)?;
    manifest.finish(&sidecar_path(&p.out))?;
    Ok(FactorizeOutput {
        embeddings,
        params,
        objective,
    })
}
