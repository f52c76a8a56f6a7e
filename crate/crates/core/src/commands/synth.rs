use std::path::PathBuf;

use serde::Serialize;

use crate::error::Result;
use crate::manifest::{RunManifest, MANIFEST_FILE};
use crate::synthetic::{generate, SyntheticConfig, SyntheticCorpus};

#[derive(Debug, Clone, Serialize)]
pub struct SynthParams {
    pub config: SyntheticConfig,
    pub seed: u64,
    pub out: PathBuf,
}

#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub corpus: SyntheticCorpus,
    pub triplets: PathBuf,
    pub annotations: PathBuf,
}

pub fn run(p: &SynthParams) -> Result<SynthOutput> {
    let manifest = RunManifest::start("synth", p, Some(p.seed))?;
    let corpus = generate(&p.config, p.seed)?;
    let (triplets, annotations) = corpus.write(&p.out)?;
    log::info!(
        "synthetic corpus: {} listeners, {} tracks, {} tags{}",
        corpus.interactions.n_listeners(),
        corpus.annotations.n_tracks(),
        corpus.annotations.n_tags(),
        if p.config.shuffle_labels { " (shuffled labels)" } else { "" }
    );
    manifest.finish(&p.out.join(MANIFEST_FILE))?;
    Ok(SynthOutput {
        corpus,
        triplets,
        annotations,
    })
}
