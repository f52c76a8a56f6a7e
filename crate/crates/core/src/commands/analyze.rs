use std::fs;
use std::path::PathBuf;

use serde::Serialize;

use super::{load_annotations, load_triplets, num, write_csv};
use crate::analytics::{cluster_tags, consistency_ratios, cooccurrence, ConsistencyCurve, CooccurrenceMatrix, TagClusters};
use crate::error::{Error, Result};
use crate::manifest::{RunManifest, MANIFEST_FILE};

pub const CONSISTENCY_CSV: &str = "consistency.csv";
pub const COOCCURRENCE_CSV: &str = "cooccurrence.csv";
pub const CLUSTERS_JSON: &str = "clusters.json";
pub const ANALYSIS_JSON: &str = "analysis.json";

pub const DEFAULT_TOP_N: usize = 25;

#[derive(Debug, Clone, Serialize)]
pub struct AnalyzeParams {
    pub triplets: PathBuf,
    pub annotations: PathBuf,
    pub top_n: usize,
    pub clusters: bool,
    pub out: PathBuf,
}

/// Contents of `analysis.json`.
#[derive(Debug, Clone, Serialize)]
pub struct AnalysisSummary {
    pub n_listeners: usize,
    pub dropped_listeners: usize,
    pub n_clusters: Option<usize>,
    pub cluster_preference: Option<f64>,
    pub clustering_converged: Option<bool>,
    pub clustering_iterations: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct AnalyzeOutput {
    pub curve: ConsistencyCurve,
    pub cooccurrence: CooccurrenceMatrix,
    pub clusters: Option<TagClusters>,
}

fn write_json(path: &std::path::Path, value: &impl Serialize) -> Result<()> {
    let body = serde_json::to_string_pretty(value).map_err(|e| Error::Runtime(e.to_string()))?;
    fs::write(path, body + "\n").map_err(|e| Error::io(path, e))
}

pub fn run(p: &AnalyzeParams) -> Result<AnalyzeOutput> {
    let mut manifest = RunManifest::start("analyze", p, None)?;
    manifest.add_input("triplets", &p.triplets)?;
    manifest.add_input("annotations", &p.annotations)?;
    let listening = load_triplets(&p.triplets)?;
    let ann = load_annotations(&p.annotations)?;

    let curve = consistency_ratios(&listening, &ann, p.top_n)?;
    log::info!(
        "consistency over {} listeners ({} without tagged plays): ratio(1) = {:.4}",
        curve.n_listeners,
        curve.dropped_listeners,
        curve.at_rank(1).unwrap_or(f64::NAN)
    );
    let cooc = cooccurrence(&ann)?;
    let clusters = if p.clusters {
        let c = cluster_tags(&cooc)?;
        log::info!("{} tag clusters", c.clusters.len());
        Some(c)
    } else {
        None
    };

    super::create_dir(&p.out)?;
    write_csv(
        &p.out.join(CONSISTENCY_CSV),
        &["rank", "ratio"],
        curve.ratios.iter().enumerate().map(|(i, r)| [(i + 1).to_string(), num(*r)]),
    )?;
    cooc.write_csv(&p.out.join(COOCCURRENCE_CSV))?;
    if let Some(c) = &clusters {
        write_json(&p.out.join(CLUSTERS_JSON), &c.clusters)?;
    }
    write_json(
        &p.out.join(ANALYSIS_JSON),
        &AnalysisSummary {
            n_listeners: curve.n_listeners,
            dropped_listeners: curve.dropped_listeners,
            n_clusters: clusters.as_ref().map(|c| c.clusters.len()),
            cluster_preference: clusters.as_ref().map(|c| c.preference),
            clustering_converged: clusters.as_ref().map(|c| c.converged),
            clustering_iterations: clusters.as_ref().map(|c| c.iterations),
        },
    )?;
    manifest.finish(&p.out.join(MANIFEST_FILE))?;
    Ok(AnalyzeOutput {
        curve,
        cooccurrence: cooc,
        clusters,
    })
}
