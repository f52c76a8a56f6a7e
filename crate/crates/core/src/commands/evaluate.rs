use std::path::PathBuf;

use serde::Serialize;

use super::{load_annotations, load_embeddings, load_splits, split_data, write_csv};
use crate::corpus::{SplitName, TagAnnotations};
use crate::error::Result;
use crate::eval::{macro_ap, write_report, ApReport, RankedPredictions};
use crate::manifest::{RunManifest, MANIFEST_FILE};
use crate::mlp::Classifier;

pub const TAG_FREQUENCIES_CSV: &str = "tag_frequencies.csv";

#[derive(Debug, Clone, Serialize)]
pub struct EvaluateParams {
    pub model: PathBuf,
    pub embeddings: PathBuf,
    pub annotations: PathBuf,
    pub splits: PathBuf,
    pub split: SplitName,
    pub out: PathBuf,
}

/// Per-tag track counts over the union of all splits and over the training split.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TagFrequencies {
    pub tags: Vec<String>,
    pub frequency: Vec<usize>,
    pub train_frequency: Vec<usize>,
}

fn count_tags(ann: &TagAnnotations, tags: &[String], ids: &[&String]) -> Vec<usize> {
    let mut counts = vec![0usize; tags.len()];
    let columns: Vec<Option<usize>> = tags.iter().map(|t| ann.vocabulary().position(t)).collect();
    for id in ids {
        if let Some(row) = ann.track_position(id) {
            for (c, col) in counts.iter_mut().zip(&columns) {
                if col.is_some_and(|k| ann.has(row, k)) {
                    *c += 1;
                }
            }
        }
    }
    counts
}

#[derive(Debug, Clone)]
pub struct EvaluateOutput {
    pub report: ApReport,
    pub frequencies: TagFrequencies,
}

pub fn run(p: &EvaluateParams) -> Result<EvaluateOutput> {
    let mut manifest = RunManifest::start("evaluate", p, None)?;
    manifest.add_input("model", &p.model)?;
    manifest.add_input("embeddings", &p.embeddings)?;
    manifest.add_input("annotations", &p.annotations)?;
    manifest.add_input("splits", &p.splits)?;

    let classifier = Classifier::load(&p.model)?;
    let emb = load_embeddings(&p.embeddings)?;
    let ann = load_annotations(&p.annotations)?;
    let split = load_splits(&p.splits)?;
    let tags = classifier.tags().to_vec();
    let data = split_data(&emb, &ann, &tags, split.get(p.split), p.split)?;
    let scores = classifier.scores(data.x.view())?;
    let report = macro_ap(&RankedPredictions::from_dense(tags.clone(), scores, &data.y)?)?;
    log::info!(
        "{} split: macro-AP {:.4} over {} of {} tags ({} tracks)",
        p.split,
        report.macro_ap,
        report.n_defined(),
        tags.len(),
        data.ids.len()
    );

    let all: Vec<&String> = split.train.iter().chain(&split.val).chain(&split.test).collect();
    let train: Vec<&String> = split.train.iter().collect();
    let frequencies = TagFrequencies {
        frequency: count_tags(&ann, &tags, &all),
        train_frequency: count_tags(&ann, &tags, &train),
        tags,
    };
    write_report(&report, &p.out)?;
    write_csv(
        &p.out.join(TAG_FREQUENCIES_CSV),
        &["tag", "frequency", "train_frequency"],
        frequencies
            .tags
            .iter()
            .zip(frequencies.frequency.iter().zip(&frequencies.train_frequency))
            .map(|(t, (f, g))| [t.clone(), f.to_string(), g.to_string()]),
    )?;
    manifest.finish(&p.out.join(MANIFEST_FILE))?;
    Ok(EvaluateOutput { report, frequencies })
}
