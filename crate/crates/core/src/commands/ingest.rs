use std::collections::HashSet;
use std::fs;
use std::path::PathBuf;

use serde::Serialize;

use super::{load_annotations, load_splits, load_triplets, write_csv};
use crate::corpus::{corpus_stats, make_splits, CorpusStats, DatasetSplit, Summary, TagAnnotations, TagCount};
use crate::error::{Error, Result};
use crate::manifest::{RunManifest, MANIFEST_FILE};

pub const SPLITS_DIR: &str = "splits";
pub const STATS_JSON: &str = "stats.json";
pub const TRACKS_PER_TAG_CSV: &str = "tracks_per_tag.csv";
pub const TAGS_PER_TRACK_CSV: &str = "tags_per_track.csv";

pub const DEFAULT_FRACTIONS: [f64; 3] = [0.8, 0.1, 0.1];

#[derive(Debug, Clone, Serialize)]
pub struct IngestParams {
    pub triplets: PathBuf,
    pub annotations: PathBuf,
    /// Published split files; when absent, a seeded random split is drawn.
    pub splits: Option<PathBuf>,
    pub fractions: [f64; 3],
    pub seed: u64,
    pub out: PathBuf,
}

#[derive(Debug, Clone, Serialize)]
pub struct ListeningSummary {
    pub n_listeners: usize,
    pub n_tracks: usize,
    pub n_pairs: usize,
    pub total_plays: u64,
}

/// Contents of `stats.json`.
#[derive(Debug, Clone, Serialize)]
pub struct IngestStats {
    pub listening: ListeningSummary,
    pub annotated_tracks: usize,
    /// Annotated tracks that also appear in the listening data.
    pub universe_tracks: usize,
    pub split_sizes: [usize; 3],
    pub n_tags: usize,
    pub tracks_per_tag: Summary,
    pub tags_per_track: Summary,
    pub most_frequent: Vec<TagCount>,
    pub least_frequent: Vec<TagCount>,
}

#[derive(Debug, Clone)]
pub struct IngestOutput {
    pub split: DatasetSplit,
    pub universe: TagAnnotations,
    pub corpus: CorpusStats,
    pub stats: IngestStats,
}

/// Annotation rows whose track occurs in `listened`, in annotation order.
pub fn restrict_annotations(ann: &TagAnnotations, listened: &HashSet<&str>) -> Result<TagAnnotations> {
    let (ids, rows): (Vec<String>, Vec<Vec<usize>>) = ann
        .track_ids()
        .iter()
        .enumerate()
        .filter(|(_, id)| listened.contains(id.as_str()))
        .map(|(r, id)| (id.clone(), ann.tags_of(r).to_vec()))
        .unzip();
    Ok(TagAnnotations::new(ann.vocabulary().clone(), ids, rows)?)
}

pub fn run(p: &IngestParams) -> Result<IngestOutput> {
    let mut manifest = RunManifest::start("ingest", p, Some(p.seed))?;
    manifest.add_input("triplets", &p.triplets)?;
    manifest.add_input("annotations", &p.annotations)?;
    if let Some(dir) = &p.splits {
        manifest.add_input("splits", dir)?;
    }

    let listening = load_triplets(&p.triplets)?;
    let annotations = load_annotations(&p.annotations)?;
    let listened: HashSet<&str> = listening.track_ids().iter().map(String::as_str).collect();
    let universe = restrict_annotations(&annotations, &listened)?;
    if universe.n_tracks() == 0 {
        return Err(Error::Data("no annotated track appears in the listening data".into()));
    }
    log::info!(
        "{} of {} annotated tracks have listening data",
        universe.n_tracks(),
        annotations.n_tracks()
    );

    let split = match &p.splits {
        Some(dir) => {
            let split = load_splits(dir)?;
            let outside = [&split.train, &split.val, &split.test]
                .iter()
                .flat_map(|ids| ids.iter())
                .filter(|id| universe.track_position(id).is_none())
                .count();
            if outside > 0 {
                log::warn!("{outside} split tracks are not annotated tracks with listening data");
            }
            split
        }
        None => {
            let [a, b, c] = p.fractions;
            make_splits(universe.track_ids(), (a, b, c), p.seed)?
        }
    };
    let (n_train, n_val, n_test) = split.sizes();
    log::info!("splits: {n_train} train / {n_val} val / {n_test} test");

    let corpus = corpus_stats(&universe, 10)?;
    let stats = IngestStats {
        listening: ListeningSummary {
            n_listeners: listening.n_listeners(),
            n_tracks: listening.n_tracks(),
            n_pairs: listening.nnz(),
            total_plays: listening.total_plays(),
        },
        annotated_tracks: annotations.n_tracks(),
        universe_tracks: universe.n_tracks(),
        split_sizes: [n_train, n_val, n_test],
        n_tags: corpus.n_tags,
        tracks_per_tag: corpus.tracks_per_tag_summary,
        tags_per_track: corpus.tags_per_track_summary,
        most_frequent: corpus.top.clone(),
        least_frequent: corpus.bottom.clone(),
    };

    split.write_dir(&p.out.join(SPLITS_DIR))?;
    let stats_path = p.out.join(STATS_JSON);
    let body = serde_json::to_string_pretty(&stats).map_err(|e| Error::Runtime(e.to_string()))?;
    fs::write(&stats_path, body + "\n").map_err(|e| Error::io(&stats_path, e))?;
    write_csv(
        &p.out.join(TRACKS_PER_TAG_CSV),
        &["tag", "tracks"],
        corpus.tracks_per_tag.iter().map(|c| [c.tag.clone(), c.tracks.to_string()]),
    )?;
    write_csv(
        &p.out.join(TAGS_PER_TRACK_CSV),
        &["tags", "tracks"],
        corpus.tags_per_track_histogram().into_iter().map(|(k, n)| [k.to_string(), n.to_string()]),
    )?;
    manifest.finish(&p.out.join(MANIFEST_FILE))?;
    Ok(IngestOutput {
        split,
        universe,
        corpus,
        stats,
    })
}
