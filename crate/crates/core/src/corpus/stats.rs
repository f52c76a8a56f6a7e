use serde::Serialize;

use super::{CorpusError, TagAnnotations};

/// Mean, median and population standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub mean: f64,
    pub median: f64,
    pub std: f64,
}

impl Summary {
    pub fn of(values: &[usize]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().map(|&v| v as f64).sum::<f64>() / n;
        let var = values.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / n;
        let mut sorted = values.to_vec();
        sorted.sort_unstable();
        let mid = sorted.len() / 2;
        let median = if sorted.len() % 2 == 1 {
            sorted[mid] as f64
        } else {
            (sorted[mid - 1] + sorted[mid]) as f64 / 2.0
        };
        Self {
            mean,
            median,
            std: var.sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TagCount {
    pub tag: String,
    pub tracks: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusStats {
    pub n_tracks: usize,
    pub n_tags: usize,
    /// Vocabulary order.
    pub tracks_per_tag: Vec<TagCount>,
    /// Annotation row order.
    pub tags_per_track: Vec<usize>,
    pub tracks_per_tag_summary: Summary,
    pub tags_per_track_summary: Summary,
    /// Most frequent first; ties broken by name.
    pub top: Vec<TagCount>,
    /// Least frequent first; ties broken by name.
    pub bottom: Vec<TagCount>,
}

impl CorpusStats {
    /// `(k, number of tracks with exactly k tags)` for k = 0..=max.
    pub fn tags_per_track_histogram(&self) -> Vec<(usize, usize)> {
        let max = self.tags_per_track.iter().copied().max().unwrap_or(0);
        let mut hist = vec![0usize; max + 1];
        for &k in &self.tags_per_track {
            hist[k] += 1;
        }
        hist.into_iter().enumerate().collect()
    }
}

pub fn corpus_stats(annotations: &TagAnnotations, top_k: usize) -> Result<CorpusStats, CorpusError> {
    if annotations.n_tracks() == 0 || annotations.n_tags() == 0 {
        return Err(CorpusError::Invalid("corpus statistics need a nonempty annotation set".into()));
    }
    let freq = annotations.tag_frequencies(None);
    let tracks_per_tag: Vec<TagCount> = annotations
        .vocabulary()
        .tags()
        .iter()
        .zip(&freq)
        .map(|(tag, &tracks)| TagCount {
            tag: tag.clone(),
            tracks,
        })
        .collect();
    let tags_per_track: Vec<usize> = (0..annotations.n_tracks())
        .map(|r| annotations.tags_of(r).len())
        .collect();

    let mut desc = tracks_per_tag.clone();
    desc.sort_by(|a, b| b.tracks.cmp(&a.tracks).then_with(|| a.tag.cmp(&b.tag)));
    let mut asc = tracks_per_tag.clone();
    asc.sort_by(|a, b| a.tracks.cmp(&b.tracks).then_with(|| a.tag.cmp(&b.tag)));
    desc.truncate(top_k);
    asc.truncate(top_k);

    Ok(CorpusStats {
        n_tracks: annotations.n_tracks(),
        n_tags: annotations.n_tags(),
        tracks_per_tag_summary: Summary::of(&freq),
        tags_per_track_summary: Summary::of(&tags_per_track),
        tracks_per_tag,
        tags_per_track,
        top: desc,
        bottom: asc,
    })
}
