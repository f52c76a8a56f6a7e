//! Planted-structure corpora for end-to-end checks.
//!
//! Listeners and tracks get latent vectors; each listener plays tracks drawn
//! in proportion to `exp(scale · u·v)`, and each mood tag is a threshold on
//! one latent coordinate of the track, so listening behaviour carries the
//! information needed to predict the tags.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::corpus::{write_annotations, CorpusError, InteractionMatrix, TagAnnotations};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub n_tracks: usize,
    pub n_listeners: usize,
    pub n_factors: usize,
    pub n_tags: usize,
    pub tracks_per_listener: usize,
    /// Sharpness of listener preferences.
    pub affinity_scale: f64,
    /// A tag is present when its latent coordinate exceeds this (or, for the
    /// second tag wired to the same coordinate, falls below its negative).
    pub tag_threshold: f64,
    /// Mean of the extra plays on top of the first, before affinity weighting.
    pub mean_extra_plays: f64,
    /// Reassign the label rows to random tracks after generation (a control
    /// with no mood signal in the listening data).
    pub shuffle_labels: bool,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n_tracks: 500,
            n_listeners: 200,
            n_factors: 8,
            n_tags: 10,
            tracks_per_listener: 120,
            affinity_scale: 3.0,
            tag_threshold: 0.5,
            mean_extra_plays: 2.0,
            shuffle_labels: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub interactions: InteractionMatrix,
    pub annotations: TagAnnotations,
    pub track_factors: Array2<f64>,
    pub listener_factors: Array2<f64>,
}

pub const TRIPLETS_FILE: &str = "triplets.tsv";
pub const ANNOTATIONS_FILE: &str = "annotations.tsv";

pub fn track_id(i: usize) -> String {
    format!("TRSYN{i:05}")
}

pub fn listener_id(i: usize) -> String {
    format!("user{i:04}")
}

/// Tag `t` reads latent coordinate `t mod n_factors`; the first pass over the
/// coordinates tags the upper tail, the second the lower tail.
pub fn tag_name(t: usize) -> String {
    format!("mood{t:02}")
}

pub fn generate(config: &SyntheticConfig, seed: u64) -> Result<SyntheticCorpus, CorpusError> {
    let c = config;
    if c.n_tracks == 0 || c.n_listeners == 0 || c.n_factors == 0 || c.n_tags == 0 {
        return Err(CorpusError::Invalid("synthetic corpus sizes must be positive".into()));
    }
    if c.tracks_per_listener == 0 || c.tracks_per_listener > c.n_tracks {
        return Err(CorpusError::Invalid(format!(
            "tracks per listener must be in 1..={}",
            c.n_tracks
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut normal_matrix = |rows: usize| -> Array2<f64> {
        Array2::from_shape_simple_fn((rows, c.n_factors), || rng.sample(StandardNormal))
    };
    let listener_factors = normal_matrix(c.n_listeners);
    let track_factors = normal_matrix(c.n_tracks);
    let scale = c.affinity_scale / (c.n_factors as f64).sqrt();
    let extra = (c.mean_extra_plays > 0.0)
        .then(|| Poisson::new(c.mean_extra_plays))
        .transpose()
        .map_err(|e| CorpusError::Invalid(e.to_string()))?;

    let mut triplets = Vec::with_capacity(c.n_listeners * c.tracks_per_listener);
    for l in 0..c.n_listeners {
        let affinity: Vec<f64> = (0..c.n_tracks)
            .map(|t| scale * listener_factors.row(l).dot(&track_factors.row(t)))
            .collect();
        let weights: Vec<f64> = affinity.iter().map(|a| a.exp()).collect();
        let chosen = index::sample_weighted(&mut rng, c.n_tracks, |t| weights[t], c.tracks_per_listener)
            .map_err(|e| CorpusError::Invalid(e.to_string()))?;
        let mut chosen: Vec<usize> = chosen.into_iter().collect();
        chosen.sort_unstable();
        for t in chosen {
            let more = extra.as_ref().map_or(0.0, |p| {
                // stronger affinity → more repeat plays
                let k: f64 = rng.sample(p);
                (k * (1.0 + affinity[t].max(0.0))).round()
            });
            triplets.push((listener_id(l), track_id(t), 1 + more as u32));
        }
    }
    let interactions = InteractionMatrix::from_triplets(triplets);

    let rows = (0..c.n_tracks).map(|t| {
        let tags: Vec<String> = (0..c.n_tags)
            .filter(|&k| {
                let v = track_factors[[t, k % c.n_factors]];
                if (k / c.n_factors).is_multiple_of(2) {
                    v > c.tag_threshold
                } else {
                    v < -c.tag_threshold
                }
            })
            .map(tag_name)
            .collect();
        (track_id(t), tags)
    });
    let mut annotations = TagAnnotations::from_named(rows)?;
    // keep the vocabulary complete even if a tag happens to be empty
    if annotations.n_tags() < c.n_tags {
        let vocab = crate::corpus::TagVocabulary::new((0..c.n_tags).map(tag_name).collect())?;
        let rows = (0..annotations.n_tracks())
            .map(|r| {
                annotations
                    .tags_of(r)
                    .iter()
                    .map(|&t| vocab.position(annotations.vocabulary().name(t)).expect("subset"))
                    .collect()
            })
            .collect();
        annotations = TagAnnotations::new(vocab, annotations.track_ids().to_vec(), rows)?;
    }
    if c.shuffle_labels {
        annotations = shuffle_annotations(&annotations, seed.wrapping_add(1))?;
    }
    Ok(SyntheticCorpus {
        interactions,
        annotations,
        track_factors,
        listener_factors,
    })
}

/// Same label rows, randomly reassigned to tracks: a control that destroys
/// the link between listening behaviour and moods.
pub fn shuffle_annotations(annotations: &TagAnnotations, seed: u64) -> Result<TagAnnotations, CorpusError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..annotations.n_tracks()).collect();
    order.shuffle(&mut rng);
    let rows = order.iter().map(|&r| annotations.tags_of(r).to_vec()).collect();
    TagAnnotations::new(
        annotations.vocabulary().clone(),
        annotations.track_ids().to_vec(),
        rows,
    )
}

impl SyntheticCorpus {
    /// Writes `triplets.tsv` and `annotations.tsv` into `dir`; returns their paths.
    pub fn write(&self, dir: &Path) -> Result<(PathBuf, PathBuf), CorpusError> {
        let io = |path: &Path, source: std::io::Error| CorpusError::Io {
            path: path.display().to_string(),
            source,
        };
        fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
        let triplets = dir.join(TRIPLETS_FILE);
        let mut w = std::io::BufWriter::new(fs::File::create(&triplets).map_err(|e| io(&triplets, e))?);
        let (lids, tids) = (self.interactions.listener_ids(), self.interactions.track_ids());
        for (l, t, c) in self.interactions.entries() {
            writeln!(w, "{}\t{}\t{}", lids[l], tids[t], c).map_err(|e| io(&triplets, e))?;
        }
        w.flush().map_err(|e| io(&triplets, e))?;
        let annotations = dir.join(ANNOTATIONS_FILE);
        write_annotations(&self.annotations, &annotations)?;
        Ok((triplets, annotations))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{parse_annotations, parse_triplets};

    #[test]
    fn default_corpus_shape() {
        let s = generate(&SyntheticConfig::default(), 1).unwrap();
        assert_eq!(s.interactions.n_listeners(), 200);
        assert_eq!(s.interactions.nnz(), 200 * 120);
        assert!(s.interactions.n_tracks() <= 500);
        assert_eq!(s.annotations.n_tracks(), 500);
        assert_eq!(s.annotations.n_tags(), 10);
        for f in s.annotations.tag_frequencies(None) {
            // upper/lower tail beyond 0.5 of a standard normal ≈ 31% of tracks
            assert!((100..220).contains(&f), "{f}");
        }
    }

    #[test]
    fn tags_follow_their_factor() {
        let cfg = SyntheticConfig::default();
        let s = generate(&cfg, 2).unwrap();
        for t in 0..s.annotations.n_tracks() {
            for k in 0..cfg.n_tags {
                let v = s.track_factors[[t, k % cfg.n_factors]];
                let pos = s.annotations.vocabulary().position(&tag_name(k)).unwrap();
                let expected = if k < cfg.n_factors { v > 0.5 } else { v < -0.5 };
                assert_eq!(s.annotations.has(t, pos), expected);
            }
        }
    }

    #[test]
    fn generation_is_seeded() {
        let cfg = SyntheticConfig {
            n_tracks: 50,
            n_listeners: 20,
            tracks_per_listener: 10,
            ..Default::default()
        };
        let a = generate(&cfg, 5).unwrap();
        let b = generate(&cfg, 5).unwrap();
        let c = generate(&cfg, 6).unwrap();
        assert_eq!(a.interactions, b.interactions);
        assert_eq!(a.annotations, b.annotations);
        assert_ne!(a.interactions, c.interactions);
    }

    #[test]
    fn shuffled_labels_keep_the_label_multiset() {
        let s = generate(&SyntheticConfig::default(), 3).unwrap();
        let sh = shuffle_annotations(&s.annotations, 9).unwrap();
        assert_eq!(sh.tag_frequencies(None), s.annotations.tag_frequencies(None));
        assert_ne!(sh, s.annotations);
    }

    #[test]
    fn files_round_trip() {
        let s = generate(
            &SyntheticConfig {
                n_tracks: 40,
                n_listeners: 10,
                tracks_per_listener: 5,
                ..Default::default()
            },
            4,
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let (tp, ap) = s.write(dir.path()).unwrap();
        assert_eq!(parse_triplets(&tp).unwrap().matrix, s.interactions);
        assert_eq!(parse_annotations(&ap).unwrap(), s.annotations);
    }
}
