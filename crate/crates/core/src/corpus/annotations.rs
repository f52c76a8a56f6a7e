use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::Array2;

use super::CorpusError;

/// Ordered set of mood names. Index and name are a bijection.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TagVocabulary {
    tags: Vec<String>,
    index: HashMap<String, usize>,
}

impl TagVocabulary {
    pub fn new(tags: Vec<String>) -> Result<Self, CorpusError> {
        let mut index = HashMap::with_capacity(tags.len());
        for (i, t) in tags.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(CorpusError::DuplicateTag(t.clone()));
            }
        }
        Ok(Self { tags, index })
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    pub fn tags(&self) -> &[String] {
        &self.tags
    }

    pub fn name(&self, i: usize) -> &str {
        &self.tags[i]
    }

    pub fn position(&self, tag: &str) -> Option<usize> {
        self.index.get(tag).copied()
    }
}

/// Binary track x tag indicator matrix, stored as sorted tag-index lists per track.
#[derive(Debug, Clone, PartialEq)]
pub struct TagAnnotations {
    vocabulary: TagVocabulary,
    track_ids: Vec<String>,
    track_index: HashMap<String, usize>,
    rows: Vec<Vec<usize>>,
}

impl TagAnnotations {
    /// `rows[i]` holds the tag indices of `track_ids[i]`; indices are
    /// deduplicated and sorted.
    pub fn new(
        vocabulary: TagVocabulary,
        track_ids: Vec<String>,
        rows: Vec<Vec<usize>>,
    ) -> Result<Self, CorpusError> {
        if track_ids.len() != rows.len() {
            return Err(CorpusError::Invalid(format!(
                "{} track ids for {} annotation rows",
                track_ids.len(),
                rows.len()
            )));
        }
        let mut track_index = HashMap::with_capacity(track_ids.len());
        for (i, t) in track_ids.iter().enumerate() {
            if track_index.insert(t.clone(), i).is_some() {
                return Err(CorpusError::DuplicateTrack(t.clone()));
            }
        }
        let mut clean = Vec::with_capacity(rows.len());
        for (t, mut row) in track_ids.iter().zip(rows) {
            row.sort_unstable();
            row.dedup();
            if let Some(&bad) = row.iter().find(|&&j| j >= vocabulary.len()) {
                return Err(CorpusError::Invalid(format!(
                    "track {t}: tag index {bad} outside vocabulary of {}",
                    vocabulary.len()
                )));
            }
            clean.push(row);
        }
        Ok(Self {
            vocabulary,
            track_ids,
            track_index,
            rows: clean,
        })
    }

    /// Builds annotations from tag names; the vocabulary is the sorted union of names.
    pub fn from_named<I, S>(tracks: I) -> Result<Self, CorpusError>
    where
        I: IntoIterator<Item = (String, Vec<S>)>,
        S: AsRef<str>,
    {
        let tracks: Vec<(String, Vec<S>)> = tracks.into_iter().collect();
        let names: BTreeSet<&str> = tracks
            .iter()
            .flat_map(|(_, tags)| tags.iter().map(|t| t.as_ref()))
            .collect();
        let vocabulary = TagVocabulary::new(names.into_iter().map(str::to_owned).collect())?;
        let mut ids = Vec::with_capacity(tracks.len());
        let mut rows = Vec::with_capacity(tracks.len());
        for (id, tags) in &tracks {
            ids.push(id.clone());
            rows.push(
                tags.iter()
                    .map(|t| vocabulary.position(t.as_ref()).expect("tag in vocabulary"))
                    .collect(),
            );
        }
        Self::new(vocabulary, ids, rows)
    }

    pub fn vocabulary(&self) -> &TagVocabulary {
        &self.vocabulary
    }

    pub fn n_tracks(&self) -> usize {
        self.track_ids.len()
    }

    pub fn n_tags(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn track_ids(&self) -> &[String] {
        &self.track_ids
    }

    pub fn track_position(&self, id: &str) -> Option<usize> {
        self.track_index.get(id).copied()
    }

    /// Sorted tag indices of the track at `row`.
    pub fn tags_of(&self, row: usize) -> &[usize] {
        &self.rows[row]
    }

    pub fn tags_of_id(&self, id: &str) -> Option<&[usize]> {
        self.track_position(id).map(|r| self.tags_of(r))
    }

    pub fn has(&self, row: usize, tag: usize) -> bool {
        self.rows[row].binary_search(&tag).is_ok()
    }

    /// Dense 0/1 label matrix for the given track rows, in that order.
    pub fn label_matrix(&self, rows: &[usize]) -> Array2<f32> {
        let mut out = Array2::zeros((rows.len(), self.n_tags()));
        for (i, &r) in rows.iter().enumerate() {
            for &t in &self.rows[r] {
                out[[i, t]] = 1.0;
            }
        }
        out
    }

    /// Number of tracks carrying each tag, optionally restricted to a row subset.
    pub fn tag_frequencies(&self, rows: Option<&[usize]>) -> Vec<usize> {
        let mut counts = vec![0usize; self.n_tags()];
        let mut bump = |r: usize| {
            for &t in &self.rows[r] {
                counts[t] += 1;
            }
        };
        match rows {
            Some(rows) => rows.iter().copied().for_each(&mut bump),
            None => (0..self.n_tracks()).for_each(&mut bump),
        }
        counts
    }
}

/// Reads `track_id<TAB>tag1;tag2;...` lines. An empty tag field is an untagged track.
pub fn parse_annotations_reader<R: BufRead>(reader: R) -> Result<TagAnnotations, CorpusError> {
    let mut tracks: Vec<(String, Vec<String>)> = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| CorpusError::Io {
            path: format!("<line {line_no}>"),
            source: e,
        })?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let (id, tags) = match line.split_once('\t') {
            Some((id, tags)) => (id.trim(), tags),
            None => (line.trim(), ""),
        };
        if id.is_empty() {
            return Err(CorpusError::Parse {
                line: line_no,
                message: "empty track id".into(),
            });
        }
        if tags.contains('\t') {
            return Err(CorpusError::Parse {
                line: line_no,
                message: "expected 2 tab-separated fields".into(),
            });
        }
        if seen.insert(id.to_owned(), line_no).is_some() {
            return Err(CorpusError::Parse {
                line: line_no,
                message: format!("track {id} listed twice"),
            });
        }
        let tags = tags
            .split(';')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(str::to_owned)
            .collect();
        tracks.push((id.to_owned(), tags));
    }
    TagAnnotations::from_named(tracks)
}

pub fn parse_annotations(path: &Path) -> Result<TagAnnotations, CorpusError> {
    let file = File::open(path).map_err(|e| CorpusError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    parse_annotations_reader(BufReader::new(file))
}

pub fn write_annotations(annotations: &TagAnnotations, path: &Path) -> Result<(), CorpusError> {
    let io_err = |e| CorpusError::Io {
        path: path.display().to_string(),
        source: e,
    };
    let mut out = BufWriter::new(File::create(path).map_err(io_err)?);
    for (r, id) in annotations.track_ids().iter().enumerate() {
        let names: Vec<&str> = annotations
            .tags_of(r)
            .iter()
            .map(|&t| annotations.vocabulary().name(t))
            .collect();
        writeln!(out, "{id}\t{}", names.join(";")).map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

#[derive(Debug, Clone)]
pub struct UnfoldedTags {
    pub annotations: TagAnnotations,
    /// Tracks that belong to no album; left out of `annotations`.
    pub excluded: Vec<String>,
}

/// Assigns every track the union of the mood sets of all albums it appears on.
///
/// `tracks` is the track universe, in output order. Tracks that are on an
/// album without moods keep an all-zero row.
pub fn unfold_album_tags(
    album_tags: &HashMap<String, BTreeSet<String>>,
    album_tracks: &HashMap<String, BTreeSet<String>>,
    tracks: &[String],
) -> Result<UnfoldedTags, CorpusError> {
    let mut per_track: HashMap<&str, BTreeSet<&str>> = HashMap::new();
    for (album, members) in album_tracks {
        let tags = album_tags.get(album);
        for t in members {
            let set = per_track.entry(t.as_str()).or_default();
            if let Some(tags) = tags {
                set.extend(tags.iter().map(String::as_str));
            }
        }
    }

    let mut kept = Vec::new();
    let mut excluded = Vec::new();
    for t in tracks {
        match per_track.get(t.as_str()) {
            Some(tags) => kept.push((t.clone(), tags.iter().copied().collect::<Vec<&str>>())),
            None => excluded.push(t.clone()),
        }
    }
    if !excluded.is_empty() {
        log::warn!("{} tracks belong to no album and were excluded", excluded.len());
    }

    let names: BTreeSet<&str> = album_tags
        .values()
        .flat_map(|s| s.iter().map(String::as_str))
        .collect();
    let vocabulary = TagVocabulary::new(names.into_iter().map(str::to_owned).collect())?;
    let mut ids = Vec::with_capacity(kept.len());
    let mut rows = Vec::with_capacity(kept.len());
    for (id, tags) in kept {
        rows.push(
            tags.iter()
                .map(|t| vocabulary.position(t).expect("album tag in vocabulary"))
                .collect(),
        );
        ids.push(id);
    }
    Ok(UnfoldedTags {
        annotations: TagAnnotations::new(vocabulary, ids, rows)?,
        excluded,
    })
}
