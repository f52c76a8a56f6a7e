use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use super::CorpusError;

/// Sparse listener x track play-count matrix with both row (CSR) and
/// column (CSC) access.
///
/// Stored counts are always strictly positive; absent pairs are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionMatrix {
    listener_ids: Vec<String>,
    track_ids: Vec<String>,
    listener_index: HashMap<String, usize>,
    track_index: HashMap<String, usize>,
    row_ptr: Vec<usize>,
    row_cols: Vec<usize>,
    row_counts: Vec<u32>,
    col_ptr: Vec<usize>,
    col_rows: Vec<usize>,
    col_counts: Vec<u32>,
}

/// A line of a triplets file that was skipped because its count was not positive.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RejectedLine {
    pub line: usize,
    pub count: i64,
}

#[derive(Debug, Clone)]
pub struct ParsedTriplets {
    pub matrix: InteractionMatrix,
    pub rejected: Vec<RejectedLine>,
}

impl InteractionMatrix {
    /// Builds the matrix from `(listener, track, count)` triplets. Ids are indexed
    /// in order of first appearance and duplicate pairs are summed.
    ///
    /// Zero counts are dropped.
    pub fn from_triplets<I, L, T>(triplets: I) -> Self
    where
        I: IntoIterator<Item = (L, T, u32)>,
        L: AsRef<str>,
        T: AsRef<str>,
    {
        let mut listener_ids = Vec::new();
        let mut track_ids = Vec::new();
        let mut listener_index: HashMap<String, usize> = HashMap::new();
        let mut track_index: HashMap<String, usize> = HashMap::new();
        let mut cells: HashMap<(usize, usize), u64> = HashMap::new();

        for (l, t, count) in triplets {
            if count == 0 {
                continue;
            }
            let li = intern(l.as_ref(), &mut listener_ids, &mut listener_index);
            let ti = intern(t.as_ref(), &mut track_ids, &mut track_index);
            *cells.entry((li, ti)).or_insert(0) += count as u64;
        }

        let entries: Vec<(usize, usize, u32)> = cells
            .into_iter()
            .map(|((l, t), c)| (l, t, u32::try_from(c).unwrap_or(u32::MAX)))
            .collect();
        Self::from_indexed(listener_ids, track_ids, entries)
    }

    fn from_indexed(
        listener_ids: Vec<String>,
        track_ids: Vec<String>,
        mut entries: Vec<(usize, usize, u32)>,
    ) -> Self {
        let n_rows = listener_ids.len();
        let n_cols = track_ids.len();

        entries.sort_unstable_by_key(|&(l, t, _)| (l, t));
        let mut row_ptr = vec![0usize; n_rows + 1];
        for &(l, _, _) in &entries {
            row_ptr[l + 1] += 1;
        }
        for i in 0..n_rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        let row_cols = entries.iter().map(|e| e.1).collect();
        let row_counts = entries.iter().map(|e| e.2).collect();

        entries.sort_unstable_by_key(|&(l, t, _)| (t, l));
        let mut col_ptr = vec![0usize; n_cols + 1];
        for &(_, t, _) in &entries {
            col_ptr[t + 1] += 1;
        }
        for i in 0..n_cols {
            col_ptr[i + 1] += col_ptr[i];
        }
        let col_rows = entries.iter().map(|e| e.0).collect();
        let col_counts = entries.iter().map(|e| e.2).collect();

        let listener_index = index_of(&listener_ids);
        let track_index = index_of(&track_ids);
        Self {
            listener_ids,
            track_ids,
            listener_index,
            track_index,
            row_ptr,
            row_cols,
            row_counts,
            col_ptr,
            col_rows,
            col_counts,
        }
    }

    pub fn n_listeners(&self) -> usize {
        self.listener_ids.len()
    }

    pub fn n_tracks(&self) -> usize {
        self.track_ids.len()
    }

    /// Number of stored (nonzero) entries.
    pub fn nnz(&self) -> usize {
        self.row_cols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nnz() == 0
    }

    pub fn listener_ids(&self) -> &[String] {
        &self.listener_ids
    }

    pub fn track_ids(&self) -> &[String] {
        &self.track_ids
    }

    pub fn listener_position(&self, id: &str) -> Option<usize> {
        self.listener_index.get(id).copied()
    }

    pub fn track_position(&self, id: &str) -> Option<usize> {
        self.track_index.get(id).copied()
    }

    /// Tracks played by `listener` with their counts, sorted by track index.
    pub fn row(&self, listener: usize) -> impl Iterator<Item = (usize, u32)> + '_ {
        let span = self.row_ptr[listener]..self.row_ptr[listener + 1];
        self.row_cols[span.clone()]
            .iter()
            .copied()
            .zip(self.row_counts[span].iter().copied())
    }

    /// Listeners who played `track` with their counts, sorted by listener index.
    pub fn column(&self, track: usize) -> impl Iterator<Item = (usize, u32)> + '_ {
        let span = self.col_ptr[track]..self.col_ptr[track + 1];
        self.col_rows[span.clone()]
            .iter()
            .copied()
            .zip(self.col_counts[span].iter().copied())
    }

    pub fn get(&self, listener: usize, track: usize) -> u32 {
        let span = self.row_ptr[listener]..self.row_ptr[listener + 1];
        match self.row_cols[span.clone()].binary_search(&track) {
            Ok(pos) => self.row_counts[span.start + pos],
            Err(_) => 0,
        }
    }

    /// All stored entries in row-major order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, u32)> + '_ {
        (0..self.n_listeners()).flat_map(move |l| self.row(l).map(move |(t, c)| (l, t, c)))
    }

    pub fn total_plays(&self) -> u64 {
        self.row_counts.iter().map(|&c| c as u64).sum()
    }

    /// Keeps only the given tracks, dropping listeners left without plays.
    /// Remaining ids keep their relative order.
    pub fn restrict_tracks(&self, keep: &HashSet<&str>) -> Self {
        let track_map: Vec<Option<usize>> = {
            let mut next = 0;
            self.track_ids
                .iter()
                .map(|t| {
                    if keep.contains(t.as_str()) && self.col_ptr_len(self.track_index[t]) > 0 {
                        next += 1;
                        Some(next - 1)
                    } else {
                        None
                    }
                })
                .collect()
        };
        let track_ids: Vec<String> = self
            .track_ids
            .iter()
            .zip(&track_map)
            .filter(|(_, m)| m.is_some())
            .map(|(t, _)| t.clone())
            .collect();

        let mut listener_ids = Vec::new();
        let mut entries = Vec::new();
        for l in 0..self.n_listeners() {
            let kept: Vec<(usize, u32)> = self
                .row(l)
                .filter_map(|(t, c)| track_map[t].map(|nt| (nt, c)))
                .collect();
            if kept.is_empty() {
                continue;
            }
            let nl = listener_ids.len();
            listener_ids.push(self.listener_ids[l].clone());
            entries.extend(kept.into_iter().map(|(t, c)| (nl, t, c)));
        }
        Self::from_indexed(listener_ids, track_ids, entries)
    }

    fn col_ptr_len(&self, t: usize) -> usize {
        self.col_ptr[t + 1] - self.col_ptr[t]
    }

    /// Returns a copy whose listener rows are reordered so that new row `i`
    /// is old row `order[i]`.
    pub fn permute_listeners(&self, order: &[usize]) -> Self {
        assert_eq!(order.len(), self.n_listeners(), "permutation length");
        let mut inverse = vec![0usize; order.len()];
        for (new, &old) in order.iter().enumerate() {
            inverse[old] = new;
        }
        let listener_ids = order.iter().map(|&o| self.listener_ids[o].clone()).collect();
        let entries = self.entries().map(|(l, t, c)| (inverse[l], t, c)).collect();
        Self::from_indexed(listener_ids, self.track_ids.clone(), entries)
    }
}

fn intern(id: &str, ids: &mut Vec<String>, index: &mut HashMap<String, usize>) -> usize {
    if let Some(&i) = index.get(id) {
        return i;
    }
    ids.push(id.to_owned());
    index.insert(id.to_owned(), ids.len() - 1);
    ids.len() - 1
}

fn index_of(ids: &[String]) -> HashMap<String, usize> {
    ids.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect()
}

/// Reads `listener_id<TAB>track_id<TAB>play_count` lines.
///
/// Lines with a nonpositive count are skipped and reported; any other
/// malformed line aborts with its 1-based line number. Blank lines are ignored.
pub fn parse_triplets_reader<R: BufRead>(reader: R) -> Result<ParsedTriplets, CorpusError> {
    let mut triplets: Vec<(String, String, u32)> = Vec::new();
    let mut rejected = Vec::new();

    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| CorpusError::Io {
            path: format!("<line {line_no}>"),
            source: e,
        })?;
        let line = line.trim_end_matches(['\r', '\n']);
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(CorpusError::Parse {
                line: line_no,
                message: format!("expected 3 tab-separated fields, found {}", fields.len()),
            });
        }
        let (listener, track) = (fields[0].trim(), fields[1].trim());
        if listener.is_empty() || track.is_empty() {
            return Err(CorpusError::Parse {
                line: line_no,
                message: "empty listener or track id".into(),
            });
        }
        let count: i64 = fields[2].trim().parse().map_err(|_| CorpusError::Parse {
            line: line_no,
            message: format!("play count {:?} is not an integer", fields[2]),
        })?;
        if count <= 0 {
            log::warn!("triplets line {line_no}: rejected nonpositive play count {count}");
            rejected.push(RejectedLine { line: line_no, count });
            continue;
        }
        let count = u32::try_from(count).map_err(|_| CorpusError::Parse {
            line: line_no,
            message: format!("play count {count} overflows"),
        })?;
        triplets.push((listener.to_owned(), track.to_owned(), count));
    }

    Ok(ParsedTriplets {
        matrix: InteractionMatrix::from_triplets(triplets),
        rejected,
    })
}

pub fn parse_triplets(path: &Path) -> Result<ParsedTriplets, CorpusError> {
    let file = File::open(path).map_err(|e| CorpusError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    parse_triplets_reader(BufReader::new(file))
}
