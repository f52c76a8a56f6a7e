use ndarray::Array2;

use super::AnalyticsError;
use crate::corpus::TagAnnotations;

/// Number of tracks carrying each pair of tags; the diagonal holds tag frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct CooccurrenceMatrix {
    pub tags: Vec<String>,
    pub counts: Array2<u64>,
}

pub fn cooccurrence(annotations: &TagAnnotations) -> Result<CooccurrenceMatrix, AnalyticsError> {
    if annotations.n_tracks() == 0 || annotations.n_tags() == 0 {
        return Err(AnalyticsError::Empty("co-occurrence of an empty annotation set".into()));
    }
    let k = annotations.n_tags();
    let mut counts = Array2::<u64>::zeros((k, k));
    for row in 0..annotations.n_tracks() {
        let tags = annotations.tags_of(row);
        for (i, &a) in tags.iter().enumerate() {
            counts[[a, a]] += 1;
            for &b in &tags[i + 1..] {
                counts[[a, b]] += 1;
                counts[[b, a]] += 1;
            }
        }
    }
    Ok(CooccurrenceMatrix {
        tags: annotations.vocabulary().tags().to_vec(),
        counts,
    })
}

impl CooccurrenceMatrix {
    /// Cosine similarity between count rows; an all-zero row is similar only to itself.
    pub fn cosine_similarity(&self) -> Array2<f64> {
        let k = self.tags.len();
        let rows = self.counts.mapv(|c| c as f64);
        let norms: Vec<f64> = rows.rows().into_iter().map(|r| r.dot(&r).sqrt()).collect();
        let gram = rows.dot(&rows.t());
        Array2::from_shape_fn((k, k), |(i, j)| {
            if i == j {
                1.0
            } else if norms[i] == 0.0 || norms[j] == 0.0 {
                0.0
            } else {
                (gram[[i, j]] / (norms[i] * norms[j])).clamp(-1.0, 1.0)
            }
        })
    }

    pub fn write_csv(&self, path: &std::path::Path) -> Result<(), AnalyticsError> {
        let io = |e: csv::Error| AnalyticsError::Io(format!("{}: {e}", path.display()));
        let mut w = csv::Writer::from_path(path).map_err(io)?;
        let mut header = vec!["tag".to_owned()];
        header.extend(self.tags.iter().cloned());
        w.write_record(&header).map_err(io)?;
        for (tag, row) in self.tags.iter().zip(self.counts.rows()) {
            let mut rec = vec![tag.clone()];
            rec.extend(row.iter().map(|c| c.to_string()));
            w.write_record(&rec).map_err(io)?;
        }
        w.flush().map_err(|e| AnalyticsError::Io(format!("{}: {e}", path.display())))
    }
}
