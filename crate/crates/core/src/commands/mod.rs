//! One function per subcommand. Each takes fully resolved parameters, writes
//! its outputs plus a [`RunManifest`](crate::manifest::RunManifest), and
//! returns a summary of what it produced.

pub mod analyze;
pub mod evaluate;
pub mod factorize;
pub mod hpo;
pub mod ingest;
pub mod pipeline;
pub mod report;
pub mod synth;
pub mod train;

use std::fs;
use std::path::Path;

use ndarray::Array2;

use crate::corpus::{parse_annotations, parse_triplets, DatasetSplit, InteractionMatrix, SplitName, TagAnnotations};
use crate::embeddings::Embeddings;
use crate::error::{Error, Result};

pub(crate) fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub(crate) fn create_parent(file: &Path) -> Result<()> {
    match file.parent().filter(|p| !p.as_os_str().is_empty()) {
        Some(p) => create_dir(p),
        None => Ok(()),
    }
}

/// Writes a CSV file from a header and string rows.
pub(crate) fn write_csv<I, R>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator,
    R::Item: AsRef<[u8]>,
{
    create_parent(path)?;
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::io(path, e))?;
    w.write_record(header).map_err(|e| Error::io(path, e))?;
    for row in rows {
        w.write_record(row).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub(crate) fn load_triplets(path: &Path) -> Result<InteractionMatrix> {
    let parsed = parse_triplets(path).map_err(|e| Error::from(e).context("triplets"))?;
    if !parsed.rejected.is_empty() {
        log::warn!(
            "{}: skipped {} lines with non-positive play counts",
            path.display(),
            parsed.rejected.len()
        );
    }
    if parsed.matrix.is_empty() {
        return Err(Error::Data(format!("{}: no usable triplets", path.display())));
    }
    log::info!(
        "{} listeners, {} tracks, {} listener-track pairs",
        parsed.matrix.n_listeners(),
        parsed.matrix.n_tracks(),
        parsed.matrix.nnz()
    );
    Ok(parsed.matrix)
}

pub(crate) fn load_annotations(path: &Path) -> Result<TagAnnotations> {
    let ann = parse_annotations(path).map_err(|e| Error::from(e).context("annotations"))?;
    if ann.n_tracks() == 0 || ann.n_tags() == 0 {
        return Err(Error::Data(format!("{}: no annotated tracks", path.display())));
    }
    Ok(ann)
}

pub(crate) fn load_embeddings(path: &Path) -> Result<Embeddings> {
    Embeddings::read(path).map_err(|e| Error::from(e).context("embeddings"))
}

pub(crate) fn load_splits(dir: &Path) -> Result<DatasetSplit> {
    DatasetSplit::load_dir(dir).map_err(|e| Error::from(e).context("splits"))
}

/// Features and labels of one split, restricted to tracks present in both the
/// embeddings and the annotations.
#[derive(Debug, Clone)]
pub struct SplitData {
    pub ids: Vec<String>,
    pub x: Array2<f64>,
    pub y: Array2<f32>,
}

/// Gathers `ids` against `embeddings` and `annotations`, labelling columns in
/// the order of `tags`.
pub fn split_data(
    embeddings: &Embeddings,
    annotations: &TagAnnotations,
    tags: &[String],
    ids: &[String],
    name: SplitName,
) -> Result<SplitData> {
    let columns: Vec<usize> = tags
        .iter()
        .map(|t| {
            annotations
                .vocabulary()
                .position(t)
                .ok_or_else(|| Error::Data(format!("tag {t:?} is missing from the annotations")))
        })
        .collect::<Result<_>>()?;
    let mut kept = Vec::with_capacity(ids.len());
    let (mut emb_rows, mut ann_rows) = (Vec::new(), Vec::new());
    for id in ids {
        if let (Some(e), Some(a)) = (embeddings.position(id), annotations.track_position(id)) {
            kept.push(id.clone());
            emb_rows.push(e);
            ann_rows.push(a);
        }
    }
    let dropped = ids.len() - kept.len();
    if dropped > 0 {
        log::warn!("{name} split: {dropped} of {} tracks lack an embedding or annotation", ids.len());
    }
    if kept.is_empty() {
        return Err(Error::Data(format!("{name} split has no track with both an embedding and annotations")));
    }
    let x = embeddings.gather(&emb_rows);
    let y = Array2::from_shape_fn((kept.len(), tags.len()), |(i, j)| {
        if annotations.has(ann_rows[i], columns[j]) {
            1.0
        } else {
            0.0
        }
    });
    Ok(SplitData { ids: kept, x, y })
}

/// Formats a float in shortest round-trip form.
pub(crate) fn num(v: f64) -> String {
    v.to_string()
}
