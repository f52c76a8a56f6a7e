use rayon::prelude::*;
use serde::Serialize;

use super::AnalyticsError;
use crate::corpus::{InteractionMatrix, TagAnnotations};

/// Mean share of a listener's plays that carry their n-th most played mood.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsistencyCurve {
    /// `ratios[n - 1]` is the value at rank `n`.
    pub ratios: Vec<f64>,
    pub n_listeners: usize,
    /// Listeners with no plays on mood-tagged tracks.
    pub dropped_listeners: usize,
}

impl ConsistencyCurve {
    pub fn at_rank(&self, n: usize) -> Option<f64> {
        n.checked_sub(1).and_then(|i| self.ratios.get(i).copied())
    }
}

/// Per-listener fractions for ranks `1..=top_n`, or `None` when none of the
/// listener's plays carry a mood. Only plays of annotated tracks count.
fn listener_fractions(
    interactions: &InteractionMatrix,
    annotations: &TagAnnotations,
    track_rows: &[Option<usize>],
    listener: usize,
    top_n: usize,
) -> Option<Vec<f64>> {
    let mut mood_plays = vec![0u64; annotations.n_tags()];
    let mut total = 0u64;
    for (t, count) in interactions.row(listener) {
        if let Some(row) = track_rows[t] {
            total += count as u64;
            for &tag in annotations.tags_of(row) {
                mood_plays[tag] += count as u64;
            }
        }
    }
    mood_plays.retain(|&c| c > 0);
    if mood_plays.is_empty() {
        return None;
    }
    mood_plays.sort_unstable_by(|a, b| b.cmp(a));
    Some(
        (0..top_n)
            .map(|i| mood_plays.get(i).map_or(0.0, |&c| c as f64 / total as f64))
            .collect(),
    )
}

/// Play-weighted mood consistency curve for ranks `1..=top_n`.
pub fn consistency_ratios(
    interactions: &InteractionMatrix,
    annotations: &TagAnnotations,
    top_n: usize,
) -> Result<ConsistencyCurve, AnalyticsError> {
    if top_n < 1 {
        return Err(AnalyticsError::InvalidParameter("top_n must be at least 1".into()));
    }
    let track_rows: Vec<Option<usize>> = interactions
        .track_ids()
        .iter()
        .map(|id| annotations.track_position(id))
        .collect();
    let per_listener: Vec<Option<Vec<f64>>> = (0..interactions.n_listeners())
        .into_par_iter()
        .map(|l| listener_fractions(interactions, annotations, &track_rows, l, top_n))
        .collect();

    let kept: Vec<&Vec<f64>> = per_listener.iter().flatten().collect();
    let dropped = per_listener.len() - kept.len();
    if kept.is_empty() {
        return Err(AnalyticsError::Empty(
            "no listener has plays on mood-annotated tracks".into(),
        ));
    }
    if dropped > 0 {
        log::info!("{dropped} listeners without mood-tagged plays were left out of the curve");
    }
    let mut sums = vec![0.0; top_n];
    for fractions in &kept {
        for (s, f) in sums.iter_mut().zip(fractions.iter()) {
            *s += f;
        }
    }
    let n = kept.len() as f64;
    Ok(ConsistencyCurve {
        ratios: sums.into_iter().map(|s| s / n).collect(),
        n_listeners: kept.len(),
        dropped_listeners: dropped,
    })
}
