//! Ranking metrics and cross-model comparisons of tag-wise average precision.

mod compare;
mod io;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use compare::{
    ap_vs_frequency_regression, tagwise_correlation, tagwise_delta, CorrelationMatrix,
    RegressionFit, RegressionPoint, TagDelta,
};
pub use io::{read_report, write_report, ReportSummary, AP_CSV, SUMMARY_JSON};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("no positive labels; average precision is undefined")]
    NoPositives,
    #[error("no tag has a positive label; macro-averaged AP is undefined")]
    NoDefinedTags,
    #[error("non-finite score at position {0}")]
    NonFinite(usize),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("vocabularies differ: {0}")]
    VocabularyMismatch(String),
    #[error("degenerate regression: {0}")]
    Degenerate(String),
    #[error("{path}: {message}")]
    File { path: String, message: String },
}

/// Scores and binary ground truth over the same track x tag grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedPredictions {
    tags: Vec<String>,
    scores: Array2<f64>,
    labels: Array2<bool>,
}

impl RankedPredictions {
    pub fn new(tags: Vec<String>, scores: Array2<f64>, labels: Array2<bool>) -> Result<Self, EvalError> {
        if scores.dim() != labels.dim() {
            return Err(EvalError::Shape(format!(
                "scores {:?} vs labels {:?}",
                scores.dim(),
                labels.dim()
            )));
        }
        if scores.ncols() != tags.len() {
            return Err(EvalError::Shape(format!(
                "{} tag names for {} columns",
                tags.len(),
                scores.ncols()
            )));
        }
        if let Some(pos) = scores.iter().position(|s| !s.is_finite()) {
            return Err(EvalError::NonFinite(pos));
        }
        Ok(Self { tags, scores, labels })
    }

    /// Builds from the 0/1 label layout used for training.
    pub fn from_dense(tags: Vec<String>, scores: Array2<f64>, labels: &Array2<f32>) -> Result<Self, EvalError> {
        Self::new(tags, scores, labels.mapv(|v| v > 0.5))
    }

    pub fn tags(&self) -> &[String] {
        &self.tags
    }

    pub fn scores(&self) -> &Array2<f64> {
        &self.scores
    }

    pub fn labels(&self) -> &Array2<bool> {
        &self.labels
    }
}

/// `sum_n (R_n - R_{n-1}) P_n` over the thresholds at which recall changes.
///
/// Items are visited by descending score. All items sharing a score enter at
/// the same threshold, so the result does not depend on the order of ties.
pub fn average_precision(scores: &[f64], labels: &[bool]) -> Result<f64, EvalError> {
    if scores.len() != labels.len() {
        return Err(EvalError::Shape(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if let Some(pos) = scores.iter().position(|s| !s.is_finite()) {
        return Err(EvalError::NonFinite(pos));
    }
    let total_pos = labels.iter().filter(|&&l| l).count();
    if total_pos == 0 {
        return Err(EvalError::NoPositives);
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_unstable_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut ap = 0.0;
    let (mut tp, mut seen) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        let mut group_tp = 0;
        while i < order.len() && scores[order[i]] == s {
            group_tp += usize::from(labels[order[i]]);
            seen += 1;
            i += 1;
        }
        if group_tp > 0 {
            tp += group_tp;
            ap += (group_tp as f64 / total_pos as f64) * (tp as f64 / seen as f64);
        }
    }
    Ok(ap)
}

/// Tag-wise AP with its macro average over the tags that have positives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApReport {
    pub tags: Vec<String>,
    /// `None` where the tag has no positive example.
    pub per_tag_ap: Vec<Option<f64>>,
    pub positives: Vec<usize>,
    pub macro_ap: f64,
}

impl ApReport {
    pub fn from_parts(
        tags: Vec<String>,
        per_tag_ap: Vec<Option<f64>>,
        positives: Vec<usize>,
    ) -> Result<Self, EvalError> {
        if tags.len() != per_tag_ap.len() || tags.len() != positives.len() {
            return Err(EvalError::Shape("report columns differ in length".into()));
        }
        let defined: Vec<f64> = per_tag_ap.iter().flatten().copied().collect();
        if defined.is_empty() {
            return Err(EvalError::NoDefinedTags);
        }
        let macro_ap = defined.iter().sum::<f64>() / defined.len() as f64;
        Ok(Self {
            tags,
            per_tag_ap,
            positives,
            macro_ap,
        })
    }

    pub fn n_defined(&self) -> usize {
        self.per_tag_ap.iter().flatten().count()
    }

    pub fn undefined_tags(&self) -> Vec<&str> {
        self.tags
            .iter()
            .zip(&self.per_tag_ap)
            .filter(|(_, ap)| ap.is_none())
            .map(|(t, _)| t.as_str())
            .collect()
    }

    pub fn ap_of(&self, tag: &str) -> Option<f64> {
        self.tags
            .iter()
            .position(|t| t == tag)
            .and_then(|i| self.per_tag_ap[i])
    }
}

pub fn macro_ap(preds: &RankedPredictions) -> Result<ApReport, EvalError> {
    let n_tags = preds.tags.len();
    let columns: Vec<(Option<f64>, usize)> = (0..n_tags)
        .into_par_iter()
        .map(|t| {
            let scores: Vec<f64> = preds.scores.column(t).to_vec();
            let labels: Vec<bool> = preds.labels.column(t).to_vec();
            let positives = labels.iter().filter(|&&l| l).count();
            match average_precision(&scores, &labels) {
                Ok(ap) => Ok((Some(ap), positives)),
                Err(EvalError::NoPositives) => Ok((None, 0)),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_, _>>()?;
    let (per_tag_ap, positives) = columns.into_iter().unzip();
    ApReport::from_parts(preds.tags.clone(), per_tag_ap, positives)
}
