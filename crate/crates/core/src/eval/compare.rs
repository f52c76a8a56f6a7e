use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::{ApReport, EvalError};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TagDelta {
    /// `(tag, AP_a - AP_b)` ascending by delta, ties by tag name.
    pub deltas: Vec<(String, f64)>,
    /// Tags where `b` scored higher, largest gap first.
    pub favor_b: Vec<String>,
    /// Tags where `a` scored higher, largest gap first.
    pub favor_a: Vec<String>,
}

fn check_vocabulary(a: &ApReport, b: &ApReport) -> Result<(), EvalError> {
    if a.tags != b.tags {
        return Err(EvalError::VocabularyMismatch(format!(
            "{} vs {} tags",
            a.tags.len(),
            b.tags.len()
        )));
    }
    Ok(())
}

/// Tag-wise `AP_a - AP_b` over the tags defined in both reports.
pub fn tagwise_delta(a: &ApReport, b: &ApReport) -> Result<TagDelta, EvalError> {
    check_vocabulary(a, b)?;
    let mut deltas: Vec<(String, f64)> = a
        .tags
        .iter()
        .zip(a.per_tag_ap.iter().zip(&b.per_tag_ap))
        .filter_map(|(tag, (x, y))| Some((tag.clone(), (*x)? - (*y)?)))
        .collect();
    deltas.sort_by(|x, y| x.1.total_cmp(&y.1).then_with(|| x.0.cmp(&y.0)));
    let by_gap = |keep: fn(f64) -> bool| {
        let mut v: Vec<&(String, f64)> = deltas.iter().filter(|d| keep(d.1)).collect();
        v.sort_by(|x, y| y.1.abs().total_cmp(&x.1.abs()).then_with(|| x.0.cmp(&y.0)));
        v.into_iter().map(|d| d.0.clone()).collect()
    };
    let favor_b = by_gap(|d| d < 0.0);
    let favor_a = by_gap(|d| d > 0.0);
    Ok(TagDelta {
        deltas,
        favor_b,
        favor_a,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegressionPoint {
    pub tag: String,
    pub frequency: usize,
    pub log10_frequency: f64,
    pub ap: f64,
}

/// Ordinary least squares of AP on `log10(frequency)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegressionFit {
    pub slope: f64,
    pub intercept: f64,
    pub n: usize,
    /// Residual standard error `sqrt(SSE / (n - 2))`.
    pub residual_se: f64,
    pub slope_se: f64,
    pub intercept_se: f64,
    /// Two-sided 97.5% Student-t quantile with `n - 2` degrees of freedom.
    pub t_critical: f64,
    pub mean_x: f64,
    pub sxx: f64,
    pub points: Vec<RegressionPoint>,
}

impl RegressionFit {
    pub fn predict(&self, x: f64) -> f64 {
        self.intercept + self.slope * x
    }

    /// 95% confidence band of the mean response at `x`: `(fit, lower, upper)`.
    pub fn band(&self, x: f64) -> (f64, f64, f64) {
        let fit = self.predict(x);
        let half = self.t_critical
            * self.residual_se
            * (1.0 / self.n as f64 + (x - self.mean_x).powi(2) / self.sxx).sqrt();
        (fit, fit - half, fit + half)
    }
}

/// Fits tag AP against the log10 of its training-set frequency.
///
/// Tags with undefined AP or zero frequency are left out.
pub fn ap_vs_frequency_regression(
    report: &ApReport,
    tag_frequencies: &[usize],
) -> Result<RegressionFit, EvalError> {
    if tag_frequencies.len() != report.tags.len() {
        return Err(EvalError::Shape(format!(
            "{} frequencies for {} tags",
            tag_frequencies.len(),
            report.tags.len()
        )));
    }
    let points: Vec<RegressionPoint> = report
        .tags
        .iter()
        .zip(&report.per_tag_ap)
        .zip(tag_frequencies)
        .filter_map(|((tag, ap), &frequency)| {
            let ap = (*ap)?;
            (frequency > 0).then(|| RegressionPoint {
                tag: tag.clone(),
                frequency,
                log10_frequency: (frequency as f64).log10(),
                ap,
            })
        })
        .collect();
    let n = points.len();
    if n < 3 {
        return Err(EvalError::Degenerate(format!("need at least 3 defined tags, got {n}")));
    }
    let nf = n as f64;
    let mean_x = points.iter().map(|p| p.log10_frequency).sum::<f64>() / nf;
    let mean_y = points.iter().map(|p| p.ap).sum::<f64>() / nf;
    let sxx: f64 = points.iter().map(|p| (p.log10_frequency - mean_x).powi(2)).sum();
    let sxy: f64 = points
        .iter()
        .map(|p| (p.log10_frequency - mean_x) * (p.ap - mean_y))
        .sum();
    if points.iter().all(|p| p.frequency == points[0].frequency) || sxx <= 0.0 {
        return Err(EvalError::Degenerate("all tag frequencies are equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let sse: f64 = points
        .iter()
        .map(|p| (p.ap - intercept - slope * p.log10_frequency).powi(2))
        .sum();
    let dof = nf - 2.0;
    let residual_se = (sse / dof).sqrt();
    let slope_se = residual_se / sxx.sqrt();
    let intercept_se = residual_se * (1.0 / nf + mean_x * mean_x / sxx).sqrt();
    let t_critical = StudentsT::new(0.0, 1.0, dof)
        .map_err(|e| EvalError::Degenerate(e.to_string()))?
        .inverse_cdf(0.975);
    Ok(RegressionFit {
        slope,
        intercept,
        n,
        residual_se,
        slope_se,
        intercept_se,
        t_critical,
        mean_x,
        sxx,
        points,
    })
}

/// Pearson correlation of tag-wise AP between models.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationMatrix {
    pub names: Vec<String>,
    /// `None` where one of the two AP vectors is constant.
    pub values: Vec<Vec<Option<f64>>>,
    /// Number of tags defined in every report.
    pub n_tags: usize,
}

pub fn tagwise_correlation(reports: &[(&str, &ApReport)]) -> Result<CorrelationMatrix, EvalError> {
    if reports.len() < 2 {
        return Err(EvalError::Shape("correlation needs at least two reports".into()));
    }
    for (_, r) in &reports[1..] {
        check_vocabulary(reports[0].1, r)?;
    }
    let n_all = reports[0].1.tags.len();
    let common: Vec<usize> = (0..n_all)
        .filter(|&t| reports.iter().all(|(_, r)| r.per_tag_ap[t].is_some()))
        .collect();
    if common.len() < 2 {
        return Err(EvalError::Degenerate(format!(
            "only {} tags are defined in every report",
            common.len()
        )));
    }

    // centred vectors and their norms
    let centred: Vec<(Vec<f64>, f64)> = reports
        .iter()
        .map(|(_, r)| {
            let v: Vec<f64> = common.iter().map(|&t| r.per_tag_ap[t].unwrap()).collect();
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            let c: Vec<f64> = v.iter().map(|x| x - mean).collect();
            let constant = v.iter().all(|&x| x == v[0]);
            let norm = if constant { 0.0 } else { c.iter().map(|x| x * x).sum::<f64>().sqrt() };
            (c, norm)
        })
        .collect();

    let k = reports.len();
    let mut values = vec![vec![None; k]; k];
    for i in 0..k {
        for j in i..k {
            let (ci, ni) = &centred[i];
            let (cj, nj) = &centred[j];
            let r = if *ni > 0.0 && *nj > 0.0 {
                if i == j {
                    Some(1.0)
                } else {
                    let dot: f64 = ci.iter().zip(cj).map(|(a, b)| a * b).sum();
                    Some((dot / (ni * nj)).clamp(-1.0, 1.0))
                }
            } else {
                None
            };
            values[i][j] = r;
            values[j][i] = r;
        }
    }
    Ok(CorrelationMatrix {
        names: reports.iter().map(|(n, _)| n.to_string()).collect(),
        values,
        n_tags: common.len(),
    })
}
