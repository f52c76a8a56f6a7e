use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ApReport, EvalError};

pub const AP_CSV: &str = "ap.csv";
pub const SUMMARY_JSON: &str = "summary.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub macro_ap: f64,
    pub n_defined_tags: usize,
}

fn file_err(path: &Path, message: impl ToString) -> EvalError {
    EvalError::File {
        path: path.display().to_string(),
        message: message.to_string(),
    }
}

/// Writes `ap.csv` (`tag,ap,positives`; empty `ap` for undefined tags) and
/// `summary.json` into `dir`.
pub fn write_report(report: &ApReport, dir: &Path) -> Result<(), EvalError> {
    fs::create_dir_all(dir).map_err(|e| file_err(dir, e))?;
    let csv_path = dir.join(AP_CSV);
    let mut w = csv::Writer::from_path(&csv_path).map_err(|e| file_err(&csv_path, e))?;
    w.write_record(["tag", "ap", "positives"]).map_err(|e| file_err(&csv_path, e))?;
    for ((tag, ap), pos) in report.tags.iter().zip(&report.per_tag_ap).zip(&report.positives) {
        let ap = ap.map(|v| v.to_string()).unwrap_or_default();
        w.write_record([tag.as_str(), &ap, &pos.to_string()])
            .map_err(|e| file_err(&csv_path, e))?;
    }
    w.flush().map_err(|e| file_err(&csv_path, e))?;

    let summary = ReportSummary {
        macro_ap: report.macro_ap,
        n_defined_tags: report.n_defined(),
    };
    let json_path = dir.join(SUMMARY_JSON);
    let body = serde_json::to_string_pretty(&summary).map_err(|e| file_err(&json_path, e))?;
    fs::write(&json_path, body + "\n").map_err(|e| file_err(&json_path, e))
}

/// Reads a report written by [`write_report`].
pub fn read_report(dir: &Path) -> Result<ApReport, EvalError> {
    let csv_path = dir.join(AP_CSV);
    let mut r = csv::Reader::from_path(&csv_path).map_err(|e| file_err(&csv_path, e))?;
    let (mut tags, mut aps, mut positives) = (Vec::new(), Vec::new(), Vec::new());
    for rec in r.records() {
        let rec = rec.map_err(|e| file_err(&csv_path, e))?;
        if rec.len() != 3 {
            return Err(file_err(&csv_path, "expected columns tag,ap,positives"));
        }
        tags.push(rec[0].to_owned());
        aps.push(if rec[1].is_empty() {
            None
        } else {
            Some(rec[1].parse::<f64>().map_err(|e| file_err(&csv_path, e))?)
        });
        positives.push(rec[2].parse::<usize>().map_err(|e| file_err(&csv_path, e))?);
    }
    ApReport::from_parts(tags, aps, positives)
}
