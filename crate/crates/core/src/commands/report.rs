//! Figure data: one CSV per plot, assembled from the outputs of the other
//! subcommands, plus `index.json` describing every file.
//!
//! | file | columns |
//! |------|---------|
//! | `fig1_tracks_per_tag.csv` | `tag,tracks` (most frequent first) |
//! | `fig2_tags_per_track.csv` | `tags,tracks` |
//! | `fig3_consistency.csv` | `rank,ratio` |
//! | `fig4_macro_ap.csv` | `model,macro_ap,n_defined_tags` |
//! | `fig5_delta_ap.csv` | `tag,delta_ap[,cluster]`, ascending; first model minus second |
//! | `fig6_ap_vs_frequency.csv` | `model,tag,frequency,log10_frequency,ap` |
//! | `fig6_fit.csv` | `model,slope,intercept,n,residual_se,slope_se,intercept_se,t_critical` |
//! | `fig6_band.csv` | `model,log10_frequency,fit,lower,upper` |
//! | `fig7_correlation.csv` | `model,<model…>`; empty cell where undefined |

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::analyze::{CLUSTERS_JSON, CONSISTENCY_CSV};
use super::evaluate::TAG_FREQUENCIES_CSV;
use super::ingest::{TAGS_PER_TRACK_CSV, TRACKS_PER_TAG_CSV};
use super::{create_dir, num, write_csv};
use crate::error::{Error, Result};
use crate::eval::{
    ap_vs_frequency_regression, read_report, tagwise_correlation, tagwise_delta, ApReport, RegressionFit, AP_CSV,
    SUMMARY_JSON,
};
use crate::manifest::{RunManifest, MANIFEST_FILE};

pub const INDEX_JSON: &str = "index.json";
pub const BAND_POINTS: usize = 50;

#[derive(Debug, Clone, Serialize)]
pub struct ReportParams {
    /// `(model name, evaluation directory)` in display order.
    pub evaluations: Vec<(String, PathBuf)>,
    pub ingest: Option<PathBuf>,
    pub analysis: Option<PathBuf>,
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FigureFile {
    pub figure: String,
    pub file: String,
    pub columns: Vec<String>,
    pub rows: usize,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkippedFigure {
    pub figure: String,
    pub reason: String,
}

/// Contents of `index.json`.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct FigureIndex {
    pub figures: Vec<FigureFile>,
    pub skipped: Vec<SkippedFigure>,
}

/// Path of an artifact that must already exist, or a data error naming the
/// subcommand that produces it.
fn artifact(dir: &Path, file: &str, producer: &str) -> Result<PathBuf> {
    let p = dir.join(file);
    if p.is_file() {
        Ok(p)
    } else {
        Err(Error::Data(format!(
            "missing {} (written by `moodstack {producer}`)",
            p.display()
        )))
    }
}

fn read_rows(path: &Path) -> Result<Vec<csv::StringRecord>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    r.records()
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

fn parse_count(path: &Path, v: &str) -> Result<usize> {
    v.parse()
        .map_err(|_| Error::Data(format!("{}: {v:?} is not a count", path.display())))
}

fn pairs_of(path: &Path) -> Result<Vec<(String, usize)>> {
    read_rows(path)?
        .iter()
        .map(|r| {
            if r.len() != 2 {
                return Err(Error::Data(format!("{}: expected two columns", path.display())));
            }
            Ok((r[0].to_owned(), parse_count(path, &r[1])?))
        })
        .collect()
}

struct Writer<'a> {
    out: &'a Path,
    index: FigureIndex,
}

impl Writer<'_> {
    fn write(&mut self, figure: &str, file: &str, description: &str, columns: &[&str], rows: Vec<Vec<String>>) -> Result<()> {
        let n = rows.len();
        write_csv(&self.out.join(file), columns, rows)?;
        self.index.figures.push(FigureFile {
            figure: figure.into(),
            file: file.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: n,
            description: description.into(),
        });
        Ok(())
    }

    fn skip(&mut self, figure: &str, reason: impl Into<String>) {
        let reason = reason.into();
        log::info!("{figure} skipped: {reason}");
        self.index.skipped.push(SkippedFigure {
            figure: figure.into(),
            reason,
        });
    }
}

fn frequencies(dir: &Path, report: &ApReport) -> Result<Vec<usize>> {
    let path = artifact(dir, TAG_FREQUENCIES_CSV, "evaluate")?;
    let rows = read_rows(&path)?;
    let by_tag: BTreeMap<&str, &str> = rows.iter().filter(|r| r.len() >= 2).map(|r| (&r[0], &r[1])).collect();
    report
        .tags
        .iter()
        .map(|t| {
            let v = by_tag
                .get(t.as_str())
                .ok_or_else(|| Error::Data(format!("{}: no frequency for tag {t:?}", path.display())))?;
            parse_count(&path, v)
        })
        .collect()
}

fn band_rows(name: &str, fit: &RegressionFit) -> Vec<Vec<String>> {
    let xs: Vec<f64> = fit.points.iter().map(|p| p.log10_frequency).collect();
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (0..BAND_POINTS)
        .map(|i| {
            let x = lo + (hi - lo) * i as f64 / (BAND_POINTS - 1) as f64;
            let (f, l, u) = fit.band(x);
            vec![name.to_owned(), num(x), num(f), num(l), num(u)]
        })
        .collect()
}

pub fn run(p: &ReportParams) -> Result<FigureIndex> {
    let mut manifest = RunManifest::start("report", p, None)?;
    // check every referenced artifact before writing anything
    if let Some(dir) = &p.ingest {
        for f in [TRACKS_PER_TAG_CSV, TAGS_PER_TRACK_CSV] {
            manifest.add_input("ingest", &artifact(dir, f, "ingest")?)?;
        }
    }
    if let Some(dir) = &p.analysis {
        manifest.add_input("analysis", &artifact(dir, CONSISTENCY_CSV, "analyze")?)?;
    }
    let mut reports = Vec::with_capacity(p.evaluations.len());
    for (name, dir) in &p.evaluations {
        manifest.add_input(&format!("evaluation {name}"), &artifact(dir, AP_CSV, "evaluate")?)?;
        artifact(dir, SUMMARY_JSON, "evaluate")?;
        manifest.add_input(&format!("frequencies {name}"), &artifact(dir, TAG_FREQUENCIES_CSV, "evaluate")?)?;
        reports.push((name.as_str(), read_report(dir)?, dir.as_path()));
    }
    let mut names: Vec<&str> = reports.iter().map(|r| r.0).collect();
    names.sort_unstable();
    if names.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Usage("evaluation names must be unique".into()));
    }

    create_dir(&p.out)?;
    let mut w = Writer {
        out: &p.out,
        index: FigureIndex::default(),
    };

    match &p.ingest {
        Some(dir) => {
            let mut per_tag = pairs_of(&dir.join(TRACKS_PER_TAG_CSV))?;
            per_tag.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
            w.write(
                "fig1",
                "fig1_tracks_per_tag.csv",
                "tracks per mood tag, most frequent first",
                &["tag", "tracks"],
                per_tag.into_iter().map(|(t, n)| vec![t, n.to_string()]).collect(),
            )?;
            let hist = pairs_of(&dir.join(TAGS_PER_TRACK_CSV))?;
            w.write(
                "fig2",
                "fig2_tags_per_track.csv",
                "number of tracks carrying exactly `tags` moods",
                &["tags", "tracks"],
                hist.into_iter().map(|(k, n)| vec![k, n.to_string()]).collect(),
            )?;
        }
        None => {
            w.skip("fig1", "no ingest directory given");
            w.skip("fig2", "no ingest directory given");
        }
    }

    let clusters: Option<BTreeMap<String, Vec<String>>> = match &p.analysis {
        Some(dir) => {
            let path = dir.join(CONSISTENCY_CSV);
            let rows = read_rows(&path)?
                .iter()
                .map(|r| {
                    if r.len() != 2 {
                        return Err(Error::Data(format!("{}: expected rank,ratio", path.display())));
                    }
                    let ratio: f64 = r[1]
                        .parse()
                        .map_err(|_| Error::Data(format!("{}: bad ratio {:?}", path.display(), &r[1])))?;
                    Ok(vec![r[0].to_owned(), num(ratio)])
                })
                .collect::<Result<Vec<_>>>()?;
            w.write(
                "fig3",
                "fig3_consistency.csv",
                "mean share of a listener's plays carrying their n-th most played mood",
                &["rank", "ratio"],
                rows,
            )?;
            let cpath = dir.join(CLUSTERS_JSON);
            if cpath.is_file() {
                manifest.add_input("clusters", &cpath)?;
                let body = fs::read_to_string(&cpath).map_err(|e| Error::Data(format!("{}: {e}", cpath.display())))?;
                Some(serde_json::from_str(&body).map_err(|e| Error::Data(format!("{}: {e}", cpath.display())))?)
            } else {
                None
            }
        }
        None => {
            w.skip("fig3", "no analysis directory given");
            None
        }
    };

    if reports.is_empty() {
        for f in ["fig4", "fig5", "fig6", "fig7"] {
            w.skip(f, "no evaluation given");
        }
    } else {
        w.write(
            "fig4",
            "fig4_macro_ap.csv",
            "test macro-AP per model",
            &["model", "macro_ap", "n_defined_tags"],
            reports
                .iter()
                .map(|(n, r, _)| vec![n.to_string(), num(r.macro_ap), r.n_defined().to_string()])
                .collect(),
        )?;

        if reports.len() >= 2 {
            let (a, b) = (&reports[0], &reports[1]);
            let delta = tagwise_delta(&a.1, &b.1)?;
            let cluster_of: BTreeMap<&str, &str> = clusters
                .iter()
                .flat_map(|c| c.iter())
                .flat_map(|(ex, members)| members.iter().map(move |m| (m.as_str(), ex.as_str())))
                .collect();
            let description = format!("per-tag AP of {} minus {}, ascending", a.0, b.0);
            let rows = delta.deltas.iter().map(|(t, d)| {
                let mut row = vec![t.clone(), num(*d)];
                if clusters.is_some() {
                    row.push(cluster_of.get(t.as_str()).unwrap_or(&"").to_string());
                }
                row
            });
            let columns: &[&str] = if clusters.is_some() {
                &["tag", "delta_ap", "cluster"]
            } else {
                &["tag", "delta_ap"]
            };
            w.write("fig5", "fig5_delta_ap.csv", &description, columns, rows.collect())?;
        } else {
            w.skip("fig5", "needs two evaluations");
        }

        let mut scatter = Vec::new();
        let mut fits = Vec::new();
        let mut bands = Vec::new();
        for (name, report, dir) in &reports {
            let freq = frequencies(dir, report)?;
            for ((tag, ap), f) in report.tags.iter().zip(&report.per_tag_ap).zip(&freq) {
                if let (Some(ap), true) = (ap, *f > 0) {
                    scatter.push(vec![
                        name.to_string(),
                        tag.clone(),
                        f.to_string(),
                        num((*f as f64).log10()),
                        num(*ap),
                    ]);
                }
            }
            match ap_vs_frequency_regression(report, &freq) {
                Ok(fit) => {
                    fits.push(vec![
                        name.to_string(),
                        num(fit.slope),
                        num(fit.intercept),
                        fit.n.to_string(),
                        num(fit.residual_se),
                        num(fit.slope_se),
                        num(fit.intercept_se),
                        num(fit.t_critical),
                    ]);
                    bands.extend(band_rows(name, &fit));
                }
                Err(e) => log::warn!("no frequency fit for {name}: {e}"),
            }
        }
        w.write(
            "fig6",
            "fig6_ap_vs_frequency.csv",
            "per-tag test AP against the tag's track count over all splits",
            &["model", "tag", "frequency", "log10_frequency", "ap"],
            scatter,
        )?;
        if fits.is_empty() {
            w.skip("fig6_fit", "too few tags for a regression");
        } else {
            w.write(
                "fig6_fit",
                "fig6_fit.csv",
                "least-squares line of AP on log10 frequency",
                &["model", "slope", "intercept", "n", "residual_se", "slope_se", "intercept_se", "t_critical"],
                fits,
            )?;
            w.write(
                "fig6_band",
                "fig6_band.csv",
                "95% confidence band of the mean response",
                &["model", "log10_frequency", "fit", "lower", "upper"],
                bands,
            )?;
        }

        if reports.len() >= 2 {
            let pairs: Vec<(&str, &ApReport)> = reports.iter().map(|(n, r, _)| (*n, r)).collect();
            let corr = tagwise_correlation(&pairs)?;
            let mut columns = vec!["model"];
            columns.extend(corr.names.iter().map(String::as_str));
            let rows = corr
                .names
                .iter()
                .zip(&corr.values)
                .map(|(n, vals)| {
                    std::iter::once(n.clone())
                        .chain(vals.iter().map(|v| v.map(num).unwrap_or_default()))
                        .collect()
                })
                .collect();
            w.write(
                "fig7",
                "fig7_correlation.csv",
                "Pearson correlation of per-tag AP between models",
                &columns,
                rows,
            )?;
        } else {
            w.skip("fig7", "needs two evaluations");
        }
    }

    let index = w.index;
    let path = p.out.join(INDEX_JSON);
    let body = serde_json::to_string_pretty(&index).map_err(|e| Error::Runtime(e.to_string()))?;
    fs::write(&path, body + "\n").map_err(|e| Error::io(&path, e))?;
    manifest.finish(&p.out.join(MANIFEST_FILE))?;
    Ok(index)
}
