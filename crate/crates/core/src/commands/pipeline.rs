//! End-to-end run driven by a TOML file with one section per stage.
//!
//! ```toml
//! seed = 7
//! out = "runs/demo"
//!
//! [inputs]            # or a [synthetic] section instead of triplets/annotations
//! triplets = "data/triplets.tsv"
//! annotations = "data/annotations.tsv"
//! splits = "data/splits"            # optional
//! [inputs.extra_embeddings]         # optional: name = embedding file
//! audio = "data/audio.emb"
//!
//! [factorize]
//! rank = 200
//! [train]
//! epochs = 100
//! [analyze]
//! clusters = true
//! ```
//!
//! Any key can be overridden with `section.key=value`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::analyze::{self, AnalyzeParams, DEFAULT_TOP_N};
use super::evaluate::{self, EvaluateParams};
use super::factorize::{self, FactorizeParams};
use super::ingest::{self, IngestParams, DEFAULT_FRACTIONS, SPLITS_DIR};
use super::report::{self, FigureIndex, ReportParams};
use super::synth::{self, SynthParams};
use super::train::{self, TrainHyper, TrainParams};
use crate::corpus::SplitName;
use crate::error::{Error, Result};
use crate::eval::ApReport;
use crate::factorization::{DEFAULT_ALPHA, DEFAULT_ITERATIONS, DEFAULT_RANK};
use crate::manifest::{RunManifest, MANIFEST_FILE};
use crate::synthetic::SyntheticConfig;

pub const LISTENING_MODEL: &str = "listening";
pub const EMBEDDINGS_FILE: &str = "embeddings.tsv";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Inputs {
    pub triplets: Option<PathBuf>,
    pub annotations: Option<PathBuf>,
    pub splits: Option<PathBuf>,
    /// Further embedding files (e.g. audio-based) trained and evaluated like
    /// the listening embeddings, keyed by model name.
    pub extra_embeddings: BTreeMap<String, PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestSection {
    pub fractions: [f64; 3],
}

impl Default for IngestSection {
    fn default() -> Self {
        Self {
            fractions: DEFAULT_FRACTIONS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FactorizeSection {
    pub rank: usize,
    pub alpha: f64,
    pub lambda: Option<f64>,
    pub iterations: usize,
}

impl Default for FactorizeSection {
    fn default() -> Self {
        Self {
            rank: DEFAULT_RANK,
            alpha: DEFAULT_ALPHA,
            lambda: None,
            iterations: DEFAULT_ITERATIONS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyzeSection {
    pub top_n: usize,
    pub clusters: bool,
}

impl Default for AnalyzeSection {
    fn default() -> Self {
        Self {
            top_n: DEFAULT_TOP_N,
            clusters: true,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub inputs: Inputs,
    /// Generate the corpus instead of reading `inputs.triplets`/`annotations`.
    pub synthetic: Option<SyntheticConfig>,
    pub ingest: IngestSection,
    pub factorize: FactorizeSection,
    pub train: TrainHyper,
    pub analyze: AnalyzeSection,
}

fn set_key(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Usage(format!("override {assignment:?} is not key=value")))?;
    let path: Vec<&str> = key.trim().split('.').collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(Error::Usage(format!("override key {key:?} is malformed")));
    }
    let raw = raw.trim();
    // TOML literal if it parses as one, string otherwise
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_owned()));
    let (last, parents) = path.split_last().expect("nonempty");
    let mut node = table;
    for p in parents {
        node = node
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| Error::Usage(format!("override {key:?}: {p:?} is not a section")))?;
    }
    node.insert(last.to_string(), value);
    Ok(())
}

impl PipelineConfig {
    /// Parses `text` and applies `section.key=value` overrides in order.
    pub fn parse(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| Error::Usage(format!("config: {e}")))?;
        for o in overrides {
            set_key(&mut table, o)?;
        }
        table
            .try_into()
            .map_err(|e: toml::de::Error| Error::Usage(format!("config: {}", e.message())))
    }

    /// Reads a config file; relative input paths are taken relative to it.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Usage(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text, overrides).map_err(|e| e.context(path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        let i = &mut cfg.inputs;
        i.triplets.iter_mut().chain(i.annotations.iter_mut()).chain(i.splits.iter_mut()).for_each(rebase);
        i.extra_embeddings.values_mut().for_each(rebase);
        if let Some(out) = cfg.out.as_mut() {
            rebase(out);
        }
        Ok(cfg)
    }

    /// Checks everything that can be checked without touching the data.
    pub fn validate(&self) -> Result<()> {
        let i = &self.inputs;
        match &self.synthetic {
            Some(_) if i.triplets.is_some() || i.annotations.is_some() => Err(Error::Usage(
                "give either [synthetic] or inputs.triplets/inputs.annotations, not both".into(),
            )),
            Some(_) => Ok(()),
            None if i.triplets.is_none() => Err(Error::Usage("config is missing inputs.triplets".into())),
            None if i.annotations.is_none() => Err(Error::Usage("config is missing inputs.annotations".into())),
            None => Ok(()),
        }?;
        if self.out.is_none() {
            return Err(Error::Usage("no output directory: set `out` or pass --out".into()));
        }
        if self.extra_embeddings_names().any(|n| n == LISTENING_MODEL) {
            return Err(Error::Usage(format!("{LISTENING_MODEL:?} is reserved for the listening embeddings")));
        }
        if self.extra_embeddings_names().any(|n| n.is_empty() || n.contains(['/', '\\'])) {
            return Err(Error::Usage("extra embedding names must be plain file names".into()));
        }
        let f = &self.factorize;
        crate::factorization::ConfidenceParams {
            alpha: f.alpha,
            lambda: f.lambda.unwrap_or(0.0),
            rank: f.rank,
            iterations: f.iterations,
        }
        .validate()?;
        self.train.config(1, 1).validate()?;
        if self.analyze.top_n == 0 {
            return Err(Error::Usage("analyze.top_n must be >= 1".into()));
        }
        Ok(())
    }

    fn extra_embeddings_names(&self) -> impl Iterator<Item = &str> {
        self.inputs.extra_embeddings.keys().map(String::as_str)
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub out: PathBuf,
    pub evaluations: Vec<(String, ApReport)>,
    pub figures: FigureIndex,
}

fn stage<T>(name: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    log::info!("── {name}");
    f().map_err(|e| e.context(format!("stage {name} failed")))
}

pub fn run(cfg: &PipelineConfig) -> Result<PipelineOutput> {
    cfg.validate()?;
    let out = cfg.out.clone().expect("validated");
    let seed = cfg.seed;
    let mut manifest = RunManifest::start("pipeline", cfg, Some(seed))?;
    for (role, p) in [("triplets", &cfg.inputs.triplets), ("annotations", &cfg.inputs.annotations), ("splits", &cfg.inputs.splits)] {
        if let Some(p) = p {
            manifest.add_input(role, p)?;
        }
    }
    for (name, p) in &cfg.inputs.extra_embeddings {
        manifest.add_input(&format!("embeddings {name}"), p)?;
    }

    let (triplets, annotations) = match &cfg.synthetic {
        Some(sc) => {
            let s = stage("synth", || {
                synth::run(&SynthParams {
                    config: sc.clone(),
                    seed,
                    out: out.join("synthetic"),
                })
            })?;
            (s.triplets, s.annotations)
        }
        None => (
            cfg.inputs.triplets.clone().expect("validated"),
            cfg.inputs.annotations.clone().expect("validated"),
        ),
    };

    let ingest_dir = out.join("ingest");
    stage("ingest", || {
        ingest::run(&IngestParams {
            triplets: triplets.clone(),
            annotations: annotations.clone(),
            splits: cfg.inputs.splits.clone(),
            fractions: cfg.ingest.fractions,
            seed,
            out: ingest_dir.clone(),
        })
    })?;
    let splits = ingest_dir.join(SPLITS_DIR);

    let listening_emb = out.join("factorize").join(EMBEDDINGS_FILE);
    stage("factorize", || {
        factorize::run(&FactorizeParams {
            triplets: triplets.clone(),
            rank: cfg.factorize.rank,
            alpha: cfg.factorize.alpha,
            lambda: cfg.factorize.lambda,
            iterations: cfg.factorize.iterations,
            seed,
            out: listening_emb.clone(),
        })
    })?;

    let models: Vec<(String, PathBuf)> = std::iter::once((LISTENING_MODEL.to_owned(), listening_emb))
        .chain(cfg.inputs.extra_embeddings.iter().map(|(n, p)| (n.clone(), p.clone())))
        .collect();
    let mut evaluations = Vec::with_capacity(models.len());
    let mut eval_dirs = Vec::with_capacity(models.len());
    for (name, emb) in &models {
        let model = out.join("train").join(format!("{name}.json"));
        stage(&format!("train {name}"), || {
            train::run(&TrainParams {
                embeddings: emb.clone(),
                annotations: annotations.clone(),
                splits: splits.clone(),
                hyper: cfg.train,
                seed,
                out: model.clone(),
            })
        })?;
        let dir = out.join("evaluate").join(name);
        let ev = stage(&format!("evaluate {name}"), || {
            evaluate::run(&EvaluateParams {
                model: model.clone(),
                embeddings: emb.clone(),
                annotations: annotations.clone(),
                splits: splits.clone(),
                split: SplitName::Test,
                out: dir.clone(),
            })
        })?;
        evaluations.push((name.clone(), ev.report));
        eval_dirs.push((name.clone(), dir));
    }

    let analysis_dir = out.join("analyze");
    stage("analyze", || {
        analyze::run(&AnalyzeParams {
            triplets: triplets.clone(),
            annotations: annotations.clone(),
            top_n: cfg.analyze.top_n,
            clusters: cfg.analyze.clusters,
            out: analysis_dir.clone(),
        })
    })?;

    let figures = stage("report", || {
        report::run(&ReportParams {
            evaluations: eval_dirs,
            ingest: Some(ingest_dir),
            analysis: Some(analysis_dir),
            out: out.join("report"),
        })
    })?;
    manifest.finish(&out.join(MANIFEST_FILE))?;
    for (name, r) in &evaluations {
        log::info!("{name}: test macro-AP {:.4}", r.macro_ap);
    }
    Ok(PipelineOutput {
        out,
        evaluations,
        figures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_apply_in_order_and_keep_types() {
        let cfg = PipelineConfig::parse(
            "seed = 3\n[train]\nepochs = 10\n",
            &["train.epochs=4".into(), "train.lr=1e-3".into(), "out=runs/x".into(), "analyze.clusters=false".into()],
        )
        .unwrap();
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.train.epochs, 4);
        assert_eq!(cfg.train.lr, 1e-3);
        assert_eq!(cfg.out, Some(PathBuf::from("runs/x")));
        assert!(!cfg.analyze.clusters);
        assert_eq!(cfg.train.units, TrainHyper::default().units);
    }

    #[test]
    fn unknown_keys_are_usage_errors() {
        for (text, set) in [("[train]\nepoch = 3\n", vec![]), ("", vec!["factorize.rnk=3".to_string()]), ("", vec!["bogus".into()])] {
            let e = PipelineConfig::parse(text, &set).unwrap_err();
            assert_eq!(e.exit_code(), 1, "{e}");
        }
    }

    #[test]
    fn missing_inputs_fail_validation() {
        let no_ann = PipelineConfig::parse("out = \"x\"\n[inputs]\ntriplets = \"t.tsv\"\n", &[]).unwrap();
        let e = no_ann.validate().unwrap_err();
        assert_eq!(e.exit_code(), 1);
        assert!(e.to_string().contains("inputs.annotations"));
        let synth = PipelineConfig::parse("out = \"x\"\n[synthetic]\nn_tracks = 50\n", &[]).unwrap();
        synth.validate().unwrap();
        assert_eq!(synth.synthetic.unwrap().n_tracks, 50);
        let both = PipelineConfig::parse("out = \"x\"\n[synthetic]\n[inputs]\ntriplets = \"t\"\n", &[]).unwrap();
        assert!(both.validate().is_err());
    }

    #[test]
    fn relative_paths_follow_the_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        fs::write(&path, "out = \"o\"\n[inputs]\ntriplets = \"t.tsv\"\nannotations = \"/abs/a.tsv\"\n").unwrap();
        let cfg = PipelineConfig::load(&path, &[]).unwrap();
        assert_eq!(cfg.inputs.triplets, Some(dir.path().join("t.tsv")));
        assert_eq!(cfg.inputs.annotations, Some(PathBuf::from("/abs/a.tsv")));
        assert_eq!(cfg.out, Some(dir.path().join("o")));
    }
}
