//! Argument parsing and dispatch for the `moodstack` binary.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::commands::analyze::{AnalyzeParams, DEFAULT_TOP_N};
use crate::commands::evaluate::EvaluateParams;
use crate::commands::factorize::FactorizeParams;
use crate::commands::hpo::{HpoParams, DEFAULT_TRIALS};
use crate::commands::ingest::{IngestParams, DEFAULT_FRACTIONS};
use crate::commands::pipeline::PipelineConfig;
use crate::commands::report::ReportParams;
use crate::commands::synth::SynthParams;
use crate::commands::train::{TrainHyper, TrainParams};
use crate::commands::{analyze, evaluate, factorize, hpo, ingest, pipeline, report, synth, train};
use crate::corpus::SplitName;
use crate::error::{Error, Result};
use crate::factorization::{DEFAULT_ALPHA, DEFAULT_ITERATIONS, DEFAULT_RANK};
use crate::hpo::{Budget, SearchSpace, DEFAULT_TRIAL_EPOCHS};
use crate::mlp::{DEFAULT_BATCH_SIZE, DEFAULT_EPOCHS, DEFAULT_WARMUP_EPOCHS};
use crate::synthetic::SyntheticConfig;

#[derive(Debug, Parser)]
#[command(name = "moodstack", version, about = "Mood tagging from listening data: embeddings, classifiers, evaluation and figure data")]
pub struct Cli {
    /// Master random seed.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output file or directory, depending on the subcommand.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse listening data and annotations, draw or load splits, write corpus statistics.
    Ingest(IngestArgs),
    /// Fit implicit-feedback matrix factorization and write track embeddings.
    Factorize(FactorizeArgs),
    /// Train a mood classifier on track embeddings.
    Train(TrainArgs),
    /// Score a split with a trained classifier and write per-tag AP.
    Evaluate(EvaluateArgs),
    /// Mood consistency curve, tag co-occurrence and tag clusters.
    Analyze(AnalyzeArgs),
    /// Random search over classifier hyper-parameters.
    Hpo(HpoArgs),
    /// Assemble figure CSVs from evaluation, ingest and analysis outputs.
    Report(ReportArgs),
    /// Run every stage from one config file.
    Pipeline(PipelineArgs),
    /// Write a synthetic corpus with planted mood structure.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub triplets: PathBuf,
    #[arg(long)]
    pub annotations: PathBuf,
    /// Directory with train.txt, val.txt and test.txt; otherwise splits are drawn from --seed.
    #[arg(long)]
    pub splits: Option<PathBuf>,
    /// Train, validation and test fractions for drawn splits.
    #[arg(long, num_args = 3, value_names = ["TRAIN", "VAL", "TEST"], default_values_t = DEFAULT_FRACTIONS)]
    pub fractions: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct FactorizeArgs {
    #[arg(long)]
    pub triplets: PathBuf,
    #[arg(long, default_value_t = DEFAULT_RANK)]
    pub rank: usize,
    /// Confidence slope: c = 1 + alpha * plays.
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    pub alpha: f64,
    /// Regularization (default: 1% of the mean observed confidence).
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Full alternating sweeps.
    #[arg(long, default_value_t = DEFAULT_ITERATIONS)]
    pub iters: usize,
}

#[derive(Debug, Args)]
pub struct HyperArgs {
    /// Hidden layers.
    #[arg(long, default_value_t = TrainHyper::default().layers)]
    pub layers: usize,
    /// Units per hidden layer.
    #[arg(long, default_value_t = TrainHyper::default().units)]
    pub units: usize,
    #[arg(long, default_value_t = TrainHyper::default().lr)]
    pub lr: f64,
    #[arg(long, default_value_t = TrainHyper::default().dropout)]
    pub dropout: f64,
    /// Decoupled weight decay.
    #[arg(long, default_value_t = TrainHyper::default().wd)]
    pub wd: f64,
    #[arg(long, default_value_t = DEFAULT_EPOCHS)]
    pub epochs: usize,
    #[arg(long, default_value_t = DEFAULT_WARMUP_EPOCHS)]
    pub warmup_epochs: usize,
    #[arg(long, default_value_t = DEFAULT_BATCH_SIZE)]
    pub batch_size: usize,
}

impl HyperArgs {
    fn hyper(&self) -> TrainHyper {
        TrainHyper {
            layers: self.layers,
            units: self.units,
            lr: self.lr,
            dropout: self.dropout,
            wd: self.wd,
            epochs: self.epochs,
            warmup_epochs: self.warmup_epochs,
            batch_size: self.batch_size,
        }
    }
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Embedding file (`E=<dim>` header, then `track_id<TAB>values…`).
    #[arg(long)]
    pub embeddings: PathBuf,
    #[arg(long)]
    pub annotations: PathBuf,
    /// Directory with train.txt, val.txt and test.txt.
    #[arg(long)]
    pub splits: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub hyper: HyperArgs,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value = "test")]
    pub split: SplitName,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub triplets: PathBuf,
    #[arg(long)]
    pub annotations: PathBuf,
    /// Ranks of the consistency curve.
    #[arg(long, default_value_t = DEFAULT_TOP_N)]
    pub top_n: usize,
    /// Also cluster tags by co-occurrence.
    #[arg(long)]
    pub clusters: bool,
}

#[derive(Debug, Args)]
pub struct HpoArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Total trials, counting any already in the log.
    #[arg(long)]
    pub trials: Option<usize>,
    /// Stop starting new trials after this many seconds.
    #[arg(long)]
    pub budget_seconds: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_TRIAL_EPOCHS)]
    pub trial_epochs: usize,
    #[arg(long, default_value_t = DEFAULT_WARMUP_EPOCHS)]
    pub warmup_epochs: usize,
    #[arg(long, default_value_t = DEFAULT_BATCH_SIZE)]
    pub batch_size: usize,
    /// Retrain the best configuration and save the model here.
    #[arg(long)]
    pub final_model: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_EPOCHS)]
    pub final_epochs: usize,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Evaluation output directory as NAME=DIR; repeat for several models.
    #[arg(long = "evaluation", value_parser = parse_named)]
    pub evaluations: Vec<(String, PathBuf)>,
    /// Output directory of `ingest`.
    #[arg(long)]
    pub ingest: Option<PathBuf>,
    /// Output directory of `analyze`.
    #[arg(long)]
    pub analysis: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    /// TOML config with one section per stage.
    #[arg(long)]
    pub config: PathBuf,
    /// Override a config value, e.g. `--set train.epochs=20`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = SyntheticConfig::default().n_tracks)]
    pub tracks: usize,
    #[arg(long, default_value_t = SyntheticConfig::default().n_listeners)]
    pub listeners: usize,
    #[arg(long, default_value_t = SyntheticConfig::default().n_factors)]
    pub factors: usize,
    #[arg(long, default_value_t = SyntheticConfig::default().n_tags)]
    pub tags: usize,
    #[arg(long, default_value_t = SyntheticConfig::default().tracks_per_listener)]
    pub tracks_per_listener: usize,
    /// Randomly reassign label rows (a control without mood signal).
    #[arg(long)]
    pub shuffle_labels: bool,
}

fn parse_named(s: &str) -> std::result::Result<(String, PathBuf), String> {
    match s.split_once('=') {
        Some((n, p)) if !n.is_empty() && !p.is_empty() => Ok((n.to_owned(), PathBuf::from(p))),
        _ => Err(format!("expected NAME=DIR, got {s:?}")),
    }
}

fn require_out(out: &Option<PathBuf>) -> Result<PathBuf> {
    out.clone().ok_or_else(|| Error::Usage("--out is required".into()))
}

/// Executes parsed arguments.
pub fn execute(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::Usage("--threads must be >= 1".into()));
        }
        // fails only if a pool already exists, e.g. when called twice in-process
        if rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_err() {
            log::debug!("thread pool already initialized");
        }
    }
    let seed = cli.seed;
    match &cli.command {
        Command::Ingest(a) => {
            let [f0, f1, f2] = a.fractions[..] else {
                return Err(Error::Usage("--fractions takes three values".into()));
            };
            ingest::run(&IngestParams {
                triplets: a.triplets.clone(),
                annotations: a.annotations.clone(),
                splits: a.splits.clone(),
                fractions: [f0, f1, f2],
                seed,
                out: require_out(&cli.out)?,
            })?;
        }
        Command::Factorize(a) => {
            factorize::run(&FactorizeParams {
                triplets: a.triplets.clone(),
                rank: a.rank,
                alpha: a.alpha,
                lambda: a.lambda,
                iterations: a.iters,
                seed,
                out: require_out(&cli.out)?,
            })?;
        }
        Command::Train(a) => {
            train::run(&TrainParams {
                embeddings: a.data.embeddings.clone(),
                annotations: a.data.annotations.clone(),
                splits: a.data.splits.clone(),
                hyper: a.hyper.hyper(),
                seed,
                out: require_out(&cli.out)?,
            })?;
        }
        Command::Evaluate(a) => {
            let out = evaluate::run(&EvaluateParams {
                model: a.model.clone(),
                embeddings: a.data.embeddings.clone(),
                annotations: a.data.annotations.clone(),
                splits: a.data.splits.clone(),
                split: a.split,
                out: require_out(&cli.out)?,
            })?;
            println!("macro_ap\t{}", out.report.macro_ap);
        }
        Command::Analyze(a) => {
            analyze::run(&AnalyzeParams {
                triplets: a.triplets.clone(),
                annotations: a.annotations.clone(),
                top_n: a.top_n,
                clusters: a.clusters,
                out: require_out(&cli.out)?,
            })?;
        }
        Command::Hpo(a) => {
            let trials = match (a.trials, a.budget_seconds) {
                (None, None) => Some(DEFAULT_TRIALS),
                (t, _) => t,
            };
            let out = hpo::run(&HpoParams {
                embeddings: a.data.embeddings.clone(),
                annotations: a.data.annotations.clone(),
                splits: a.data.splits.clone(),
                space: SearchSpace::default_space(),
                budget: Budget {
                    max_trials: trials,
                    max_seconds: a.budget_seconds,
                },
                trial: TrainHyper {
                    epochs: a.trial_epochs,
                    warmup_epochs: a.warmup_epochs,
                    batch_size: a.batch_size,
                    ..TrainHyper::default()
                },
                seed,
                out: require_out(&cli.out)?,
                final_model: a.final_model.clone(),
                final_epochs: a.final_epochs,
            })?;
            println!("best_trial\t{}", out.search.best.trial);
            println!("val_macro_ap\t{}", out.search.best.val_macro_ap.unwrap_or(f64::NAN));
        }
        Command::Report(a) => {
            report::run(&ReportParams {
                evaluations: a.evaluations.clone(),
                ingest: a.ingest.clone(),
                analysis: a.analysis.clone(),
                out: require_out(&cli.out)?,
            })?;
        }
        Command::Pipeline(a) => {
            let mut overrides = a.overrides.clone();
            if seed != 0 {
                overrides.push(format!("seed={seed}"));
            }
            let mut cfg = PipelineConfig::load(&a.config, &overrides)?;
            if cli.out.is_some() {
                cfg.out = cli.out.clone();
            }
            let out = pipeline::run(&cfg)?;
            for (name, r) in &out.evaluations {
                println!("{name}\tmacro_ap\t{}", r.macro_ap);
            }
        }
        Command::Synth(a) => {
            synth::run(&SynthParams {
                config: SyntheticConfig {
                    n_tracks: a.tracks,
                    n_listeners: a.listeners,
                    n_factors: a.factors,
                    n_tags: a.tags,
                    tracks_per_listener: a.tracks_per_listener,
                    shuffle_labels: a.shuffle_labels,
                    ..SyntheticConfig::default()
                },
                seed,
                out: require_out(&cli.out)?,
            })?;
        }
    }
    Ok(())
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            log::error!("{e}");
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
