//! Seeded random search over classifier hyper-parameters.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::time::Instant;

use ndarray::ArrayView2;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::mlp::{Classifier, MlpConfig, MlpError};

pub const DEFAULT_TRIAL_EPOCHS: usize = 30;

#[derive(Debug, thiserror::Error)]
pub enum HpoError {
    #[error("invalid search space: {0}")]
    InvalidSpace(String),
    #[error("invalid budget: {0}")]
    Budget(String),
    #[error("trial log {path}: {message}")]
    Log { path: String, message: String },
    #[error("no trial completed")]
    NoTrials,
    #[error(transparent)]
    Training(#[from] MlpError),
}

/// Domains of the searched hyper-parameters. Integer and learning-rate
/// ranges are inclusive; weight decay is `min + k·step` for integer `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub layers: (usize, usize),
    pub units: (usize, usize),
    pub learning_rate: (f64, f64),
    pub dropout: Vec<f64>,
    pub weight_decay: (f64, f64, f64),
}

impl SearchSpace {
    /// Search ranges for full-size classifiers.
    pub fn default_space() -> Self {
        Self {
            layers: (2, 4),
            units: (1500, 4000),
            learning_rate: (1e-4, 5e-3),
            dropout: vec![0.0, 0.125, 0.25, 0.375, 0.5],
            weight_decay: (0.0, 1e-4, 1e-6),
        }
    }

    /// A space containing exactly the hyper-parameters of `config`.
    pub fn point(config: &MlpConfig) -> Self {
        Self {
            layers: (config.n_layers, config.n_layers),
            units: (config.n_units, config.n_units),
            learning_rate: (config.learning_rate, config.learning_rate),
            dropout: vec![config.dropout],
            weight_decay: (config.weight_decay, config.weight_decay, 0.0),
        }
    }

    pub fn validate(&self) -> Result<(), HpoError> {
        let bad = |m: String| Err(HpoError::InvalidSpace(m));
        if self.layers.0 > self.layers.1 || self.units.0 > self.units.1 {
            return bad("integer ranges must satisfy min <= max".into());
        }
        if self.units.0 == 0 && self.layers.1 > 0 {
            return bad("hidden layers need at least one unit".into());
        }
        let (lo, hi) = self.learning_rate;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return bad(format!("learning-rate range ({lo}, {hi}) must be positive and ordered"));
        }
        if self.dropout.is_empty() || self.dropout.iter().any(|d| !(0.0..1.0).contains(d)) {
            return bad("dropout choices must be nonempty and in [0, 1)".into());
        }
        let (wmin, wmax, step) = self.weight_decay;
        if !(wmin >= 0.0 && wmin <= wmax && step >= 0.0 && wmax.is_finite()) {
            return bad(format!("weight-decay grid ({wmin}, {wmax}, {step}) is invalid"));
        }
        if wmax > wmin && step == 0.0 {
            return bad("a weight-decay range needs a positive step".into());
        }
        Ok(())
    }

    fn weight_decay_steps(&self) -> u64 {
        let (wmin, wmax, step) = self.weight_decay;
        if step == 0.0 {
            0
        } else {
            ((wmax - wmin) / step + 1e-9).floor() as u64
        }
    }

    pub fn contains(&self, c: &MlpConfig) -> bool {
        let (wmin, wmax, step) = self.weight_decay;
        let wd_ok = if step == 0.0 {
            c.weight_decay == wmin
        } else {
            let k = (c.weight_decay - wmin) / step;
            c.weight_decay >= wmin && c.weight_decay <= wmax * (1.0 + 1e-12) && (k - k.round()).abs() < 1e-6
        };
        (self.layers.0..=self.layers.1).contains(&c.n_layers)
            && (self.units.0..=self.units.1).contains(&c.n_units)
            && c.learning_rate >= self.learning_rate.0
            && c.learning_rate <= self.learning_rate.1
            && self.dropout.contains(&c.dropout)
            && wd_ok
    }
}

/// Draws the searched fields uniformly (log-uniformly for the learning
/// rate); everything else is copied from `base`.
pub fn sample_config(space: &SearchSpace, base: &MlpConfig, seed: u64) -> Result<MlpConfig, HpoError> {
    space.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = space.learning_rate;
    let n_layers = rng.random_range(space.layers.0..=space.layers.1);
    let n_units = rng.random_range(space.units.0..=space.units.1);
    let learning_rate = if lo == hi {
        lo
    } else {
        rng.random_range(lo.ln()..=hi.ln()).exp().clamp(lo, hi)
    };
    let dropout = space.dropout[rng.random_range(0..space.dropout.len())];
    let k = rng.random_range(0..=space.weight_decay_steps());
    let weight_decay = space.weight_decay.0 + k as f64 * space.weight_decay.2;
    Ok(MlpConfig {
        n_layers,
        n_units,
        learning_rate,
        dropout,
        weight_decay,
        ..base.clone()
    })
}

/// Seed of trial `index` in a search started from `master`.
pub fn trial_seed(master: u64, index: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index as u64);
    rng.next_u64()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub trial: usize,
    pub config: MlpConfig,
    /// Best validation macro-AP reached; absent when training failed.
    pub val_macro_ap: Option<f64>,
    pub seconds: f64,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

/// Stop after `max_trials` logged trials in total, or once this session has
/// used `max_seconds`, whichever comes first.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    pub max_trials: Option<usize>,
    pub max_seconds: Option<f64>,
}

impl Budget {
    pub fn trials(n: usize) -> Self {
        Self {
            max_trials: Some(n),
            max_seconds: None,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SearchData<'a> {
    pub train_x: ArrayView2<'a, f64>,
    pub train_y: ArrayView2<'a, f32>,
    pub val_x: ArrayView2<'a, f64>,
    pub val_y: ArrayView2<'a, f32>,
    pub tags: &'a [String],
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub best: Trial,
    pub trials: Vec<Trial>,
    /// Trials read back from an existing log rather than run now.
    pub resumed: usize,
}

pub fn best_trial(trials: &[Trial]) -> Option<&Trial> {
    trials
        .iter()
        .filter(|t| t.val_macro_ap.is_some())
        .fold(None, |best: Option<&Trial>, t| match best {
            Some(b) if b.val_macro_ap >= t.val_macro_ap => Some(b),
            _ => Some(t),
        })
}

pub fn read_log(path: &Path) -> Result<Vec<Trial>, HpoError> {
    let err = |message: String| HpoError::Log {
        path: path.display().to_string(),
        message,
    };
    let file = fs::File::open(path).map_err(|e| err(e.to_string()))?;
    let mut trials = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| err(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let t: Trial = serde_json::from_str(&line).map_err(|e| err(format!("line {}: {e}", i + 1)))?;
        trials.push(t);
    }
    Ok(trials)
}

fn run_trial(config: &MlpConfig, data: SearchData<'_>, index: usize, seed: u64) -> Result<Trial, HpoError> {
    let started = Instant::now();
    let result = Classifier::train(
        config,
        data.tags.to_vec(),
        data.train_x,
        data.train_y,
        data.val_x,
        data.val_y,
        seed,
        |_| {},
    );
    let (val_macro_ap, failure) = match result {
        Ok(run) => (
            run.best_epoch.map(|e| run.history[e - 1].val_macro_ap),
            None,
        ),
        Err(MlpError::NonFinite(msg)) => (None, Some(msg)),
        Err(e) => return Err(e.into()),
    };
    Ok(Trial {
        trial: index,
        config: config.clone(),
        val_macro_ap,
        seconds: started.elapsed().as_secs_f64(),
        seed,
        failure,
    })
}

/// Runs trials until the budget is spent and returns the best one. With a
/// `log`, every finished trial is appended immediately, and trials already in
/// the log are reused.
pub fn run_search(
    space: &SearchSpace,
    budget: Budget,
    data: SearchData<'_>,
    base: &MlpConfig,
    seed: u64,
    log: Option<&Path>,
) -> Result<SearchOutcome, HpoError> {
    space.validate()?;
    if budget.max_trials.is_none() && budget.max_seconds.is_none() {
        return Err(HpoError::Budget("give a trial count, a time limit, or both".into()));
    }
    if budget.max_seconds.is_some_and(|s| !(s > 0.0)) {
        return Err(HpoError::Budget("time limit must be positive".into()));
    }
    let log_err = |path: &Path, message: String| HpoError::Log {
        path: path.display().to_string(),
        message,
    };

    let mut trials = match log {
        Some(p) if p.exists() => read_log(p)?,
        _ => Vec::new(),
    };
    for (i, t) in trials.iter().enumerate() {
        if t.trial != i || t.seed != trial_seed(seed, i) {
            return Err(log_err(
                log.expect("read from a log"),
                format!("entry {i} does not belong to a search with master seed {seed}"),
            ));
        }
    }
    let resumed = trials.len();
    if resumed > 0 {
        log::info!("resuming search after {resumed} logged trials");
    }
    let mut writer = match log {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).map_err(|e| log_err(p, e.to_string()))?;
            }
            let f = fs::OpenOptions::new()
                .create(true)
                .append(true)
                .open(p)
                .map_err(|e| log_err(p, e.to_string()))?;
            Some((p, f))
        }
        None => None,
    };

    let started = Instant::now();
    loop {
        let index = trials.len();
        if budget.max_trials.is_some_and(|n| index >= n) {
            break;
        }
        if budget.max_seconds.is_some_and(|s| started.elapsed().as_secs_f64() >= s) {
            break;
        }
        let tseed = trial_seed(seed, index);
        let config = sample_config(space, base, tseed)?;
        let trial = run_trial(&config, data, index, tseed)?;
        match trial.val_macro_ap {
            Some(ap) => log::info!(
                "trial {index}: {} x {}, lr {:.2e}, dropout {}, wd {:.0e} → val macro-AP {ap:.4}",
                config.n_layers,
                config.n_units,
                config.learning_rate,
                config.dropout,
                config.weight_decay
            ),
            None => log::warn!("trial {index} failed: {}", trial.failure.as_deref().unwrap_or("?")),
        }
        if let Some((p, f)) = writer.as_mut() {
            let line = serde_json::to_string(&trial).map_err(|e| log_err(p, e.to_string()))?;
            writeln!(f, "{line}").and_then(|_| f.flush()).map_err(|e| log_err(p, e.to_string()))?;
        }
        trials.push(trial);
    }
    let best = best_trial(&trials).cloned().ok_or(HpoError::NoTrials)?;
    Ok(SearchOutcome { best, trials, resumed })
}
