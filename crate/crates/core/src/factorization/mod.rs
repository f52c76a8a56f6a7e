//! Weighted matrix factorization of implicit feedback by alternating least squares.
//!
//! Every observed play count `r` becomes a binary preference `p = 1` with
//! confidence `c = 1 + alpha * r`; unobserved pairs have `p = 0` and `c = 1`.
//! The loss is
//!
//! ```text
//! sum_{l,s} c_ls (p_ls - x_l . y_s)^2 + lambda (sum_l |x_l|^2 + sum_s |y_s|^2)
//! ```
//!
//! Each half-sweep solves every row on one side exactly against a frozen
//! copy of the other side, so the loss never increases.

mod linalg;

use std::path::Path;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::InteractionMatrix;
use crate::embeddings::{EmbeddingError, Embeddings};
pub use linalg::{cholesky_solve, NotPositiveDefinite};

pub const DEFAULT_RANK: usize = 200;
pub const DEFAULT_ALPHA: f64 = 40.0;
pub const DEFAULT_ITERATIONS: usize = 15;
/// Default lambda as a fraction of the mean observed confidence.
pub const DEFAULT_LAMBDA_SCALE: f64 = 0.01;
const INIT_RANGE: f64 = 0.01;

#[derive(Debug, thiserror::Error)]
pub enum FactorError {
    #[error("invalid factorization parameters: {0}")]
    InvalidParams(String),
    #[error("interaction matrix is empty")]
    EmptyInput,
    #[error(
        "normal equations for {side} row {row} are singular (pivot {pivot:e}); use lambda > 0"
    )]
    Singular { side: Side, row: usize, pivot: f64 },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Side {
    Listeners,
    Tracks,
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Side::Listeners => "listener",
            Side::Tracks => "track",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceParams {
    pub alpha: f64,
    pub lambda: f64,
    pub rank: usize,
    pub iterations: usize,
}

impl ConfidenceParams {
    pub fn validate(&self) -> Result<(), FactorError> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(FactorError::InvalidParams(format!("alpha must be > 0, got {}", self.alpha)));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(FactorError::InvalidParams(format!(
                "lambda must be >= 0, got {}",
                self.lambda
            )));
        }
        if self.rank == 0 {
            return Err(FactorError::InvalidParams("rank must be >= 1".into()));
        }
        Ok(())
    }

    /// Defaults with `lambda = 0.01 * mean(1 + alpha * count)` over observed entries.
    pub fn defaults_for(interactions: &InteractionMatrix) -> Self {
        Self {
            alpha: DEFAULT_ALPHA,
            lambda: default_lambda(DEFAULT_ALPHA, interactions),
            rank: DEFAULT_RANK,
            iterations: DEFAULT_ITERATIONS,
        }
    }

    #[inline]
    pub fn confidence(&self, count: u32) -> f64 {
        1.0 + self.alpha * count as f64
    }
}

pub fn default_lambda(alpha: f64, interactions: &InteractionMatrix) -> f64 {
    if interactions.is_empty() {
        return DEFAULT_LAMBDA_SCALE;
    }
    let mean_count = interactions.total_plays() as f64 / interactions.nnz() as f64;
    DEFAULT_LAMBDA_SCALE * (1.0 + alpha * mean_count)
}

/// Listener and track factor matrices, both with `rank` columns.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FactorModel {
    pub listener_factors: Array2<f64>,
    pub track_factors: Array2<f64>,
    pub params: ConfidenceParams,
}

impl FactorModel {
    /// Uniform `[-0.01, 0.01]` factors; listener rows are drawn before track rows.
    pub fn init(n_listeners: usize, n_tracks: usize, params: ConfidenceParams, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |rows: usize| {
            Array2::from_shape_simple_fn((rows, params.rank), || {
                rng.random_range(-INIT_RANGE..=INIT_RANGE)
            })
        };
        let listener_factors = draw(n_listeners);
        let track_factors = draw(n_tracks);
        Self {
            listener_factors,
            track_factors,
            params,
        }
    }

    pub fn rank(&self) -> usize {
        self.params.rank
    }

    /// Predicted preference `x_l . y_s`.
    pub fn predict(&self, listener: usize, track: usize) -> f64 {
        self.listener_factors
            .row(listener)
            .dot(&self.track_factors.row(track))
    }

    fn check_shape(&self, interactions: &InteractionMatrix) -> Result<(), FactorError> {
        let (l, s) = (interactions.n_listeners(), interactions.n_tracks());
        let e = self.params.rank;
        if self.listener_factors.dim() != (l, e) || self.track_factors.dim() != (s, e) {
            return Err(FactorError::Shape(format!(
                "model has {:?} listener and {:?} track factors, data is {l}x{s} at rank {e}",
                self.listener_factors.dim(),
                self.track_factors.dim()
            )));
        }
        Ok(())
    }
}

/// Progress event passed to the observer of [`als_fit_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HalfSweep {
    /// 1-based sweep number.
    pub sweep: usize,
    pub side: Side,
}

pub fn als_fit(
    interactions: &InteractionMatrix,
    params: ConfidenceParams,
    seed: u64,
) -> Result<FactorModel, FactorError> {
    als_fit_with(interactions, params, seed, |_, _| {})
}

/// [`als_fit`] with a callback invoked after every half-sweep.
pub fn als_fit_with<F>(
    interactions: &InteractionMatrix,
    params: ConfidenceParams,
    seed: u64,
    observer: F,
) -> Result<FactorModel, FactorError>
where
    F: FnMut(HalfSweep, &FactorModel),
{
    params.validate()?;
    if interactions.is_empty() {
        return Err(FactorError::EmptyInput);
    }
    let mut model = FactorModel::init(
        interactions.n_listeners(),
        interactions.n_tracks(),
        params,
        seed,
    );
    run_sweeps(interactions, &mut model, params.iterations, observer)?;
    Ok(model)
}

/// Runs `sweeps` alternating sweeps (listeners, then tracks) from the current factors.
pub fn run_sweeps<F>(
    interactions: &InteractionMatrix,
    model: &mut FactorModel,
    sweeps: usize,
    mut observer: F,
) -> Result<(), FactorError>
where
    F: FnMut(HalfSweep, &FactorModel),
{
    model.params.validate()?;
    model.check_shape(interactions)?;
    for sweep in 1..=sweeps {
        let fresh = solve_side(interactions, model, Side::Listeners)?;
        model.listener_factors = fresh;
        observer(HalfSweep { sweep, side: Side::Listeners }, model);
        let fresh = solve_side(interactions, model, Side::Tracks)?;
        model.track_factors = fresh;
        observer(HalfSweep { sweep, side: Side::Tracks }, model);
    }
    Ok(())
}

/// Exact regularized weighted least-squares solve of every row on `side`
/// against the current factors of the opposite side.
///
/// Per row: `(G + lambda I + sum_obs alpha r y y^T) x = sum_obs (1 + alpha r) y`
/// where `G` is the Gram matrix of the fixed side.
pub fn solve_side(
    interactions: &InteractionMatrix,
    model: &FactorModel,
    side: Side,
) -> Result<Array2<f64>, FactorError> {
    let params = model.params;
    let e = params.rank;
    let (fixed, n_rows) = match side {
        Side::Listeners => (&model.track_factors, interactions.n_listeners()),
        Side::Tracks => (&model.listener_factors, interactions.n_tracks()),
    };
    let fixed = fixed.as_standard_layout();
    let fixed = fixed.as_slice().expect("standard layout");
    let gram = gram_matrix(fixed, e);

    let mut out = vec![0.0f64; n_rows * e];
    out.par_chunks_mut(e)
        .enumerate()
        .try_for_each_init(
            || vec![0.0f64; e * e],
            |a, (row, x)| {
                a.copy_from_slice(&gram);
                for d in 0..e {
                    a[d * e + d] += params.lambda;
                }
                x.fill(0.0);
                let mut accumulate = |other: usize, count: u32| {
                    let y = &fixed[other * e..(other + 1) * e];
                    let extra = params.alpha * count as f64;
                    let c = 1.0 + extra;
                    for i in 0..e {
                        x[i] += c * y[i];
                        let wi = extra * y[i];
                        for j in 0..=i {
                            a[i * e + j] += wi * y[j];
                        }
                    }
                };
                match side {
                    Side::Listeners => interactions.row(row).for_each(|(t, c)| accumulate(t, c)),
                    Side::Tracks => interactions.column(row).for_each(|(l, c)| accumulate(l, c)),
                }
                // only the lower triangle was accumulated
                for i in 0..e {
                    for j in (i + 1)..e {
                        a[i * e + j] = a[j * e + i];
                    }
                }
                cholesky_solve(a, x, e).map_err(|npd| FactorError::Singular {
                    side,
                    row,
                    pivot: npd.pivot,
                })
            },
        )?;
    Ok(Array2::from_shape_vec((n_rows, e), out).expect("shape"))
}

fn gram_matrix(factors: &[f64], e: usize) -> Vec<f64> {
    let mut g = vec![0.0f64; e * e];
    for y in factors.chunks_exact(e) {
        for i in 0..e {
            let yi = y[i];
            for j in 0..=i {
                g[i * e + j] += yi * y[j];
            }
        }
    }
    for i in 0..e {
        for j in (i + 1)..e {
            g[i * e + j] = g[j * e + i];
        }
    }
    g
}

/// Weighted loss of `model` on `interactions`.
///
/// The dense sum over all `L x S` pairs is rewritten as
/// `tr(X^T X Y^T Y) + sum_obs [c (1 - xy)^2 - (xy)^2]`, which only touches
/// observed entries.
pub fn wmf_objective(interactions: &InteractionMatrix, model: &FactorModel) -> Result<f64, FactorError> {
    model.check_shape(interactions)?;
    let e = model.params.rank;
    let x = model.listener_factors.as_standard_layout();
    let y = model.track_factors.as_standard_layout();
    let gx = gram_matrix(x.as_slice().expect("layout"), e);
    let gy = gram_matrix(y.as_slice().expect("layout"), e);
    let all_pairs: f64 = gx.iter().zip(&gy).map(|(a, b)| a * b).sum();

    let observed: f64 = interactions
        .entries()
        .map(|(l, s, count)| {
            let pred = model.predict(l, s);
            let c = model.params.confidence(count);
            c * (1.0 - pred).powi(2) - pred * pred
        })
        .sum();

    let reg = model.params.lambda * (x.iter().map(|v| v * v).sum::<f64>() + y.iter().map(|v| v * v).sum::<f64>());
    Ok(all_pairs + observed + reg)
}

/// Writes the track factors as an embedding file; `track_ids[s]` labels row `s`.
pub fn export_embeddings(
    model: &FactorModel,
    track_ids: &[String],
    path: &Path,
) -> Result<Embeddings, FactorError> {
    let embeddings = track_embeddings(model, track_ids)?;
    embeddings.write(path)?;
    Ok(embeddings)
}

pub fn track_embeddings(model: &FactorModel, track_ids: &[String]) -> Result<Embeddings, FactorError> {
    if track_ids.len() != model.track_factors.nrows() {
        return Err(FactorError::Shape(format!(
            "{} track ids for {} track factor rows",
            track_ids.len(),
            model.track_factors.nrows()
        )));
    }
    Ok(Embeddings::new(track_ids.to_vec(), model.track_factors.clone())?)
}
