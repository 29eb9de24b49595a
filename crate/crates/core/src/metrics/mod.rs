//! Distances and convergence diagnostics.

mod mz;
mod ot;

use rand::Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::model::CoefficientModel;
use crate::rng::derive_seed;
use crate::sde::{simulate_dominant, simulate_with, Dynamics, Estimate, Initial, IntegratorConfig, SdeError, TrajectoryBatch};
use crate::simplex::{BallCover, Simplex, SimplexError};

pub use mz::{mz_distance, FnPath, MzDistance, PiecewiseConstant, PiecewiseLinear, Trajectory};
pub use ot::{wasserstein1, Wasserstein, MAX_EXACT_SUPPORT};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("invalid law: {0}")]
    InvalidLaw(String),
    #[error("support of {size} points exceeds {limit}; enable binning")]
    SupportTooLarge { size: usize, limit: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Simulation(#[from] SdeError),
    #[error(transparent)]
    Simplex(#[from] SimplexError),
}

/// Weighted point cloud.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalLaw {
    points: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl EmpiricalLaw {
    pub fn new(points: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self, MetricsError> {
        if points.is_empty() || points.len() != weights.len() {
            return Err(MetricsError::InvalidLaw("need as many weights as points, at least one".into()));
        }
        let dim = points[0].len();
        if points.iter().any(|p| p.len() != dim || p.iter().any(|v| !v.is_finite())) {
            return Err(MetricsError::InvalidLaw("points must be finite and of equal dimension".into()));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(MetricsError::InvalidLaw("weights must be non-negative".into()));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(MetricsError::InvalidLaw(format!("weights sum to {sum}")));
        }
        Ok(Self { points, weights })
    }

    pub fn uniform(points: Vec<Vec<f64>>) -> Result<Self, MetricsError> {
        let n = points.len();
        Self::new(points, vec![1.0 / n as f64; n])
    }

    pub fn dirac(point: Vec<f64>) -> Self {
        Self { points: vec![point], weights: vec![1.0] }
    }

    /// Paths of a batch at one grid time, equally weighted.
    pub fn from_batch(batch: &TrajectoryBatch, time_index: usize) -> Self {
        let points: Vec<Vec<f64>> = batch.slice_at(time_index).map(<[f64]>::to_vec).collect();
        let n = points.len();
        Self { points, weights: vec![1.0 / n as f64; n] }
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// `½ Σ |p_i − q_i|`.
pub fn tv_distance(p: &[f64], q: &[f64]) -> Result<f64, MetricsError> {
    if p.len() != q.len() {
        return Err(MetricsError::LengthMismatch { expected: p.len(), got: q.len() });
    }
    Ok(0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

/// Occupation of disjoint balls by the paths of a batch at one time, with
/// the mass outside every ball kept apart.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BinnedLaw {
    pub weights: Vec<Estimate>,
    pub unresolved: Estimate,
}

impl BinnedLaw {
    pub fn from_batch(batch: &TrajectoryBatch, cover: &BallCover, time_index: usize) -> Self {
        let mut counts = vec![0usize; cover.len()];
        let mut outside = 0usize;
        for x in batch.slice_at(time_index) {
            match cover.assign(x) {
                Some(i) => counts[i] += 1,
                None => outside += 1,
            }
        }
        let n = batch.n_paths();
        Self {
            weights: counts.iter().map(|&c| Estimate::proportion(c, n)).collect(),
            unresolved: Estimate::proportion(outside, n),
        }
    }

    pub fn resolved_mass(&self) -> f64 {
        self.weights.iter().map(|e| e.mean).sum()
    }

    /// TV on the ball labels plus an extra "unresolved" atom, against a law
    /// with no unresolved mass: `½(Σ|p_i − q_i| + u)`. The error bar is the
    /// sum of the per-atom standard errors halved, which dominates the
    /// standard deviation of the estimate.
    pub fn extended_tv(&self, target: &[f64]) -> Result<Estimate, MetricsError> {
        if target.len() != self.weights.len() {
            return Err(MetricsError::LengthMismatch { expected: self.weights.len(), got: target.len() });
        }
        let diff: f64 = self.weights.iter().zip(target).map(|(p, q)| (p.mean - q).abs()).sum();
        let se: f64 = self.weights.iter().map(|p| p.stderr).sum::<f64>() + self.unresolved.stderr;
        Ok(Estimate { mean: 0.5 * (diff + self.unresolved.mean), stderr: 0.5 * se })
    }
}

/// Fraction of paths within `η` of some vertex at one grid time.
pub fn concentration_probability(
    batch: &TrajectoryBatch,
    simplex: &Simplex,
    eta: f64,
    time_index: usize,
) -> Result<Estimate, MetricsError> {
    let cover = BallCover::new(simplex.vertices().to_vec(), eta)?;
    let hits = batch.slice_at(time_index).filter(|x| cover.assign(x).is_some()).count();
    Ok(Estimate::proportion(hits, batch.n_paths()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErgodicPoint {
    pub start: Vec<f64>,
    pub estimate: Estimate,
    pub projected: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErgodicHorizon {
    pub horizon: f64,
    pub sup_error: f64,
    pub points: Vec<ErgodicPoint>,
}

impl ErgodicHorizon {
    /// Index of the start attaining the sup.
    pub fn worst(&self) -> usize {
        self.points.iter().enumerate().max_by(|a, b| a.1.error.total_cmp(&b.1.error)).map_or(0, |(i, _)| i)
    }

    /// `|error| ≤ z·SE` at every start (zero error required where SE is 0).
    pub fn within(&self, z: f64) -> bool {
        self.points.iter().all(|p| p.error <= z * p.estimate.stderr)
    }
}

/// `max_x |E_x f(X_T) − P f(x)|` over a grid of starts, for every horizon `T`,
/// from one pure-noise simulation per start (seed derived from the start's
/// index).
pub fn ergodic_sup_errors<F>(
    model: &CoefficientModel,
    simplex: &Simplex,
    f: F,
    starts: &[Vec<f64>],
    horizons: &[f64],
    config: &IntegratorConfig,
) -> Result<Vec<ErgodicHorizon>, MetricsError>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if starts.is_empty() {
        return Err(MetricsError::InvalidArgument("no start points".into()));
    }
    let batches = dominant_batches(model, simplex, starts, horizons, config)?;
    Ok(ergodic_table(simplex, f, starts, &batches))
}

/// One pure-noise batch per start on the grid `horizons`; the seed of start
/// `i` is derived from the configured seed and `i`.
pub fn dominant_batches(
    model: &CoefficientModel,
    simplex: &Simplex,
    starts: &[Vec<f64>],
    horizons: &[f64],
    config: &IntegratorConfig,
) -> Result<Vec<TrajectoryBatch>, MetricsError> {
    starts
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let cfg = config.with_t_grid(horizons.to_vec()).with_seed(derive_seed(config.seed, i as u64));
            Ok(simulate_dominant(model, simplex, &Initial::Point(x.clone()), &cfg)?)
        })
        .collect()
}

/// Sup errors of `f` against `P f` from precomputed [`dominant_batches`].
pub fn ergodic_table<F>(simplex: &Simplex, f: F, starts: &[Vec<f64>], batches: &[TrajectoryBatch]) -> Vec<ErgodicHorizon>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let pf = simplex.project_function(&f);
    let horizons = batches.first().map(|b| b.t_grid().to_vec()).unwrap_or_default();
    horizons
        .iter()
        .enumerate()
        .map(|(ti, &horizon)| {
            let points: Vec<ErgodicPoint> = starts
                .iter()
                .zip(batches)
                .map(|(x, batch)| {
                    let estimate = crate::sde::estimate_expectation(batch, &f, ti);
                    let projected = pf.eval(x);
                    ErgodicPoint { start: x.clone(), estimate, projected, error: (estimate.mean - projected).abs() }
                })
                .collect();
            let sup_error = points.iter().map(|p| p.error).fold(0.0, f64::max);
            ErgodicHorizon { horizon, sup_error, points }
        })
        .collect()
}

/// Single-horizon form of [`ergodic_sup_errors`].
pub fn ergodic_sup_error<F>(
    model: &CoefficientModel,
    simplex: &Simplex,
    f: F,
    starts: &[Vec<f64>],
    horizon: f64,
    config: &IntegratorConfig,
) -> Result<ErgodicHorizon, MetricsError>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    Ok(ergodic_sup_errors(model, simplex, f, starts, &[horizon], config)?.remove(0))
}

/// Uniform sampler on `K` (Dirichlet(1) barycentric weights).
pub fn uniform_initial(simplex: &Simplex) -> Initial {
    let s = simplex.clone();
    Initial::Sampler(std::sync::Arc::new(move |rng| {
        let w: Vec<f64> = (0..s.num_vertices()).map(|_| rng.sample::<f64, _>(Exp1)).collect();
        let total: f64 = w.iter().sum();
        let lambda: Vec<f64> = w.iter().map(|v| v / total).collect();
        let mut x = s.point_from_barycentric(&lambda);
        s.euclidean_project_in_place(&mut x);
        x
    }))
}

/// Bins per coordinate used to condition increments on the current state.
pub const CONDITIONING_BINS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariationLevel {
    pub level: u32,
    pub intervals: usize,
    pub value: f64,
    pub noise_floor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionalVariation {
    pub tau: f64,
    /// `sup_K ‖z‖ · M · τ`.
    pub analytic: f64,
    /// Largest level value.
    pub empirical: f64,
    /// Noise floor of the level attaining `empirical`.
    pub noise_floor: f64,
    pub levels: Vec<VariationLevel>,
    pub passed: bool,
}

/// Conditional variation `Σ_i E‖E[X_{t_{i+1}} − X_{t_i} | X_{t_i}]‖` of the
/// `γ = 1` process over dyadic partitions of `[0, τ]`, levels `0..=max_level`.
/// The inner conditional mean is estimated by binning `X_{t_i}` into
/// [`CONDITIONING_BINS`] cells per coordinate of the bounding box. The noise
/// floor is the same sum with every bin mean replaced by its standard error.
pub fn conditional_variation_bound(
    model: &CoefficientModel,
    simplex: &Simplex,
    tau: f64,
    max_level: u32,
    config: &IntegratorConfig,
) -> Result<ConditionalVariation, MetricsError> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(MetricsError::InvalidArgument(format!("tau must be positive, got {tau}")));
    }
    let analytic = simplex.max_norm() * model.bound() * tau;
    let finest = 1usize << max_level;
    let t_grid: Vec<f64> = (0..=finest).map(|k| tau * k as f64 / finest as f64).collect();
    let batch = simulate_with(
        model,
        simplex,
        &uniform_initial(simplex),
        Dynamics::two_scale(1.0),
        1.0,
        &config.with_t_grid(t_grid),
    )?;
    let n = simplex.dim();
    let lower: Vec<f64> = (0..n).map(|d| simplex.vertices().iter().map(|v| v[d]).fold(f64::INFINITY, f64::min)).collect();
    let upper: Vec<f64> = (0..n).map(|d| simplex.vertices().iter().map(|v| v[d]).fold(f64::NEG_INFINITY, f64::max)).collect();
    let cell = |x: &[f64]| -> usize {
        let mut flat = 0;
        for d in (0..n).rev() {
            let width = (upper[d] - lower[d]).max(1e-300);
            let i = (((x[d] - lower[d]) / width * CONDITIONING_BINS as f64).floor().max(0.0) as usize).min(CONDITIONING_BINS - 1);
            flat = flat * CONDITIONING_BINS + i;
        }
        flat
    };
    let levels: Vec<VariationLevel> = (0..=max_level)
        .into_par_iter()
        .map(|level| {
            let stride = finest >> level;
            let intervals = 1usize << level;
            let (mut value, mut noise) = (0.0, 0.0);
            for k in 0..intervals {
                let (a, b) = (k * stride, (k + 1) * stride);
                // Per cell: count, Σ increment, Σ increment².
                let mut stats: std::collections::BTreeMap<usize, (usize, Vec<f64>, Vec<f64>)> = Default::default();
                for p in 0..batch.n_paths() {
                    let x = batch.state(p, a);
                    let y = batch.state(p, b);
                    let e = stats.entry(cell(x)).or_insert_with(|| (0, vec![0.0; n], vec![0.0; n]));
                    e.0 += 1;
                    for d in 0..n {
                        let inc = y[d] - x[d];
                        e.1[d] += inc;
                        e.2[d] += inc * inc;
                    }
                }
                let total = batch.n_paths() as f64;
                for (count, sum, sq) in stats.values() {
                    let c = *count as f64;
                    let mean_norm = sum.iter().map(|s| (s / c).powi(2)).sum::<f64>().sqrt();
                    let var: f64 = if *count > 1 {
                        sum.iter().zip(sq).map(|(s, q)| ((q - s * s / c) / (c - 1.0)).max(0.0)).sum()
                    } else {
                        0.0
                    };
                    value += c / total * mean_norm;
                    noise += c / total * (var / c).sqrt();
                }
            }
            VariationLevel { level, intervals, value, noise_floor: noise }
        })
        .collect();
    let top = levels.iter().max_by(|a, b| a.value.total_cmp(&b.value)).expect("at least one level");
    let (empirical, noise_floor) = (top.value, top.noise_floor);
    Ok(ConditionalVariation {
        tau,
        analytic,
        empirical,
        noise_floor,
        passed: empirical <= analytic * 1.1,
        levels,
    })
}
