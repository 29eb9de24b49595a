//! Euler–Maruyama integration of
//!
//! ```text
//! dX = √γ σ(X) dW + b(X) dt + σ₀(X) dB
//! ```
//!
//! and of the pure-noise process `dX = σ(X) dW`, with per-step Euclidean
//! projection onto the simplex.
//!
//! The step is `min(dt, 0.1 / (γ k²))` where `k` is the model's Lipschitz
//! constant of `σ`, or its tabulated local value when the model carries one.
//! Every path draws from its own counter-based stream, so batches are
//! bit-identical for a given seed regardless of scheduling.

mod io;
mod oracle;

use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{validate_boundary_compatibility, CoefficientModel};
use crate::rng::path_rng;
use crate::simplex::{BallCover, Simplex, SimplexError};

pub use io::BatchIoError;
pub use oracle::{affine_semigroup_oracle, affine_semigroup_oracle_batch};

/// Fraction of `1/(γk²)` used as the largest step.
pub const STEP_FACTOR: f64 = 0.1;

/// Largest supported state dimension (stack buffers on the step path).
pub const MAX_DIM: usize = 16;

/// Tolerance of the containment invariant of emitted states.
pub const CONTAINMENT_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum SdeError {
    #[error("invalid integrator configuration: {0}")]
    InvalidConfig(String),
    #[error("initial point {point:?} is not in the simplex")]
    InitialOutside { point: Vec<f64> },
    #[error("model dimension {model} does not match simplex dimension {simplex}")]
    DimensionMismatch { model: usize, simplex: usize },
    #[error("path {path} produced a non-finite state at t = {time}")]
    NonFinite { path: usize, time: f64 },
    #[error(transparent)]
    Simplex(#[from] SimplexError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub n_paths: usize,
    pub seed: u64,
    #[serde(default = "default_projection")]
    pub projection: bool,
    pub t_grid: Vec<f64>,
}

fn default_projection() -> bool {
    true
}

impl IntegratorConfig {
    pub fn new(dt: f64, n_paths: usize, seed: u64, t_grid: Vec<f64>) -> Self {
        Self { dt, n_paths, seed, projection: true, t_grid }
    }

    pub fn validate(&self) -> Result<(), SdeError> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(SdeError::InvalidConfig(format!("dt must be positive, got {}", self.dt)));
        }
        if self.n_paths == 0 {
            return Err(SdeError::InvalidConfig("n_paths must be at least 1".into()));
        }
        if self.t_grid.is_empty() {
            return Err(SdeError::InvalidConfig("t_grid is empty".into()));
        }
        if self.t_grid[0] < 0.0 || self.t_grid.iter().any(|t| !t.is_finite()) {
            return Err(SdeError::InvalidConfig("t_grid must be finite and non-negative".into()));
        }
        if self.t_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(SdeError::InvalidConfig("t_grid must be strictly increasing".into()));
        }
        Ok(())
    }

    pub fn with_t_grid(&self, t_grid: Vec<f64>) -> Self {
        Self { t_grid, ..self.clone() }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }
}

/// Starting points: one shared point, one point per path, or a sampler
/// drawing from the path's own stream.
#[derive(Clone)]
pub enum Initial {
    Point(Vec<f64>),
    PerPath(Vec<Vec<f64>>),
    Sampler(Arc<dyn Fn(&mut ChaCha8Rng) -> Vec<f64> + Send + Sync>),
}

impl From<Vec<f64>> for Initial {
    fn from(p: Vec<f64>) -> Self {
        Initial::Point(p)
    }
}

impl From<&[f64]> for Initial {
    fn from(p: &[f64]) -> Self {
        Initial::Point(p.to_vec())
    }
}

impl Initial {
    fn draw(&self, path: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        match self {
            Initial::Point(p) => p.clone(),
            Initial::PerPath(points) => points[path].clone(),
            Initial::Sampler(f) => f(rng),
        }
    }
}

/// Multipliers of the three terms of the equation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dynamics {
    pub noise: f64,
    pub drift: f64,
    pub sub_noise: f64,
}

impl Dynamics {
    /// The two-timescale equation at separation `γ`.
    pub fn two_scale(gamma: f64) -> Self {
        Self { noise: gamma.sqrt(), drift: 1.0, sub_noise: 1.0 }
    }

    /// `dX = σ(X) dW`.
    pub fn dominant() -> Self {
        Self { noise: 1.0, drift: 0.0, sub_noise: 0.0 }
    }
}

/// `n_paths` paths sampled on a shared time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryBatch {
    pub(crate) dim: usize,
    pub(crate) n_paths: usize,
    pub(crate) t_grid: Vec<f64>,
    /// Path-major, then time, then coordinate.
    pub(crate) states: Vec<f64>,
    /// `0` for the dominant process.
    pub gamma: f64,
    pub dt: f64,
    pub seed: u64,
}

impl TrajectoryBatch {
    pub fn new(
        dim: usize,
        n_paths: usize,
        t_grid: Vec<f64>,
        states: Vec<f64>,
        gamma: f64,
        dt: f64,
        seed: u64,
    ) -> Result<Self, SdeError> {
        if states.len() != dim * n_paths * t_grid.len() {
            return Err(SdeError::InvalidConfig(format!(
                "{} state values do not fit {n_paths} paths × {} times × {dim}",
                states.len(),
                t_grid.len()
            )));
        }
        Ok(Self { dim, n_paths, t_grid, states, gamma, dt, seed })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    pub fn n_times(&self) -> usize {
        self.t_grid.len()
    }

    pub fn t_grid(&self) -> &[f64] {
        &self.t_grid
    }

    pub fn states(&self) -> &[f64] {
        &self.states
    }

    pub fn state(&self, path: usize, time_index: usize) -> &[f64] {
        let start = (path * self.t_grid.len() + time_index) * self.dim;
        &self.states[start..start + self.dim]
    }

    /// States of every path at one grid time.
    pub fn slice_at(&self, time_index: usize) -> impl Iterator<Item = &[f64]> + '_ {
        (0..self.n_paths).map(move |p| self.state(p, time_index))
    }

    /// Index of a grid time, matched exactly.
    pub fn time_index(&self, t: f64) -> Option<usize> {
        self.t_grid.iter().position(|&s| s == t)
    }
}

fn check_setup(model: &CoefficientModel, simplex: &Simplex, config: &IntegratorConfig) -> Result<(), SdeError> {
    config.validate()?;
    if model.dim() != simplex.dim() {
        return Err(SdeError::DimensionMismatch { model: model.dim(), simplex: simplex.dim() });
    }
    if simplex.dim() > MAX_DIM {
        return Err(SdeError::InvalidConfig(format!("dimension {} exceeds {MAX_DIM}", simplex.dim())));
    }
    let report = validate_boundary_compatibility(model, simplex, 8, 1e-9);
    if !report.passed() {
        log::warn!("model '{}' is not boundary compatible: {}", model.name(), report.summary());
    }
    Ok(())
}

/// Integrates `dynamics` and records every path on `config.t_grid`.
pub fn simulate_with(
    model: &CoefficientModel,
    simplex: &Simplex,
    initial: &Initial,
    dynamics: Dynamics,
    gamma_label: f64,
    config: &IntegratorConfig,
) -> Result<TrajectoryBatch, SdeError> {
    check_setup(model, simplex, config)?;
    let n = simplex.dim();
    let n_times = config.t_grid.len();
    let paths: Vec<Result<Vec<f64>, SdeError>> = (0..config.n_paths)
        .into_par_iter()
        .map(|path| {
            let mut rng = path_rng(config.seed, path);
            let x0 = initial.draw(path, &mut rng);
            if x0.len() != n || !simplex.contains(&x0, CONTAINMENT_TOL) {
                return Err(SdeError::InitialOutside { point: x0 });
            }
            let mut out = Vec::with_capacity(n_times * n);
            let mut stepper = Stepper::new(model, simplex, dynamics, config, x0);
            for &target in &config.t_grid {
                stepper.advance_to(target, &mut rng).map_err(|time| SdeError::NonFinite { path, time })?;
                out.extend_from_slice(&stepper.x);
            }
            Ok(out)
        })
        .collect();
    let mut states = Vec::with_capacity(config.n_paths * n_times * n);
    for p in paths {
        states.extend(p?);
    }
    TrajectoryBatch::new(n, config.n_paths, config.t_grid.clone(), states, gamma_label, config.dt, config.seed)
}

/// The two-timescale process at separation `gamma` (`0` drops the dominant
/// noise).
pub fn simulate(
    model: &CoefficientModel,
    simplex: &Simplex,
    initial: &Initial,
    gamma: f64,
    config: &IntegratorConfig,
) -> Result<TrajectoryBatch, SdeError> {
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(SdeError::InvalidConfig(format!("gamma must be finite and ≥ 0, got {gamma}")));
    }
    simulate_with(model, simplex, initial, Dynamics::two_scale(gamma), gamma, config)
}

/// The pure-noise process `dX = σ(X) dW` up to the last grid time.
pub fn simulate_dominant(
    model: &CoefficientModel,
    simplex: &Simplex,
    initial: &Initial,
    config: &IntegratorConfig,
) -> Result<TrajectoryBatch, SdeError> {
    simulate_with(model, simplex, initial, Dynamics::dominant(), 0.0, config)
}

/// Single-path Euler–Maruyama state with scratch buffers.
struct Stepper<'a> {
    model: &'a CoefficientModel,
    simplex: &'a Simplex,
    dynamics: Dynamics,
    dt: f64,
    projection: bool,
    t: f64,
    x: Vec<f64>,
    sigma: Vec<f64>,
    sigma0: Vec<f64>,
    drift: Vec<f64>,
    noise_scale: f64,
}

impl<'a> Stepper<'a> {
    fn new(model: &'a CoefficientModel, simplex: &'a Simplex, dynamics: Dynamics, config: &IntegratorConfig, x0: Vec<f64>) -> Self {
        let n = simplex.dim();
        Self {
            model,
            simplex,
            dynamics,
            dt: config.dt,
            projection: config.projection,
            t: 0.0,
            x: x0,
            sigma: vec![0.0; n * model.noise_dim()],
            sigma0: vec![0.0; n * model.sub_noise_dim()],
            drift: vec![0.0; n],
            noise_scale: dynamics.noise * dynamics.noise,
        }
    }

    fn step_size(&self) -> f64 {
        if self.noise_scale == 0.0 {
            return self.dt;
        }
        let k = self.model.step_lipschitz(&self.x);
        if k <= 0.0 {
            return self.dt;
        }
        self.dt.min(STEP_FACTOR / (self.noise_scale * k * k))
    }

    /// Steps until `target`, landing on it exactly. Returns the time of a
    /// non-finite state on failure.
    fn advance_to<R: Rng>(&mut self, target: f64, rng: &mut R) -> Result<(), f64> {
        while self.t < target {
            let h_max = self.step_size();
            let remaining = target - self.t;
            let (h, last) = if remaining <= h_max * (1.0 + 1e-9) { (remaining, true) } else { (h_max, false) };
            self.step(h, rng);
            self.t = if last { target } else { self.t + h };
            if self.x.iter().any(|v| !v.is_finite()) {
                return Err(self.t);
            }
        }
        Ok(())
    }

    fn step<R: Rng>(&mut self, h: f64, rng: &mut R) {
        let n = self.x.len();
        let sqrt_h = h.sqrt();
        let Dynamics { noise, drift, sub_noise } = self.dynamics;
        let mut incr = [0.0f64; MAX_DIM];
        let incr = &mut incr[..n];
        if noise != 0.0 {
            self.model.sigma().eval_into(&self.x, &mut self.sigma);
            for col in self.sigma.chunks(n) {
                let xi: f64 = rng.sample(StandardNormal);
                let w = noise * sqrt_h * xi;
                for (a, c) in incr.iter_mut().zip(col) {
                    *a += w * c;
                }
            }
        }
        if drift != 0.0 && !self.model.drift().is_zero() {
            self.model.drift().eval_into(&self.x, &mut self.drift);
            for (a, b) in incr.iter_mut().zip(&self.drift) {
                *a += drift * h * b;
            }
        }
        if sub_noise != 0.0 && !self.model.sigma0().is_zero() {
            self.model.sigma0().eval_into(&self.x, &mut self.sigma0);
            for col in self.sigma0.chunks(n) {
                let eta: f64 = rng.sample(StandardNormal);
                let w = sub_noise * sqrt_h * eta;
                for (a, c) in incr.iter_mut().zip(col) {
                    *a += w * c;
                }
            }
        }
        for (x, a) in self.x.iter_mut().zip(incr.iter()) {
            *x += a;
        }
        if self.projection {
            self.simplex.euclidean_project_in_place(&mut self.x);
        }
    }
}

/// Sample mean with standard error `s/√N` (`s` the unbiased sample standard
/// deviation).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

impl Estimate {
    pub fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len();
        if n == 0 {
            return Self { mean: f64::NAN, stderr: f64::NAN };
        }
        let mean = samples.iter().sum::<f64>() / n as f64;
        if n == 1 {
            return Self { mean, stderr: 0.0 };
        }
        let var = samples.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
        Self { mean, stderr: (var / n as f64).sqrt() }
    }

    /// Bernoulli frequency `p` over `n` draws with SE `√(p(1−p)/n)`.
    pub fn proportion(hits: usize, n: usize) -> Self {
        let p = hits as f64 / n as f64;
        Self { mean: p, stderr: (p * (1.0 - p) / n as f64).sqrt() }
    }

    /// `|a − b| ≤ z·√(SE_a² + SE_b²)`.
    pub fn consistent_with(&self, other: &Estimate, z: f64) -> bool {
        (self.mean - other.mean).abs() <= z * self.stderr.hypot(other.stderr)
    }

    /// `|mean − value| ≤ z·SE`.
    pub fn covers(&self, value: f64, z: f64) -> bool {
        (self.mean - value).abs() <= z * self.stderr
    }
}

pub fn estimate_expectation<F>(batch: &TrajectoryBatch, f: F, time_index: usize) -> Estimate
where
    F: Fn(&[f64]) -> f64,
{
    assert!(time_index < batch.n_times(), "time index {time_index} out of range");
    let samples: Vec<f64> = batch.slice_at(time_index).map(&f).collect();
    Estimate::from_samples(&samples)
}

/// Terminal ball occupation of the pure-noise process started at `x0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HittingEstimate {
    pub centers: Vec<Vec<f64>>,
    pub probabilities: Vec<Estimate>,
    pub unresolved: Estimate,
}

impl HittingEstimate {
    pub fn total(&self) -> f64 {
        self.probabilities.iter().map(|e| e.mean).sum::<f64>() + self.unresolved.mean
    }
}

/// Fractions of pure-noise paths that sit at time `horizon` in the
/// `η`-ball of each zero-set point (the simplex vertices when the model
/// declares no zero set), plus the fraction in no ball.
pub fn estimate_h(
    model: &CoefficientModel,
    simplex: &Simplex,
    x0: &[f64],
    horizon: f64,
    eta: f64,
    config: &IntegratorConfig,
) -> Result<HittingEstimate, SdeError> {
    let centers =
        if model.zero_set().is_empty() { simplex.vertices().to_vec() } else { model.zero_set().to_vec() };
    let cover = BallCover::new(centers.clone(), eta)?;
    let batch = simulate_dominant(model, simplex, &Initial::Point(x0.to_vec()), &config.with_t_grid(vec![horizon]))?;
    let mut counts = vec![0usize; centers.len()];
    let mut unresolved = 0usize;
    for x in batch.slice_at(0) {
        match cover.assign(x) {
            Some(i) => counts[i] += 1,
            None => unresolved += 1,
        }
    }
    let n = batch.n_paths();
    Ok(HittingEstimate {
        centers,
        probabilities: counts.iter().map(|&c| Estimate::proportion(c, n)).collect(),
        unresolved: Estimate::proportion(unresolved, n),
    })
}

/// Result of the rescaled coupling experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CouplingResult {
    pub gamma: f64,
    pub h: f64,
    pub squared_distances: Vec<f64>,
    pub mean: Estimate,
    /// `3M²(h + h²) e^{3k²γ}`.
    pub bound: f64,
}

pub fn gronwall_bound(bound_m: f64, lipschitz_k: f64, gamma: f64, h: f64) -> f64 {
    3.0 * bound_m * bound_m * (h + h * h) * (3.0 * lipschitz_k * lipschitz_k * gamma).exp()
}

/// Integrates on `[0, γ]`
///
/// ```text
/// dZʰ = (h/γ) b(Zʰ) dt + √(h/γ) σ₀(Zʰ) dW + σ(Zʰ) dB
/// dZ  = σ(Z) dB
/// ```
///
/// with the same `dB` increments and returns `‖Zʰ_γ − Z_γ‖²` per path. The
/// step follows the global rule `min(dt, 0.1/k²)`.
pub fn coupled_rescaled_pair(
    model: &CoefficientModel,
    simplex: &Simplex,
    initial: &Initial,
    gamma: f64,
    h: f64,
    config: &IntegratorConfig,
) -> Result<CouplingResult, SdeError> {
    if !(gamma > 0.0 && gamma.is_finite()) || !(h >= 0.0 && h.is_finite()) {
        return Err(SdeError::InvalidConfig(format!("need gamma > 0 and h ≥ 0, got gamma={gamma}, h={h}")));
    }
    let config = config.with_t_grid(vec![gamma]);
    check_setup(model, simplex, &config)?;
    let n = simplex.dim();
    let k = model.lipschitz();
    let step = if k > 0.0 { config.dt.min(STEP_FACTOR / (k * k)) } else { config.dt };
    let ratio = h / gamma;
    let results: Vec<Result<f64, SdeError>> = (0..config.n_paths)
        .into_par_iter()
        .map(|path| {
            let mut rng = path_rng(config.seed, path);
            let x0 = initial.draw(path, &mut rng);
            if x0.len() != n || !simplex.contains(&x0, CONTAINMENT_TOL) {
                return Err(SdeError::InitialOutside { point: x0 });
            }
            let mut zh = x0.clone();
            let mut z = x0;
            let mut sig_h = vec![0.0; n * model.noise_dim()];
            let mut sig = vec![0.0; n * model.noise_dim()];
            let mut sig0 = vec![0.0; n * model.sub_noise_dim()];
            let mut b = vec![0.0; n];
            let mut t = 0.0;
            while t < gamma {
                let remaining = gamma - t;
                let (dt, last) = if remaining <= step * (1.0 + 1e-9) { (remaining, true) } else { (step, false) };
                let sq = dt.sqrt();
                model.sigma().eval_into(&zh, &mut sig_h);
                model.sigma().eval_into(&z, &mut sig);
                let mut dzh = vec![0.0; n];
                let mut dz = vec![0.0; n];
                for (ch, c) in sig_h.chunks(n).zip(sig.chunks(n)) {
                    let xi: f64 = rng.sample(StandardNormal);
                    for r in 0..n {
                        dzh[r] += ch[r] * sq * xi;
                        dz[r] += c[r] * sq * xi;
                    }
                }
                if ratio > 0.0 {
                    model.drift().eval_into(&zh, &mut b);
                    for r in 0..n {
                        dzh[r] += ratio * b[r] * dt;
                    }
                    if !model.sigma0().is_zero() {
                        model.sigma0().eval_into(&zh, &mut sig0);
                        let scale = ratio.sqrt() * sq;
                        for col in sig0.chunks(n) {
                            let eta: f64 = rng.sample(StandardNormal);
                            for r in 0..n {
                                dzh[r] += scale * col[r] * eta;
                            }
                        }
                    }
                }
                for r in 0..n {
                    zh[r] += dzh[r];
                    z[r] += dz[r];
                }
                if config.projection {
                    simplex.euclidean_project_in_place(&mut zh);
                    simplex.euclidean_project_in_place(&mut z);
                }
                t = if last { gamma } else { t + dt };
                if zh.iter().chain(&z).any(|v| !v.is_finite()) {
                    return Err(SdeError::NonFinite { path, time: t });
                }
            }
            Ok(zh.iter().zip(&z).map(|(a, b)| (a - b) * (a - b)).sum())
        })
        .collect();
    let squared_distances = results.into_iter().collect::<Result<Vec<f64>, _>>()?;
    let mean = Estimate::from_samples(&squared_distances);
    Ok(CouplingResult {
        gamma,
        h,
        squared_distances,
        mean,
        bound: gronwall_bound(model.bound(), model.lipschitz(), gamma, h),
    })
}

#[cfg(test)]
mod tests;
