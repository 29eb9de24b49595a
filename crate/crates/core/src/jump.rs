//! The limiting pure-jump chain on the vertices.
//!
//! As `γ → ∞` the slow process spends all but a vanishing fraction of time at
//! the vertices and jumps from `z_x` to `z` at rate `b(z_x)·∇H_z`. The
//! initial law is lifted to the vertices by averaging barycentric
//! coordinates.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::linalg::expm;
use crate::metrics::EmpiricalLaw;
use crate::model::CoefficientModel;
use crate::rng::path_rng;
use crate::sde::Estimate;
use crate::simplex::{distance, Simplex, SimplexError};

/// Row sums of a generator must vanish to this (relative to the row scale).
pub const CONSERVATION_TOL: f64 = 1e-10;
/// Negative off-diagonal rates above this are roundoff and get clamped.
pub const CLAMP_TOL: f64 = 1e-8;
/// States with exit rate at most this are absorbing.
pub const ABSORBING_RATE: f64 = 1e-12;
/// Largest `log2` of the coefficient count accepted by [`r_linearize`].
pub const MAX_TENSOR_LOG2: f64 = 20.0;

#[derive(Debug, Error)]
pub enum JumpError {
    #[error("declared zero set {declared:?} is not the vertex set of the simplex")]
    ZeroSetMismatch { declared: Vec<Vec<f64>> },
    #[error("row {row} sums to {sum:e}, not zero")]
    NonConservative { row: usize, sum: f64 },
    #[error("rate from vertex {from} to vertex {to} is {rate:e}: the drift points outward")]
    NegativeRate { from: usize, to: usize, rate: f64 },
    #[error("invalid generator: {0}")]
    InvalidGenerator(String),
    #[error("invalid vertex law: {0}")]
    InvalidLaw(String),
    #[error("times must be non-negative and nondecreasing")]
    UnsortedTimes,
    #[error("{what}: expected length {expected}, got {got}")]
    LengthMismatch { what: &'static str, expected: usize, got: usize },
    #[error("(n+1)^r = {vertices}^{r} coefficients exceed the limit 2^{MAX_TENSOR_LOG2}")]
    TensorTooLarge { vertices: usize, r: usize },
    #[error("sample {point:?} lies outside the simplex")]
    OutsideSupport { point: Vec<f64> },
    #[error(transparent)]
    Simplex(#[from] SimplexError),
}

/// A conservative rate matrix with one state per vertex.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JumpGenerator {
    #[serde(serialize_with = "serialize_rows")]
    q: DMatrix<f64>,
    labels: Vec<Vec<f64>>,
}

fn serialize_rows<S: serde::Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
    matrix_rows(m).serialize(s)
}

pub(crate) fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|r| m.row(r).iter().copied().collect()).collect()
}

fn row_scale(q: &DMatrix<f64>, row: usize) -> f64 {
    q.row(row).iter().map(|v| v.abs()).fold(1.0, f64::max)
}

impl JumpGenerator {
    /// Checks conservation, sign of the off-diagonals and of the diagonal.
    pub fn new(q: DMatrix<f64>, labels: Vec<Vec<f64>>) -> Result<Self, JumpError> {
        if q.nrows() != q.ncols() || q.nrows() == 0 {
            return Err(JumpError::InvalidGenerator("rate matrix must be square and nonempty".into()));
        }
        if labels.len() != q.nrows() {
            return Err(JumpError::LengthMismatch { what: "labels", expected: q.nrows(), got: labels.len() });
        }
        if q.iter().any(|v| !v.is_finite()) {
            return Err(JumpError::InvalidGenerator("rates must be finite".into()));
        }
        for r in 0..q.nrows() {
            let sum: f64 = q.row(r).sum();
            if sum.abs() > CONSERVATION_TOL * row_scale(&q, r) {
                return Err(JumpError::NonConservative { row: r, sum });
            }
            for c in 0..q.ncols() {
                if r != c && q[(r, c)] < -CONSERVATION_TOL {
                    return Err(JumpError::NegativeRate { from: r, to: c, rate: q[(r, c)] });
                }
            }
            if q[(r, r)] > CONSERVATION_TOL {
                return Err(JumpError::InvalidGenerator(format!("diagonal entry {r} is positive")));
            }
        }
        Ok(Self { q, labels })
    }

    /// Generator on `0..size` with unlabelled states.
    pub fn from_rates(q: DMatrix<f64>) -> Result<Self, JumpError> {
        let labels = (0..q.nrows()).map(|i| vec![i as f64]).collect();
        Self::new(q, labels)
    }

    pub fn rates(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn size(&self) -> usize {
        self.q.nrows()
    }

    pub fn labels(&self) -> &[Vec<f64>] {
        &self.labels
    }

    pub fn exit_rate(&self, state: usize) -> f64 {
        -self.q[(state, state)]
    }

    /// `Q` as CSV rows.
    pub fn to_csv(&self) -> String {
        matrix_csv(&self.q)
    }
}

pub fn matrix_csv(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for r in 0..m.nrows() {
        let row: Vec<String> = m.row(r).iter().map(|v| v.to_string()).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn same_point_set(a: &[Vec<f64>], b: &[Vec<f64>]) -> bool {
    a.len() == b.len() && a.iter().all(|p| b.iter().any(|q| p.len() == q.len() && distance(p, q) <= 1e-9))
}

/// `Q_{x,z} = b(z_x)·∇H_z`.
///
/// Off-diagonal rates in `[−1e-8, 0)` are clamped to zero (with a warning)
/// and the diagonal rebalanced; more negative rates are an error, as is a
/// declared zero set other than the vertex set.
pub fn build_limit_generator(model: &CoefficientModel, simplex: &Simplex) -> Result<JumpGenerator, JumpError> {
    if !model.zero_set().is_empty() && !same_point_set(model.zero_set(), simplex.vertices()) {
        return Err(JumpError::ZeroSetMismatch { declared: model.zero_set().to_vec() });
    }
    let size = simplex.num_vertices();
    let mut q = DMatrix::zeros(size, size);
    for x in 0..size {
        let b = model.drift().eval(&simplex.vertices()[x]);
        for z in 0..size {
            let grad = simplex.harmonic_gradient(z)?;
            q[(x, z)] = b.iter().zip(grad).map(|(u, v)| u * v).sum::<f64>();
        }
        let sum: f64 = q.row(x).sum();
        if sum.abs() > CONSERVATION_TOL * row_scale(&q, x) {
            return Err(JumpError::NonConservative { row: x, sum });
        }
        for z in 0..size {
            if z == x {
                continue;
            }
            let rate = q[(x, z)];
            if rate < -CLAMP_TOL {
                return Err(JumpError::NegativeRate { from: x, to: z, rate });
            }
            if rate < 0.0 {
                log::warn!("clamping rate {rate:e} from vertex {x} to vertex {z} to zero");
                q[(x, z)] = 0.0;
            }
        }
        let off: f64 = (0..size).filter(|&z| z != x).map(|z| q[(x, z)]).sum();
        q[(x, x)] = -off;
    }
    JumpGenerator::new(q, simplex.vertices().to_vec())
}

/// Probability weights on the vertices.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VertexLaw {
    weights: Vec<f64>,
}

impl VertexLaw {
    pub fn new(weights: Vec<f64>) -> Result<Self, JumpError> {
        if weights.is_empty() || weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(JumpError::InvalidLaw("weights must be finite and non-negative".into()));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(JumpError::InvalidLaw(format!("weights sum to {sum}")));
        }
        Ok(Self { weights })
    }

    pub fn dirac(size: usize, at: usize) -> Self {
        let mut weights = vec![0.0; size];
        weights[at] = 1.0;
        Self { weights }
    }

    pub fn uniform(size: usize) -> Self {
        Self { weights: vec![1.0 / size as f64; size] }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// `μ e^{tQ}`.
    pub fn evolve(&self, generator: &JumpGenerator, t: f64) -> Vec<f64> {
        let p = transition_matrix(generator, t);
        (0..p.ncols()).map(|j| (0..p.nrows()).map(|i| self.weights[i] * p[(i, j)]).sum()).collect()
    }
}

/// Clips roundoff negatives and renormalizes barycentric averages.
fn law_from_barycentric(mut weights: Vec<f64>) -> VertexLaw {
    for w in &mut weights {
        *w = w.max(0.0);
    }
    let sum: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= sum;
    }
    VertexLaw { weights }
}

/// `λ(x)` for a point of `K` (within `tol`).
pub fn lift_point(x: &[f64], simplex: &Simplex, tol: f64) -> Result<VertexLaw, JumpError> {
    if x.len() != simplex.dim() {
        return Err(SimplexError::PointDimension { got: x.len(), dim: simplex.dim() }.into());
    }
    if !simplex.contains(x, tol) {
        return Err(JumpError::OutsideSupport { point: x.to_vec() });
    }
    Ok(law_from_barycentric(simplex.barycentric_coords(x)))
}

/// `μ̄(z) = ∫ H_z dμ`: the weighted mean of barycentric coordinates.
pub fn lift_measure(law: &EmpiricalLaw, simplex: &Simplex, tol: f64) -> Result<VertexLaw, JumpError> {
    let mut acc = vec![0.0; simplex.num_vertices()];
    let mut lambda = vec![0.0; simplex.num_vertices()];
    for (x, w) in law.points().iter().zip(law.weights()) {
        if x.len() != simplex.dim() {
            return Err(SimplexError::PointDimension { got: x.len(), dim: simplex.dim() }.into());
        }
        if !simplex.contains(x, tol) {
            return Err(JumpError::OutsideSupport { point: x.clone() });
        }
        simplex.barycentric_into(x, &mut lambda);
        for (a, l) in acc.iter_mut().zip(&lambda) {
            *a += w * l;
        }
    }
    Ok(law_from_barycentric(acc))
}

/// `e^{tQ}`.
pub fn transition_matrix(generator: &JumpGenerator, t: f64) -> DMatrix<f64> {
    assert!(t >= 0.0, "t must be non-negative");
    expm(&(generator.rates() * t))
}

/// Vertex indices of `n_paths` chain paths on a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpBatch {
    n_states: usize,
    n_paths: usize,
    t_grid: Vec<f64>,
    /// Path-major.
    states: Vec<usize>,
}

impl JumpBatch {
    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    pub fn t_grid(&self) -> &[f64] {
        &self.t_grid
    }

    pub fn state(&self, path: usize, time_index: usize) -> usize {
        self.states[path * self.t_grid.len() + time_index]
    }

    /// Fraction of paths at each state at one grid time, with binomial SEs.
    pub fn occupancy(&self, time_index: usize) -> Vec<Estimate> {
        let mut counts = vec![0usize; self.n_states];
        for p in 0..self.n_paths {
            counts[self.state(p, time_index)] += 1;
        }
        counts.iter().map(|&c| Estimate::proportion(c, self.n_paths)).collect()
    }

    /// Fraction of paths with `state(time_indices[k]) = vertices[k]` for all `k`.
    pub fn joint_frequency(&self, time_indices: &[usize], vertices: &[usize]) -> Estimate {
        assert_eq!(time_indices.len(), vertices.len());
        let hits = (0..self.n_paths)
            .filter(|&p| time_indices.iter().zip(vertices).all(|(&t, &v)| self.state(p, t) == v))
            .count();
        Estimate::proportion(hits, self.n_paths)
    }

    /// CSV with header `path,t,vertex_index`.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "path,t,vertex_index")?;
        for p in 0..self.n_paths {
            for (ti, t) in self.t_grid.iter().enumerate() {
                writeln!(w, "{p},{t},{}", self.state(p, ti))?;
            }
        }
        Ok(())
    }
}

fn categorical<R: Rng>(rng: &mut R, weights: impl Iterator<Item = f64>, total: f64) -> usize {
    let u = rng.gen::<f64>() * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (i, w) in weights.enumerate() {
        if w <= 0.0 {
            continue;
        }
        acc += w;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

/// Gillespie simulation: exponential holding times with rate `−Q_ii`, jumps
/// to `j` with probability `Q_ij / (−Q_ii)`. States with exit rate at most
/// [`ABSORBING_RATE`] hold forever.
pub fn simulate_jump_chain(
    generator: &JumpGenerator,
    initial: &VertexLaw,
    t_grid: &[f64],
    n_paths: usize,
    seed: u64,
) -> Result<JumpBatch, JumpError> {
    if initial.len() != generator.size() {
        return Err(JumpError::LengthMismatch { what: "initial law", expected: generator.size(), got: initial.len() });
    }
    if t_grid.iter().any(|t| !(*t >= 0.0)) || t_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(JumpError::UnsortedTimes);
    }
    let q = generator.rates();
    let size = generator.size();
    let paths: Vec<Vec<usize>> = (0..n_paths)
        .into_par_iter()
        .map(|path| {
            let mut rng = path_rng(seed, path);
            let mut state = categorical(&mut rng, initial.weights().iter().copied(), 1.0);
            let schedule = |state: usize, clock: f64, rng: &mut rand_chacha::ChaCha8Rng| {
                let rate = -q[(state, state)];
                if rate <= ABSORBING_RATE {
                    f64::INFINITY
                } else {
                    clock + rng.sample::<f64, _>(Exp1) / rate
                }
            };
            let mut next_jump = schedule(state, 0.0, &mut rng);
            let mut out = Vec::with_capacity(t_grid.len());
            for &t in t_grid {
                while next_jump <= t {
                    let rate = -q[(state, state)];
                    state = categorical(&mut rng, (0..size).map(|j| if j == state { 0.0 } else { q[(state, j)] }), rate);
                    next_jump = schedule(state, next_jump, &mut rng);
                }
                out.push(state);
            }
            out
        })
        .collect();
    Ok(JumpBatch { n_states: size, n_paths, t_grid: t_grid.to_vec(), states: paths.into_iter().flatten().collect() })
}

/// `P(X̄_{t_1} = z_{i_1}, …, X̄_{t_r} = z_{i_r})` for the chain started from
/// `initial`:
///
/// ```text
/// Σ_i μ̄_i Π_k [e^{(t_k − t_{k−1})Q}]_{i_{k−1}, i_k},   t_0 = 0.
/// ```
pub fn fdd_expectation(
    generator: &JumpGenerator,
    initial: &VertexLaw,
    times: &[f64],
    indices: &[usize],
) -> Result<f64, JumpError> {
    if times.len() != indices.len() {
        return Err(JumpError::LengthMismatch { what: "indices", expected: times.len(), got: indices.len() });
    }
    if initial.len() != generator.size() {
        return Err(JumpError::LengthMismatch { what: "initial law", expected: generator.size(), got: initial.len() });
    }
    if times.iter().any(|t| !(*t >= 0.0)) || times.windows(2).any(|w| w[1] < w[0]) {
        return Err(JumpError::UnsortedTimes);
    }
    if let Some(&bad) = indices.iter().find(|&&i| i >= generator.size()) {
        return Err(SimplexError::IndexOutOfRange { index: bad, count: generator.size() }.into());
    }
    let Some((&first, rest)) = indices.split_first() else {
        return Ok(1.0);
    };
    let p0 = transition_matrix(generator, times[0]);
    let mut value: f64 = initial.weights().iter().enumerate().map(|(i, w)| w * p0[(i, first)]).sum();
    let mut prev = first;
    for (k, &i) in rest.iter().enumerate() {
        let p = transition_matrix(generator, times[k + 1] - times[k]);
        value *= p[(prev, i)];
        prev = i;
    }
    Ok(value.clamp(0.0, 1.0))
}

/// Multi-affine interpolant `F(x_1..x_r) = Σ_i F_i Π_k λ_{i_k}(x_k)` of a
/// function on `K^r`, with `F_i = f(z_{i_1}, …, z_{i_r})`.
#[derive(Debug, Clone)]
pub struct MultiAffine {
    simplex: Simplex,
    r: usize,
    /// First index most significant.
    coefficients: Vec<f64>,
}

impl MultiAffine {
    pub fn order(&self) -> usize {
        self.r
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn coefficient(&self, indices: &[usize]) -> f64 {
        let base = self.simplex.num_vertices();
        self.coefficients[indices.iter().fold(0, |acc, &i| acc * base + i)]
    }

    /// Contracts the coefficient tensor with `λ(x_r)`, then `λ(x_{r−1})`, ….
    pub fn eval(&self, points: &[&[f64]]) -> f64 {
        assert_eq!(points.len(), self.r);
        let base = self.simplex.num_vertices();
        let mut current = self.coefficients.clone();
        let mut lambda = vec![0.0; base];
        for x in points.iter().rev() {
            self.simplex.barycentric_into(x, &mut lambda);
            current = current.chunks(base).map(|chunk| chunk.iter().zip(&lambda).map(|(c, l)| c * l).sum()).collect();
        }
        current[0]
    }
}

pub fn r_linearize<F>(f: F, simplex: &Simplex, r: usize) -> Result<MultiAffine, JumpError>
where
    F: Fn(&[&[f64]]) -> f64,
{
    let base = simplex.num_vertices();
    if r == 0 || r as f64 * (base as f64).log2() > MAX_TENSOR_LOG2 {
        return Err(JumpError::TensorTooLarge { vertices: base, r });
    }
    let count = base.pow(r as u32);
    let mut coefficients = Vec::with_capacity(count);
    let mut idx = vec![0usize; r];
    for flat in 0..count {
        let mut rest = flat;
        for k in (0..r).rev() {
            idx[k] = rest % base;
            rest /= base;
        }
        let args: Vec<&[f64]> = idx.iter().map(|&i| simplex.vertices()[i].as_slice()).collect();
        coefficients.push(f(&args));
    }
    Ok(MultiAffine { simplex: simplex.clone(), r, coefficients })
}
