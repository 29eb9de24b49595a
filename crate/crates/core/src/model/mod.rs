//! Coefficient fields `σ`, `σ₀` and `b` of the two-timescale diffusion
//!
//! ```text
//! dX = √γ σ(X) dW + b(X) dt + σ₀(X) dB
//! ```
//!
//! on a simplex, together with the declared bound `M` (on `‖b‖₂` and
//! `‖σ₀‖`) and the Lipschitz constant `k` of `σ`. Noise matrices may be
//! rectangular (`n × m`); only `σσᵀ` enters the generator.

mod builtin;
mod lipschitz;
mod polynomial;
mod validate;

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::simplex::Simplex;

pub use builtin::{builtin_model, counterexample_points, default_simplex, BUILTIN_NAMES};
pub use lipschitz::LipschitzMap;
pub(crate) use validate::simplex_lattice;
pub use polynomial::{Polynomial, PolynomialModelSpec};
pub use validate::{
    validate_boundary_compatibility, verify_bounds, zero_set_scan, BoundaryReport, BoundsReport,
    Violation, ZeroSetScan,
};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("unknown builtin model '{name}'; available: {}", BUILTIN_NAMES.join(", "))]
    UnknownBuiltin { name: String },
    #[error("invalid parameter '{name}': {reason}")]
    InvalidParameter { name: String, reason: String },
    #[error("model dimension {model} does not match simplex dimension {simplex}")]
    DimensionMismatch { model: usize, simplex: usize },
    #[error("builtin '{name}' fails boundary compatibility: {detail}")]
    Incompatible { name: String, detail: String },
    #[error(transparent)]
    Simplex(#[from] crate::simplex::SimplexError),
}

type MatrixFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;
type VectorFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;

/// A matrix-valued field `K → R^{rows × cols}`, written column-major into
/// the output buffer.
#[derive(Clone)]
pub struct MatrixField {
    rows: usize,
    cols: usize,
    eval: Arc<MatrixFn>,
    zero: bool,
}

impl MatrixField {
    pub fn new<F>(rows: usize, cols: usize, f: F) -> Self
    where
        F: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    {
        Self { rows, cols, eval: Arc::new(f), zero: false }
    }

    pub fn zero(rows: usize, cols: usize) -> Self {
        Self { rows, cols, eval: Arc::new(|_, out: &mut [f64]| out.fill(0.0)), zero: true }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// True when the field was built as identically zero.
    pub fn is_zero(&self) -> bool {
        self.zero
    }

    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.rows * self.cols);
        (self.eval)(x, out)
    }

    pub fn eval(&self, x: &[f64]) -> DMatrix<f64> {
        let mut buf = vec![0.0; self.rows * self.cols];
        self.eval_into(x, &mut buf);
        DMatrix::from_column_slice(self.rows, self.cols, &buf)
    }
}

/// A vector field `K → R^n`.
#[derive(Clone)]
pub struct VectorField {
    dim: usize,
    eval: Arc<VectorFn>,
    zero: bool,
}

impl VectorField {
    pub fn new<F>(dim: usize, f: F) -> Self
    where
        F: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    {
        Self { dim, eval: Arc::new(f), zero: false }
    }

    pub fn zero(dim: usize) -> Self {
        Self { dim, eval: Arc::new(|_, out: &mut [f64]| out.fill(0.0)), zero: true }
    }

    pub fn constant(value: Vec<f64>) -> Self {
        let dim = value.len();
        Self::new(dim, move |_, out| out.copy_from_slice(&value))
    }

    pub fn affine(drift: AffineDrift) -> Self {
        let dim = drift.offset.len();
        Self::new(dim, move |x, out| drift.eval_into(x, out))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_zero(&self) -> bool {
        self.zero
    }

    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        (self.eval)(x, out)
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.eval_into(x, &mut out);
        out
    }
}

/// `x ↦ Cx + d`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineDrift {
    pub matrix: DMatrix<f64>,
    pub offset: DVector<f64>,
}

impl AffineDrift {
    pub fn new(matrix: DMatrix<f64>, offset: DVector<f64>) -> Self {
        assert_eq!(matrix.nrows(), offset.len());
        assert_eq!(matrix.nrows(), matrix.ncols());
        Self { matrix, offset }
    }

    pub fn dim(&self) -> usize {
        self.offset.len()
    }

    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        let n = self.offset.len();
        for r in 0..n {
            let mut acc = self.offset[r];
            for c in 0..n {
                acc += self.matrix[(r, c)] * x[c];
            }
            out[r] = acc;
        }
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.eval_into(x, &mut out);
        out
    }
}

/// The affine field agreeing with `b` at every vertex of the simplex.
pub fn affine_fit_at_vertices<F>(b: F, simplex: &Simplex) -> AffineDrift
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let n = simplex.dim();
    let values: Vec<Vec<f64>> = simplex.vertices().iter().map(|v| b(v)).collect();
    let mut matrix = DMatrix::zeros(n, n);
    let mut offset = DVector::zeros(n);
    for r in 0..n {
        let coord: Vec<f64> = values.iter().map(|v| v[r]).collect();
        let f = simplex.affine_from_vertex_values(&coord);
        for c in 0..n {
            matrix[(r, c)] = f.gradient[c];
        }
        offset[r] = f.offset;
    }
    AffineDrift { matrix, offset }
}

/// The fields of the two-timescale diffusion plus their declared constants.
#[derive(Clone)]
pub struct CoefficientModel {
    name: String,
    dim: usize,
    sigma: MatrixField,
    sigma0: MatrixField,
    drift: VectorField,
    bound: f64,
    lipschitz: f64,
    zero_set: Vec<Vec<f64>>,
    affine_drift: Option<AffineDrift>,
    local_lipschitz: Option<Arc<LipschitzMap>>,
}

impl fmt::Debug for CoefficientModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientModel")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("noise_dim", &self.sigma.cols)
            .field("sub_noise_dim", &self.sigma0.cols)
            .field("bound", &self.bound)
            .field("lipschitz", &self.lipschitz)
            .field("zero_set", &self.zero_set)
            .finish()
    }
}

impl CoefficientModel {
    pub fn builder(name: impl Into<String>, dim: usize) -> ModelBuilder {
        ModelBuilder {
            name: name.into(),
            dim,
            sigma: None,
            sigma0: None,
            drift: None,
            affine_drift: None,
            bound: None,
            lipschitz: None,
            zero_set: Vec::new(),
            local_lipschitz: None,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sigma(&self) -> &MatrixField {
        &self.sigma
    }

    pub fn sigma0(&self) -> &MatrixField {
        &self.sigma0
    }

    pub fn drift(&self) -> &VectorField {
        &self.drift
    }

    /// Number of Brownian drivers of the dominant noise.
    pub fn noise_dim(&self) -> usize {
        self.sigma.cols
    }

    pub fn sub_noise_dim(&self) -> usize {
        self.sigma0.cols
    }

    /// Declared `M` with `‖b‖₂ ≤ M` and `‖σ₀‖_F ≤ M` on `K`.
    pub fn bound(&self) -> f64 {
        self.bound
    }

    /// Declared Lipschitz constant `k` of `σ` (Frobenius norm).
    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    /// Declared points where `σ` vanishes.
    pub fn zero_set(&self) -> &[Vec<f64>] {
        &self.zero_set
    }

    /// The drift as `Cx + d` when it is exactly affine.
    pub fn affine_drift(&self) -> Option<&AffineDrift> {
        self.affine_drift.as_ref()
    }

    pub fn local_lipschitz(&self) -> Option<&LipschitzMap> {
        self.local_lipschitz.as_deref()
    }

    /// Copy of the model with the dominant noise and the drift/subdominant
    /// parts swapped for the given fields. Used by tests and by the
    /// dominant-process runs.
    pub fn with_drift(&self, drift: VectorField, affine: Option<AffineDrift>) -> Self {
        let mut m = self.clone();
        m.drift = drift;
        m.affine_drift = affine;
        m
    }

    pub fn with_sigma0(&self, sigma0: MatrixField) -> Self {
        let mut m = self.clone();
        m.sigma0 = sigma0;
        m
    }

    pub fn with_declared_constants(&self, bound: f64, lipschitz: f64) -> Self {
        let mut m = self.clone();
        m.bound = bound;
        m.lipschitz = lipschitz;
        m
    }

    /// Local Lipschitz bound used for step control: the tabulated value when
    /// a map is attached, capped by the declared global constant.
    pub fn step_lipschitz(&self, x: &[f64]) -> f64 {
        match &self.local_lipschitz {
            Some(map) => map.lookup(x).min(self.lipschitz),
            None => self.lipschitz,
        }
    }
}

pub struct ModelBuilder {
    name: String,
    dim: usize,
    sigma: Option<MatrixField>,
    sigma0: Option<MatrixField>,
    drift: Option<VectorField>,
    affine_drift: Option<AffineDrift>,
    bound: Option<f64>,
    lipschitz: Option<f64>,
    zero_set: Vec<Vec<f64>>,
    local_lipschitz: Option<Arc<LipschitzMap>>,
}

impl ModelBuilder {
    pub fn sigma(mut self, field: MatrixField) -> Self {
        self.sigma = Some(field);
        self
    }

    pub fn sigma0(mut self, field: MatrixField) -> Self {
        self.sigma0 = Some(field);
        self
    }

    pub fn drift(mut self, field: VectorField) -> Self {
        self.drift = Some(field);
        self
    }

    /// Sets an exactly affine drift; the evaluation field is derived from it.
    pub fn affine_drift(mut self, drift: AffineDrift) -> Self {
        self.drift = Some(VectorField::affine(drift.clone()));
        self.affine_drift = Some(drift);
        self
    }

    pub fn bound(mut self, bound: f64) -> Self {
        self.bound = Some(bound);
        self
    }

    pub fn lipschitz(mut self, k: f64) -> Self {
        self.lipschitz = Some(k);
        self
    }

    pub fn zero_set(mut self, points: Vec<Vec<f64>>) -> Self {
        self.zero_set = points;
        self
    }

    pub fn local_lipschitz(mut self, map: LipschitzMap) -> Self {
        self.local_lipschitz = Some(Arc::new(map));
        self
    }

    /// Missing fields default to zero; missing constants default to zero too,
    /// so callers that rely on them must set them.
    pub fn build(self) -> Result<CoefficientModel, ModelError> {
        let dim = self.dim;
        let sigma = self.sigma.unwrap_or_else(|| MatrixField::zero(dim, 1));
        let sigma0 = self.sigma0.unwrap_or_else(|| MatrixField::zero(dim, 1));
        let drift = self.drift.unwrap_or_else(|| VectorField::zero(dim));
        if sigma.rows != dim || sigma0.rows != dim || drift.dim != dim {
            return Err(ModelError::InvalidParameter {
                name: "fields".into(),
                reason: format!("field row counts must equal the dimension {dim}"),
            });
        }
        let bound = self.bound.unwrap_or(0.0);
        let lipschitz = self.lipschitz.unwrap_or(0.0);
        for (name, v) in [("bound", bound), ("lipschitz", lipschitz)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(ModelError::InvalidParameter {
                    name: name.into(),
                    reason: format!("must be finite and non-negative, got {v}"),
                });
            }
        }
        if let Some(p) = self.zero_set.iter().find(|p| p.len() != dim) {
            return Err(ModelError::InvalidParameter {
                name: "zero_set".into(),
                reason: format!("point {p:?} does not have {dim} coordinates"),
            });
        }
        Ok(CoefficientModel {
            name: self.name,
            dim,
            sigma,
            sigma0,
            drift,
            bound,
            lipschitz,
            zero_set: self.zero_set,
            affine_drift: self.affine_drift,
            local_lipschitz: self.local_lipschitz,
        })
    }
}

/// Frobenius norm of a column-major buffer.
pub(crate) fn frobenius(buf: &[f64]) -> f64 {
    buf.iter().map(|v| v * v).sum::<f64>().sqrt()
}
