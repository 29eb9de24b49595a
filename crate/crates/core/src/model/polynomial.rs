//! Custom fields given as polynomial coefficient tables.
//!
//! ```json
//! {
//!   "dim": 1,
//!   "sigma": [[ [[1.0, [1]], [-1.0, [2]]] ]],
//!   "drift": [ [[1.0, [0]], [-3.0, [1]]] ],
//!   "zero_set": [[0.0], [1.0]]
//! }
//! ```
//!
//! Each polynomial is a list of `[coefficient, [exponents...]]` terms.
//! `sigma` and `sigma0` are row-major tables of polynomials.

use serde::{Deserialize, Serialize};

use super::{AffineDrift, CoefficientModel, MatrixField, ModelError, VectorField};
use crate::simplex::Simplex;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term(pub f64, pub Vec<u32>);

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Polynomial {
    pub terms: Vec<Term>,
}

impl Polynomial {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|Term(c, powers)| c * powers.iter().zip(x).map(|(&p, v)| v.powi(p as i32)).product::<f64>())
            .sum()
    }

    pub fn degree(&self) -> u32 {
        self.terms
            .iter()
            .filter(|t| t.0 != 0.0)
            .map(|t| t.1.iter().sum())
            .max()
            .unwrap_or(0)
    }

    fn check(&self, dim: usize, what: &str) -> Result<(), ModelError> {
        for Term(c, powers) in &self.terms {
            if !c.is_finite() || powers.len() != dim {
                return Err(ModelError::InvalidParameter {
                    name: what.to_string(),
                    reason: format!("every term needs a finite coefficient and {dim} exponents"),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolynomialModelSpec {
    pub dim: usize,
    pub sigma: Vec<Vec<Polynomial>>,
    #[serde(default)]
    pub sigma0: Option<Vec<Vec<Polynomial>>>,
    pub drift: Vec<Polynomial>,
    /// Declared `M`; estimated on a grid when absent.
    #[serde(default)]
    pub bound: Option<f64>,
    /// Declared `k`; estimated on a grid when absent.
    #[serde(default)]
    pub lipschitz: Option<f64>,
    #[serde(default)]
    pub zero_set: Vec<Vec<f64>>,
}

/// Margin applied to grid estimates of undeclared constants.
const ESTIMATE_MARGIN: f64 = 1.1;

fn table_field(table: &[Vec<Polynomial>], dim: usize, what: &str) -> Result<MatrixField, ModelError> {
    if table.len() != dim || table.is_empty() {
        return Err(ModelError::InvalidParameter { name: what.into(), reason: format!("needs {dim} rows") });
    }
    let cols = table[0].len();
    if cols == 0 || table.iter().any(|row| row.len() != cols) {
        return Err(ModelError::InvalidParameter { name: what.into(), reason: "rows must have equal, nonzero length".into() });
    }
    for p in table.iter().flatten() {
        p.check(dim, what)?;
    }
    let table = table.to_vec();
    Ok(MatrixField::new(dim, cols, move |x, out| {
        for (r, row) in table.iter().enumerate() {
            for (c, p) in row.iter().enumerate() {
                out[c * dim + r] = p.eval(x);
            }
        }
    }))
}

impl PolynomialModelSpec {
    pub fn build(&self, name: &str, simplex: &Simplex) -> Result<CoefficientModel, ModelError> {
        let dim = self.dim;
        if dim != simplex.dim() {
            return Err(ModelError::DimensionMismatch { model: dim, simplex: simplex.dim() });
        }
        let sigma = table_field(&self.sigma, dim, "sigma")?;
        let sigma0 = match &self.sigma0 {
            Some(t) => table_field(t, dim, "sigma0")?,
            None => MatrixField::zero(dim, 1),
        };
        if self.drift.len() != dim {
            return Err(ModelError::InvalidParameter { name: "drift".into(), reason: format!("needs {dim} entries") });
        }
        for p in &self.drift {
            p.check(dim, "drift")?;
        }
        let mut builder = CoefficientModel::builder(name, dim).sigma(sigma).sigma0(sigma0).zero_set(self.zero_set.clone());
        if self.drift.iter().all(|p| p.degree() <= 1) {
            let mut matrix = nalgebra::DMatrix::zeros(dim, dim);
            let mut offset = nalgebra::DVector::zeros(dim);
            for (r, p) in self.drift.iter().enumerate() {
                for Term(c, powers) in &p.terms {
                    match powers.iter().position(|&e| e == 1) {
                        Some(col) => matrix[(r, col)] += c,
                        None => offset[r] += c,
                    }
                }
            }
            builder = builder.affine_drift(AffineDrift::new(matrix, offset));
        } else {
            let drift = self.drift.clone();
            builder = builder.drift(VectorField::new(dim, move |x, out| {
                for (o, p) in out.iter_mut().zip(&drift) {
                    *o = p.eval(x);
                }
            }));
        }
        let provisional = builder.bound(0.0).lipschitz(0.0).build()?;
        let (bound, lipschitz) = match (self.bound, self.lipschitz) {
            (Some(b), Some(k)) => (b, k),
            (b, k) => {
                let est = super::verify_bounds(&provisional, simplex, 10_000, 20_000, 0);
                (
                    b.unwrap_or(est.max_drift_norm.max(est.max_sigma0_norm) * ESTIMATE_MARGIN),
                    k.unwrap_or(est.max_lipschitz_quotient * ESTIMATE_MARGIN),
                )
            }
        };
        for (what, v) in [("bound", bound), ("lipschitz", lipschitz)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(ModelError::InvalidParameter { name: what.into(), reason: format!("must be finite and ≥ 0, got {v}") });
            }
        }
        Ok(provisional.with_declared_constants(bound, lipschitz))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn interval_polynomial_matches_builtin() {
        let spec: PolynomialModelSpec = serde_json::from_value(json!({
            "dim": 1,
            "sigma": [[ [[1.0, [1]], [-1.0, [2]]] ]],
            "drift": [ [[1.0, [0]], [-3.0, [1]]] ],
            "zero_set": [[0.0], [1.0]]
        }))
        .unwrap();
        let s = Simplex::unit_interval();
        let m = spec.build("poly", &s).unwrap();
        assert!((m.sigma().eval(&[0.3])[(0, 0)] - 0.21).abs() < 1e-15);
        let a = m.affine_drift().expect("degree one drift");
        assert_eq!(a.matrix[(0, 0)], -3.0);
        assert_eq!(a.offset[0], 1.0);
        // Estimated constants sit slightly above the true ones (M = 2, k = 1).
        assert!(m.bound() >= 2.0 && m.bound() <= 2.0 * 1.1 + 1e-12);
        assert!(m.lipschitz() >= 0.99 && m.lipschitz() <= 1.1 + 1e-9);
    }

    #[test]
    fn nonaffine_drift_and_declared_constants() {
        let spec: PolynomialModelSpec = serde_json::from_value(json!({
            "dim": 2,
            "sigma": [[ [[1.0, [1, 1]]] ], [ [[0.0, [0, 0]]] ]],
            "drift": [ [[1.0, [2, 0]]], [] ],
            "bound": 3.0,
            "lipschitz": 4.0
        }))
        .unwrap();
        let m = spec.build("poly2", &Simplex::standard(2).unwrap()).unwrap();
        assert!(m.affine_drift().is_none());
        assert_eq!(m.drift().eval(&[0.5, 0.1]), vec![0.25, 0.0]);
        assert_eq!((m.bound(), m.lipschitz()), (3.0, 4.0));
    }

    #[test]
    fn shape_errors() {
        let spec: PolynomialModelSpec =
            serde_json::from_value(json!({"dim": 1, "sigma": [[ [[1.0, [1, 2]]] ]], "drift": [[]]})).unwrap();
        assert!(spec.build("bad", &Simplex::unit_interval()).is_err());
        assert!(serde_json::from_value::<PolynomialModelSpec>(json!({"dim": 1, "sigma": [], "drift": [], "extra": 1})).is_err());
    }
}
