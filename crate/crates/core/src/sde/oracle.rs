//! Closed form of `E_x g(X_t)` for affine drift and affine `g`.
//!
//! With `b(x) = Cx + d` the generator maps affine functions to affine
//! functions and the noise terms drop out, so the mean solves
//! `m' = Cm + d` whatever `γ`, `σ` and `σ₀` are:
//!
//! ```text
//! E_x g(X_t) = v·(e^{tC} x + ∫₀ᵗ e^{Cs} d ds) + l.
//! ```
//!
//! Both terms come from one exponential of the block matrix `[[C, d], [0, 0]]`.

use nalgebra::{DMatrix, DVector};

use crate::linalg::expm;
use crate::model::AffineDrift;
use crate::simplex::AffineFunction;

/// `(e^{tC} x + ∫₀ᵗ e^{Cs} d ds)`, the mean position at time `t`.
pub fn affine_mean(drift: &AffineDrift, t: f64, x: &[f64]) -> Vec<f64> {
    assert!(t >= 0.0, "t must be non-negative");
    let n = drift.dim();
    let mut block = DMatrix::zeros(n + 1, n + 1);
    block.view_mut((0, 0), (n, n)).copy_from(&(&drift.matrix * t));
    block.view_mut((0, n), (n, 1)).copy_from(&(&drift.offset * t));
    let e = expm(&block);
    let mut aug = DVector::from_element(n + 1, 1.0);
    aug.rows_mut(0, n).copy_from_slice(x);
    let m = e * aug;
    m.rows(0, n).iter().copied().collect()
}

pub fn affine_semigroup_oracle(drift: &AffineDrift, g: &AffineFunction, t: f64, x: &[f64]) -> f64 {
    g.eval(&affine_mean(drift, t, x))
}

/// The oracle at several times, sharing nothing but convenience.
pub fn affine_semigroup_oracle_batch(drift: &AffineDrift, g: &AffineFunction, times: &[f64], x: &[f64]) -> Vec<f64> {
    times.iter().map(|&t| affine_semigroup_oracle(drift, g, t, x)).collect()
}
