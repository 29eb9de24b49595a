//! Small dense matrix helpers. Everything here works on matrices of size at
//! most a handful, so clarity wins over blocking or Padé machinery.

use nalgebra::DMatrix;

/// Terms of the Taylor series are accumulated until their 1-norm drops below
/// this value.
pub const TAYLOR_TERM_TOL: f64 = 1e-13;

/// Scaled matrices have 1-norm at most this before the series is summed.
const SCALED_NORM: f64 = 0.5;

const MAX_TERMS: usize = 60;

pub fn norm1(a: &DMatrix<f64>) -> f64 {
    (0..a.ncols())
        .map(|c| a.column(c).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `e^A` by scaling and squaring with a truncated Taylor series.
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    assert_eq!(a.nrows(), a.ncols(), "expm requires a square matrix");
    let n = a.nrows();
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    let norm = norm1(a);
    let mut squarings = 0u32;
    if norm > SCALED_NORM {
        squarings = (norm / SCALED_NORM).log2().ceil() as u32;
    }
    let scaled = a / 2f64.powi(squarings as i32);

    let mut sum = DMatrix::<f64>::identity(n, n);
    let mut term = DMatrix::<f64>::identity(n, n);
    for k in 1..=MAX_TERMS {
        term = &term * &scaled / k as f64;
        sum += &term;
        if norm1(&term) <= TAYLOR_TERM_TOL {
            break;
        }
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}
