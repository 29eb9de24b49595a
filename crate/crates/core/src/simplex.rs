//! Simplex geometry: barycentric coordinates, the affine hitting
//! probabilities `H_z` attached to each vertex, and the projector `P` onto
//! affine functions.
//!
//! For a simplex `K` with vertices `z_0..z_n`, the barycentric weight of
//! vertex `z` is the unique affine function equal to one at `z` and zero at
//! every other vertex. Because the pure-noise process is a bounded martingale
//! absorbed at the vertices, that weight is also the probability of being
//! absorbed at `z`, so `H_z = λ_z` and `P f = Σ_z λ_z f(z)`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest accepted 2-norm condition number of the edge matrix.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimplexError {
    #[error("a simplex needs at least two vertices")]
    TooFewVertices,
    #[error("vertex {index} has {got} coordinates, expected {dim}")]
    CoordinateCount { index: usize, got: usize, dim: usize },
    #[error("vertex {index} has a non-finite coordinate")]
    NonFinite { index: usize },
    #[error("vertices {0} and {1} coincide")]
    Duplicate(usize, usize),
    #[error("vertices are affinely dependent (edge-matrix condition number {0:e})")]
    Degenerate(f64),
    #[error("vertex index {index} out of range for {count} vertices")]
    IndexOutOfRange { index: usize, count: usize },
    #[error("point has {got} coordinates, expected {dim}")]
    PointDimension { got: usize, dim: usize },
    #[error("ball radius {eta} must be positive and below {limit} (half the minimal centre gap)")]
    RadiusTooLarge { eta: f64, limit: f64 },
}

/// An affine map `x ↦ v·x + l`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineFunction {
    pub gradient: Vec<f64>,
    pub offset: f64,
}

impl AffineFunction {
    pub fn new(gradient: Vec<f64>, offset: f64) -> Self {
        Self { gradient, offset }
    }

    pub fn constant(dim: usize, value: f64) -> Self {
        Self { gradient: vec![0.0; dim], offset: value }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        dot(&self.gradient, x) + self.offset
    }
}

/// `n + 1` affinely independent points of `R^n`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct Simplex {
    dim: usize,
    vertices: Vec<Vec<f64>>,
    edge_matrix: DMatrix<f64>,
    edge_inverse: DMatrix<f64>,
    /// `edge_inverse` in row-major order, used on the per-step path.
    inverse_rows: Vec<f64>,
    gradients: Vec<Vec<f64>>,
    min_gap: f64,
    condition: f64,
}

impl PartialEq for Simplex {
    fn eq(&self, other: &Self) -> bool {
        self.vertices == other.vertices
    }
}

impl TryFrom<Vec<Vec<f64>>> for Simplex {
    type Error = SimplexError;

    fn try_from(vertices: Vec<Vec<f64>>) -> Result<Self, Self::Error> {
        Simplex::new(vertices)
    }
}

impl From<Simplex> for Vec<Vec<f64>> {
    fn from(s: Simplex) -> Self {
        s.vertices
    }
}

impl Simplex {
    /// Builds a simplex from `n + 1` vertices in `R^n`. The edge matrix
    /// (columns `z_i - z_0`) is LU-factored once and its inverse cached.
    pub fn new(vertices: Vec<Vec<f64>>) -> Result<Self, SimplexError> {
        if vertices.len() < 2 {
            return Err(SimplexError::TooFewVertices);
        }
        let dim = vertices.len() - 1;
        for (index, v) in vertices.iter().enumerate() {
            if v.len() != dim {
                return Err(SimplexError::CoordinateCount { index, got: v.len(), dim });
            }
            if v.iter().any(|c| !c.is_finite()) {
                return Err(SimplexError::NonFinite { index });
            }
        }
        let mut min_gap = f64::INFINITY;
        for i in 0..vertices.len() {
            for j in (i + 1)..vertices.len() {
                let d = distance(&vertices[i], &vertices[j]);
                if d == 0.0 {
                    return Err(SimplexError::Duplicate(i, j));
                }
                min_gap = min_gap.min(d);
            }
        }

        let edge_matrix =
            DMatrix::from_fn(dim, dim, |r, c| vertices[c + 1][r] - vertices[0][r]);
        let singular = edge_matrix.clone().singular_values();
        let smax = singular.max();
        let smin = singular.min();
        let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
        if !(condition <= MAX_CONDITION) {
            return Err(SimplexError::Degenerate(condition));
        }
        let edge_inverse = edge_matrix
            .clone()
            .lu()
            .try_inverse()
            .ok_or(SimplexError::Degenerate(f64::INFINITY))?;

        let mut inverse_rows = Vec::with_capacity(dim * dim);
        for r in 0..dim {
            for c in 0..dim {
                inverse_rows.push(edge_inverse[(r, c)]);
            }
        }
        let mut gradients = vec![vec![0.0; dim]; dim + 1];
        for z in 1..=dim {
            for c in 0..dim {
                gradients[z][c] = edge_inverse[(z - 1, c)];
                gradients[0][c] -= edge_inverse[(z - 1, c)];
            }
        }

        Ok(Self {
            dim,
            vertices,
            edge_matrix,
            edge_inverse,
            inverse_rows,
            gradients,
            min_gap,
            condition,
        })
    }

    /// `{0, e_1, ..., e_n}`.
    pub fn standard(dim: usize) -> Result<Self, SimplexError> {
        let mut vertices = vec![vec![0.0; dim]];
        for i in 0..dim {
            let mut v = vec![0.0; dim];
            v[i] = 1.0;
            vertices.push(v);
        }
        Self::new(vertices)
    }

    pub fn unit_interval() -> Self {
        Self::new(vec![vec![0.0], vec![1.0]]).expect("[0,1] is a valid simplex")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_vertices(&self) -> usize {
        self.dim + 1
    }

    pub fn vertices(&self) -> &[Vec<f64>] {
        &self.vertices
    }

    pub fn vertex(&self, index: usize) -> Result<&[f64], SimplexError> {
        self.vertices
            .get(index)
            .map(Vec::as_slice)
            .ok_or(SimplexError::IndexOutOfRange { index, count: self.dim + 1 })
    }

    pub fn edge_matrix(&self) -> &DMatrix<f64> {
        &self.edge_matrix
    }

    pub fn edge_matrix_inverse(&self) -> &DMatrix<f64> {
        &self.edge_inverse
    }

    pub fn condition_number(&self) -> f64 {
        self.condition
    }

    pub fn min_vertex_gap(&self) -> f64 {
        self.min_gap
    }

    /// `sup_{z ∈ K} ‖z‖₂`, attained at a vertex.
    pub fn max_norm(&self) -> f64 {
        self.vertices.iter().map(|v| norm(v)).fold(0.0, f64::max)
    }

    pub fn centroid(&self) -> Vec<f64> {
        let w = 1.0 / self.num_vertices() as f64;
        let mut c = vec![0.0; self.dim];
        for v in &self.vertices {
            for (ci, vi) in c.iter_mut().zip(v) {
                *ci += w * vi;
            }
        }
        c
    }

    /// Point with the given barycentric weights.
    pub fn point_from_barycentric(&self, weights: &[f64]) -> Vec<f64> {
        let mut p = vec![0.0; self.dim];
        for (w, v) in weights.iter().zip(&self.vertices) {
            for (pi, vi) in p.iter_mut().zip(v) {
                *pi += w * vi;
            }
        }
        p
    }

    /// Barycentric weights `λ(x)`; they sum to one and may be negative
    /// outside `K`.
    pub fn barycentric_coords(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim + 1];
        self.barycentric_into(x, &mut out);
        out
    }

    /// Allocation-free form of [`Simplex::barycentric_coords`].
    pub fn barycentric_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.dim);
        debug_assert_eq!(out.len(), self.dim + 1);
        let origin = &self.vertices[0];
        let mut rest = 0.0;
        for r in 0..self.dim {
            let row = &self.inverse_rows[r * self.dim..(r + 1) * self.dim];
            let mut acc = 0.0;
            for c in 0..self.dim {
                acc += row[c] * (x[c] - origin[c]);
            }
            out[r + 1] = acc;
            rest += acc;
        }
        out[0] = 1.0 - rest;
    }

    /// Constant gradient of the affine function `H_z`.
    pub fn harmonic_gradient(&self, vertex: usize) -> Result<&[f64], SimplexError> {
        self.gradients
            .get(vertex)
            .map(Vec::as_slice)
            .ok_or(SimplexError::IndexOutOfRange { index: vertex, count: self.dim + 1 })
    }

    /// `H_z` as an [`AffineFunction`].
    pub fn harmonic_function(&self, vertex: usize) -> Result<AffineFunction, SimplexError> {
        let gradient = self.harmonic_gradient(vertex)?.to_vec();
        let offset = 1.0 - dot(&gradient, &self.vertices[vertex]);
        Ok(AffineFunction { gradient, offset })
    }

    /// `P f = Σ_z H_z f(z)`: the unique affine function matching `f` at the
    /// vertices.
    pub fn project_function<F>(&self, f: F) -> AffineFunction
    where
        F: Fn(&[f64]) -> f64,
    {
        let values: Vec<f64> = self.vertices.iter().map(|v| f(v)).collect();
        self.affine_from_vertex_values(&values)
    }

    /// Affine interpolant of per-vertex values.
    pub fn affine_from_vertex_values(&self, values: &[f64]) -> AffineFunction {
        debug_assert_eq!(values.len(), self.dim + 1);
        let mut gradient = vec![0.0; self.dim];
        for (value, grad) in values.iter().zip(&self.gradients) {
            for (g, gi) in gradient.iter_mut().zip(grad) {
                *g += value * gi;
            }
        }
        // Pin the offset at z_0 so that vertex values are reproduced to roundoff.
        let offset = values[0] - dot(&gradient, &self.vertices[0]);
        AffineFunction { gradient, offset }
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        let mut lambda = vec![0.0; self.dim + 1];
        self.barycentric_into(x, &mut lambda);
        lambda.iter().all(|&l| l >= -tol)
    }

    /// Closest point of `K` to `x` in the Euclidean norm.
    ///
    /// Points already in `K` are returned unchanged. Otherwise every face is
    /// tried: `x` is projected onto the face's affine hull and kept when the
    /// foot lies inside the face. The nearest feasible foot wins. This is
    /// exact and costs `2^(n+1) - 1` small solves.
    pub fn euclidean_project(&self, x: &[f64]) -> Vec<f64> {
        let mut out = x.to_vec();
        self.euclidean_project_in_place(&mut out);
        out
    }

    pub fn euclidean_project_in_place(&self, x: &mut [f64]) {
        if self.contains(x, 0.0) {
            return;
        }
        let count = self.dim + 1;
        let mut best: Option<(f64, Vec<f64>)> = None;
        for mask in 1u32..(1u32 << count) {
            let face: Vec<usize> = (0..count).filter(|i| mask & (1 << i) != 0).collect();
            if let Some(foot) = self.project_onto_face(x, &face) {
                let d = distance(&foot, x);
                if best.as_ref().map_or(true, |(bd, _)| d < *bd) {
                    best = Some((d, foot));
                }
            }
        }
        let (_, foot) = best.expect("every vertex is a feasible face");
        x.copy_from_slice(&foot);
    }

    fn project_onto_face(&self, x: &[f64], face: &[usize]) -> Option<Vec<f64>> {
        let base = &self.vertices[face[0]];
        if face.len() == 1 {
            return Some(base.clone());
        }
        let k = face.len() - 1;
        let dirs = DMatrix::from_fn(self.dim, k, |r, c| self.vertices[face[c + 1]][r] - base[r]);
        let rhs = DVector::from_fn(self.dim, |r, _| x[r] - base[r]);
        let gram = dirs.transpose() * &dirs;
        let coeffs = gram.lu().solve(&(dirs.transpose() * rhs))?;
        let first = 1.0 - coeffs.sum();
        const FEASIBLE: f64 = -1e-12;
        if first < FEASIBLE || coeffs.iter().any(|&c| c < FEASIBLE) {
            return None;
        }
        let foot = DVector::from_column_slice(base) + dirs * coeffs;
        Some(foot.iter().copied().collect())
    }

    /// Index of the vertex whose closed `η`-ball contains `x`, if any.
    pub fn vertex_ball_assignment(&self, x: &[f64], eta: f64) -> Result<Option<usize>, SimplexError> {
        let cover = BallCover::new(self.vertices.clone(), eta)?;
        Ok(cover.assign(x))
    }
}

/// Disjoint closed balls of common radius around a finite set of centres.
#[derive(Debug, Clone)]
pub struct BallCover {
    centers: Vec<Vec<f64>>,
    eta: f64,
}

impl BallCover {
    /// Rejects radii that would let two balls meet.
    pub fn new(centers: Vec<Vec<f64>>, eta: f64) -> Result<Self, SimplexError> {
        let limit = 0.5 * min_pairwise_distance(&centers);
        if !(eta > 0.0 && eta < limit) {
            return Err(SimplexError::RadiusTooLarge { eta, limit });
        }
        Ok(Self { centers, eta })
    }

    pub fn centers(&self) -> &[Vec<f64>] {
        &self.centers
    }

    pub fn radius(&self) -> f64 {
        self.eta
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn assign(&self, x: &[f64]) -> Option<usize> {
        self.centers.iter().position(|c| distance(c, x) <= self.eta)
    }
}

pub fn min_pairwise_distance(points: &[Vec<f64>]) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            best = best.min(distance(&points[i], &points[j]));
        }
    }
    best
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn triangle() -> Simplex {
        Simplex::standard(2).unwrap()
    }

    fn skewed_tetrahedron() -> Simplex {
        Simplex::new(vec![
            vec![0.3, -0.2, 0.1],
            vec![2.0, 0.1, -0.4],
            vec![0.5, 1.7, 0.2],
            vec![-0.4, 0.6, 1.9],
        ])
        .unwrap()
    }

    #[test]
    fn vertices_map_to_basis_weights() {
        for s in [Simplex::unit_interval(), triangle(), skewed_tetrahedron()] {
            for (i, v) in s.vertices().iter().enumerate() {
                let l = s.barycentric_coords(v);
                for (j, lj) in l.iter().enumerate() {
                    assert_abs_diff_eq!(*lj, if i == j { 1.0 } else { 0.0 }, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn edge_midpoint_and_interval_point() {
        let s = skewed_tetrahedron();
        let mid: Vec<f64> =
            s.vertices()[0].iter().zip(&s.vertices()[1]).map(|(a, b)| 0.5 * (a + b)).collect();
        let l = s.barycentric_coords(&mid);
        assert_abs_diff_eq!(l[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(l[1], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(l[2], 0.0, epsilon = 1e-12);

        let l = Simplex::unit_interval().barycentric_coords(&[0.3]);
        assert_abs_diff_eq!(l[0], 0.7, epsilon = 1e-15);
        assert_abs_diff_eq!(l[1], 0.3, epsilon = 1e-15);
    }

    #[test]
    fn rejects_bad_vertex_sets() {
        assert_eq!(Simplex::new(vec![vec![0.0]]), Err(SimplexError::TooFewVertices));
        assert!(matches!(
            Simplex::new(vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![2.0, 0.0]]),
            Err(SimplexError::Degenerate(_))
        ));
        assert!(matches!(
            Simplex::new(vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 0.0]]),
            Err(SimplexError::Duplicate(1, 2))
        ));
        assert!(matches!(
            Simplex::new(vec![vec![0.0, 0.0], vec![1.0], vec![0.0, 1.0]]),
            Err(SimplexError::CoordinateCount { index: 1, .. })
        ));
        // Nearly flat: condition number above the threshold.
        assert!(matches!(
            Simplex::new(vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.5, 1e-13]]),
            Err(SimplexError::Degenerate(_))
        ));
    }

    #[test]
    fn harmonic_gradients() {
        let s = Simplex::unit_interval();
        assert_eq!(s.harmonic_gradient(1).unwrap(), &[1.0]);
        assert_eq!(s.harmonic_gradient(0).unwrap(), &[-1.0]);
        assert!(matches!(s.harmonic_gradient(2), Err(SimplexError::IndexOutOfRange { .. })));

        let t = triangle();
        assert_eq!(t.harmonic_gradient(1).unwrap(), &[1.0, 0.0]);

        for s in [triangle(), skewed_tetrahedron()] {
            let mut total = vec![0.0; s.dim()];
            for z in 0..s.num_vertices() {
                for (t, g) in total.iter_mut().zip(s.harmonic_gradient(z).unwrap()) {
                    *t += g;
                }
            }
            assert!(total.iter().all(|t| t.abs() <= 1e-12));
        }
    }

    #[test]
    fn harmonic_function_matches_barycentric() {
        let s = skewed_tetrahedron();
        let x = [0.4, 0.5, 0.3];
        let l = s.barycentric_coords(&x);
        for z in 0..4 {
            assert_abs_diff_eq!(s.harmonic_function(z).unwrap().eval(&x), l[z], epsilon = 1e-12);
        }
    }

    #[test]
    fn projector_examples() {
        let s = Simplex::unit_interval();
        let p = s.project_function(|x| x[0] * x[0]);
        assert_abs_diff_eq!(p.gradient[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.offset, 0.0, epsilon = 1e-15);

        let t = skewed_tetrahedron();
        let g = AffineFunction::new(vec![0.7, -1.3, 2.1], 0.4);
        let pg = t.project_function(|x| g.eval(x));
        for (a, b) in pg.gradient.iter().zip(&g.gradient) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(pg.offset, g.offset, epsilon = 1e-12);

        let c = t.project_function(|_| 3.5);
        assert!(c.gradient.iter().all(|g| g.abs() < 1e-12));
        assert_abs_diff_eq!(c.offset, 3.5, epsilon = 1e-12);
    }

    #[test]
    fn containment() {
        let t = triangle();
        assert!(t.contains(&t.centroid(), 0.0));
        assert!(t.contains(&[1.0, 0.0], 0.0));
        assert!(!Simplex::unit_interval().contains(&[1.1], 1e-9));
    }

    #[test]
    fn euclidean_projection() {
        let s = Simplex::unit_interval();
        assert_eq!(s.euclidean_project(&[1.2]), vec![1.0]);
        assert_eq!(s.euclidean_project(&[0.4]), vec![0.4]);
        let t = triangle();
        let p = t.euclidean_project(&[1.0, 1.0]);
        assert_abs_diff_eq!(p[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(p[1], 0.5, epsilon = 1e-12);
        assert_eq!(t.euclidean_project(&[-1.0, -2.0]), vec![0.0, 0.0]);
        assert_eq!(t.euclidean_project(&[0.2, 0.3]), vec![0.2, 0.3]);
    }

    #[test]
    fn ball_assignment() {
        let s = Simplex::unit_interval();
        assert_eq!(s.vertex_ball_assignment(&[1.0], 0.1).unwrap(), Some(1));
        assert_eq!(s.vertex_ball_assignment(&[0.96], 0.05).unwrap(), Some(1));
        assert_eq!(s.vertex_ball_assignment(&[0.5], 0.05).unwrap(), None);
        assert!(matches!(
            s.vertex_ball_assignment(&[0.5], 0.5),
            Err(SimplexError::RadiusTooLarge { .. })
        ));
        let t = triangle();
        assert_eq!(t.vertex_ball_assignment(&t.centroid(), 0.01).unwrap(), None);
    }

    #[test]
    fn json_round_trip() {
        let t: Simplex = serde_json::from_str("[[0,0],[1,0],[0,1]]").unwrap();
        assert_eq!(t, triangle());
        assert_eq!(serde_json::to_string(&t).unwrap(), "[[0.0,0.0],[1.0,0.0],[0.0,1.0]]");
        assert!(serde_json::from_str::<Simplex>("[[0,0],[1,0],[2,0]]").is_err());
    }

    fn random_point(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
        (0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect()
    }

    #[test]
    fn partition_of_unity_and_affinity() {
        let s = skewed_tetrahedron();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let a = random_point(&mut rng, 3);
            let b = random_point(&mut rng, 3);
            let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
            let (la, lb, lm) =
                (s.barycentric_coords(&a), s.barycentric_coords(&b), s.barycentric_coords(&mid));
            assert!((la.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            for i in 0..4 {
                assert!((lm[i] - 0.5 * (la[i] + lb[i])).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let s = skewed_tetrahedron();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let h = 1e-6;
        for _ in 0..100 {
            let x = random_point(&mut rng, 3);
            for z in 0..4 {
                let g = s.harmonic_gradient(z).unwrap();
                for c in 0..3 {
                    let mut xp = x.clone();
                    let mut xm = x.clone();
                    xp[c] += h;
                    xm[c] -= h;
                    let fd = (s.barycentric_coords(&xp)[z] - s.barycentric_coords(&xm)[z]) / (2.0 * h);
                    assert!((fd - g[c]).abs() <= 1e-8, "fd {fd} vs {}", g[c]);
                }
            }
        }
    }

    #[test]
    fn projector_is_idempotent_on_smooth_functions() {
        let s = skewed_tetrahedron();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let (a, b, c, w): (f64, f64, f64, f64) =
                (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(0.5..3.0));
            let f = move |x: &[f64]| a * (w * x[0]).sin() + b * x[1] * x[2] + c * x[0].powi(3);
            let once = s.project_function(f);
            let twice = s.project_function(|x| once.eval(x));
            for _ in 0..10 {
                let x = random_point(&mut rng, 3);
                assert!((once.eval(&x) - twice.eval(&x)).abs() <= 1e-10);
            }
        }
    }

    proptest! {
        #[test]
        fn projection_lands_in_simplex_and_is_idempotent(x in -3.0f64..3.0, y in -3.0f64..3.0, z in -3.0f64..3.0) {
            let s = skewed_tetrahedron();
            let p = s.euclidean_project(&[x, y, z]);
            prop_assert!(s.contains(&p, 1e-9));
            let q = s.euclidean_project(&p);
            prop_assert!(distance(&p, &q) <= 1e-9);
        }

        #[test]
        fn projection_is_nearest_among_sampled_points(x in -2.0f64..3.0, y in -2.0f64..3.0, a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let t = triangle();
            let p = t.euclidean_project(&[x, y]);
            // Any point of K is at least as far from (x, y) as the projection.
            let (a, b) = if a + b > 1.0 { (1.0 - a, 1.0 - b) } else { (a, b) };
            prop_assert!(distance(&p, &[x, y]) <= distance(&[a, b], &[x, y]) + 1e-12);
        }
    }
}
