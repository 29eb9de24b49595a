//! Checks of a model against its simplex: boundary compatibility, the zero
//! set of the dominant noise, and the declared constants `M` and `k`.

use rand::Rng;
use rand_distr::Exp1;
use serde::Serialize;

use super::{frobenius, CoefficientModel, MatrixField};
use crate::rng::path_rng;
use crate::simplex::{distance, dot, Simplex};

/// Worst value of one boundary condition over all sampled points.
#[derive(Debug, Clone, Serialize)]
pub struct Violation {
    pub condition: &'static str,
    /// Largest offending quantity: a normal component, an outward drift
    /// speed, or a vertex norm.
    pub worst: f64,
    pub location: Vec<f64>,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundaryReport {
    pub tol: f64,
    pub conditions: Vec<Violation>,
}

impl BoundaryReport {
    pub fn passed(&self) -> bool {
        self.conditions.iter().all(|c| c.passed)
    }

    pub fn get(&self, condition: &str) -> Option<&Violation> {
        self.conditions.iter().find(|c| c.condition == condition)
    }

    pub fn summary(&self) -> String {
        self.conditions
            .iter()
            .filter(|c| !c.passed)
            .map(|c| format!("{} = {:.3e} at {:?}", c.condition, c.worst, c.location))
            .collect::<Vec<_>>()
            .join("; ")
    }
}

struct Worst {
    value: f64,
    location: Vec<f64>,
}

impl Worst {
    fn new() -> Self {
        Self { value: f64::NEG_INFINITY, location: Vec::new() }
    }

    fn offer(&mut self, value: f64, at: &[f64]) {
        if value > self.value || self.location.is_empty() {
            self.value = value;
            self.location = at.to_vec();
        }
    }

    fn finish(self, condition: &'static str, tol: f64) -> Violation {
        let passed = self.value <= tol;
        Violation { condition, worst: self.value, location: self.location, passed }
    }
}

/// Uniform point of the convex hull of `vertices` (Dirichlet(1) weights).
fn sample_hull<R: Rng>(rng: &mut R, vertices: &[&[f64]]) -> Vec<f64> {
    let weights: Vec<f64> = vertices.iter().map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let total: f64 = weights.iter().sum();
    let mut out = vec![0.0; vertices[0].len()];
    for (w, v) in weights.iter().zip(vertices) {
        for (o, c) in out.iter_mut().zip(v.iter()) {
            *o += w / total * c;
        }
    }
    out
}

fn max_normal_component(field: &MatrixField, x: &[f64], normal: &[f64], buf: &mut [f64]) -> f64 {
    field.eval_into(x, buf);
    let n = field.rows();
    buf.chunks(n).map(|col| dot(col, normal).abs()).fold(0.0, f64::max)
}

/// Samples each facet (the face where `λ_k = 0`, outward normal
/// `−∇H_k/‖∇H_k‖`) and records:
///
/// * `sigma_tangent`, `sigma0_tangent`: largest `|column · normal|`;
/// * `drift_inward`: largest `b · normal` (must not be positive);
/// * `sigma_vertex`, `sigma0_vertex`: largest Frobenius norm at a vertex.
pub fn validate_boundary_compatibility(
    model: &CoefficientModel,
    simplex: &Simplex,
    samples_per_face: usize,
    tol: f64,
) -> BoundaryReport {
    let samples = samples_per_face.max(1);
    let n = simplex.dim();
    let mut sigma_buf = vec![0.0; n * model.noise_dim()];
    let mut sigma0_buf = vec![0.0; n * model.sub_noise_dim()];
    let mut tangent = Worst::new();
    let mut tangent0 = Worst::new();
    let mut inward = Worst::new();
    for k in 0..simplex.num_vertices() {
        let grad = simplex.harmonic_gradient(k).expect("index in range");
        let len = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        let normal: Vec<f64> = grad.iter().map(|g| -g / len).collect();
        let face: Vec<&[f64]> = (0..simplex.num_vertices())
            .filter(|&i| i != k)
            .map(|i| simplex.vertices()[i].as_slice())
            .collect();
        let mut rng = path_rng(0x5eed_face, k);
        for s in 0..samples {
            let x = if s == 0 {
                let mut c = vec![0.0; n];
                for v in &face {
                    for (ci, vi) in c.iter_mut().zip(v.iter()) {
                        *ci += vi / face.len() as f64;
                    }
                }
                c
            } else {
                sample_hull(&mut rng, &face)
            };
            tangent.offer(max_normal_component(model.sigma(), &x, &normal, &mut sigma_buf), &x);
            tangent0.offer(max_normal_component(model.sigma0(), &x, &normal, &mut sigma0_buf), &x);
            inward.offer(dot(&model.drift().eval(&x), &normal), &x);
        }
    }
    let mut vertex = Worst::new();
    let mut vertex0 = Worst::new();
    for v in simplex.vertices() {
        model.sigma().eval_into(v, &mut sigma_buf);
        vertex.offer(frobenius(&sigma_buf), v);
        model.sigma0().eval_into(v, &mut sigma0_buf);
        vertex0.offer(frobenius(&sigma0_buf), v);
    }
    BoundaryReport {
        tol,
        conditions: vec![
            tangent.finish("sigma_tangent", tol),
            tangent0.finish("sigma0_tangent", tol),
            inward.finish("drift_inward", tol),
            vertex.finish("sigma_vertex", tol),
            vertex0.finish("sigma0_vertex", tol),
        ],
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ZeroSetScan {
    pub points: Vec<Vec<f64>>,
    pub grid_size: usize,
    /// Largest distance from a returned point to the declared zero set
    /// (infinite when points are returned but nothing is declared).
    pub max_distance_to_declared: f64,
}

/// Grid points of `K` (regular lattice of spacing `grid_step` over the
/// bounding box) where `‖σ‖_F ≤ tol`.
pub fn zero_set_scan(model: &CoefficientModel, simplex: &Simplex, grid_step: f64, tol: f64) -> ZeroSetScan {
    assert!(grid_step > 0.0, "grid_step must be positive");
    let n = simplex.dim();
    let mut buf = vec![0.0; n * model.noise_dim()];
    let mut points = Vec::new();
    let mut grid_size = 0;
    for x in box_lattice(simplex, grid_step) {
        if !simplex.contains(&x, 1e-9) {
            continue;
        }
        grid_size += 1;
        model.sigma().eval_into(&x, &mut buf);
        if frobenius(&buf) <= tol {
            points.push(x);
        }
    }
    let max_distance_to_declared = points
        .iter()
        .map(|p| model.zero_set().iter().map(|z| distance(p, z)).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max);
    ZeroSetScan { points, grid_size, max_distance_to_declared }
}

fn box_lattice(simplex: &Simplex, step: f64) -> Vec<Vec<f64>> {
    let n = simplex.dim();
    let lower: Vec<f64> = (0..n).map(|d| simplex.vertices().iter().map(|v| v[d]).fold(f64::INFINITY, f64::min)).collect();
    let upper: Vec<f64> = (0..n).map(|d| simplex.vertices().iter().map(|v| v[d]).fold(f64::NEG_INFINITY, f64::max)).collect();
    let counts: Vec<usize> = lower.iter().zip(&upper).map(|(l, u)| ((u - l) / step + 1e-9).floor() as usize + 1).collect();
    let total: usize = counts.iter().product();
    let mut out = Vec::with_capacity(total);
    for flat in 0..total {
        let mut rest = flat;
        let x: Vec<f64> = (0..n)
            .map(|d| {
                let i = rest % counts[d];
                rest /= counts[d];
                lower[d] + i as f64 * step
            })
            .collect();
        out.push(x);
    }
    out
}

/// Points of the barycentric lattice `{Σ (m_i / N) z_i : Σ m_i = N}` with the
/// smallest `N` giving at least `target` points.
pub(crate) fn simplex_lattice(simplex: &Simplex, target: usize) -> Vec<Vec<f64>> {
    let n = simplex.dim();
    let count = |res: usize| -> f64 { (1..=n).map(|i| (res + i) as f64 / i as f64).product() };
    let mut res = 1;
    while count(res) < target as f64 {
        res += 1;
    }
    let mut out = Vec::new();
    let mut weights = vec![0usize; n + 1];
    fn recurse(level: usize, left: usize, weights: &mut [usize], res: usize, simplex: &Simplex, out: &mut Vec<Vec<f64>>) {
        if level == weights.len() - 1 {
            weights[level] = left;
            let lambda: Vec<f64> = weights.iter().map(|&m| m as f64 / res as f64).collect();
            out.push(simplex.point_from_barycentric(&lambda));
            return;
        }
        for m in 0..=left {
            weights[level] = m;
            recurse(level + 1, left - m, weights, res, simplex, out);
        }
    }
    recurse(0, res, &mut weights, res, simplex, &mut out);
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundsReport {
    pub grid_points: usize,
    pub pairs: usize,
    pub max_drift_norm: f64,
    pub max_sigma0_norm: f64,
    pub max_lipschitz_quotient: f64,
    pub bound_ok: bool,
    pub lipschitz_ok: bool,
}

/// Checks the declared `M` on a lattice of about `grid_points` points and the
/// declared `k` against Frobenius difference quotients of `σ` over `pairs`
/// point pairs (half uniform on `K`, half at short range).
pub fn verify_bounds(model: &CoefficientModel, simplex: &Simplex, grid_points: usize, pairs: usize, seed: u64) -> BoundsReport {
    let n = simplex.dim();
    let lattice = simplex_lattice(simplex, grid_points);
    let mut sigma0_buf = vec![0.0; n * model.sub_noise_dim()];
    let mut max_drift_norm = 0.0f64;
    let mut max_sigma0_norm = 0.0f64;
    for x in &lattice {
        let b = model.drift().eval(x);
        max_drift_norm = max_drift_norm.max(dot(&b, &b).sqrt());
        model.sigma0().eval_into(x, &mut sigma0_buf);
        max_sigma0_norm = max_sigma0_norm.max(frobenius(&sigma0_buf));
    }

    let vertices: Vec<&[f64]> = simplex.vertices().iter().map(Vec::as_slice).collect();
    let scale = crate::simplex::min_pairwise_distance(simplex.vertices());
    let mut rng = path_rng(seed, 0);
    let len = n * model.noise_dim();
    let (mut a, mut b) = (vec![0.0; len], vec![0.0; len]);
    let mut max_q = 0.0f64;
    for p in 0..pairs {
        let x = sample_hull(&mut rng, &vertices);
        let y = if p % 2 == 0 {
            sample_hull(&mut rng, &vertices)
        } else {
            let mut y: Vec<f64> =
                x.iter().map(|c| c + scale * 1e-3 * (rng.gen::<f64>() - 0.5)).collect();
            simplex.euclidean_project_in_place(&mut y);
            y
        };
        let d = distance(&x, &y);
        if d <= 1e-12 {
            continue;
        }
        model.sigma().eval_into(&x, &mut a);
        model.sigma().eval_into(&y, &mut b);
        let diff: f64 = a.iter().zip(&b).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt();
        max_q = max_q.max(diff / d);
    }
    BoundsReport {
        grid_points: lattice.len(),
        pairs,
        max_drift_norm,
        max_sigma0_norm,
        max_lipschitz_quotient: max_q,
        bound_ok: max_drift_norm <= model.bound() && max_sigma0_norm <= model.bound(),
        lipschitz_ok: max_q <= model.lipschitz() * (1.0 + 1e-6),
    }
}
