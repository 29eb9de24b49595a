//! Built-in coefficient models.
//!
//! * `interval_1d`: `σ = λ₀λ₁ (z₁ − z₀)` on an interval (`x(1−x)` on `[0,1]`)
//!   with affine drift through the endpoint values `b0`, `b1`.
//! * `wright_fisher_simplex`: Wright–Fisher columns `λ_iλ_j (z_j − z_i)` on
//!   any simplex, drift towards the centroid or affine through given vertex
//!   values.
//! * `counterexample_trap`: the triangle `A(−1,0) B(1,0) C(0,4)` whose noise
//!   also vanishes at `O = (0,0)`, with a horizontal-only noise box around
//!   `O` and an upward drift inside it.

use nalgebra::{DMatrix, DVector};
use serde_json::{Map, Value};

use super::{
    affine_fit_at_vertices, validate_boundary_compatibility, AffineDrift, CoefficientModel,
    LipschitzMap, MatrixField, ModelError,
};
use crate::simplex::{distance, Simplex};

pub const BUILTIN_NAMES: &[&str] = &["interval_1d", "wright_fisher_simplex", "counterexample_trap"];

/// Largest simplex dimension the built-in fields support (stack buffers).
const MAX_BUILTIN_DIM: usize = 15;

const COMPATIBILITY_SAMPLES: usize = 32;
const COMPATIBILITY_TOL: f64 = 1e-9;

/// Vertices `A, B, C` of the counterexample triangle followed by `O`.
pub fn counterexample_points() -> [[f64; 2]; 4] {
    [[-1.0, 0.0], [1.0, 0.0], [0.0, 4.0], [0.0, 0.0]]
}

/// Default simplex of a builtin, used when a configuration omits one.
pub fn default_simplex(name: &str) -> Result<Simplex, ModelError> {
    match name {
        "interval_1d" => Ok(Simplex::unit_interval()),
        "wright_fisher_simplex" => Ok(Simplex::standard(2)?),
        "counterexample_trap" => {
            let p = counterexample_points();
            Ok(Simplex::new(p[..3].iter().map(|v| v.to_vec()).collect())?)
        }
        other => Err(ModelError::UnknownBuiltin { name: other.to_string() }),
    }
}

/// Builds a builtin model on `simplex` from a JSON parameter object
/// (`null` means all defaults). The result is checked for boundary
/// compatibility before it is returned.
pub fn builtin_model(name: &str, params: &Value, simplex: &Simplex) -> Result<CoefficientModel, ModelError> {
    let empty = Map::new();
    let params = match params {
        Value::Null => &empty,
        Value::Object(map) => map,
        _ => {
            return Err(ModelError::InvalidParameter {
                name: "params".into(),
                reason: "must be a JSON object".into(),
            })
        }
    };
    let model = match name {
        "interval_1d" => interval_1d(params, simplex)?,
        "wright_fisher_simplex" => wright_fisher_simplex(params, simplex)?,
        "counterexample_trap" => counterexample_trap(params, simplex)?,
        other => return Err(ModelError::UnknownBuiltin { name: other.to_string() }),
    };
    let report = validate_boundary_compatibility(&model, simplex, COMPATIBILITY_SAMPLES, COMPATIBILITY_TOL);
    if !report.passed() {
        return Err(ModelError::Incompatible { name: name.to_string(), detail: report.summary() });
    }
    Ok(model)
}

fn check_keys(params: &Map<String, Value>, allowed: &[&str]) -> Result<(), ModelError> {
    for key in params.keys() {
        if !allowed.contains(&key.as_str()) {
            return Err(ModelError::InvalidParameter {
                name: key.clone(),
                reason: format!("unknown parameter; accepted: {}", allowed.join(", ")),
            });
        }
    }
    Ok(())
}

fn number(params: &Map<String, Value>, key: &str, default: f64) -> Result<f64, ModelError> {
    match params.get(key) {
        None => Ok(default),
        Some(v) => v.as_f64().filter(|x| x.is_finite()).ok_or_else(|| ModelError::InvalidParameter {
            name: key.to_string(),
            reason: format!("expected a finite number, got {v}"),
        }),
    }
}

fn nonnegative(params: &Map<String, Value>, key: &str, default: f64) -> Result<f64, ModelError> {
    let v = number(params, key, default)?;
    if v < 0.0 {
        return Err(ModelError::InvalidParameter { name: key.into(), reason: format!("must be ≥ 0, got {v}") });
    }
    Ok(v)
}

fn check_dim(simplex: &Simplex) -> Result<(), ModelError> {
    if simplex.dim() > MAX_BUILTIN_DIM {
        return Err(ModelError::InvalidParameter {
            name: "simplex".into(),
            reason: format!("builtin fields support dimension ≤ {MAX_BUILTIN_DIM}"),
        });
    }
    Ok(())
}

/// Vertex pairs carrying a Wright–Fisher column: cyclic on a triangle,
/// lexicographic otherwise.
pub(crate) fn wright_fisher_pairs(vertices: usize) -> Vec<(usize, usize)> {
    if vertices == 3 {
        vec![(0, 1), (1, 2), (2, 0)]
    } else {
        (0..vertices).flat_map(|i| ((i + 1)..vertices).map(move |j| (i, j))).collect()
    }
}

/// `scale · [λ_iλ_j (z_j − z_i)]` over [`wright_fisher_pairs`].
pub(crate) fn wright_fisher_field(simplex: &Simplex, scale: f64) -> MatrixField {
    let n = simplex.dim();
    let pairs = wright_fisher_pairs(n + 1);
    let edges: Vec<Vec<f64>> = pairs
        .iter()
        .map(|&(i, j)| simplex.vertices()[j].iter().zip(&simplex.vertices()[i]).map(|(a, b)| scale * (a - b)).collect())
        .collect();
    let s = simplex.clone();
    let cols = pairs.len();
    MatrixField::new(n, cols, move |x, out| {
        let mut lambda = [0.0; MAX_BUILTIN_DIM + 1];
        let lambda = &mut lambda[..n + 1];
        s.barycentric_into(x, lambda);
        for (c, (&(i, j), edge)) in pairs.iter().zip(&edges).enumerate() {
            let w = lambda[i] * lambda[j];
            for r in 0..n {
                out[c * n + r] = w * edge[r];
            }
        }
    })
}

/// `sup_K ‖σ_WF‖_F`: `Σ_{pairs} λ_iλ_j ≤ n / (2(n+1))` bounds every product.
fn wright_fisher_sup(simplex: &Simplex) -> f64 {
    let n = simplex.dim() as f64;
    let pairs = wright_fisher_pairs(simplex.num_vertices());
    let longest = pairs
        .iter()
        .map(|&(i, j)| distance(&simplex.vertices()[i], &simplex.vertices()[j]))
        .fold(0.0, f64::max);
    longest * n / (2.0 * (n + 1.0))
}

/// Exact `sup_K` of the Frobenius norm of the derivative of the Wright–Fisher
/// field. Its square is a sum of convex quadratics in `λ`, so the supremum is
/// attained at a vertex `z_v`, where only pairs containing `v` contribute
/// `‖z_j − z_v‖² ‖∇λ_j‖²`.
fn wright_fisher_lipschitz(simplex: &Simplex) -> f64 {
    let pairs = wright_fisher_pairs(simplex.num_vertices());
    let grad_sq = |j: usize| {
        let g = simplex.harmonic_gradient(j).expect("index in range");
        g.iter().map(|v| v * v).sum::<f64>()
    };
    (0..simplex.num_vertices())
        .map(|v| {
            pairs
                .iter()
                .filter_map(|&(i, j)| match (i == v, j == v) {
                    (true, _) => Some(j),
                    (_, true) => Some(i),
                    _ => None,
                })
                .map(|other| {
                    let d = distance(&simplex.vertices()[v], &simplex.vertices()[other]);
                    d * d * grad_sq(other)
                })
                .sum::<f64>()
        })
        .fold(0.0, f64::max)
        .sqrt()
}

/// `‖b‖₂` is convex, so on `K` an affine drift peaks at a vertex.
fn affine_sup(drift: &AffineDrift, simplex: &Simplex) -> f64 {
    simplex
        .vertices()
        .iter()
        .map(|v| drift.eval(v).iter().map(|c| c * c).sum::<f64>().sqrt())
        .fold(0.0, f64::max)
}

fn interval_1d(params: &Map<String, Value>, simplex: &Simplex) -> Result<CoefficientModel, ModelError> {
    check_keys(params, &["b0", "b1", "sigma0_scale"])?;
    if simplex.dim() != 1 {
        return Err(ModelError::DimensionMismatch { model: 1, simplex: simplex.dim() });
    }
    let b0 = number(params, "b0", 1.0)?;
    let b1 = number(params, "b1", -2.0)?;
    let scale = nonnegative(params, "sigma0_scale", 0.0)?;
    let drift = affine_fit_at_vertices(|x| if x == simplex.vertices()[0].as_slice() { vec![b0] } else { vec![b1] }, simplex);
    let sigma0_sup = scale * wright_fisher_sup(simplex);
    let mut builder = CoefficientModel::builder("interval_1d", 1)
        .sigma(wright_fisher_field(simplex, 1.0))
        .bound(b0.abs().max(b1.abs()).max(sigma0_sup))
        .lipschitz(wright_fisher_lipschitz(simplex))
        .zero_set(simplex.vertices().to_vec())
        .affine_drift(drift);
    if scale > 0.0 {
        builder = builder.sigma0(wright_fisher_field(simplex, scale));
    }
    builder.build()
}

fn wright_fisher_simplex(params: &Map<String, Value>, simplex: &Simplex) -> Result<CoefficientModel, ModelError> {
    check_keys(params, &["speed", "vertex_drifts", "sigma0_scale"])?;
    check_dim(simplex)?;
    let n = simplex.dim();
    let scale = nonnegative(params, "sigma0_scale", 0.0)?;
    let drift = match params.get("vertex_drifts") {
        Some(value) => {
            if params.contains_key("speed") {
                return Err(ModelError::InvalidParameter {
                    name: "speed".into(),
                    reason: "give either speed or vertex_drifts, not both".into(),
                });
            }
            let values: Vec<Vec<f64>> =
                serde_json::from_value(value.clone()).map_err(|e| ModelError::InvalidParameter {
                    name: "vertex_drifts".into(),
                    reason: e.to_string(),
                })?;
            if values.len() != n + 1 || values.iter().any(|v| v.len() != n || v.iter().any(|c| !c.is_finite())) {
                return Err(ModelError::InvalidParameter {
                    name: "vertex_drifts".into(),
                    reason: format!("expected {} finite vectors of length {n}", n + 1),
                });
            }
            let lookup = |x: &[f64]| {
                let i = simplex.vertices().iter().position(|v| v.as_slice() == x).expect("called at vertices");
                values[i].clone()
            };
            affine_fit_at_vertices(lookup, simplex)
        }
        None => {
            let speed = nonnegative(params, "speed", 1.0)?;
            let centroid = DVector::from_vec(simplex.centroid());
            AffineDrift::new(DMatrix::identity(n, n) * -speed, centroid * speed)
        }
    };
    let bound = affine_sup(&drift, simplex).max(scale * wright_fisher_sup(simplex));
    let mut builder = CoefficientModel::builder("wright_fisher_simplex", n)
        .sigma(wright_fisher_field(simplex, 1.0))
        .bound(bound)
        .lipschitz(wright_fisher_lipschitz(simplex))
        .zero_set(simplex.vertices().to_vec())
        .affine_drift(drift);
    if scale > 0.0 {
        builder = builder.sigma0(wright_fisher_field(simplex, scale));
    }
    builder.build()
}

/// Smooth step: 0 for `t ≤ 0`, 1 for `t ≥ 1`, built from `e^{−1/t}`.
pub(crate) fn smooth_step(t: f64) -> f64 {
    let psi = |u: f64| if u > 0.0 { (-1.0 / u).exp() } else { 0.0 };
    let a = psi(t);
    let b = psi(1.0 - t);
    if a + b == 0.0 {
        // Unreachable for finite t; keeps NaN inputs from propagating.
        return 0.0;
    }
    a / (a + b)
}

/// Equal to 1 on `[−0.55,0.55]×[0,1.05]`, 0 outside `[−0.6,0.6]×[0,1.15]`.
pub(crate) fn trap_cutoff(x: f64, y: f64) -> f64 {
    smooth_step((0.6 - x.abs()) / 0.05) * smooth_step((1.15 - y) / 0.1)
}

/// Vertical drift speed: 1 on `[−½,½]×[0,1]`, 0 outside `[−5/9,5/9]×[0,10/9]`.
pub(crate) fn trap_lift(x: f64, y: f64) -> f64 {
    smooth_step((5.0 / 9.0 - x.abs()) / (1.0 / 18.0)) * smooth_step((10.0 / 9.0 - y) / (1.0 / 9.0))
}

/// Horizontal noise amplitude inside the trap box.
pub(crate) fn trap_amplitude(x: f64, y: f64) -> f64 {
    x * x * (1.0 - x * x) + y * y
}

const TRAP_GRID_STEP: f64 = 0.01;
const TRAP_GRID_SAFETY: f64 = 1.5;
const TRAP_DECLARED_MARGIN: f64 = 1.1;

fn counterexample_trap(params: &Map<String, Value>, simplex: &Simplex) -> Result<CoefficientModel, ModelError> {
    check_keys(params, &["sigma0_scale"])?;
    let expected = default_simplex("counterexample_trap")?;
    let matches = simplex.num_vertices() == 3
        && simplex
            .vertices()
            .iter()
            .zip(expected.vertices())
            .all(|(a, b)| distance(a, b) <= 1e-12);
    if !matches {
        return Err(ModelError::InvalidParameter {
            name: "simplex".into(),
            reason: "counterexample_trap is defined on the triangle (-1,0), (1,0), (0,4)".into(),
        });
    }
    let scale = nonnegative(params, "sigma0_scale", 0.0)?;

    let wf = wright_fisher_field(simplex, 1.0);
    let sigma = MatrixField::new(2, 5, move |p, out| {
        let chi = trap_cutoff(p[0], p[1]);
        out[0] = chi * trap_amplitude(p[0], p[1]);
        out[1] = 0.0;
        out[2] = 0.0;
        out[3] = 0.0;
        wf.eval_into(p, &mut out[4..10]);
        for v in &mut out[4..10] {
            *v *= 1.0 - chi;
        }
    });
    let map = LipschitzMap::tabulate(&sigma, &[-1.0, 0.0], &[1.0, 4.0], TRAP_GRID_STEP, TRAP_GRID_SAFETY);
    let k = map.max() / TRAP_GRID_SAFETY * TRAP_DECLARED_MARGIN;
    let drift = super::VectorField::new(2, |p, out| {
        out[0] = 0.0;
        out[1] = trap_lift(p[0], p[1]);
    });
    let mut builder = CoefficientModel::builder("counterexample_trap", 2)
        .sigma(sigma)
        .drift(drift)
        .bound(1.0f64.max(scale * wright_fisher_sup(simplex)))
        .lipschitz(k)
        .zero_set(counterexample_points().iter().map(|p| p.to_vec()).collect())
        .local_lipschitz(map);
    if scale > 0.0 {
        builder = builder.sigma0(wright_fisher_field(simplex, scale));
    }
    builder.build()
}
