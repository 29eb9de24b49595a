//! The Meyer–Zheng distance `d(w, w′) = ∫₀^∞ (1 ∧ ‖w_t − w′_t‖) e^{−t} dt`.

use serde::Serialize;

/// A path `t ↦ w_t ∈ R^n` that can be evaluated on `[0, T]`.
pub trait Trajectory {
    fn dim(&self) -> usize;
    fn eval_into(&self, t: f64, out: &mut [f64]);
}

/// Right-continuous step path: the value at `t` is that of the last knot
/// `≤ t` (the first knot's value before it).
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseConstant {
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

/// Linear interpolation between knots, constant outside them.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinear {
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

/// A path given by a closure.
pub struct FnPath<F> {
    pub dim: usize,
    pub f: F,
}

fn knot_index(times: &[f64], t: f64) -> usize {
    times.partition_point(|&s| s <= t).saturating_sub(1)
}

impl Trajectory for PiecewiseConstant {
    fn dim(&self) -> usize {
        self.values[0].len()
    }

    fn eval_into(&self, t: f64, out: &mut [f64]) {
        out.copy_from_slice(&self.values[knot_index(&self.times, t)]);
    }
}

impl Trajectory for PiecewiseLinear {
    fn dim(&self) -> usize {
        self.values[0].len()
    }

    fn eval_into(&self, t: f64, out: &mut [f64]) {
        let i = knot_index(&self.times, t);
        if i + 1 >= self.times.len() || t <= self.times[0] {
            out.copy_from_slice(&self.values[if t <= self.times[0] { 0 } else { i }]);
            return;
        }
        let (t0, t1) = (self.times[i], self.times[i + 1]);
        let s = (t - t0) / (t1 - t0);
        for (o, (a, b)) in out.iter_mut().zip(self.values[i].iter().zip(&self.values[i + 1])) {
            *o = a + s * (b - a);
        }
    }
}

impl<F: Fn(f64, &mut [f64])> Trajectory for FnPath<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval_into(&self, t: f64, out: &mut [f64]) {
        (self.f)(t, out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MzDistance {
    /// Trapezoidal value of the integral over `[0, T]`.
    pub value: f64,
    /// `e^{−T}`, bounding the neglected tail.
    pub tail_bound: f64,
}

pub fn mz_distance(w: &dyn Trajectory, w2: &dyn Trajectory, horizon: f64, step: f64) -> MzDistance {
    assert!(horizon >= 0.0 && step > 0.0);
    assert_eq!(w.dim(), w2.dim());
    let n = ((horizon / step).ceil() as usize).max(1);
    let h = horizon / n as f64;
    let mut a = vec![0.0; w.dim()];
    let mut b = vec![0.0; w.dim()];
    let mut integrand = |t: f64| {
        w.eval_into(t, &mut a);
        w2.eval_into(t, &mut b);
        let d = a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
        d.min(1.0) * (-t).exp()
    };
    let mut sum = 0.5 * (integrand(0.0) + integrand(horizon));
    for i in 1..n {
        sum += integrand(i as f64 * h);
    }
    MzDistance { value: sum * h, tail_bound: (-horizon).exp() }
}
