//! Tabulated local Lipschitz bounds for the dominant noise, used by the step
//! controller when a single global constant would force absurdly small steps.

use super::MatrixField;

/// Piecewise-constant upper envelope of the local slope of `σ` on a regular
/// grid covering a bounding box. Queries outside the box are clamped to the
/// nearest cell.
#[derive(Debug, Clone)]
pub struct LipschitzMap {
    lower: Vec<f64>,
    step: f64,
    shape: Vec<usize>,
    cells: Vec<f64>,
}

impl LipschitzMap {
    /// Estimates `‖Dσ‖` (Frobenius norm of the derivative tensor, which
    /// dominates the Frobenius Lipschitz quotient) by central differences at
    /// the grid nodes, then stores for every cell the maximum over its own
    /// nodes and those of the adjacent cells, times `safety`.
    pub fn tabulate(sigma: &MatrixField, lower: &[f64], upper: &[f64], step: f64, safety: f64) -> Self {
        assert!(step > 0.0 && safety >= 1.0);
        let dim = lower.len();
        assert_eq!(upper.len(), dim);
        let shape: Vec<usize> =
            lower.iter().zip(upper).map(|(lo, hi)| (((hi - lo) / step).ceil() as usize).max(1)).collect();
        let node_shape: Vec<usize> = shape.iter().map(|s| s + 1).collect();
        let node_count: usize = node_shape.iter().product();

        let h = step * 1e-3;
        let len = sigma.rows() * sigma.cols();
        let mut plus = vec![0.0; len];
        let mut minus = vec![0.0; len];
        let mut point = vec![0.0; dim];
        let mut index = vec![0usize; dim];
        let mut slopes = vec![0.0; node_count];
        for (flat, slope) in slopes.iter_mut().enumerate() {
            unflatten(flat, &node_shape, &mut index);
            for d in 0..dim {
                point[d] = lower[d] + index[d] as f64 * step;
            }
            let mut total = 0.0;
            for d in 0..dim {
                let keep = point[d];
                point[d] = keep + h;
                sigma.eval_into(&point, &mut plus);
                point[d] = keep - h;
                sigma.eval_into(&point, &mut minus);
                point[d] = keep;
                total += plus
                    .iter()
                    .zip(&minus)
                    .map(|(p, m)| ((p - m) / (2.0 * h)).powi(2))
                    .sum::<f64>();
            }
            *slope = total.sqrt();
        }

        let cell_count: usize = shape.iter().product();
        let mut cells = vec![0.0; cell_count];
        let mut node = vec![0usize; dim];
        for (flat, cell) in cells.iter_mut().enumerate() {
            unflatten(flat, &shape, &mut index);
            // Nodes of the cell and its neighbours: offsets -1..=2 per axis.
            let mut best = 0.0f64;
            let span = 4usize.pow(dim as u32);
            'offsets: for o in 0..span {
                let mut rest = o;
                for d in 0..dim {
                    let off = (rest % 4) as isize - 1;
                    rest /= 4;
                    let n = index[d] as isize + off;
                    if n < 0 || n >= node_shape[d] as isize {
                        continue 'offsets;
                    }
                    node[d] = n as usize;
                }
                best = best.max(slopes[flatten(&node, &node_shape)]);
            }
            *cell = best * safety;
        }
        Self { lower: lower.to_vec(), step, shape, cells }
    }

    pub fn lookup(&self, x: &[f64]) -> f64 {
        let mut flat = 0usize;
        for d in (0..self.shape.len()).rev() {
            let raw = ((x[d] - self.lower[d]) / self.step).floor();
            let i = if raw.is_nan() || raw < 0.0 { 0 } else { (raw as usize).min(self.shape[d] - 1) };
            flat = flat * self.shape[d] + i;
        }
        self.cells[flat]
    }

    /// Largest tabulated value.
    pub fn max(&self) -> f64 {
        self.cells.iter().copied().fold(0.0, f64::max)
    }
}

// Axis 0 varies fastest.
fn unflatten(mut flat: usize, shape: &[usize], out: &mut [usize]) {
    for (o, s) in out.iter_mut().zip(shape) {
        *o = flat % s;
        flat /= s;
    }
}

fn flatten(index: &[usize], shape: &[usize]) -> usize {
    let mut flat = 0;
    for d in (0..shape.len()).rev() {
        flat = flat * shape[d] + index[d];
    }
    flat
}
