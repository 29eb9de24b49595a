//! Wasserstein-1 distance between finitely supported laws.
//!
//! On the line the optimal coupling is monotone, so `W1 = ∫|F⁻¹_μ − F⁻¹_ν|`.
//! Elsewhere the transport problem is solved exactly as a min-cost flow by
//! successive shortest paths, which is plenty for supports of a few dozen
//! points. Larger supports are first aggregated on a grid, if allowed.

use serde::Serialize;

use super::{EmpiricalLaw, MetricsError};
use crate::simplex::distance;

/// Largest support solved exactly without binning.
pub const MAX_EXACT_SUPPORT: usize = 64;

const FLOW_EPS: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Wasserstein {
    pub value: f64,
    /// Whether either law was aggregated on a grid first.
    pub binned: bool,
    /// Upper bound on `|value − W1(μ, ν)|` introduced by binning.
    pub binning_error: f64,
}

pub fn wasserstein1(mu: &EmpiricalLaw, nu: &EmpiricalLaw, allow_binning: bool) -> Result<Wasserstein, MetricsError> {
    if mu.dim() != nu.dim() {
        return Err(MetricsError::LengthMismatch { expected: mu.dim(), got: nu.dim() });
    }
    // Solve in a canonical argument order so that symmetry holds bit for bit.
    let (mu, nu) = if canonical_order(mu, nu) == std::cmp::Ordering::Greater { (nu, mu) } else { (mu, nu) };
    if mu.dim() == 1 {
        return Ok(Wasserstein { value: quantile_w1(mu, nu), binned: false, binning_error: 0.0 });
    }
    if mu.len() <= MAX_EXACT_SUPPORT && nu.len() <= MAX_EXACT_SUPPORT {
        return Ok(Wasserstein { value: transport_cost(mu, nu), binned: false, binning_error: 0.0 });
    }
    if !allow_binning {
        return Err(MetricsError::SupportTooLarge { size: mu.len().max(nu.len()), limit: MAX_EXACT_SUPPORT });
    }
    let (bm, bn, radius) = bin_pair(mu, nu);
    Ok(Wasserstein { value: transport_cost(&bm, &bn), binned: true, binning_error: 2.0 * radius })
}

fn canonical_order(a: &EmpiricalLaw, b: &EmpiricalLaw) -> std::cmp::Ordering {
    let flat = |l: &EmpiricalLaw| -> Vec<f64> { l.points().iter().flatten().chain(l.weights()).copied().collect() };
    a.len().cmp(&b.len()).then_with(|| {
        flat(a)
            .iter()
            .zip(flat(b).iter())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    })
}

fn sorted(law: &EmpiricalLaw) -> Vec<(f64, f64)> {
    let mut v: Vec<(f64, f64)> = law.points().iter().map(|p| p[0]).zip(law.weights().iter().copied()).collect();
    v.sort_by(|a, b| a.0.total_cmp(&b.0));
    v
}

/// `∫₀¹ |F⁻¹_μ(u) − F⁻¹_ν(u)| du` by merging the two staircases.
fn quantile_w1(mu: &EmpiricalLaw, nu: &EmpiricalLaw) -> f64 {
    let a = sorted(mu);
    let b = sorted(nu);
    let (mut i, mut j) = (0, 0);
    let (mut left_a, mut left_b) = (a[0].1, b[0].1);
    let mut total = 0.0;
    while i < a.len() && j < b.len() {
        let m = left_a.min(left_b);
        total += m * (a[i].0 - b[j].0).abs();
        left_a -= m;
        left_b -= m;
        if left_a <= FLOW_EPS {
            i += 1;
            if i < a.len() {
                left_a += a[i].1;
            }
        }
        if left_b <= FLOW_EPS {
            j += 1;
            if j < b.len() {
                left_b += b[j].1;
            }
        }
    }
    total
}

/// Exact optimal transport cost with Euclidean ground cost.
fn transport_cost(mu: &EmpiricalLaw, nu: &EmpiricalLaw) -> f64 {
    let (m, n) = (mu.len(), nu.len());
    // Nodes: source, m suppliers, n consumers, sink.
    let source = 0;
    let sink = m + n + 1;
    let mut g = FlowGraph::new(m + n + 2);
    for (i, w) in mu.weights().iter().enumerate() {
        g.add_edge(source, 1 + i, *w, 0.0);
    }
    for (j, w) in nu.weights().iter().enumerate() {
        g.add_edge(1 + m + j, sink, *w, 0.0);
    }
    for i in 0..m {
        for j in 0..n {
            g.add_edge(1 + i, 1 + m + j, f64::INFINITY, distance(&mu.points()[i], &nu.points()[j]));
        }
    }
    g.min_cost_flow(source, sink)
}

struct Edge {
    to: usize,
    cap: f64,
    cost: f64,
}

struct FlowGraph {
    edges: Vec<Edge>,
    adj: Vec<Vec<usize>>,
}

impl FlowGraph {
    fn new(nodes: usize) -> Self {
        Self { edges: Vec::new(), adj: vec![Vec::new(); nodes] }
    }

    fn add_edge(&mut self, from: usize, to: usize, cap: f64, cost: f64) {
        self.adj[from].push(self.edges.len());
        self.edges.push(Edge { to, cap, cost });
        self.adj[to].push(self.edges.len());
        self.edges.push(Edge { to: from, cap: 0.0, cost: -cost });
    }

    /// Successive shortest paths (Bellman–Ford on the residual graph) until
    /// no augmenting path remains.
    fn min_cost_flow(&mut self, source: usize, sink: usize) -> f64 {
        let nodes = self.adj.len();
        let mut total = 0.0;
        loop {
            let mut dist = vec![f64::INFINITY; nodes];
            let mut via = vec![usize::MAX; nodes];
            dist[source] = 0.0;
            for _ in 0..nodes {
                let mut changed = false;
                for u in 0..nodes {
                    if dist[u].is_infinite() {
                        continue;
                    }
                    for &e in &self.adj[u] {
                        let edge = &self.edges[e];
                        if edge.cap > FLOW_EPS && dist[u] + edge.cost < dist[edge.to] - 1e-14 {
                            dist[edge.to] = dist[u] + edge.cost;
                            via[edge.to] = e;
                            changed = true;
                        }
                    }
                }
                if !changed {
                    break;
                }
            }
            if dist[sink].is_infinite() {
                return total;
            }
            let mut push = f64::INFINITY;
            let mut v = sink;
            while v != source {
                let e = via[v];
                push = push.min(self.edges[e].cap);
                v = self.edges[e ^ 1].to;
            }
            let mut v = sink;
            while v != source {
                let e = via[v];
                self.edges[e].cap -= push;
                self.edges[e ^ 1].cap += push;
                v = self.edges[e ^ 1].to;
            }
            total += push * dist[sink];
        }
    }
}

/// Aggregates both laws on the finest common grid with at most
/// [`MAX_EXACT_SUPPORT`] occupied cells each; every cell is represented by
/// the weighted mean of its points. Returns the binned laws and the largest
/// distance a point moved.
fn bin_pair(mu: &EmpiricalLaw, nu: &EmpiricalLaw) -> (EmpiricalLaw, EmpiricalLaw, f64) {
    let dim = mu.dim();
    let all = mu.points().iter().chain(nu.points());
    let mut lower = vec![f64::INFINITY; dim];
    let mut upper = vec![f64::NEG_INFINITY; dim];
    for p in all {
        for d in 0..dim {
            lower[d] = lower[d].min(p[d]);
            upper[d] = upper[d].max(p[d]);
        }
    }
    let width = (0..dim).map(|d| upper[d] - lower[d]).fold(0.0, f64::max).max(1e-12);
    let mut best = None;
    for per_axis in (1..=MAX_EXACT_SUPPORT).rev() {
        let h = width / per_axis as f64;
        let a = bin(mu, &lower, h);
        let b = bin(nu, &lower, h);
        if a.0.len() <= MAX_EXACT_SUPPORT && b.0.len() <= MAX_EXACT_SUPPORT {
            best = Some((a, b));
            break;
        }
    }
    let ((bm, rm), (bn, rn)) = best.expect("a single cell always fits");
    (bm, bn, rm.max(rn))
}

fn bin(law: &EmpiricalLaw, lower: &[f64], h: f64) -> (EmpiricalLaw, f64) {
    use std::collections::BTreeMap;
    let mut cells: BTreeMap<Vec<i64>, (Vec<f64>, f64, Vec<usize>)> = BTreeMap::new();
    for (idx, (p, w)) in law.points().iter().zip(law.weights()).enumerate() {
        let key: Vec<i64> = p.iter().zip(lower).map(|(x, l)| ((x - l) / h).floor() as i64).collect();
        let entry = cells.entry(key).or_insert_with(|| (vec![0.0; p.len()], 0.0, Vec::new()));
        for (a, x) in entry.0.iter_mut().zip(p) {
            *a += w * x;
        }
        entry.1 += w;
        entry.2.push(idx);
    }
    let mut points = Vec::with_capacity(cells.len());
    let mut weights = Vec::with_capacity(cells.len());
    let mut radius = 0.0f64;
    for (_, (sum, w, members)) in cells {
        if w <= 0.0 {
            continue;
        }
        let centre: Vec<f64> = sum.iter().map(|s| s / w).collect();
        for &m in &members {
            radius = radius.max(distance(&law.points()[m], &centre));
        }
        points.push(centre);
        weights.push(w);
    }
    let total: f64 = weights.iter().sum();
    let weights = weights.iter().map(|w| w / total).collect();
    (EmpiricalLaw::new(points, weights).expect("binned weights are valid"), radius)
}
