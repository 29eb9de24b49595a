//! Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
//! criterion fails. Pass criterion numbers as arguments to run a subset.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use savg::jump::{
    build_limit_generator, fdd_expectation, r_linearize, simulate_jump_chain, transition_matrix, JumpGenerator,
    VertexLaw,
};
use savg::metrics::{concentration_probability, dominant_batches, ergodic_table, BinnedLaw};
use savg::model::{builtin_model, default_simplex};
use savg::scenario::{load_config, run_suites, Suite};
use savg::sde::{coupled_rescaled_pair, estimate_expectation, estimate_h, gronwall_bound, simulate, Estimate, Initial, IntegratorConfig};
use savg::simplex::BallCover;
use savg::{CoefficientModel, Simplex};

const Z: f64 = 3.0;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome { passed, detail: detail.into() }
}

fn interval() -> (CoefficientModel, Simplex) {
    let s = Simplex::unit_interval();
    (builtin_model("interval_1d", &json!({"b0": 1.0, "b1": -2.0}), &s).unwrap(), s)
}

/// Limit law at time `t` of the two-state chain with rates 1 (0→1) and
/// 2 (1→0) started from (½, ½): P(X̄_t = 1) = 1/3 + e^{−3t}/6.
fn two_state_law(t: f64) -> [f64; 2] {
    let p1 = 1.0 / 3.0 + (-3.0 * t).exp() / 6.0;
    [1.0 - p1, p1]
}

/// `[e^{tQ}]_{ij}` for Q = [[−1, 1], [2, −2]].
fn two_state_transition(t: f64, i: usize, j: usize) -> f64 {
    let e = (-3.0 * t).exp();
    let stationary = [2.0 / 3.0, 1.0 / 3.0];
    let delta = if i == j { 1.0 } else { 0.0 };
    stationary[j] + (delta - stationary[j]) * e
}

fn criterion_1() -> Outcome {
    let (m, s) = interval();
    let cfg = IntegratorConfig::new(1e-4, 4000, 101, vec![0.25, 1.0]);
    let oracle = |t: f64| (-3.0 * t).exp() * 0.5 + (1.0 - (-3.0 * t).exp()) / 3.0;
    let mut ok = true;
    let mut per_gamma: Vec<Vec<Estimate>> = Vec::new();
    let mut detail = Vec::new();
    for gamma in [1.0, 10.0, 100.0] {
        let b = simulate(&m, &s, &Initial::Point(vec![0.5]), gamma, &cfg).unwrap();
        let mut row = Vec::new();
        for (ti, &t) in cfg.t_grid.iter().enumerate() {
            let e = estimate_expectation(&b, |x| x[0], ti);
            ok &= e.covers(oracle(t), Z);
            detail.push(format!("g={gamma} t={t}: {:.4}±{:.4} vs {:.4}", e.mean, e.stderr, oracle(t)));
            row.push(e);
        }
        per_gamma.push(row);
    }
    for i in 0..3 {
        for j in i + 1..3 {
            for k in 0..2 {
                ok &= per_gamma[i][k].consistent_with(&per_gamma[j][k], Z);
            }
        }
    }
    outcome(ok, detail.join("; "))
}

struct LawLadder {
    tv: Vec<Estimate>,
    unresolved: Vec<Estimate>,
    concentration: Vec<Estimate>,
    generator_ok: bool,
}

fn law_ladder() -> LawLadder {
    let (m, s) = interval();
    let gen = build_limit_generator(&m, &s).unwrap();
    let generator_ok = (0..2).all(|i| (0..2).all(|j| (gen.rates()[(i, j)] - [[-1.0, 1.0], [2.0, -2.0]][i][j]).abs() < 1e-12));
    let cfg = IntegratorConfig::new(1e-4, 4000, 202, vec![1.0]);
    let cover = BallCover::new(s.vertices().to_vec(), 0.05).unwrap();
    let target = two_state_law(1.0);
    let mut out = LawLadder { tv: vec![], unresolved: vec![], concentration: vec![], generator_ok };
    for gamma in [1.0, 10.0, 100.0] {
        let b = simulate(&m, &s, &Initial::Point(vec![0.5]), gamma, &cfg).unwrap();
        let binned = BinnedLaw::from_batch(&b, &cover, 0);
        out.tv.push(binned.extended_tv(&target).unwrap());
        out.unresolved.push(binned.unresolved);
        out.concentration.push(concentration_probability(&b, &s, 0.05, 0).unwrap());
    }
    out
}

fn criterion_2(l: &LawLadder) -> Outcome {
    let tv: Vec<f64> = l.tv.iter().map(|e| e.mean).collect();
    let monotone = tv.windows(2).all(|w| w[1] <= w[0]);
    let endpoint = tv[2] <= 0.05;
    let unresolved = l.unresolved[2].mean <= 0.03;
    outcome(
        l.generator_ok && monotone && endpoint && unresolved,
        format!(
            "Q ok {}, tv along gamma {tv:?} (nonincreasing {monotone}), tv(100) ≤ 0.05 {endpoint}, unresolved(100) = {} ≤ 0.03 {unresolved}",
            l.generator_ok, l.unresolved[2].mean
        ),
    )
}

fn criterion_3(l: &LawLadder) -> Outcome {
    let c: Vec<f64> = l.concentration.iter().map(|e| e.mean).collect();
    let increasing = c.windows(2).all(|w| w[1] > w[0]);
    let endpoint = c[2] >= 0.95;
    outcome(increasing && endpoint, format!("concentration {c:?} (increasing {increasing}), ≥ 0.95 at gamma=100 {endpoint}"))
}

fn criterion_4() -> Outcome {
    let (m, s) = interval();
    let starts: Vec<Vec<f64>> = (0..=10).map(|i| vec![i as f64 / 10.0]).collect();
    let horizons = [2.0, 8.0, 20.0];
    let cfg = IntegratorConfig::new(1e-3, 4000, 404, vec![1.0]);
    let batches = dominant_batches(&m, &s, &starts, &horizons, &cfg).unwrap();
    let square = ergodic_table(&s, |x| x[0] * x[0], &starts, &batches);
    let affine = ergodic_table(&s, |x| 2.0 * x[0] - 0.5, &starts, &batches);
    let sups: Vec<f64> = square.iter().map(|h| h.sup_error).collect();
    let decreasing = sups.windows(2).all(|w| w[1] < w[0]);
    let endpoint = sups[2] <= 0.05;
    let martingale = affine.iter().all(|h| h.within(Z));
    outcome(
        decreasing && endpoint && martingale,
        format!("sup errors {sups:?} (decreasing {decreasing}, ≤ 0.05 at T=20 {endpoint}), affine within 3 SE {martingale}"),
    )
}

fn criterion_5() -> Outcome {
    let (m, s) = interval();
    let mut ok = true;
    let mut detail = Vec::new();
    for (i, x0) in [0.25, 0.5, 0.75].into_iter().enumerate() {
        let cfg = IntegratorConfig::new(1e-3, 4000, 505 + i as u64, vec![20.0]);
        let h = estimate_h(&m, &s, &[x0], 20.0, 0.02, &cfg).unwrap();
        let expected = [1.0 - x0, x0];
        let matches = h.probabilities.iter().zip(expected).all(|(p, q)| p.covers(q, Z));
        let resolved = h.unresolved.mean <= 0.02;
        ok &= matches && resolved;
        detail.push(format!(
            "x0={x0}: ({:.4}, {:.4}) vs ({}, {}), unresolved {:.4}",
            h.probabilities[0].mean, h.probabilities[1].mean, expected[0], expected[1], h.unresolved.mean
        ));
    }
    outcome(ok, detail.join("; "))
}

fn criterion_6() -> Outcome {
    let (m, s) = interval();
    let (big_m, k) = (m.bound(), m.lipschitz());
    let cfg = IntegratorConfig::new(1e-4, 4000, 606, vec![1.0]);
    let mut ok = true;
    let mut detail = Vec::new();
    for gamma in [0.5, 1.0] {
        let mut means = Vec::new();
        for h in [0.1, 0.01] {
            let r = coupled_rescaled_pair(&m, &s, &Initial::Point(vec![0.5]), gamma, h, &cfg).unwrap();
            let bound = 3.0 * big_m * big_m * (h + h * h) * (3.0 * k * k * gamma).exp();
            ok &= (r.bound - bound).abs() <= 1e-12 * bound && (gronwall_bound(big_m, k, gamma, h) - bound).abs() <= 1e-12 * bound;
            ok &= r.mean.mean <= 1.1 * bound;
            detail.push(format!("g={gamma} h={h}: {:.3e} ≤ 1.1×{bound:.3e}", r.mean.mean));
            means.push(r.mean.mean);
        }
        ok &= means[1] < means[0];
    }
    outcome(ok, detail.join("; "))
}

fn criterion_7() -> Outcome {
    let (m, s) = interval();
    let gen = build_limit_generator(&m, &s).unwrap();
    let mu = VertexLaw::new(vec![0.5, 0.5]).unwrap();
    let times = [0.5, 1.0, 1.5];
    let chain = simulate_jump_chain(&gen, &mu, &times, 100_000, 707).unwrap();
    let mut ok = true;
    let mut worst_z: f64 = 0.0;
    for r in 1..=3 {
        for flat in 0..(1usize << r) {
            let idx: Vec<usize> = (0..r).map(|k| (flat >> (r - 1 - k)) & 1).collect();
            let formula = fdd_expectation(&gen, &mu, &times[..r], &idx).unwrap();
            // Independent closed form of the product formula.
            let mut closed: f64 = (0..2).map(|i| 0.5 * two_state_transition(times[0], i, idx[0])).sum();
            for k in 1..r {
                closed *= two_state_transition(times[k] - times[k - 1], idx[k - 1], idx[k]);
            }
            ok &= (formula - closed).abs() <= 1e-12;
            let freq = chain.joint_frequency(&(0..r).collect::<Vec<_>>(), &idx);
            ok &= freq.covers(formula, Z);
            worst_z = worst_z.max((freq.mean - formula).abs() / freq.stderr);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(7070);
    let tri = Simplex::standard(2).unwrap();
    let mut lin_err: f64 = 0.0;
    for simplex in [&s, &tri] {
        for r in 1..=3 {
            for _ in 0..20 {
                let c: Vec<f64> = (0..8).map(|_| rng.gen_range(-2.0..2.0)).collect();
                let f = |p: &[&[f64]]| {
                    let flat: Vec<f64> = p.iter().flat_map(|x| x.iter().copied()).collect();
                    c[0] * (c[1] * flat.iter().sum::<f64>()).sin()
                        + c[2] * flat.iter().map(|v| v * v).product::<f64>()
                        + c[3] * (c[4] * flat[0] + c[5]).exp()
                        + c[6] * flat.last().unwrap().powi(3)
                        + c[7]
                };
                let lin = r_linearize(f, simplex, r).unwrap();
                let base = simplex.num_vertices();
                for flat in 0..base.pow(r as u32) {
                    let mut rest = flat;
                    let mut pts: Vec<&[f64]> = Vec::with_capacity(r);
                    for _ in 0..r {
                        pts.push(&simplex.vertices()[rest % base]);
                        rest /= base;
                    }
                    lin_err = lin_err.max((lin.eval(&pts) - f(&pts)).abs());
                }
            }
        }
    }
    ok &= lin_err <= 1e-10;
    outcome(ok, format!("largest |freq − formula|/SE = {worst_z:.2}, r-linearization vertex error {lin_err:e}"))
}

fn generator_invariants(gen: &JumpGenerator) -> (bool, String) {
    let q = gen.rates();
    let n = gen.size();
    let row_sum = (0..n).map(|i| q.row(i).sum().abs()).fold(0.0, f64::max);
    let off_ok = (0..n).all(|i| (0..n).all(|j| i == j || q[(i, j)] >= 0.0));
    let mut stochastic: f64 = 0.0;
    let mut semigroup: f64 = 0.0;
    for s in [0.1, 0.5, 1.3] {
        let ps = transition_matrix(gen, s);
        stochastic = stochastic.max((0..n).map(|i| (ps.row(i).sum() - 1.0).abs()).fold(0.0, f64::max));
        for t in [0.2, 0.7, 2.0] {
            let lhs = transition_matrix(gen, s + t);
            semigroup = semigroup.max((lhs - &ps * transition_matrix(gen, t)).abs().max());
        }
    }
    (
        row_sum <= 1e-10 && off_ok && stochastic <= 1e-9 && semigroup <= 1e-9,
        format!("row sums {row_sum:e}, off-diagonals ≥ 0 {off_ok}, stochastic {stochastic:e}, semigroup {semigroup:e}"),
    )
}

fn criterion_8() -> Outcome {
    let (m, s) = interval();
    let (a, da) = generator_invariants(&build_limit_generator(&m, &s).unwrap());
    let tri = Simplex::standard(2).unwrap();
    let wf = builtin_model("wright_fisher_simplex", &json!({"speed": 1.0}), &tri).unwrap();
    let (b, db) = generator_invariants(&build_limit_generator(&wf, &tri).unwrap());
    outcome(a && b, format!("interval: {da}; triangle: {db}"))
}

fn criterion_9() -> Outcome {
    let s = default_simplex("counterexample_trap").unwrap();
    let m = builtin_model("counterexample_trap", &json!({}), &s).unwrap();
    let o = [0.0, 0.0];
    let o_index = m.zero_set().iter().position(|p| p.as_slice() == o).unwrap();
    let mut ok = true;
    let mut detail = Vec::new();
    for (i, y) in [0.0, 0.1, 0.2, 0.3].into_iter().enumerate() {
        let cfg = IntegratorConfig::new(1e-3, 4000, 909 + i as u64, vec![10.0]);
        let h = estimate_h(&m, &s, &[0.0, y], 10.0, 0.05, &cfg).unwrap();
        let h_o = h.probabilities[o_index];
        if y == 0.0 {
            ok &= h_o.mean == 1.0;
        } else {
            ok &= h_o.mean <= 0.5 + Z * h_o.stderr;
        }
        detail.push(format!("H_O(0,{y}) = {}", h_o.mean));
    }
    let cfg = IntegratorConfig::new(1e-3, 4000, 990, vec![0.25]);
    let b = simulate(&m, &s, &Initial::Point(o.to_vec()), 500.0, &cfg).unwrap();
    let cover = BallCover::new(m.zero_set().to_vec(), 0.125).unwrap();
    let (mut near_o, mut near_abc) = (0, 0);
    for x in b.slice_at(0) {
        match cover.assign(x) {
            Some(i) if i == o_index => near_o += 1,
            Some(_) => near_abc += 1,
            None => {}
        }
    }
    let outside = Estimate::proportion(4000 - near_o, 4000);
    let abc = near_abc as f64 / 4000.0;
    ok &= outside.mean >= 2f64.powi(-6) - Z * outside.stderr && abc >= 0.01;
    detail.push(format!("P(outside B(O,1/8)) = {:.4}, mass near A,B,C = {abc:.4}", outside.mean));
    outcome(ok, detail.join("; "))
}

fn criterion_10() -> Outcome {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/configs/interval_1d.json");
    let mut config = load_config(path).unwrap();
    config.integrator.n_paths = 200;
    if let Some(f) = config.metrics.fdd.as_mut() {
        f.n_paths = 5000;
    }
    let dir = tempfile::tempdir().unwrap();
    let mut ok = true;
    let mut detail = Vec::new();
    for suite in [Suite::Validate, Suite::Law, Suite::Ergodic, Suite::Fdd] {
        let a = run_suites(&config, &[suite]).unwrap();
        let b = run_suites(&config, &[suite]).unwrap();
        let (csv_a, _) = a.emit(&dir.path().join("a"), suite.name()).unwrap();
        let (csv_b, _) = b.emit(&dir.path().join("b"), suite.name()).unwrap();
        let same = std::fs::read(csv_a).unwrap() == std::fs::read(csv_b).unwrap();
        ok &= same && !a.rows.is_empty();
        detail.push(format!("{}: {} rows identical {same}", suite.name(), a.rows.len()));
    }
    outcome(ok, detail.join("; "))
}

fn main() {
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let wanted = |n: usize| selected.is_empty() || selected.contains(&n);
    let mut failures = 0;
    let mut report = |n: usize, run: &dyn Fn() -> Outcome| {
        if !wanted(n) {
            return;
        }
        let clock = Instant::now();
        let o = run();
        let secs = clock.elapsed().as_secs_f64();
        if !o.passed {
            failures += 1;
        }
        println!("{} criterion {n} ({secs:.1}s): {}", if o.passed { "PASS" } else { "FAIL" }, o.detail);
    };
    report(1, &criterion_1);
    let ladder = std::cell::OnceCell::new();
    report(2, &|| criterion_2(ladder.get_or_init(law_ladder)));
    report(3, &|| criterion_3(ladder.get_or_init(law_ladder)));
    report(4, &criterion_4);
    report(5, &criterion_5);
    report(6, &criterion_6);
    report(7, &criterion_7);
    report(8, &criterion_8);
    report(9, &criterion_9);
    report(10, &criterion_10);
    if failures > 0 {
        println!("{failures} criteria failed");
        std::process::exit(1);
    }
}
