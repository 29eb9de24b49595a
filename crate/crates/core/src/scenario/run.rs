//! Suite orchestration.

use std::time::Instant;

use rand::Rng;
use thiserror::Error;

use super::config::{ConfigError, LawParams, ScenarioConfig};
use super::report::{RunReport, Stderr};
use crate::jump::{
    build_limit_generator, fdd_expectation, lift_point, r_linearize, simulate_jump_chain, transition_matrix,
    JumpGenerator, VertexLaw, CONSERVATION_TOL,
};
use crate::metrics::{concentration_probability, conditional_variation_bound, dominant_batches, ergodic_table, BinnedLaw};
use crate::model::{validate_boundary_compatibility, verify_bounds, zero_set_scan, CoefficientModel};
use crate::rng::{derive_seed, path_rng};
use crate::sde::{
    coupled_rescaled_pair, estimate_expectation, estimate_h, simulate, affine_semigroup_oracle, Estimate, Initial,
    IntegratorConfig, CONTAINMENT_TOL,
};
use crate::simplex::{AffineFunction, BallCover, Simplex};

/// Standard errors allowed between a Monte-Carlo estimate and its target.
pub const Z: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    /// Boundary compatibility, zero set, declared constants.
    Validate,
    /// Law convergence to the limit chain, concentration, generator,
    /// affine oracle, coupling, conditional variation.
    Law,
    /// Uniform ergodic errors and hitting probabilities.
    Ergodic,
    /// Finite-dimensional distributions of the limit chain.
    Fdd,
    Counterexample,
}

impl Suite {
    pub const ALL: [Suite; 5] = [Suite::Validate, Suite::Law, Suite::Ergodic, Suite::Fdd, Suite::Counterexample];

    /// Inverse of [`Suite::name`].
    pub fn from_name(name: &str) -> Option<Suite> {
        Suite::ALL.into_iter().find(|s| s.name() == name)
    }

    pub fn name(self) -> &'static str {
        match self {
            Suite::Validate => "validate",
            Suite::Law => "run",
            Suite::Ergodic => "ergodic",
            Suite::Fdd => "fdd",
            Suite::Counterexample => "counterexample",
        }
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{context}: {message}")]
    Step { context: String, message: String },
}

fn ctx<E: std::fmt::Display>(context: impl Into<String>) -> impl FnOnce(E) -> RunError {
    let context = context.into();
    move |e| RunError::Step { context, message: e.to_string() }
}

struct Setup<'a> {
    config: &'a ScenarioConfig,
    simplex: Simplex,
    model: CoefficientModel,
    eta: f64,
    seed: u64,
}

impl Setup<'_> {
    fn integrator(&self, t_grid: Vec<f64>, tag: u64) -> IntegratorConfig {
        self.config.integrator().with_t_grid(t_grid).with_seed(derive_seed(self.seed, tag))
    }

    fn law_params(&self) -> LawParams {
        self.config.metrics.law.clone().unwrap_or_default()
    }

    fn law_start(&self) -> Vec<f64> {
        self.law_params().start.unwrap_or_else(|| self.simplex.centroid())
    }

    fn generator(&self) -> Result<JumpGenerator, RunError> {
        build_limit_generator(&self.model, &self.simplex).map_err(ctx("limit generator"))
    }
}

/// Every suite whose configuration section is present.
pub fn configured_suites(config: &ScenarioConfig) -> Vec<Suite> {
    let m = &config.metrics;
    let mut suites = Vec::new();
    if m.law.is_some() || m.affine_oracle.is_some() || m.coupling.is_some() || m.variation.is_some() {
        suites.push(Suite::Law);
    }
    if m.ergodic.is_some() || m.hitting.is_some() {
        suites.push(Suite::Ergodic);
    }
    if m.fdd.is_some() {
        suites.push(Suite::Fdd);
    }
    if m.counterexample.is_some() {
        suites.push(Suite::Counterexample);
    }
    suites
}

/// Runs every configured suite into one report.
pub fn run_scenario(config: &ScenarioConfig) -> Result<RunReport, RunError> {
    run_suites(config, &configured_suites(config))
}

pub fn run_counterexample(config: &ScenarioConfig) -> Result<RunReport, RunError> {
    run_suites(config, &[Suite::Counterexample])
}

pub fn run_suites(config: &ScenarioConfig, suites: &[Suite]) -> Result<RunReport, RunError> {
    config.validate()?;
    let clock = Instant::now();
    let simplex = config.simplex()?;
    let model = config.build_model(&simplex)?;
    let eta = config.metrics.eta.unwrap_or(0.05 * simplex.min_vertex_gap());
    let setup = Setup { config, simplex, model, eta, seed: config.integrator.seed };
    let mut report = RunReport::new(&config.scenario, setup.seed);
    for &suite in suites {
        log::info!("suite {} of scenario {}", suite.name(), config.scenario);
        report.suites.push(suite.name().to_string());
        match suite {
            Suite::Validate => validate_suite(&setup, &mut report),
            Suite::Law => law_suite(&setup, &mut report)?,
            Suite::Ergodic => ergodic_suite(&setup, &mut report)?,
            Suite::Fdd => fdd_suite(&setup, &mut report)?,
            Suite::Counterexample => counterexample_suite(&setup, &mut report)?,
        }
    }
    report.provenance.wall_time_s = clock.elapsed().as_secs_f64();
    Ok(report)
}

fn fmt_point(x: &[f64]) -> String {
    let parts: Vec<String> = x.iter().map(|v| v.to_string()).collect();
    format!("({})", parts.join(" "))
}

fn validate_suite(s: &Setup, report: &mut RunReport) {
    let p = &s.config.metrics.validate;
    let boundary = validate_boundary_compatibility(&s.model, &s.simplex, p.samples_per_face, p.tol);
    for v in &boundary.conditions {
        report.row(
            &format!("boundary_{}", v.condition),
            None,
            None,
            v.worst,
            Stderr::Exact,
            format!("worst at {}", fmt_point(&v.location)),
        );
        report.check(&format!("boundary_{}", v.condition), v.passed, format!("worst {:e} (tol {:e})", v.worst, p.tol));
    }
    let scan = zero_set_scan(&s.model, &s.simplex, p.zero_grid_step, p.zero_tol);
    report.row("zero_set_points", None, None, scan.points.len() as f64, Stderr::Exact, format!("grid of {}", scan.grid_size));
    report.row("zero_set_distance", None, None, scan.max_distance_to_declared, Stderr::Exact, "largest distance to the declared set");
    let declared = if s.model.zero_set().is_empty() { s.simplex.vertices().to_vec() } else { s.model.zero_set().to_vec() };
    let reach = p.zero_grid_step * (s.simplex.dim() as f64).sqrt();
    let covered = declared
        .iter()
        .all(|z| scan.points.iter().any(|q| z.iter().zip(q).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt() <= reach));
    report.check(
        "zero_set_matches",
        covered && scan.max_distance_to_declared <= reach,
        format!("{} scanned zeros, farthest {:e} from the declared set", scan.points.len(), scan.max_distance_to_declared),
    );
    let bounds = verify_bounds(&s.model, &s.simplex, p.bound_grid_points, p.lipschitz_pairs, derive_seed(s.seed, 12));
    report.row("max_drift_norm", None, None, bounds.max_drift_norm, Stderr::Exact, format!("declared M = {}", s.model.bound()));
    report.row(
        "max_lipschitz_quotient",
        None,
        None,
        bounds.max_lipschitz_quotient,
        Stderr::Exact,
        format!("declared k = {}", s.model.lipschitz()),
    );
    report.check("declared_bound", bounds.bound_ok, format!("sup |b|, |sigma0| ≤ {}", s.model.bound()));
    report.check("declared_lipschitz", bounds.lipschitz_ok, format!("sampled quotients ≤ {}", s.model.lipschitz()));
}

fn generator_checks(s: &Setup, gen: &JumpGenerator, report: &mut RunReport) {
    let q = gen.rates();
    let size = gen.size();
    for i in 0..size {
        for j in 0..size {
            report.row("generator_rate", None, None, q[(i, j)], Stderr::Exact, format!("from {i} to {j}"));
        }
    }
    let row_sum = (0..size).map(|i| q.row(i).sum().abs()).fold(0.0, f64::max);
    report.check("generator_rows_sum_to_zero", row_sum <= CONSERVATION_TOL, format!("max |row sum| {row_sum:e}"));
    let min_off = (0..size)
        .flat_map(|i| (0..size).filter(move |&j| j != i).map(move |j| (i, j)))
        .map(|(i, j)| q[(i, j)])
        .fold(f64::INFINITY, f64::min);
    report.check("generator_offdiagonal_nonnegative", size < 2 || min_off >= 0.0, format!("min off-diagonal {min_off}"));
    let mut stochastic = 0.0f64;
    let mut semigroup = 0.0f64;
    for &t in &s.config.t_grid {
        let p = transition_matrix(gen, t);
        stochastic = stochastic.max((0..size).map(|i| (p.row(i).sum() - 1.0).abs()).fold(0.0, f64::max));
        for &u in &s.config.t_grid {
            let lhs = transition_matrix(gen, t + u);
            semigroup = semigroup.max((lhs - &p * transition_matrix(gen, u)).abs().max());
        }
    }
    report.check("transition_rows_sum_to_one", stochastic <= 1e-9, format!("max deviation {stochastic:e}"));
    report.check("transition_semigroup", semigroup <= 1e-9, format!("max deviation {semigroup:e}"));
}

fn nonincreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] <= w[0])
}

fn increasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] > w[0])
}

fn decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

fn law_suite(s: &Setup, report: &mut RunReport) -> Result<(), RunError> {
    let law = s.law_params();
    let gen = s.generator()?;
    generator_checks(s, &gen, report);
    let start = s.law_start();
    let mu = lift_point(&start, &s.simplex, CONTAINMENT_TOL).map_err(ctx("lifting the law start"))?;
    let cover = BallCover::new(s.simplex.vertices().to_vec(), s.eta).map_err(ctx("vertex balls"))?;
    let n_t = s.config.t_grid.len();
    let mut tv = vec![Vec::new(); n_t];
    let mut conc = vec![Vec::new(); n_t];
    let mut unresolved = vec![Estimate { mean: 0.0, stderr: 0.0 }; n_t];
    // Common random numbers along the ladder: every γ reuses the same seed.
    let cfg = s.integrator(s.config.t_grid.clone(), 1);
    for &gamma in &s.config.gamma {
        let batch = simulate(&s.model, &s.simplex, &Initial::Point(start.clone()), gamma, &cfg)
            .map_err(ctx(format!("simulating gamma = {gamma}")))?;
        report.provenance.simulation_passes += 1;
        for (ti, &t) in s.config.t_grid.iter().enumerate() {
            let binned = BinnedLaw::from_batch(&batch, &cover, ti);
            let target = mu.evolve(&gen, t);
            let d = binned.extended_tv(&target).map_err(ctx("tv"))?;
            let eta = s.eta;
            report.estimate_row("law_tv", Some(gamma), Some(t), d, format!("eta={eta}"));
            for (i, (w, q)) in binned.weights.iter().zip(&target).enumerate() {
                report.estimate_row("vertex_occupancy", Some(gamma), Some(t), *w, format!("vertex {i}, limit {q}"));
            }
            report.estimate_row("unresolved_mass", Some(gamma), Some(t), binned.unresolved, format!("eta={eta}"));
            let c = concentration_probability(&batch, &s.simplex, eta, ti).map_err(ctx("concentration"))?;
            report.estimate_row("concentration", Some(gamma), Some(t), c, format!("eta={eta}"));
            tv[ti].push(d.mean);
            conc[ti].push(c.mean);
            unresolved[ti] = binned.unresolved;
        }
    }
    let top = s.config.gamma.last().copied().unwrap_or(0.0);
    for (ti, &t) in s.config.t_grid.iter().enumerate() {
        let last_tv = *tv[ti].last().unwrap_or(&f64::NAN);
        let last_conc = *conc[ti].last().unwrap_or(&f64::NAN);
        report.check(&format!("law_tv_nonincreasing_t{t}"), nonincreasing(&tv[ti]), format!("{:?}", tv[ti]));
        report.check(
            &format!("law_tv_endpoint_t{t}"),
            last_tv <= law.tv_max && unresolved[ti].mean <= law.unresolved_max,
            format!(
                "gamma={top}: tv {last_tv} (max {}), unresolved {} (max {})",
                law.tv_max, unresolved[ti].mean, law.unresolved_max
            ),
        );
        report.check(&format!("concentration_increasing_t{t}"), increasing(&conc[ti]), format!("{:?}", conc[ti]));
        report.check(
            &format!("concentration_endpoint_t{t}"),
            last_conc >= law.concentration_min,
            format!("gamma={top}: {last_conc} (min {})", law.concentration_min),
        );
    }
    if let Some(a) = &s.config.metrics.affine_oracle {
        affine_oracle_checks(s, a, report)?;
    }
    if let Some(c) = &s.config.metrics.coupling {
        let initial = Initial::Point(c.start.clone());
        for &gamma in &c.gammas {
            let mut means = Vec::new();
            let mut hs = c.hs.clone();
            hs.sort_by(|a, b| b.total_cmp(a));
            let mut within = true;
            for &h in &hs {
                let r = coupled_rescaled_pair(&s.model, &s.simplex, &initial, gamma, h, &s.integrator(vec![gamma], 3))
                    .map_err(ctx(format!("coupling gamma = {gamma}, h = {h}")))?;
                report.estimate_row("coupling_msd", Some(gamma), Some(gamma), r.mean, format!("h={h}, bound {}", r.bound));
                within &= r.mean.mean <= c.slack * r.bound;
                means.push(r.mean.mean);
            }
            report.check(&format!("coupling_bound_gamma{gamma}"), within, format!("msd {means:?} against {}·bound", c.slack));
            report.check(&format!("coupling_decreasing_in_h_gamma{gamma}"), decreasing(&means), format!("h {hs:?}: {means:?}"));
        }
    }
    if let Some(v) = &s.config.metrics.variation {
        let cv = conditional_variation_bound(&s.model, &s.simplex, v.tau, v.max_level, &s.integrator(vec![v.tau], 4))
            .map_err(ctx("conditional variation"))?;
        for l in &cv.levels {
            report.row(
                "conditional_variation",
                Some(1.0),
                Some(v.tau),
                l.value,
                Stderr::Value(l.noise_floor),
                format!("level {} ({} intervals)", l.level, l.intervals),
            );
        }
        report.row("conditional_variation_bound", None, Some(v.tau), cv.analytic, Stderr::Exact, "sup |z| M tau");
        report.check(
            "conditional_variation",
            cv.passed,
            format!("empirical {} ≤ 1.1 × analytic {}", cv.empirical, cv.analytic),
        );
    }
    Ok(())
}

fn affine_oracle_checks(s: &Setup, a: &super::config::AffineOracleParams, report: &mut RunReport) -> Result<(), RunError> {
    let Some(drift) = s.model.affine_drift() else {
        report.check("affine_oracle", false, "the model drift is not affine");
        return Ok(());
    };
    let g = AffineFunction::new(a.gradient.clone(), a.offset);
    let cfg = s.integrator(a.times.clone(), 2);
    let mut per_gamma: Vec<Vec<Estimate>> = Vec::new();
    for &gamma in &s.config.gamma {
        let batch = simulate(&s.model, &s.simplex, &Initial::Point(a.start.clone()), gamma, &cfg)
            .map_err(ctx(format!("affine oracle gamma = {gamma}")))?;
        let mut ok = true;
        let mut detail = Vec::new();
        let mut ests = Vec::new();
        for (ti, &t) in a.times.iter().enumerate() {
            let e = estimate_expectation(&batch, |x| g.eval(x), ti);
            let exact = affine_semigroup_oracle(drift, &g, t, &a.start);
            report.estimate_row("affine_expectation", Some(gamma), Some(t), e, format!("oracle {exact}"));
            ok &= e.covers(exact, Z);
            detail.push(format!("t={t}: {} ± {} vs {exact}", e.mean, e.stderr));
            ests.push(e);
        }
        report.check(&format!("affine_oracle_gamma{gamma}"), ok, detail.join("; "));
        per_gamma.push(ests);
    }
    let mut consistent = true;
    for i in 0..per_gamma.len() {
        for j in i + 1..per_gamma.len() {
            for (a, b) in per_gamma[i].iter().zip(&per_gamma[j]) {
                consistent &= a.consistent_with(b, Z);
            }
        }
    }
    report.check("affine_gamma_invariance", consistent, "pairwise within 3 combined standard errors");
    Ok(())
}

fn ergodic_suite(s: &Setup, report: &mut RunReport) -> Result<(), RunError> {
    if let Some(e) = &s.config.metrics.ergodic {
        let starts = crate::model::simplex_lattice(&s.simplex, e.starts);
        let mut cfg = s.integrator(e.horizons.clone(), 5);
        if let Some(dt) = e.dt {
            cfg.dt = dt;
        }
        let batches = dominant_batches(&s.model, &s.simplex, &starts, &e.horizons, &cfg).map_err(ctx("ergodic batches"))?;
        let square = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>();
        let table = ergodic_table(&s.simplex, square, &starts, &batches);
        let mut sups = Vec::new();
        for h in &table {
            let w = &h.points[h.worst()];
            report.row(
                "ergodic_sup_error",
                Some(0.0),
                Some(h.horizon),
                h.sup_error,
                Stderr::Value(w.estimate.stderr),
                format!("f=|x|^2, worst start {}", fmt_point(&w.start)),
            );
            sups.push(h.sup_error);
        }
        report.check("ergodic_decreasing", decreasing(&sups), format!("{sups:?}"));
        let last = *sups.last().unwrap_or(&f64::NAN);
        report.check("ergodic_endpoint", last <= e.tol, format!("T={}: {last} (max {})", e.horizons.last().unwrap_or(&0.0), e.tol));
        let mut affine_ok = true;
        for d in 0..s.simplex.dim() {
            let table = ergodic_table(&s.simplex, |x: &[f64]| x[d], &starts, &batches);
            for h in &table {
                let w = &h.points[h.worst()];
                report.row(
                    "ergodic_affine_error",
                    Some(0.0),
                    Some(h.horizon),
                    h.sup_error,
                    Stderr::Value(w.estimate.stderr),
                    format!("f=x{}, worst start {}", d + 1, fmt_point(&w.start)),
                );
                affine_ok &= h.within(Z);
            }
        }
        report.check("ergodic_affine_martingale", affine_ok, "every start and horizon within 3 standard errors");
    }
    if let Some(h) = &s.config.metrics.hitting {
        for (i, x0) in h.starts.iter().enumerate() {
            let mut cfg = s.integrator(vec![h.horizon], derive_seed(6, i as u64));
            if let Some(dt) = h.dt {
                cfg.dt = dt;
            }
            let est = estimate_h(&s.model, &s.simplex, x0, h.horizon, h.eta, &cfg)
                .map_err(ctx(format!("hitting from {}", fmt_point(x0))))?;
            let lambda = s.simplex.barycentric_coords(x0);
            let mut ok = true;
            for (z, (p, l)) in est.probabilities.iter().zip(&lambda).enumerate() {
                report.estimate_row("hitting_probability", Some(0.0), Some(h.horizon), *p, format!("start {}, vertex {z}, barycentric {l}", fmt_point(x0)));
                ok &= p.covers(*l, Z);
            }
            report.estimate_row("hitting_unresolved", Some(0.0), Some(h.horizon), est.unresolved, format!("start {}", fmt_point(x0)));
            let within = est.unresolved.mean <= h.unresolved_max;
            report.check(
                &format!("hitting_{}", fmt_point(x0)),
                ok && within,
                format!(
                    "{:?} vs {lambda:?}, unresolved {} (max {})",
                    est.probabilities.iter().map(|p| p.mean).collect::<Vec<_>>(),
                    est.unresolved.mean,
                    h.unresolved_max
                ),
            );
        }
    }
    Ok(())
}

/// Index tuples `{0..base}^r` in lexicographic order.
fn tuples(base: usize, r: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..r {
        out = out.into_iter().flat_map(|t| (0..base).map(move |i| [t.clone(), vec![i]].concat())).collect();
    }
    out
}

fn fdd_suite(s: &Setup, report: &mut RunReport) -> Result<(), RunError> {
    let Some(f) = &s.config.metrics.fdd else {
        return Ok(());
    };
    let gen = s.generator()?;
    let start = f.start.clone().unwrap_or_else(|| s.law_start());
    let mu: VertexLaw = lift_point(&start, &s.simplex, CONTAINMENT_TOL).map_err(ctx("lifting the fdd start"))?;
    let chain = simulate_jump_chain(&gen, &mu, &f.times, f.n_paths, derive_seed(s.seed, 7)).map_err(ctx("jump chain"))?;
    let size = gen.size();
    for r in 1..=f.max_order {
        let times = &f.times[..r];
        let mut ok = true;
        for idx in tuples(size, r) {
            let exact = fdd_expectation(&gen, &mu, times, &idx).map_err(ctx("fdd"))?;
            let freq = chain.joint_frequency(&(0..r).collect::<Vec<_>>(), &idx);
            report.row("fdd_formula", None, Some(times[r - 1]), exact, Stderr::Exact, format!("vertices {idx:?} at {times:?}"));
            report.estimate_row("fdd_gillespie", None, Some(times[r - 1]), freq, format!("vertices {idx:?} at {times:?}"));
            ok &= freq.covers(exact, Z);
        }
        report.check(&format!("fdd_order{r}"), ok, format!("{} tuples, {} chains", size.pow(r as u32), f.n_paths));
    }
    let mut rng = path_rng(derive_seed(s.seed, 9), 0);
    let mut worst = 0.0f64;
    for r in 1..=f.max_order {
        for _ in 0..f.random_functions {
            let n = s.simplex.dim();
            let freq: Vec<f64> = (0..r * n).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let phase: Vec<f64> = (0..r).map(|_| rng.gen_range(0.0..6.3)).collect();
            let scale: f64 = rng.gen_range(-2.0..2.0);
            let func = |pts: &[&[f64]]| {
                scale
                    * pts
                        .iter()
                        .enumerate()
                        .map(|(k, x)| (x.iter().zip(&freq[k * n..(k + 1) * n]).map(|(a, b)| a * b).sum::<f64>() + phase[k]).sin())
                        .product::<f64>()
                    + pts.iter().map(|x| x.iter().map(|v| v * v).sum::<f64>()).sum::<f64>()
            };
            let lin = r_linearize(func, &s.simplex, r).map_err(ctx("r-linearization"))?;
            for idx in tuples(size, r) {
                let pts: Vec<&[f64]> = idx.iter().map(|&i| s.simplex.vertices()[i].as_slice()).collect();
                worst = worst.max((lin.eval(&pts) - func(&pts)).abs());
            }
        }
    }
    report.row("r_linearize_vertex_error", None, None, worst, Stderr::Exact, format!("{} random functions per order", f.random_functions));
    report.check("r_linearize_exact_on_vertices", worst <= 1e-10, format!("max error {worst:e}"));
    // Barycentric products of the diffusion at the largest γ, for reference.
    if let Some(&gamma) = s.config.gamma.last() {
        let r = f.max_order;
        let times = f.times[..r].to_vec();
        let batch = simulate(&s.model, &s.simplex, &Initial::Point(start.clone()), gamma, &s.integrator(times.clone(), 8))
            .map_err(ctx(format!("fdd diffusion gamma = {gamma}")))?;
        let mut lambda = vec![0.0; size];
        for idx in tuples(size, r) {
            let samples: Vec<f64> = (0..batch.n_paths())
                .map(|p| {
                    idx.iter()
                        .enumerate()
                        .map(|(k, &i)| {
                            s.simplex.barycentric_into(batch.state(p, k), &mut lambda);
                            lambda[i]
                        })
                        .product()
                })
                .collect();
            let exact = fdd_expectation(&gen, &mu, &times, &idx).map_err(ctx("fdd"))?;
            report.estimate_row(
                "fdd_diffusion",
                Some(gamma),
                Some(times[r - 1]),
                Estimate::from_samples(&samples),
                format!("vertices {idx:?} at {times:?}, limit {exact}"),
            );
        }
    }
    Ok(())
}

fn counterexample_suite(s: &Setup, report: &mut RunReport) -> Result<(), RunError> {
    let c = s.config.metrics.counterexample.clone().unwrap_or_default();
    let centers = s.model.zero_set().to_vec();
    let o = centers
        .iter()
        .position(|p| s.simplex.vertices().iter().all(|v| v != p))
        .ok_or_else(|| RunError::Step { context: "counterexample".into(), message: "no zero outside the vertices".into() })?;
    let o_point = centers[o].clone();
    let mut grid = vec![o_point.clone()];
    grid.extend(c.ys.iter().map(|&y| vec![o_point[0], o_point[1] + y]));
    for (i, x0) in grid.iter().enumerate() {
        let mut cfg = s.integrator(vec![c.horizon], derive_seed(10, i as u64));
        if let Some(dt) = c.dt {
            cfg.dt = dt;
        }
        let est = estimate_h(&s.model, &s.simplex, x0, c.horizon, c.eta, &cfg)
            .map_err(ctx(format!("hitting from {}", fmt_point(x0))))?;
        for (z, p) in est.probabilities.iter().enumerate() {
            report.estimate_row(
                "hitting_probability",
                Some(0.0),
                Some(c.horizon),
                *p,
                format!("start {}, zero {}", fmt_point(x0), fmt_point(&centers[z])),
            );
        }
        report.estimate_row("hitting_unresolved", Some(0.0), Some(c.horizon), est.unresolved, format!("start {}", fmt_point(x0)));
        let h_o = est.probabilities[o];
        if i == 0 {
            report.check("H_O_at_O_is_one", h_o.mean == 1.0, format!("{} ± {}", h_o.mean, h_o.stderr));
        } else {
            report.check(
                &format!("H_O_discontinuity_y{}", c.ys[i - 1]),
                h_o.mean <= 0.5 + Z * h_o.stderr,
                format!("{} ± {} (max 1/2 + 3 SE)", h_o.mean, h_o.stderr),
            );
        }
    }
    let cover = BallCover::new(centers.clone(), c.radius).map_err(ctx("balls around the zeros"))?;
    let cfg = s.integrator(vec![c.t], 11);
    let mut last = None;
    for &gamma in &s.config.gamma {
        let batch = simulate(&s.model, &s.simplex, &Initial::Point(o_point.clone()), gamma, &cfg)
            .map_err(ctx(format!("counterexample gamma = {gamma}")))?;
        report.provenance.simulation_passes += 1;
        let n = batch.n_paths();
        let (mut near_o, mut near_vertices) = (0, 0);
        for x in batch.slice_at(0) {
            match cover.assign(x) {
                Some(i) if i == o => near_o += 1,
                Some(_) => near_vertices += 1,
                None => {}
            }
        }
        let outside = Estimate::proportion(n - near_o, n);
        let vertex_mass = Estimate::proportion(near_vertices, n);
        report.estimate_row("outside_ball_O", Some(gamma), Some(c.t), outside, format!("radius {}", c.radius));
        report.estimate_row("vertex_ball_mass", Some(gamma), Some(c.t), vertex_mass, format!("radius {}, balls at A, B, C", c.radius));
        last = Some((gamma, outside, vertex_mass));
    }
    if let Some((gamma, outside, vertex_mass)) = last {
        report.check(
            "escape_lower_bound",
            outside.mean >= c.outside_min - Z * outside.stderr,
            format!("gamma={gamma}: P(outside B(O,{})) = {} ± {} (min {})", c.radius, outside.mean, outside.stderr, c.outside_min),
        );
        report.check(
            "vertex_ball_mass",
            vertex_mass.mean >= c.vertex_mass_min,
            format!("gamma={gamma}: {} (min {})", vertex_mass.mean, c.vertex_mass_min),
        );
    }
    Ok(())
}
