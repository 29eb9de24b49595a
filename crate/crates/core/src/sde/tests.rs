use super::*;
use crate::model::{builtin_model, MatrixField, VectorField};
use crate::simplex::AffineFunction;
use serde_json::json;

fn interval() -> (CoefficientModel, Simplex) {
    let s = Simplex::unit_interval();
    (builtin_model("interval_1d", &json!({"b0": 1.0, "b1": -2.0}), &s).unwrap(), s)
}

#[test]
fn config_validation() {
    assert!(IntegratorConfig::new(0.0, 1, 0, vec![1.0]).validate().is_err());
    assert!(IntegratorConfig::new(1e-3, 0, 0, vec![1.0]).validate().is_err());
    assert!(IntegratorConfig::new(1e-3, 1, 0, vec![1.0, 1.0]).validate().is_err());
    assert!(IntegratorConfig::new(1e-3, 1, 0, vec![]).validate().is_err());
    assert!(IntegratorConfig::new(1e-3, 1, 0, vec![0.0, 0.5]).validate().is_ok());
}

#[test]
fn noiseless_path_is_deterministic_euler() {
    let s = Simplex::unit_interval();
    let m = CoefficientModel::builder("shift", 1).drift(VectorField::constant(vec![0.1])).bound(0.1).build().unwrap();
    let cfg = IntegratorConfig::new(1e-3, 3, 1, vec![0.5, 1.0, 2.0]);
    let b = simulate(&m, &s, &vec![0.2].into(), 5.0, &cfg).unwrap();
    for p in 0..3 {
        for (ti, t) in [0.5, 1.0, 2.0].iter().enumerate() {
            assert!((b.state(p, ti)[0] - (0.2 + 0.1 * t)).abs() < 1e-12);
        }
    }
    assert_eq!(b.t_grid(), &[0.5, 1.0, 2.0]);
}

#[test]
fn gamma_zero_without_drift_is_constant() {
    let (m, s) = interval();
    let still = m.with_drift(VectorField::zero(1), None);
    let cfg = IntegratorConfig::new(1e-2, 4, 3, vec![0.0, 1.0]);
    let b = simulate(&still, &s, &vec![0.37].into(), 0.0, &cfg).unwrap();
    assert!(b.states().iter().all(|&v| v == 0.37));
    assert_eq!(b.gamma, 0.0);
}

#[test]
fn reproducible_and_contained() {
    let s = Simplex::standard(2).unwrap();
    let m = builtin_model("wright_fisher_simplex", &json!({"speed": 1.0, "sigma0_scale": 0.3}), &s).unwrap();
    let cfg = IntegratorConfig::new(1e-3, 64, 99, vec![0.1, 0.5, 1.0]);
    let init: Initial = vec![0.2, 0.3].into();
    let a = simulate(&m, &s, &init, 10.0, &cfg).unwrap();
    let b = simulate(&m, &s, &init, 10.0, &cfg).unwrap();
    assert_eq!(a, b);
    let c = simulate(&m, &s, &init, 10.0, &cfg.with_seed(100)).unwrap();
    assert_ne!(a.states(), c.states());
    for p in 0..a.n_paths() {
        for t in 0..a.n_times() {
            assert!(s.contains(a.state(p, t), CONTAINMENT_TOL));
        }
    }
}

#[test]
fn dominant_from_vertex_stays_put() {
    let s = Simplex::standard(2).unwrap();
    let m = builtin_model("wright_fisher_simplex", &json!({}), &s).unwrap();
    let cfg = IntegratorConfig::new(1e-3, 16, 5, vec![0.5, 2.0]);
    let b = simulate_dominant(&m, &s, &vec![1.0, 0.0].into(), &cfg).unwrap();
    assert!(b.slice_at(1).all(|x| x == [1.0, 0.0]));
}

#[test]
fn dominant_is_a_martingale() {
    let (m, s) = interval();
    let times = vec![0.5, 1.0, 2.0, 4.0];
    let cfg = IntegratorConfig::new(1e-3, 2000, 8, times.clone());
    let b = simulate_dominant(&m, &s, &vec![0.3].into(), &cfg).unwrap();
    for ti in 0..times.len() {
        let e = estimate_expectation(&b, |x| x[0], ti);
        assert!(e.covers(0.3, 3.0), "t={} {e:?}", times[ti]);
    }
}

#[test]
fn expectation_of_constants_is_exact() {
    let (m, s) = interval();
    let b = simulate(&m, &s, &vec![0.5].into(), 1.0, &IntegratorConfig::new(1e-2, 50, 1, vec![1.0])).unwrap();
    assert_eq!(estimate_expectation(&b, |_| 2.5, 0), Estimate { mean: 2.5, stderr: 0.0 });
    assert_eq!(estimate_expectation(&b, |x| if s.contains(x, 1e-9) { 1.0 } else { 0.0 }, 0).mean, 1.0);
}

#[test]
fn affine_oracle_holds_for_every_gamma() {
    let (m, s) = interval();
    let drift = m.affine_drift().unwrap().clone();
    let g = AffineFunction::new(vec![1.0], 0.0);
    let cfg = IntegratorConfig::new(1e-3, 1000, 17, vec![0.25, 1.0]);
    for gamma in [1.0, 10.0] {
        let b = simulate(&m, &s, &vec![0.5].into(), gamma, &cfg).unwrap();
        for (ti, &t) in cfg.t_grid.iter().enumerate() {
            let e = estimate_expectation(&b, |x| g.eval(x), ti);
            let exact = affine_semigroup_oracle(&drift, &g, t, &[0.5]);
            assert!(e.covers(exact, 3.0), "gamma={gamma} t={t} {e:?} vs {exact}");
        }
    }
}

#[test]
fn halving_dt_is_statistically_invisible() {
    let (m, s) = interval();
    let coarse = IntegratorConfig::new(2e-3, 2000, 21, vec![1.0]);
    let fine = IntegratorConfig { dt: 1e-3, ..coarse.clone() };
    let f = |x: &[f64]| x[0] * x[0];
    let a = estimate_expectation(&simulate(&m, &s, &vec![0.4].into(), 1.0, &coarse).unwrap(), f, 0);
    let b = estimate_expectation(&simulate(&m, &s, &vec![0.4].into(), 1.0, &fine).unwrap(), f, 0);
    assert!(a.consistent_with(&b, 3.0), "{a:?} vs {b:?}");
}

#[test]
fn hitting_from_a_vertex() {
    let (m, s) = interval();
    let cfg = IntegratorConfig::new(1e-3, 100, 2, vec![1.0]);
    let h = estimate_h(&m, &s, &[1.0], 2.0, 0.02, &cfg).unwrap();
    assert_eq!(h.probabilities[1].mean, 1.0);
    assert_eq!(h.probabilities[0].mean, 0.0);
    assert_eq!(h.unresolved.mean, 0.0);
    assert!((h.total() - 1.0).abs() < 1e-15);
    assert!(estimate_h(&m, &s, &[0.5], 2.0, 0.6, &cfg).is_err());
}

#[test]
fn coupling_degenerate_cases() {
    let (m, s) = interval();
    let cfg = IntegratorConfig::new(1e-3, 50, 4, vec![1.0]);
    let r = coupled_rescaled_pair(&m, &s, &vec![0.5].into(), 1.0, 0.0, &cfg).unwrap();
    assert!(r.squared_distances.iter().all(|&d| d == 0.0));
    let bare = m.with_drift(VectorField::zero(1), None);
    let r = coupled_rescaled_pair(&bare, &s, &vec![0.5].into(), 1.0, 0.1, &cfg).unwrap();
    assert!(r.squared_distances.iter().all(|&d| d == 0.0));
}

#[test]
fn coupling_bound_arithmetic_and_sample() {
    let expected = 3.0 * 4.0 * (0.01 + 1e-4) * 3f64.exp();
    assert!((gronwall_bound(2.0, 1.0, 1.0, 0.01) - expected).abs() < 1e-12);
    assert!((expected - 2.4344).abs() < 1e-3);
    let (m, s) = interval();
    let cfg = IntegratorConfig::new(1e-3, 500, 4, vec![1.0]);
    let r = coupled_rescaled_pair(&m, &s, &vec![0.5].into(), 1.0, 0.01, &cfg).unwrap();
    assert!(r.mean.mean > 0.0 && r.mean.mean < 0.01 * r.bound, "{:?}", r.mean);
}

#[test]
fn non_finite_state_reports_path_and_time() {
    let s = Simplex::unit_interval();
    let m = CoefficientModel::builder("blowup", 1)
        .drift(VectorField::new(1, |x, out| out[0] = if x[0] > 0.3 { f64::NAN } else { 1.0 }))
        .build()
        .unwrap();
    let cfg = IntegratorConfig { projection: false, ..IntegratorConfig::new(0.01, 2, 0, vec![1.0]) };
    match simulate(&m, &s, &vec![0.2].into(), 0.0, &cfg) {
        Err(SdeError::NonFinite { path: 0, time }) => assert!(time > 0.1 && time < 0.2),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn rejects_initial_outside() {
    let (m, s) = interval();
    let cfg = IntegratorConfig::new(1e-2, 2, 0, vec![1.0]);
    assert!(matches!(simulate(&m, &s, &vec![1.5].into(), 1.0, &cfg), Err(SdeError::InitialOutside { .. })));
}

#[test]
fn rectangular_noise_uses_all_columns() {
    // Two independent unit columns along x: Var x_t = 2t.
    let s = Simplex::new(vec![vec![-100.0, -100.0], vec![200.0, -100.0], vec![-100.0, 200.0]]).unwrap();
    let m = CoefficientModel::builder("flat", 2)
        .sigma(MatrixField::new(2, 2, |_, out| out.copy_from_slice(&[1.0, 0.0, 1.0, 0.0])))
        .lipschitz(0.0)
        .build()
        .unwrap();
    let cfg = IntegratorConfig::new(1e-2, 4000, 6, vec![1.0]);
    let b = simulate_dominant(&m, &s, &vec![0.0, 0.0].into(), &cfg).unwrap();
    let var = estimate_expectation(&b, |x| x[0] * x[0], 0);
    assert!(var.covers(2.0, 4.0), "{var:?}");
    assert!(b.slice_at(0).all(|x| x[1] == 0.0));
}
