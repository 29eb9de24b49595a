use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use savg_ffi::*;

fn last_error() -> String {
    let p = savg_last_error();
    assert!(!p.is_null(), "expected an error message");
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn unit_interval() -> *mut SavgSimplex {
    let mut s = ptr::null_mut();
    let status = unsafe { savg_simplex_new([0.0, 1.0].as_ptr(), 2, 1, &mut s) };
    assert_eq!(status, SavgStatus::Ok);
    s
}

fn triangle() -> *mut SavgSimplex {
    let mut s = ptr::null_mut();
    let v = [0.0, 0.0, 1.0, 0.0, 0.0, 1.0];
    assert_eq!(unsafe { savg_simplex_new(v.as_ptr(), 3, 2, &mut s) }, SavgStatus::Ok);
    s
}

fn model(name: &str, params: Option<&str>, s: *const SavgSimplex) -> *mut SavgModel {
    let name = CString::new(name).unwrap();
    let params = params.map(|p| CString::new(p).unwrap());
    let mut m = ptr::null_mut();
    let status = unsafe { savg_model_builtin(name.as_ptr(), params.as_ref().map_or(ptr::null(), |p| p.as_ptr()), s, &mut m) };
    assert_eq!(status, SavgStatus::Ok, "{}", last_error());
    m
}

#[test]
fn barycentric_round_trip() {
    let s = triangle();
    assert_eq!(unsafe { savg_simplex_dim(s) }, 2);
    let mut out = [0.0; 3];
    let status = unsafe { savg_simplex_barycentric(s, [0.25, 0.5].as_ptr(), 2, out.as_mut_ptr(), 3) };
    assert_eq!(status, SavgStatus::Ok);
    for (a, b) in out.iter().zip([0.25, 0.25, 0.5]) {
        assert!((a - b).abs() < 1e-12);
    }
    assert!(savg_last_error().is_null());
    unsafe { savg_simplex_free(s) };
}

#[test]
fn wrong_buffer_length_is_invalid_argument() {
    let s = triangle();
    let mut out = [0.0; 2];
    let status = unsafe { savg_simplex_barycentric(s, [0.25, 0.5].as_ptr(), 2, out.as_mut_ptr(), 2) };
    assert_eq!(status, SavgStatus::InvalidArgument);
    assert!(last_error().contains("expected 3"));
    unsafe { savg_simplex_free(s) };
}

#[test]
fn degenerate_simplex_and_null_pointers() {
    let mut s = ptr::null_mut();
    let collinear = [0.0, 0.0, 1.0, 1.0, 2.0, 2.0];
    assert_eq!(unsafe { savg_simplex_new(collinear.as_ptr(), 3, 2, &mut s) }, SavgStatus::Degenerate);
    assert!(s.is_null());
    assert!(last_error().contains("affinely dependent"));
    assert_eq!(unsafe { savg_simplex_new(ptr::null(), 3, 2, &mut s) }, SavgStatus::NullPointer);
    assert_eq!(unsafe { savg_simplex_barycentric(ptr::null(), ptr::null(), 0, ptr::null_mut(), 0) }, SavgStatus::NullPointer);
    assert_eq!(unsafe { savg_simplex_dim(ptr::null()) }, 0);
    unsafe { savg_simplex_free(ptr::null_mut()) };
}

#[test]
fn unknown_builtin_lists_names() {
    let s = unit_interval();
    let name = CString::new("nope").unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { savg_model_builtin(name.as_ptr(), ptr::null(), s, &mut m) }, SavgStatus::InvalidArgument);
    assert!(last_error().contains("interval_1d"));
    let bad = CString::new("{not json").unwrap();
    let name = CString::new("interval_1d").unwrap();
    assert_eq!(unsafe { savg_model_builtin(name.as_ptr(), bad.as_ptr(), s, &mut m) }, SavgStatus::InvalidArgument);
    unsafe { savg_simplex_free(s) };
}

#[test]
fn generator_and_fdd_match_two_state_closed_form() {
    let s = unit_interval();
    let m = model("interval_1d", None, s);
    let mut g = ptr::null_mut();
    assert_eq!(unsafe { savg_generator_build(m, s, &mut g) }, SavgStatus::Ok);
    assert_eq!(unsafe { savg_generator_size(g) }, 2);
    let mut q = [0.0; 4];
    assert_eq!(unsafe { savg_generator_rates(g, q.as_mut_ptr(), 4) }, SavgStatus::Ok);
    let (a, b) = (q[1], q[2]);
    assert!(a > 0.0 && b > 0.0);
    assert!((q[0] + a).abs() < 1e-12 && (q[3] + b).abs() < 1e-12);

    let t = 0.7;
    let mut p = [0.0; 4];
    assert_eq!(unsafe { savg_generator_transition(g, t, p.as_mut_ptr(), 4) }, SavgStatus::Ok);
    let decay = (-(a + b) * t).exp();
    let p01 = a / (a + b) * (1.0 - decay);
    assert!((p[1] - p01).abs() < 1e-10);
    assert!((p[0] + p[1] - 1.0).abs() < 1e-12);

    let mut v = 0.0;
    let times = [0.3, 1.0];
    let idx = [1usize, 0];
    let init = [1.0, 0.0];
    assert_eq!(unsafe { savg_fdd_expectation(g, init.as_ptr(), 2, times.as_ptr(), idx.as_ptr(), 2, &mut v) }, SavgStatus::Ok);
    let step = |i: usize, j: usize, dt: f64| {
        let d = (-(a + b) * dt).exp();
        let stat = [b / (a + b), a / (a + b)];
        if i == j { stat[j] + (1.0 - stat[j]) * d } else { stat[j] * (1.0 - d) }
    };
    assert!((v - step(0, 1, 0.3) * step(1, 0, 0.7)).abs() < 1e-10);

    let unsorted = [1.0, 0.3];
    assert_eq!(
        unsafe { savg_fdd_expectation(g, init.as_ptr(), 2, unsorted.as_ptr(), idx.as_ptr(), 2, &mut v) },
        SavgStatus::InvalidArgument
    );
    assert_eq!(unsafe { savg_generator_transition(g, -1.0, p.as_mut_ptr(), 4) }, SavgStatus::InvalidArgument);
    unsafe {
        savg_generator_free(g);
        savg_model_free(m);
        savg_simplex_free(s);
    }
}

#[test]
fn simulate_and_write_batch() {
    let s = triangle();
    let m = model("wright_fisher_simplex", Some(r#"{"speed": 1.0}"#), s);
    let grid = [0.1, 0.2];
    let mut b = ptr::null_mut();
    let status = unsafe { savg_simulate(m, s, [0.3, 0.3].as_ptr(), 2, 5.0, 1e-3, 50, 9, grid.as_ptr(), 2, &mut b) };
    assert_eq!(status, SavgStatus::Ok, "{}", last_error());
    unsafe {
        assert_eq!((savg_batch_n_paths(b), savg_batch_n_times(b), savg_batch_dim(b)), (50, 2, 2));
    }
    let mut x = [0.0; 2];
    assert_eq!(unsafe { savg_batch_state(b, 49, 1, x.as_mut_ptr(), 2) }, SavgStatus::Ok);
    assert!(x[0] >= -1e-9 && x[1] >= -1e-9 && x[0] + x[1] <= 1.0 + 1e-9);
    assert_eq!(unsafe { savg_batch_state(b, 50, 0, x.as_mut_ptr(), 2) }, SavgStatus::InvalidArgument);

    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("b.csv").to_str().unwrap()).unwrap();
    assert_eq!(unsafe { savg_batch_write_csv(b, path.as_ptr()) }, SavgStatus::Ok);
    let text = std::fs::read_to_string(dir.path().join("b.csv")).unwrap();
    assert_eq!(text.lines().count(), 1 + 50 * 2);
    let missing = CString::new(dir.path().join("no/such/dir.csv").to_str().unwrap()).unwrap();
    assert_eq!(unsafe { savg_batch_write_csv(b, missing.as_ptr()) }, SavgStatus::Io);

    let outside = unsafe { savg_simulate(m, s, [0.9, 0.9].as_ptr(), 2, 5.0, 1e-3, 5, 9, grid.as_ptr(), 2, &mut b) };
    assert_eq!(outside, SavgStatus::InvalidArgument);
    unsafe {
        savg_batch_free(b);
        savg_model_free(m);
        savg_simplex_free(s);
    }
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/configs")
}

#[test]
fn run_scenario_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = CString::new(configs().join("interval_1d.json").to_str().unwrap()).unwrap();
    let out = CString::new(dir.path().to_str().unwrap()).unwrap();
    let suite = CString::new("validate").unwrap();
    let mut passed = -1;
    assert_eq!(unsafe { savg_run_scenario(cfg.as_ptr(), out.as_ptr(), suite.as_ptr(), &mut passed) }, SavgStatus::Ok);
    assert_eq!(passed, 1);
    assert!(dir.path().join("interval_1d_validate.csv").exists());
    assert!(dir.path().join("interval_1d_validate.json").exists());

    let bogus = CString::new("bogus").unwrap();
    assert_eq!(
        unsafe { savg_run_scenario(cfg.as_ptr(), out.as_ptr(), bogus.as_ptr(), &mut passed) },
        SavgStatus::InvalidArgument
    );
    let missing = CString::new(dir.path().join("absent.json").to_str().unwrap()).unwrap();
    assert_eq!(unsafe { savg_run_scenario(missing.as_ptr(), out.as_ptr(), ptr::null(), &mut passed) }, SavgStatus::Io);
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"scenario": "x", "model": {"builtin": "interval_1d"}, "gamma": [2, 1], "t_grid": [1]}"#).unwrap();
    let bad = CString::new(bad.to_str().unwrap()).unwrap();
    assert_eq!(unsafe { savg_run_scenario(bad.as_ptr(), out.as_ptr(), ptr::null(), &mut passed) }, SavgStatus::Config);
    assert!(last_error().contains("/gamma"));
}

#[test]
fn errors_are_thread_local() {
    let s = triangle();
    let mut out = [0.0; 2];
    assert_eq!(unsafe { savg_simplex_barycentric(s, [0.1, 0.1].as_ptr(), 2, out.as_mut_ptr(), 2) }, SavgStatus::InvalidArgument);
    std::thread::spawn(|| assert!(savg_last_error().is_null())).join().unwrap();
    assert!(!savg_last_error().is_null());
    unsafe { savg_simplex_free(s) };
}

#[test]
fn version_is_crate_version() {
    assert_eq!(unsafe { CStr::from_ptr(savg_version()) }.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

/// Compiles and runs a C program against the generated header and the static
/// library. Skipped when no C compiler or archive is available.
#[test]
fn c_program_links_against_header() {
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR"));
    let header = manifest.join("include/savg.h");
    assert!(header.exists(), "build script writes the header");
    let Some(archive) = std::env::current_exe()
        .ok()
        .and_then(|exe| exe.parent()?.parent().map(|d| d.join("libsavg_ffi.a")))
        .filter(|a| a.exists())
    else {
        eprintln!("skipping: static library not found");
        return;
    };
    if Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping: no C compiler");
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("smoke.c");
    std::fs::write(
        &src,
        r#"#include <stdio.h>
#include "savg.h"
int main(void) {
    const double v[] = {0.0, 1.0};
    SavgSimplex *s = NULL;
    if (savg_simplex_new(v, 2, 1, &s) != SAVG_STATUS_OK) return 1;
    SavgModel *m = NULL;
    if (savg_model_builtin("interval_1d", NULL, s, &m) != SAVG_STATUS_OK) return 2;
    SavgGenerator *g = NULL;
    if (savg_generator_build(m, s, &g) != SAVG_STATUS_OK) return 3;
    double q[4];
    if (savg_generator_rates(g, q, 4) != SAVG_STATUS_OK) return 4;
    SavgSimplex *none = NULL;
    if (savg_simplex_new(NULL, 2, 1, &none) != SAVG_STATUS_NULL_POINTER || savg_last_error() == NULL) return 5;
    printf("%g %g\n", q[1], q[2]);
    savg_generator_free(g);
    savg_model_free(m);
    savg_simplex_free(s);
    return 0;
}
"#,
    )
    .unwrap();
    let exe = dir.path().join("smoke");
    let status = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&archive)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success(), "C compilation failed");
    let run = Command::new(&exe).output().unwrap();
    assert!(run.status.success(), "exit {:?}", run.status.code());
    let rates: Vec<f64> = String::from_utf8(run.stdout).unwrap().split_whitespace().map(|t| t.parse().unwrap()).collect();
    assert!(rates.iter().all(|r| *r > 0.0));
}
