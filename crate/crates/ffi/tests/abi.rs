use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use ollp_ffi::*;

fn last_error() -> String {
    let p = ollp_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn mirror_step_and_divergence() {
    let mut out = [0.0f64; 2];
    let st = unsafe {
        ollp_mirror_step(OllpGeometryKind::Euclidean, 1, [0.5].as_ptr(), [1.0].as_ptr(), 0.1, out.as_mut_ptr())
    };
    assert_eq!(st, OllpStatus::Ok);
    assert!((out[0] - 0.4).abs() < 1e-15);

    let st = unsafe {
        ollp_mirror_step(
            OllpGeometryKind::Entropy,
            2,
            [0.5, 0.5].as_ptr(),
            [1.0, 0.0].as_ptr(),
            std::f64::consts::LN_2,
            out.as_mut_ptr(),
        )
    };
    assert_eq!(st, OllpStatus::Ok);
    assert!((out[0] - 1.0 / 3.0).abs() < 1e-12 && (out[1] - 2.0 / 3.0).abs() < 1e-12);

    let mut d = -1.0;
    let st = unsafe {
        ollp_bregman_divergence(OllpGeometryKind::Euclidean, 2, [1.0, 0.0].as_ptr(), [0.0, 0.0].as_ptr(), &mut d)
    };
    assert_eq!(st, OllpStatus::Ok);
    assert_eq!(d, 0.5);
}

#[test]
fn error_codes_and_messages() {
    let mut out = 0.0;
    let st = unsafe { ollp_step_gap_bound(OllpGeometryKind::Entropy, 2, 1.0, 1.0, &mut out) };
    assert_eq!(st, OllpStatus::Precondition);
    assert!(last_error().contains("eta"));

    let st = unsafe { ollp_step_gap_bound(OllpGeometryKind::Entropy, 2, 0.1, 1.0, &mut out) };
    assert_eq!(st, OllpStatus::Ok);
    assert!((out - 0.3).abs() < 1e-15);

    let st = unsafe {
        ollp_mirror_step(OllpGeometryKind::Euclidean, 1, [2.0].as_ptr(), [1.0].as_ptr(), 0.1, &mut out)
    };
    assert_eq!(st, OllpStatus::DomainViolation);

    let st = unsafe { ollp_mirror_step(OllpGeometryKind::Euclidean, 1, ptr::null(), [1.0].as_ptr(), 0.1, &mut out) };
    assert_eq!(st, OllpStatus::NullPointer);
    assert_eq!(last_error(), "w is null");

    let st = unsafe { ollp_step_gap_bound(OllpGeometryKind::Entropy, 1, 0.1, 1.0, &mut out) };
    assert_eq!(st, OllpStatus::InvalidArgument);
}

#[test]
fn dpmd_handle_matches_hand_simulation() {
    // T = M = 4, tau = 1, constant loss +w, eta_s = 0.1: w_s goes 0, -0.1, -0.2.
    let mut h: *mut OllpDpmd = ptr::null_mut();
    let st = unsafe { ollp_dpmd_new(OllpGeometryKind::Euclidean, 1, 4, 4, 1, 1.0, 0.5, 0.1, &mut h) };
    assert_eq!(st, OllpStatus::Ok);
    let mut seen = Vec::new();
    for t in 1..=4 {
        let mut w = [f64::NAN];
        let mut which = OllpPredictor::First;
        let released = if t > 1 { [1.0].as_ptr() } else { ptr::null() };
        let st = unsafe { ollp_dpmd_round(h, released, 1, w.as_mut_ptr(), &mut which) };
        assert_eq!(st, OllpStatus::Ok);
        seen.push((w[0], which));
    }
    assert_eq!(seen[0], (0.0, OllpPredictor::First));
    for (i, expected) in [0.0, -0.1, -0.2].iter().enumerate() {
        assert_eq!(seen[i + 1].1, OllpPredictor::Second);
        assert!((seen[i + 1].0 - expected).abs() < 1e-15);
    }
    // Past the horizon.
    let mut w = [0.0];
    let st = unsafe { ollp_dpmd_round(h, [1.0].as_ptr(), 1, w.as_mut_ptr(), ptr::null_mut()) };
    assert_eq!(st, OllpStatus::InvalidArgument);
    unsafe { ollp_dpmd_free(h) };
    unsafe { ollp_dpmd_free(ptr::null_mut()) };
}

#[test]
fn dpmd_rejects_early_release_and_bad_dimension() {
    let mut h: *mut OllpDpmd = ptr::null_mut();
    assert_eq!(
        unsafe { ollp_dpmd_new(OllpGeometryKind::Entropy, 2, 100, 10, 3, 1.0, 0.0, 0.0, &mut h) },
        OllpStatus::Ok
    );
    let mut w = [0.0; 2];
    let st = unsafe { ollp_dpmd_round(h, [1.0, -1.0].as_ptr(), 2, w.as_mut_ptr(), ptr::null_mut()) };
    assert_eq!(st, OllpStatus::Consistency);
    let st = unsafe { ollp_dpmd_round(h, ptr::null(), 3, w.as_mut_ptr(), ptr::null_mut()) };
    assert_eq!(st, OllpStatus::InvalidArgument);
    unsafe { ollp_dpmd_free(h) };

    let mut h: *mut OllpDpmd = ptr::null_mut();
    assert_eq!(
        unsafe { ollp_dpmd_new(OllpGeometryKind::Euclidean, 1, 100, 3, 3, 1.0, 0.0, 0.0, &mut h) },
        OllpStatus::InvalidArgument
    );
    assert!(h.is_null());
}

#[test]
fn ogd_uses_stale_iterate() {
    let mut h: *mut OllpOgd = ptr::null_mut();
    assert_eq!(unsafe { ollp_ogd_new(OllpGeometryKind::Euclidean, 1, 100, 2, 0.25, &mut h) }, OllpStatus::Ok);
    let mut played = Vec::new();
    for t in 1..=5 {
        let mut w = [0.0];
        let released = if t > 2 { [1.0].as_ptr() } else { ptr::null() };
        assert_eq!(unsafe { ollp_ogd_round(h, released, 1, w.as_mut_ptr()) }, OllpStatus::Ok);
        played.push(w[0]);
    }
    assert_eq!(played, vec![0.0, 0.0, 0.0, -0.25, -0.5]);
    unsafe { ollp_ogd_free(h) };
}

#[test]
fn experiment_report_and_csv() {
    let windows = [0usize, 10];
    let params = OllpExperimentParams {
        experiment: OllpExperimentKind::OgdSmallWindow,
        horizon: 2000,
        tau: 20,
        windows: windows.as_ptr(),
        n_windows: windows.len(),
        reps: 6,
        seed: 3,
        geometry: OllpGeometryKind::Euclidean,
        eta_f: 0.0,
        eta_s: 0.0,
        block: 0,
        gap: -1,
        trace_stride: 0,
    };
    let mut report: *mut OllpReport = ptr::null_mut();
    assert_eq!(unsafe { ollp_experiment_run(&params, &mut report) }, OllpStatus::Ok);
    assert_eq!(unsafe { ollp_report_len(report) }, 2);
    assert!(unsafe { ollp_report_failure(report) }.is_null());

    let mut row = OllpAggregateRow::default();
    assert_eq!(unsafe { ollp_report_row(report, 1, &mut row) }, OllpStatus::Ok);
    assert_eq!((row.horizon, row.tau, row.window, row.reps), (2000, 20, 10, 6));
    assert!((row.adversarial_ref - (40_000f64).sqrt()).abs() < 1e-12);
    assert!((row.stochastic_ref - (2000f64.sqrt() + 20.0)).abs() < 1e-12);
    assert!(row.mean_regret.is_finite() && row.std_error >= 0.0);
    assert_eq!(unsafe { ollp_report_row(report, 2, &mut row) }, OllpStatus::InvalidArgument);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("agg.csv");
    let c_path = CString::new(path.to_str().unwrap()).unwrap();
    assert_eq!(unsafe { ollp_report_write_csv(report, c_path.as_ptr()) }, OllpStatus::Ok);
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("experiment,T,tau,M,reps,mean_regret,stderr,adversarial_ref,stochastic_ref\n"));
    assert_eq!(text.lines().count(), 3);

    let bad = CString::new(dir.path().join("missing/x.csv").to_str().unwrap()).unwrap();
    assert_eq!(unsafe { ollp_report_write_csv(report, bad.as_ptr()) }, OllpStatus::Io);
    unsafe { ollp_report_free(report) };

    let mut bad_params = params;
    bad_params.block = 7;
    let mut report: *mut OllpReport = ptr::null_mut();
    assert_eq!(unsafe { ollp_experiment_run(&bad_params, &mut report) }, OllpStatus::InvalidArgument);
    assert!(report.is_null());
}

#[test]
fn oracle_single_block() {
    let (mut mean, mut se) = (0.0, -1.0);
    assert_eq!(unsafe { ollp_khintchine_oracle(50, 50, 10, 1, &mut mean, &mut se) }, OllpStatus::Ok);
    assert_eq!((mean, se), (50.0, 0.0));
    assert_eq!(unsafe { ollp_khintchine_oracle(50, 7, 10, 1, &mut mean, &mut se) }, OllpStatus::InvalidArgument);
}

fn find_static_lib() -> Option<PathBuf> {
    // target/<profile>/deps/<this test> -> target/<profile>/libollp_ffi.a
    let exe = std::env::current_exe().ok()?;
    let profile_dir = exe.parent()?.parent()?;
    let lib = profile_dir.join("libollp_ffi.a");
    lib.exists().then_some(lib)
}

#[test]
fn header_compiles_and_links_from_c() {
    let Ok(cc) = which_cc() else {
        eprintln!("no C compiler found, skipping");
        return;
    };
    let include = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include");
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    std::fs::write(
        &src,
        r#"
#include <stdio.h>
#include "ollp.h"
int main(void) {
    double out[1];
    double w[1] = {0.5}, g[1] = {1.0};
    if (ollp_mirror_step(OLLP_GEOMETRY_KIND_EUCLIDEAN, 1, w, g, 0.1, out) != OLLP_STATUS_OK) return 1;
    OllpDpmd *h = NULL;
    if (ollp_dpmd_new(OLLP_GEOMETRY_KIND_EUCLIDEAN, 1, 4, 4, 1, 1.0, 0.5, 0.1, &h) != OLLP_STATUS_OK) return 2;
    OllpPredictor which;
    double p[1];
    if (ollp_dpmd_round(h, NULL, 1, p, &which) != OLLP_STATUS_OK) return 3;
    ollp_dpmd_free(h);
    if (ollp_step_gap_bound(OLLP_GEOMETRY_KIND_ENTROPY, 2, 1.0, 1.0, out) != OLLP_STATUS_PRECONDITION) return 4;
    printf("%.3f %s\n", out[0] + 0.0 * p[0], ollp_last_error() != NULL ? "err" : "none");
    return 0;
}
"#,
    )
    .unwrap();

    let syntax = Command::new(&cc)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(&include)
        .arg(&src)
        .status()
        .unwrap();
    assert!(syntax.success(), "header does not compile as C99");

    let Some(lib) = find_static_lib() else {
        eprintln!("static library not built in this profile, skipping link step");
        return;
    };
    let exe = dir.path().join("main");
    let linked = Command::new(&cc)
        .arg("-I")
        .arg(&include)
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(linked.success(), "linking against {} failed", lib.display());
    let run = Command::new(&exe).output().unwrap();
    assert!(run.status.success(), "C program exited with {:?}", run.status);
    assert_eq!(String::from_utf8_lossy(&run.stdout).trim(), "0.400 err");
}

fn which_cc() -> Result<String, ()> {
    for cand in ["cc", "gcc", "clang"] {
        if Command::new(cand).arg("--version").output().is_ok() {
            return Ok(cand.to_string());
        }
    }
    Err(())
}
