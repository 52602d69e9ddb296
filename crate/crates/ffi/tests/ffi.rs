use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use conformal_reach_ffi::*;

fn last_error() -> String {
    let p = cr_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn grid_points(side: usize) -> Vec<f64> {
    let mut out = Vec::new();
    for i in 0..side {
        for j in 0..side {
            out.push(i as f64 / (side - 1) as f64);
            out.push(j as f64 / (side - 1) as f64);
        }
    }
    out
}

#[test]
fn bounds() {
    let mut v = 0.0;
    unsafe {
        assert_eq!(cr_split_epsilon(2000, 0.01, &mut v), CrStatus::Ok);
        assert!((v - 0.002_299_936_177_446_726_4).abs() < 1e-15);
        assert_eq!(cr_split_delta(2000, v, &mut v), CrStatus::Ok);
        assert!((v - 0.01).abs() < 1e-12);
        assert_eq!(cr_robust_confidence(500, 50, 0.15, &mut v), CrStatus::Ok);
        assert!((v - 0.989_711_699_683_780_4).abs() < 1e-9);
        assert_eq!(cr_baseline_epsilon(10_000, 2, 3, 0.01, &mut v), CrStatus::Ok);
        assert!((v - 0.0886).abs() < 1e-3);
        assert_eq!(cr_split_epsilon(0, 0.01, &mut v), CrStatus::InvalidArgument);
        assert!(last_error().contains("N"));
        assert_eq!(cr_split_epsilon(10, 0.01, ptr::null_mut()), CrStatus::NullPointer);
    }
}

#[test]
fn fit_calibrate_round_trip() {
    let pts = grid_points(10);
    unsafe {
        let mut model = ptr::null_mut();
        assert_eq!(cr_model_fit(pts.as_ptr(), 80, 2, 3, true, 0.0, &mut model), CrStatus::Ok);
        let mut s = 0.0;
        assert_eq!(cr_model_score(model, pts.as_ptr(), 2, &mut s), CrStatus::Ok);
        assert!(s > 0.0);

        let mut est = ptr::null_mut();
        assert_eq!(cr_calibrate(model, pts.as_ptr().add(160), 20, 2, 0.05, &mut est), CrStatus::Ok);
        let (mut eps, mut conf) = (0.0, 0.0);
        assert_eq!(cr_estimate_guarantee(est, &mut eps, &mut conf), CrStatus::Ok);
        assert!((conf - 0.95).abs() < 1e-12 && eps > 0.0);
        let mut t = 0.0;
        assert_eq!(cr_estimate_threshold(est, &mut t), CrStatus::Ok);
        let mut inside = false;
        assert_eq!(cr_estimate_contains(est, pts.as_ptr().add(160), 2, &mut inside), CrStatus::Ok);
        assert!(inside);

        let mut json = ptr::null_mut();
        assert_eq!(cr_estimate_to_json(est, &mut json), CrStatus::Ok);
        let mut back = ptr::null_mut();
        assert_eq!(cr_estimate_from_json(json, &mut back), CrStatus::Ok);
        let mut t2 = 0.0;
        cr_estimate_threshold(back, &mut t2);
        assert_eq!(t, t2);
        cr_string_free(json);

        let mut mjson = ptr::null_mut();
        assert_eq!(cr_model_to_json(model, &mut mjson), CrStatus::Ok);
        let mut model2 = ptr::null_mut();
        assert_eq!(cr_model_from_json(mjson, &mut model2), CrStatus::Ok);
        cr_string_free(mjson);

        let mut robust = ptr::null_mut();
        assert_eq!(cr_calibrate_robust(model2, pts.as_ptr().add(160), 20, 2, 2, 0.3, &mut robust), CrStatus::Ok);
        let mut tr = 0.0;
        cr_estimate_threshold(robust, &mut tr);
        assert!(tr <= t);
        assert_eq!(
            cr_calibrate_robust(model2, pts.as_ptr(), 20, 2, 10, 0.3, &mut robust),
            CrStatus::InvalidArgument
        );

        cr_estimate_free(robust);
        cr_estimate_free(back);
        cr_estimate_free(est);
        cr_model_free(model2);
        cr_model_free(model);
        cr_model_free(ptr::null_mut());
        cr_string_free(ptr::null_mut());
    }
}

#[test]
fn error_classes() {
    let line: Vec<f64> = (0..20).flat_map(|i| [i as f64, i as f64]).collect();
    unsafe {
        let mut model = ptr::null_mut();
        assert_eq!(cr_model_fit(line.as_ptr(), 20, 2, 1, false, 0.0, &mut model), CrStatus::Numerical);
        assert!(model.is_null());
        assert_eq!(cr_model_fit(ptr::null(), 5, 2, 1, false, 0.0, &mut model), CrStatus::NullPointer);
        assert_eq!(cr_model_fit(line.as_ptr(), 2, 2, 3, false, 0.0, &mut model), CrStatus::InvalidArgument);
        let bad = CString::new("{not json").unwrap();
        assert_eq!(cr_model_from_json(bad.as_ptr(), &mut model), CrStatus::Parse);
        let mut s = 0.0;
        assert_eq!(cr_model_score(ptr::null(), line.as_ptr(), 2, &mut s), CrStatus::NullPointer);
    }
}

#[test]
fn transductive() {
    let pts = grid_points(8);
    unsafe {
        let mut ctx = ptr::null_mut();
        assert_eq!(cr_transductive_new(pts.as_ptr(), 64, 2, 2, true, 0.0, &mut ctx), CrStatus::Ok);
        let (mut count, mut total) = (0usize, 0usize);
        let far = [30.0, -30.0];
        assert_eq!(cr_transductive_p_value(ctx, far.as_ptr(), 2, &mut count, &mut total), CrStatus::Ok);
        assert_eq!((count, total), (0, 64));
        let mid = [0.5, 0.5];
        assert_eq!(cr_transductive_p_value(ctx, mid.as_ptr(), 2, &mut count, &mut total), CrStatus::Ok);
        assert!(count > 0);
        cr_transductive_free(ctx);
    }
}

fn crate_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(crate_dir().join("include/conformal_reach.h")).unwrap();
    let source = std::fs::read_to_string(crate_dir().join("src/lib.rs")).unwrap();
    let exports: Vec<&str> = source
        .lines()
        .filter_map(|l| l.split("extern \"C\" fn ").nth(1))
        .filter_map(|rest| rest.split('(').next())
        .collect();
    assert!(exports.len() >= 20);
    for name in exports {
        assert!(header.contains(&format!("{name}(")), "{name} missing from header");
    }
}

fn target_dir() -> PathBuf {
    // tests run from <target>/<profile>/deps/
    let exe = std::env::current_exe().unwrap();
    exe.parent().and_then(Path::parent).unwrap().to_path_buf()
}

#[test]
fn c_program_links_against_shared_library() {
    let lib_dir = target_dir();
    if !lib_dir.join("libconformal_reach_ffi.so").exists() || Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping: no C compiler or shared library");
        return;
    }
    let out_dir = tempfile_dir();
    let exe = out_dir.join("smoke");
    let status = Command::new("cc")
        .arg(crate_dir().join("tests/smoke.c"))
        .arg("-I")
        .arg(crate_dir().join("include"))
        .arg("-L")
        .arg(&lib_dir)
        .args(["-lconformal_reach_ffi", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success());
    let run = Command::new(&exe).env("LD_LIBRARY_PATH", &lib_dir).output().unwrap();
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    assert_eq!(String::from_utf8_lossy(&run.stdout).trim(), "ok");
}

fn tempfile_dir() -> PathBuf {
    let dir = std::env::temp_dir().join(format!("cr-ffi-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}
