use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use corrkit_ffi::*;

fn last_error() -> String {
    let p = ck_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn estimators_match_core() {
    let x = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
    let y = [2.0, 1.0, 4.0, 3.0, 7.0, 5.0];
    let mut out = f64::NAN;
    unsafe {
        assert_eq!(ck_pearson(x.as_ptr(), y.as_ptr(), x.len(), &mut out), CkStatus::Ok);
        assert!((out - corrkit::corr::pearson_slices(&x, &y).unwrap()).abs() < 1e-15);
        assert_eq!(ck_spearman(x.as_ptr(), y.as_ptr(), x.len(), &mut out), CkStatus::Ok);
        assert!((out - 0.8285714285714286).abs() < 1e-12);
        assert_eq!(ck_kendall(x.as_ptr(), y.as_ptr(), x.len(), &mut out), CkStatus::Ok);
        assert!((out - 0.6).abs() < 1e-12);
    }
}

#[test]
fn errors_carry_status_and_message() {
    let x = [1.0, 1.0, 1.0];
    let y = [1.0, 2.0, 3.0];
    let mut out = 0.0;
    unsafe {
        assert_eq!(ck_pearson(x.as_ptr(), y.as_ptr(), 3, &mut out), CkStatus::Degenerate);
        assert!(!last_error().is_empty());
        assert_eq!(ck_pearson(ptr::null(), y.as_ptr(), 3, &mut out), CkStatus::NullPointer);
        assert!(last_error().contains("null"));
        assert_eq!(ck_pearson(y.as_ptr(), y.as_ptr(), 3, ptr::null_mut()), CkStatus::NullPointer);
        assert_eq!(ck_rs_from_rp(1.5, &mut out), CkStatus::Domain);
        assert_eq!(ck_fisher_z(1.0, &mut out), CkStatus::Domain);
    }
}

#[test]
fn theory_functions() {
    let mut v = 0.0;
    unsafe {
        assert_eq!(ck_rs_from_rp(0.2, &mut v), CkStatus::Ok);
        assert!((v - 0.1913).abs() < 5e-5);
        assert_eq!(ck_rt_from_rp(0.2, &mut v), CkStatus::Ok);
        assert!((v - 0.1282).abs() < 5e-5);
        let mut back = 0.0;
        ck_rs_from_rp(0.6, &mut v);
        ck_rp_from_rs(v, &mut back);
        assert!((back - 0.6).abs() < 1e-12);
        assert_eq!(ck_expected_rp(0.5, 10, &mut v), CkStatus::Ok);
        assert!(v < 0.5 && v > 0.45);
        assert_eq!(ck_expected_rs(0.5, 10, &mut v), CkStatus::Ok);
        assert!(v < 0.5);
        let (mut lo, mut hi) = (0.0, 0.0);
        assert_eq!(ck_fisher_ci(0.3, 50, 0.95, &mut lo, &mut hi), CkStatus::Ok);
        assert!(lo < 0.3 && 0.3 < hi);
    }
}

#[test]
fn density_handle_lifecycle() {
    let mut d = ptr::null_mut();
    unsafe {
        assert_eq!(ck_density_new(0.5, 10, &mut d), CkStatus::Ok);
        assert!(!d.is_null());
        let mut p = 0.0;
        assert_eq!(ck_density_probability(d, -1.0, 1.0, &mut p), CkStatus::Ok);
        assert!((p - 1.0).abs() < 1e-6);
        assert_eq!(ck_density_pdf(d, 0.5, &mut p), CkStatus::Ok);
        assert!(p > 0.0);
        assert_eq!(ck_density_probability(d, 0.5, 0.2, &mut p), CkStatus::Domain);
        ck_density_free(d);
        ck_density_free(ptr::null_mut());
        let mut bad = ptr::null_mut();
        assert_eq!(ck_density_new(0.5, 2, &mut bad), CkStatus::Domain);
        assert!(bad.is_null());
    }
}

#[test]
fn dataset_from_columns_and_csv() {
    // column-major: c1 = 1..5, c2 = 2*c1, c3 reversed
    let vals = [1.0, 2.0, 3.0, 4.0, 5.0, 2.0, 4.0, 6.0, 8.0, 10.0, 5.0, 4.0, 3.0, 2.0, 1.0];
    let mut d = ptr::null_mut();
    unsafe {
        assert_eq!(ck_dataset_from_columns(vals.as_ptr(), 5, 3, &mut d), CkStatus::Ok);
        let (mut r, mut c) = (0, 0);
        assert_eq!(ck_dataset_shape(d, &mut r, &mut c), CkStatus::Ok);
        assert_eq!((r, c), (5, 3));
        let mut m = [0.0; 9];
        assert_eq!(ck_dataset_correlation_matrix(d, CkKind::Spearman, m.as_mut_ptr()), CkStatus::Ok);
        assert!((m[1] - 1.0).abs() < 1e-12 && (m[2] + 1.0).abs() < 1e-12 && m[4] == 1.0);
        ck_dataset_free(d);
    }

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.csv");
    std::fs::write(&path, "a,b\n1,2\n2,x\n3,5\n4,4\n").unwrap();
    let cpath = CString::new(path.to_str().unwrap()).unwrap();
    let mut d = ptr::null_mut();
    let mut dropped = 0usize;
    unsafe {
        assert_eq!(ck_dataset_from_csv(cpath.as_ptr(), &mut d, &mut dropped), CkStatus::Ok);
        assert_eq!(dropped, 1);
        let mut m = [0.0; 4];
        assert_eq!(ck_dataset_correlation_matrix(d, CkKind::Pearson, m.as_mut_ptr()), CkStatus::Ok);
        assert!(m[1] > 0.5);
        ck_dataset_free(d);
        let missing = CString::new(dir.path().join("nope.csv").to_str().unwrap()).unwrap();
        let mut d2 = ptr::null_mut();
        assert_ne!(ck_dataset_from_csv(missing.as_ptr(), &mut d2, ptr::null_mut()), CkStatus::Ok);
        assert!(d2.is_null());
    }
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(ck_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

const C_PROGRAM: &str = r#"
#include <stdio.h>
#include <math.h>
#include "corrkit.h"

int main(void) {
    double x[] = {1, 2, 3, 4, 5, 6};
    double y[] = {2, 1, 4, 3, 7, 5};
    double r = 0;
    if (ck_spearman(x, y, 6, &r) != CK_STATUS_OK) return 1;
    if (fabs(r - 0.8285714285714286) > 1e-12) return 2;
    CkDensity *d = NULL;
    if (ck_density_new(0.3, 20, &d) != CK_STATUS_OK) return 3;
    double p = 0;
    ck_density_probability(d, -1.0, 1.0, &p);
    ck_density_free(d);
    if (fabs(p - 1.0) > 1e-6) return 4;
    if (ck_fisher_z(2.0, &r) != CK_STATUS_DOMAIN) return 5;
    if (ck_last_error_message() == NULL) return 6;
    printf("ok %s\n", ck_version());
    return 0;
}
"#;

#[test]
fn c_program_links_against_staticlib() {
    if Command::new("cc").arg("--version").output().is_err() {
        eprintln!("cc not found; skipping C link test");
        return;
    }
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    // test binary lives in target/<profile>/deps; the staticlib one level up
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().unwrap().parent().unwrap();
    let lib = profile_dir.join("libcorrkit_ffi.a");
    if !lib.exists() {
        eprintln!("{} not built; skipping C link test", lib.display());
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    std::fs::write(&src, C_PROGRAM).unwrap();
    let bin = dir.path().join("main");
    let status = Command::new("cc")
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm"])
        .arg("-o")
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success(), "C compile/link failed");
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "C program exited with {:?}", out.status);
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok "));
}
