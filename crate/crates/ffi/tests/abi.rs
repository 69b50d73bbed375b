use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use aesf_ffi::*;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    let p = aesf_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn dataset(xs: &[f64], ys: Option<&[f64]>) -> *mut AesfDataset {
    let mut ds = ptr::null_mut();
    let yp = ys.map_or(ptr::null(), |y| y.as_ptr());
    assert_eq!(unsafe { aesf_dataset_new(xs.as_ptr(), yp, xs.len(), &mut ds) }, AesfStatus::Ok);
    ds
}

fn model(json: &str) -> *mut AesfModel {
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { aesf_model_from_json(c(json).as_ptr(), &mut m) }, AesfStatus::Ok);
    m
}

#[test]
fn estimates_through_handles() {
    let ds = dataset(&[1.0, 2.0, 3.0], Some(&[2.0, 1.0, 3.0]));
    for (name, want) in [("kendall", 1.0 / 3.0), ("spearman", 0.5), ("chatterjee", -0.125)] {
        let mut v = f64::NAN;
        assert_eq!(unsafe { aesf_estimate(ds, c(name).as_ptr(), &mut v) }, AesfStatus::Ok);
        assert!((v - want).abs() < 1e-12, "{name}: {v}");
    }
    unsafe { aesf_dataset_free(ds) };

    let uni = dataset(&[1.0, 2.0, 3.0], None);
    let mut v = 0.0;
    assert_eq!(unsafe { aesf_sf(uni, c("mean").as_ptr(), 7.0, ptr::null(), &mut v) }, AesfStatus::Ok);
    assert_eq!(v, 5.0);
    assert_eq!(unsafe { aesf_estimate(uni, c("kendall").as_ptr(), &mut v) }, AesfStatus::Domain);
    unsafe { aesf_dataset_free(uni) };
}

#[test]
fn status_codes() {
    let ds = dataset(&[1.0, 5.0, 3.0], Some(&[2.0, 2.0, 3.0]));
    let mut v = 0.0;
    assert_eq!(unsafe { aesf_estimate(ds, c("kendall").as_ptr(), &mut v) }, AesfStatus::Tie);
    assert!(last_error().contains("rows 0 and 1"), "{}", last_error());
    assert_eq!(unsafe { aesf_estimate(ds, c("bogus").as_ptr(), &mut v) }, AesfStatus::Parse);
    assert_eq!(unsafe { aesf_estimate(ptr::null(), c("kendall").as_ptr(), &mut v) }, AesfStatus::NullPointer);
    assert_eq!(unsafe { aesf_estimate(ds, ptr::null(), &mut v) }, AesfStatus::NullPointer);
    assert_eq!(unsafe { aesf_estimate(ds, c("mean").as_ptr(), ptr::null_mut()) }, AesfStatus::NullPointer);
    assert!(last_error().contains("out_value"));
    unsafe { aesf_dataset_free(ds) };

    let mut m = ptr::null_mut();
    assert_eq!(unsafe { aesf_model_from_json(c("{\"variant\":").as_ptr(), &mut m) }, AesfStatus::Parse);
    assert!(m.is_null());
    let mut d = ptr::null_mut();
    assert_eq!(unsafe { aesf_dataset_new(ptr::null(), ptr::null(), 3, &mut d) }, AesfStatus::NullPointer);
    assert!(d.is_null());

    let b = model(r#"{"variant":"additive_noise","x_law":{"law":"uniform","lo":0,"hi":1},"link":{"kind":"square"},"noise_sigma":0.5}"#);
    let y = 0.3;
    assert_eq!(unsafe { aesf_closed_form(b, c("spearman").as_ptr(), 0.5, &y, &mut v) }, AesfStatus::Unsupported);
    unsafe { aesf_model_free(b) };
    unsafe {
        aesf_model_free(ptr::null_mut());
        aesf_dataset_free(ptr::null_mut());
    }
}

#[test]
fn model_quantities() {
    let g = model(r#"{"variant":"bivariate_gaussian","rho":0.5}"#);
    let (x, y) = (0.0, 0.0);
    let mut v = f64::NAN;
    assert_eq!(unsafe { aesf_population_value(g, c("kendall").as_ptr(), &mut v) }, AesfStatus::Ok);
    let tau = 1.0 / 3.0;
    assert!((v - tau).abs() < 1e-12);
    assert_eq!(unsafe { aesf_closed_form(g, c("kendall").as_ptr(), x, &y, &mut v) }, AesfStatus::Ok);
    // Concordance probability at the origin: joint CDF plus joint survival.
    let p = 2.0 * (0.25 + 0.5f64.asin() / (2.0 * std::f64::consts::PI));
    assert!((v - (4.0 * p - 2.0 - 2.0 * tau)).abs() < 1e-9, "{v}");

    let mut a = AesfMcEstimate::default();
    let mut b = AesfMcEstimate::default();
    unsafe {
        assert_eq!(aesf_esf_mc(g, c("kendall").as_ptr(), 100, x, &y, 300, 11, &mut a), AesfStatus::Ok);
        assert_eq!(aesf_esf_mc(g, c("kendall").as_ptr(), 100, x, &y, 300, 11, &mut b), AesfStatus::Ok);
    }
    assert_eq!((a.value, a.std_error, a.replicates, a.n, a.seed), (b.value, b.std_error, 300, 100, 11));
    assert!((a.value - v).abs() <= 5.0 * a.std_error + 0.05);
    assert_eq!(unsafe { aesf_esf_mc(g, c("kendall").as_ptr(), 100, x, &y, 1, 11, &mut a) }, AesfStatus::Domain);
    unsafe { aesf_model_free(g) };

    unsafe {
        assert_eq!(aesf_normal_cdf(0.0, &mut v), AesfStatus::Ok);
        assert_eq!(v, 0.5);
        assert_eq!(aesf_bvn_cdf(0.0, 0.0, 0.5, &mut v), AesfStatus::Ok);
    }
    assert!((v - 1.0 / 3.0).abs() < 1e-14);
    let ver = unsafe { CStr::from_ptr(aesf_version()) }.to_str().unwrap();
    assert_eq!(ver, env!("CARGO_PKG_VERSION"));
}

fn header() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include/aesf.h")
}

fn have_cc() -> bool {
    Command::new("cc").arg("--version").output().is_ok_and(|o| o.status.success())
}

#[test]
fn header_compiles_as_c_and_cpp() {
    if !have_cc() {
        eprintln!("cc not found; skipping");
        return;
    }
    let text = std::fs::read_to_string(header()).unwrap();
    for sym in ["aesf_model_from_json", "aesf_esf_mc", "AESF_STATUS_NULL_POINTER", "typedef struct AesfModel AesfModel"] {
        assert!(text.contains(sym), "{sym} missing from header");
    }
    for lang in ["c", "c++"] {
        let o = Command::new("cc").args(["-x", lang, "-fsyntax-only", "-Wall", "-Werror"]).arg(header()).output().unwrap();
        assert!(o.status.success(), "{lang}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn c_program_links_against_static_library() {
    if !have_cc() {
        eprintln!("cc not found; skipping");
        return;
    }
    // target/<profile>/deps/<test-exe> -> target/<profile>
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(|p| p.parent()).unwrap();
    let lib = profile_dir.join("libaesf_ffi.a");
    if !lib.exists() {
        eprintln!("{} not built; skipping", lib.display());
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    std::fs::write(
        &src,
        r#"#include <stdio.h>
#include "aesf.h"
int main(void) {
    AesfModel *m = NULL;
    if (aesf_model_from_json("{\"variant\":\"bivariate_gaussian\",\"rho\":0.7}", &m) != AESF_STATUS_OK) return 10;
    double y = 0.0, v = 0.0;
    if (aesf_closed_form(m, "kendall", 0.0, &y, &v) != AESF_STATUS_OK) return 11;
    AesfMcEstimate e;
    if (aesf_esf_mc(m, "kendall", 50, 0.0, &y, 100, 3, &e) != AESF_STATUS_OK) return 12;
    if (aesf_closed_form(NULL, "kendall", 0.0, &y, &v) != AESF_STATUS_NULL_POINTER) return 13;
    if (aesf_last_error_message() == NULL) return 14;
    aesf_model_free(m);
    printf("%.9f %zu\n", v, e.replicates);
    return 0;
}
"#,
    )
    .unwrap();
    let bin = dir.path().join("main");
    let o = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(header().parent().unwrap())
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let run = Command::new(&bin).output().unwrap();
    assert!(run.status.success(), "exit {:?}", run.status.code());
    let out = String::from_utf8_lossy(&run.stdout);
    let mut it = out.split_whitespace();
    let v: f64 = it.next().unwrap().parse().unwrap();
    assert!(v.abs() < 1e-6, "{out}");
    assert_eq!(it.next(), Some("100"));
}
