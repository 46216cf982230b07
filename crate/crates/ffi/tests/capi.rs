use std::ffi::{CStr, CString};
use std::ptr;

use riskratio_ffi::*;

fn last_error() -> String {
    let p = rr_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn toy() -> *mut RrDataset {
    // Treated outcomes 2, 4; control outcomes 1, 1 -> RR 3.
    let x = [0.0, 1.0, 2.0, 3.0];
    let t = [1u8, 1, 0, 0];
    let y = [2.0, 4.0, 1.0, 1.0];
    let mut d = ptr::null_mut();
    let s = unsafe { rr_dataset_new(x.as_ptr(), 4, 1, t.as_ptr(), y.as_ptr(), &mut d) };
    assert_eq!(s, RrStatus::Ok);
    d
}

#[test]
fn neyman_on_toy_data() {
    let d = toy();
    unsafe {
        assert_eq!(rr_dataset_n(d), 4);
        assert_eq!(rr_dataset_p(d), 1);
        let mut o = rr_estimate_options_default();
        o.method = RrMethod::Neyman;
        let mut r = std::mem::zeroed::<RrResult>();
        assert_eq!(rr_estimate(d, &o, &mut r), RrStatus::Ok);
        assert!((r.point - 3.0).abs() < 1e-12);
        assert!(r.assumes_randomization);
        assert!(!r.degenerate);
        assert!(r.ci_lower < r.point && r.point < r.ci_upper);
        rr_dataset_free(d);
    }
}

#[test]
fn bad_treatment_sets_error() {
    let x = [0.0, 1.0];
    let t = [1u8, 2];
    let y = [1.0, 1.0];
    let mut d = ptr::null_mut();
    let s = unsafe { rr_dataset_new(x.as_ptr(), 2, 1, t.as_ptr(), y.as_ptr(), &mut d) };
    assert_eq!(s, RrStatus::InvalidArgument);
    assert!(d.is_null());
    assert!(last_error().contains("row 1"));
}

#[test]
fn null_pointers_are_reported() {
    let mut r = unsafe { std::mem::zeroed::<RrResult>() };
    let s = unsafe { rr_estimate(ptr::null(), ptr::null(), &mut r) };
    assert_eq!(s, RrStatus::NullPointer);
    assert!(last_error().contains("dataset"));
    unsafe { rr_dataset_free(ptr::null_mut()) };
    assert_eq!(unsafe { rr_dataset_n(ptr::null()) }, 0);
}

#[test]
fn katz_needs_binary_outcome() {
    let d = toy();
    unsafe {
        let mut o = rr_estimate_options_default();
        o.method = RrMethod::Neyman;
        o.ci_style = RrCiStyle::Katz;
        let mut r = std::mem::zeroed::<RrResult>();
        assert_eq!(rr_estimate(d, &o, &mut r), RrStatus::InvalidArgument);
        rr_dataset_free(d);
    }
}

#[test]
fn true_rr_linear_is_two() {
    let name = CString::new("linear_rct").unwrap();
    let (mut v, mut se) = (0.0, 0.0);
    let s = unsafe { rr_true_rr(name.as_ptr(), 100_000, 1, &mut v, &mut se) };
    assert_eq!(s, RrStatus::Ok);
    assert_eq!(v, 2.0);
    assert!(se.is_nan());

    let bad = CString::new("no_such_design").unwrap();
    let s = unsafe { rr_true_rr(bad.as_ptr(), 100_000, 1, &mut v, ptr::null_mut()) };
    assert_eq!(s, RrStatus::InvalidArgument);
}

#[test]
fn simulate_then_estimate() {
    let name = CString::new("lunceford").unwrap();
    let mut d = ptr::null_mut();
    unsafe {
        assert_eq!(rr_simulate(name.as_ptr(), 3000, 5, 1.0, &mut d), RrStatus::Ok);
        assert_eq!(rr_dataset_p(d), 3);
        let mut r = std::mem::zeroed::<RrResult>();
        assert_eq!(rr_estimate(d, ptr::null(), &mut r), RrStatus::Ok);
        // Default is cross-fitted AIPW with parametric nuisances; truth is about 1.784.
        assert!((r.point - 1.784).abs() < 0.15, "{}", r.point);
        assert!(r.se > 0.0);
        rr_dataset_free(d);
    }
}

#[test]
fn csv_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    std::fs::write(&path, "x1,t,y\n0,1,2\n1,1,4\n2,0,1\n3,0,1\n").unwrap();
    let c = CString::new(path.to_str().unwrap()).unwrap();
    let mut d = ptr::null_mut();
    unsafe {
        assert_eq!(rr_dataset_load_csv(c.as_ptr(), &mut d), RrStatus::Ok);
        assert_eq!(rr_dataset_n(d), 4);
        rr_dataset_free(d);
    }
    let missing = CString::new(dir.path().join("nope.csv").to_str().unwrap()).unwrap();
    let s = unsafe { rr_dataset_load_csv(missing.as_ptr(), &mut d) };
    assert_eq!(s, RrStatus::Io);
}

#[test]
fn header_declares_every_export() {
    let h = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/riskratio.h")).unwrap();
    for f in [
        "rr_last_error_message",
        "rr_version",
        "rr_dataset_new",
        "rr_dataset_load_csv",
        "rr_dataset_free",
        "rr_dataset_n",
        "rr_dataset_p",
        "rr_estimate_options_default",
        "rr_estimate",
        "rr_true_rr",
        "rr_simulate",
        "typedef struct RrDataset RrDataset",
        "RR_STATUS_OK = 0",
    ] {
        assert!(h.contains(f), "header lacks {f}");
    }
    let v = unsafe { CStr::from_ptr(rr_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn c_program_links_and_runs() {
    let manifest = std::path::Path::new(env!("CARGO_MANIFEST_DIR"));
    // target/<profile>/deps/<test binary>
    let profile_dir = std::env::current_exe()
        .unwrap()
        .parent()
        .unwrap()
        .parent()
        .unwrap()
        .to_path_buf();
    let lib = profile_dir.join("libriskratio_ffi.a");
    if !lib.exists() || std::process::Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping: no C compiler or static library");
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let exe = dir.path().join("smoke");
    let status = std::process::Command::new("cc")
        .arg(manifest.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success());
    let out = std::process::Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok "));
}
