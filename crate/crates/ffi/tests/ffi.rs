use std::ffi::CStr;
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use frgauss_ffi::*;

fn spd(data: &[f64], dim: usize) -> *mut FrSpd {
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { fr_spd_new(data.as_ptr(), dim, &mut out) }, FrStatus::Ok);
    out
}

fn last_error() -> String {
    let mut buf = [0 as std::ffi::c_char; 256];
    unsafe { fr_last_error_message(buf.as_mut_ptr(), buf.len()) };
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

#[test]
fn distance_and_kl_on_diagonal_pair() {
    let a = spd(&[1.0, 0.0, 0.0, 2.0], 2);
    let b = spd(&[3.0, 0.0, 0.0, 2.0], 2);
    let mut d = f64::NAN;
    let mut kl = f64::NAN;
    unsafe {
        assert_eq!(fr_distance(a, b, &mut d), FrStatus::Ok);
        assert_eq!(fr_kl_divergence(b, a, &mut kl), FrStatus::Ok);
        fr_spd_free(a);
        fr_spd_free(b);
    }
    assert!((d - 3f64.ln() / 2f64.sqrt()).abs() < 1e-14);
    // ½ (3 − 1 − ln 3)
    assert!((kl - 0.5 * (2.0 - 3f64.ln())).abs() < 1e-14);
}

#[test]
fn geodesic_midpoint_and_copy() {
    let a = spd(&[1.0, 0.0, 0.0, 1.0], 2);
    let b = spd(&[9.0, 0.0, 0.0, 0.25], 2);
    let mut mid = ptr::null_mut();
    let mut buf = [0.0; 4];
    let mut short = [0.0; 3];
    unsafe {
        assert_eq!(fr_geodesic(a, b, 0.5, &mut mid), FrStatus::Ok);
        assert_eq!(fr_spd_dim(mid), 2);
        assert_eq!(fr_spd_copy(mid, buf.as_mut_ptr(), 4), FrStatus::Ok);
        assert_eq!(fr_spd_copy(mid, short.as_mut_ptr(), 3), FrStatus::BufferTooSmall);
        assert_eq!(fr_geodesic(a, b, f64::NAN, &mut mid), FrStatus::InvalidArgument);
        assert!(mid.is_null());
        fr_spd_free(a);
        fr_spd_free(b);
    }
    assert!((buf[0] - 3.0).abs() < 1e-14);
    assert!((buf[3] - 0.5).abs() < 1e-14);
    assert_eq!(buf[1], 0.0);
}

#[test]
fn daihs_scalar_case() {
    // 1×1 blocks: operators a + γ and b + μ on a one-point truncation.
    let (a, b) = ([1.0], [3.0]);
    let mut d = f64::NAN;
    let status = unsafe { fr_daihs_distance(a.as_ptr(), 1.0, b.as_ptr(), 2.0, 1, &mut d) };
    assert_eq!(status, FrStatus::Ok);
    let s = 2f64.ln();
    let expected = ((5f64 / 2.0).ln() - s).hypot(s);
    assert!((d - expected).abs() < 1e-14, "{d} vs {expected}");

    let status = unsafe { fr_daihs_distance(a.as_ptr(), 0.0, b.as_ptr(), 2.0, 1, &mut d) };
    assert_eq!(status, FrStatus::Numerical);
}

#[test]
fn sectional_curvature_worked_example() {
    let p = spd(&[1.0, 0.0, 0.0, 1.0], 2);
    let x = [1.0, 0.0, 0.0, -1.0];
    let y = [0.0, 1.0, 1.0, 0.0];
    let mut k = f64::NAN;
    unsafe {
        assert_eq!(fr_sectional_curvature(p, x.as_ptr(), y.as_ptr(), &mut k), FrStatus::Ok);
        assert_eq!(fr_sectional_curvature(p, x.as_ptr(), x.as_ptr(), &mut k), FrStatus::Numerical);
        fr_spd_free(p);
    }
    assert!(last_error().contains("degenerate plane"));
}

#[test]
fn error_codes_and_messages() {
    let mut out = ptr::null_mut();
    unsafe {
        assert_eq!(fr_spd_new(ptr::null(), 2, &mut out), FrStatus::NullPointer);
        assert!(last_error().contains("data is null"));
        assert_eq!(fr_spd_new([1.0].as_ptr(), 0, &mut out), FrStatus::InvalidArgument);
        assert_eq!(fr_spd_new([1.0, f64::NAN, 0.0, 1.0].as_ptr(), 2, &mut out), FrStatus::InvalidArgument);
        assert_eq!(fr_spd_new([1.0, 2.0, 2.0, 1.0].as_ptr(), 2, &mut out), FrStatus::NotPositiveDefinite);
        assert!(out.is_null());
        assert!(last_error().contains("not positive definite"));
        assert_eq!(fr_distance(ptr::null(), ptr::null(), ptr::null_mut()), FrStatus::NullPointer);
        assert_eq!(fr_spd_dim(ptr::null()), 0);
        fr_spd_free(ptr::null_mut());

        let a = spd(&[1.0], 1);
        let b = spd(&[1.0, 0.0, 0.0, 1.0], 2);
        let mut d = 0.0;
        assert_eq!(fr_distance(a, b, &mut d), FrStatus::DimensionMismatch);
        fr_spd_free(a);
        fr_spd_free(b);
    }
    let len = unsafe { fr_last_error_message(ptr::null_mut(), 0) };
    let mut tiny = [1 as std::ffi::c_char; 4];
    let full = unsafe { fr_last_error_message(tiny.as_mut_ptr(), 4) };
    assert_eq!(len, full);
    assert_eq!(tiny[3], 0);
}

#[test]
fn header_is_generated_and_usable_from_c() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let header = std::fs::read_to_string(dir.join("include/frgauss.h")).unwrap();
    for name in ["fr_spd_new", "fr_distance", "fr_geodesic", "fr_last_error_message", "FR_STATUS_OK"] {
        assert!(header.contains(name), "{name} missing from header");
    }

    let target = dir.join("../../target/debug");
    let lib = target.join("libfrgauss_ffi.a");
    if !lib.exists() {
        eprintln!("skipping C link check: {} not built", lib.display());
        return;
    }
    let tmp = tempfile::tempdir().unwrap();
    let exe = tmp.path().join("smoke");
    let cc = Command::new("cc")
        .arg(dir.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(dir.join("include"))
        .arg(&lib)
        .args(["-lm", "-lpthread", "-ldl", "-o"])
        .arg(&exe)
        .output()
        .expect("C compiler");
    assert!(cc.status.success(), "{}", String::from_utf8_lossy(&cc.stderr));
    let run = Command::new(&exe).output().unwrap();
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    assert_eq!(String::from_utf8_lossy(&run.stdout).trim(), "ok");
}
