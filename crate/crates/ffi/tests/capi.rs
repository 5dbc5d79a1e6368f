use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use sos_almost_ffi::*;

fn poly(text: &str, n: usize) -> *mut SosPolynomial {
    let c = CString::new(text).unwrap();
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { sos_polynomial_parse(c.as_ptr(), n, &mut p) }, SosStatus::Ok);
    p
}

fn last_error() -> String {
    let mut buf = vec![0u8; 512];
    unsafe { sos_last_error_message(buf.as_mut_ptr().cast(), buf.len(), ptr::null_mut()) };
    CStr::from_bytes_until_nul(&buf).unwrap().to_string_lossy().into_owned()
}

#[test]
fn polynomial_handles() {
    let p = poly("x1^2 - 2*x1 + 1", 1);
    let mut deg = 0;
    let mut v = 0.0;
    unsafe {
        assert_eq!(sos_polynomial_degree(p, &mut deg), SosStatus::Ok);
        assert_eq!(sos_polynomial_evaluate(p, [3.0].as_ptr(), 1, &mut v), SosStatus::Ok);
        assert_eq!(sos_polynomial_evaluate(p, [3.0, 1.0].as_ptr(), 2, &mut v), SosStatus::InvalidArgument);
    }
    assert_eq!(deg, 2);
    assert_eq!(v, 4.0);

    let mut needed = 0;
    let mut small = [0 as std::ffi::c_char; 4];
    unsafe {
        assert_eq!(sos_polynomial_to_string(p, small.as_mut_ptr(), 4, &mut needed), SosStatus::BufferTooSmall);
        let mut buf = vec![0u8; needed];
        assert_eq!(sos_polynomial_to_string(p, buf.as_mut_ptr().cast(), needed, ptr::null_mut()), SosStatus::Ok);
        assert_eq!(CStr::from_bytes_until_nul(&buf).unwrap().to_str().unwrap(), "1 - 2*x1 + x1^2");
        sos_polynomial_free(p);
    }
}

#[test]
fn errors_are_reported() {
    let text = CString::new("x2").unwrap();
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { sos_polynomial_parse(text.as_ptr(), 1, &mut p) }, SosStatus::Parse);
    assert!(p.is_null());
    assert!(last_error().contains("x2"));
    assert_eq!(unsafe { sos_polynomial_parse(ptr::null(), 1, &mut p) }, SosStatus::NullPointer);
    assert_eq!(unsafe { sos_polynomial_degree(ptr::null(), &mut 0) }, SosStatus::NullPointer);

    let neg = poly("-1", 1);
    let mut c = ptr::null_mut();
    let status = unsafe { sos_find_certificate(neg, 0.1, [1.0].as_ptr(), 1, [1].as_ptr(), 1, 1e-8, &mut c) };
    assert_eq!(status, SosStatus::NegativeInput);
    assert!(c.is_null());
    let mut b = SosBound::default();
    assert_eq!(unsafe { sos_minimize(neg, 1, 100.0, 1e-8, &mut b) }, SosStatus::InvalidArgument);
    unsafe { sos_polynomial_free(neg) };

    let bad = CString::new("{\"version\": 1}").unwrap();
    assert_eq!(unsafe { sos_certificate_from_json(bad.as_ptr(), &mut c) }, SosStatus::Malformed);
}

#[test]
fn minimize_and_certify() {
    let p = poly("x1^2 - 2*x1 + 1", 1);
    let mut b = SosBound::default();
    assert_eq!(unsafe { sos_minimize(p, 1, 2.0, 1e-8, &mut b) }, SosStatus::Ok);
    assert_eq!(b.optimal, 1);
    assert!(b.primal_value.abs() < 1e-6);

    let mut c = ptr::null_mut();
    let status = unsafe { sos_find_certificate(p, 0.5, [1.0, 2.0].as_ptr(), 2, [1, 2].as_ptr(), 2, 1e-8, &mut c) };
    assert_eq!(status, SosStatus::Ok);
    let (mut r, mut eps, mut res, mut gap) = (0u32, 0.0, 0.0, 0.0);
    let mut passed = 0;
    unsafe {
        assert_eq!(sos_certificate_info(c, &mut r, &mut eps, &mut res, &mut gap), SosStatus::Ok);
        assert_eq!(sos_certificate_verify(c, &mut passed, ptr::null_mut()), SosStatus::Ok);
        sos_certificate_free(c);
        sos_polynomial_free(p);
    }
    assert_eq!(passed, 1);
    assert_eq!(r, 1);
    assert_eq!(eps, 0.5);
    assert_eq!(gap, 1.0);
}

#[test]
fn kkt_disk() {
    let f = poly("x1 + x2 + 2", 2);
    let g = poly("1 - x1^2 - x2^2", 2);
    let gs = [g as *const SosPolynomial];
    let mut lambda = [0.0];
    let mut x = [0.0; 2];
    let mut fs = 0.0;
    let status = unsafe {
        sos_kkt_solve(f, gs.as_ptr(), 1, [0.0, 0.0].as_ptr(), 2, 1e-8, lambda.as_mut_ptr(), x.as_mut_ptr(), &mut fs)
    };
    assert_eq!(status, SosStatus::Ok);
    assert!((lambda[0] - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-6);
    assert!((fs - (2.0 - 2f64.sqrt())).abs() < 1e-7);

    let h = poly("x1^2 - x2^2 + 3", 2);
    let status = unsafe {
        sos_kkt_solve(h, gs.as_ptr(), 1, [0.0, 0.0].as_ptr(), 2, 1e-8, lambda.as_mut_ptr(), x.as_mut_ptr(), &mut fs)
    };
    assert_eq!(status, SosStatus::NotConvex);
    unsafe {
        sos_polynomial_free(f);
        sos_polynomial_free(g);
        sos_polynomial_free(h);
    }
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(sos_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

fn header() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("include/sos_almost.h")
}

#[test]
fn header_declares_the_api() {
    let text = std::fs::read_to_string(header()).unwrap();
    for name in [
        "typedef struct SosPolynomial SosPolynomial;",
        "typedef struct SosCertificate SosCertificate;",
        "SOS_STATUS_SCHEDULE_EXHAUSTED",
        "sos_polynomial_parse",
        "sos_minimize",
        "sos_find_certificate",
        "sos_certificate_verify",
        "sos_certificate_from_json",
        "sos_kkt_solve",
        "sos_last_error_message",
    ] {
        assert!(text.contains(name), "missing {name}");
    }
}

fn library_dir() -> Option<PathBuf> {
    let exe = std::env::current_exe().ok()?;
    let deps = exe.parent()?;
    let found = [deps.parent()?, deps]
        .into_iter()
        .find(|d| d.join("libsos_almost_ffi.so").exists())
        .map(Path::to_path_buf);
    found
}

#[test]
fn c_program_links_and_runs() {
    let Some(lib) = library_dir() else {
        eprintln!("shared library not found next to the test binary; skipping");
        return;
    };
    if Command::new("cc").arg("--version").output().is_err() {
        eprintln!("no C compiler; skipping");
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let exe = dir.path().join("smoke");
    let src = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/c/smoke.c");
    let status = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(header().parent().unwrap())
        .arg("-L")
        .arg(&lib)
        .arg(format!("-Wl,-rpath,{}", lib.display()))
        .args(["-lsos_almost_ffi", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok "));
}
