use std::ffi::{CStr, CString};
use std::process::Command;
use std::ptr;

use curvlines_ffi::*;

fn lemon() -> *mut CurvSurface {
    let h = CString::new("(u^2 + v^2)/2 + 3*u^3/6 + u*v^2/2").unwrap();
    let mut s = ptr::null_mut();
    let st = unsafe { curv_surface_monge(h.as_ptr(), -0.3, 0.3, -0.3, 0.3, &mut s) };
    assert_eq!(st, CurvStatus::Ok);
    assert!(!s.is_null());
    s
}

fn last_error() -> String {
    let p = curv_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn classifies_a_lemon() {
    let s = lemon();
    let mut buf = [CurvUmbilic { u: 0.0, v: 0.0, class: CurvClass::Degenerate, a: 0.0, b: 0.0, c: 0.0, delta: 0.0 }; 4];
    let mut len = 0;
    let st = unsafe { curv_umbilics(s, 40, buf.as_mut_ptr(), buf.len(), &mut len) };
    assert_eq!(st, CurvStatus::Ok);
    assert_eq!(len, 1);
    assert_eq!(buf[0].class, CurvClass::D1);
    assert!((buf[0].a - 3.0).abs() < 1e-6 && (buf[0].b - 1.0).abs() < 1e-6);
    assert!(curv_last_error().is_null());
    unsafe { curv_surface_free(s) };
}

#[test]
fn reports_needed_capacity() {
    let s = lemon();
    let mut len = 0;
    let st = unsafe { curv_umbilics(s, 40, ptr::null_mut(), 0, &mut len) };
    assert_eq!(st, CurvStatus::BufferTooSmall);
    assert_eq!(len, 1);
    unsafe { curv_surface_free(s) };
}

#[test]
fn lambda_changes_the_class() {
    let h = CString::new("(u^2 + v^2)/2 + lambda*u^3/6 + u*v^2/2").unwrap();
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { curv_surface_monge(h.as_ptr(), -0.3, 0.3, -0.3, 0.3, &mut s) }, CurvStatus::Ok);
    let mut u = [CurvUmbilic { u: 0.0, v: 0.0, class: CurvClass::Degenerate, a: 0.0, b: 0.0, c: 0.0, delta: 0.0 }; 8];
    let mut len = 0;
    for (l, want) in [(-1.0, CurvClass::D3), (1.5, CurvClass::D2), (3.0, CurvClass::D1)] {
        assert_eq!(unsafe { curv_surface_set_lambda(s, l) }, CurvStatus::Ok);
        assert_eq!(unsafe { curv_umbilics(s, 40, u.as_mut_ptr(), u.len(), &mut len) }, CurvStatus::Ok);
        let origin = u[..len].iter().find(|x| x.u.hypot(x.v) < 1e-8).expect("umbilic at the origin");
        assert_eq!(origin.class, want, "lambda = {l}");
    }
    assert_eq!(unsafe { curv_surface_set_lambda(s, f64::NAN) }, CurvStatus::InvalidInput);
    unsafe { curv_surface_free(s) };
}

#[test]
fn bad_input_sets_the_error() {
    let mut s = ptr::null_mut();
    let h = CString::new("u^2 +").unwrap();
    assert_eq!(unsafe { curv_surface_monge(h.as_ptr(), -1.0, 1.0, -1.0, 1.0, &mut s) }, CurvStatus::InvalidInput);
    assert!(s.is_null());
    assert!(!last_error().is_empty());
    let h = CString::new("u^2").unwrap();
    assert_eq!(unsafe { curv_surface_monge(h.as_ptr(), 1.0, -1.0, -1.0, 1.0, &mut s) }, CurvStatus::InvalidInput);
    assert_eq!(unsafe { curv_surface_monge(ptr::null(), -1.0, 1.0, -1.0, 1.0, &mut s) }, CurvStatus::NullPointer);
    let bad = [0xffu8, 0];
    assert_eq!(
        unsafe { curv_surface_monge(bad.as_ptr().cast(), -1.0, 1.0, -1.0, 1.0, &mut s) },
        CurvStatus::InvalidUtf8
    );
    assert_eq!(unsafe { curv_umbilics(ptr::null(), 10, ptr::null_mut(), 0, ptr::null_mut()) }, CurvStatus::NullPointer);
    unsafe {
        curv_surface_free(ptr::null_mut());
        curv_string_free(ptr::null_mut());
    }
}

#[test]
fn run_json_returns_a_report() {
    let cfg = CString::new(
        r#"{"surface": {"kind": "monge", "h": "(u^2 + v^2)/2 + 1.5*u^3/6 + u*v^2/2", "domain": [-0.3, 0.3, -0.3, 0.3]},
            "mode": "analyze"}"#,
    )
    .unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { curv_run_json(cfg.as_ptr(), &mut out) }, CurvStatus::Ok);
    let json = unsafe { CStr::from_ptr(out) }.to_str().unwrap().to_owned();
    unsafe { curv_string_free(out) };
    assert!(json.contains(r#""schema_version": "1.0.0""#));
    assert!(json.contains(r#""class": "D2""#));

    let bad = CString::new(r#"{"mode": "analyze"}"#).unwrap();
    assert_eq!(unsafe { curv_run_json(bad.as_ptr(), &mut out) }, CurvStatus::InvalidInput);
    assert!(out.is_null());
}

#[test]
fn header_is_valid_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/curvlines.h");
    let text = std::fs::read_to_string(header).unwrap();
    for name in ["curv_surface_monge", "curv_umbilics", "curv_run_json", "curv_string_free", "curv_last_error"] {
        assert!(text.contains(name), "{name} missing from header");
    }
    let Ok(out) = Command::new("cc").args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c", header]).output() else {
        eprintln!("no C compiler, syntax check skipped");
        return;
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
