//! C ABI over `curvlines`.
//!
//! Every function returns a [`CurvStatus`]. On failure the message is kept
//! per thread and can be read with [`curv_last_error`]. Handles are opaque
//! and owned by the caller until passed to the matching `*_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use curvlines::report::{self, AnalysisConfig};
use curvlines::umbilic::{analyze_umbilic, find_umbilics, UmbilicClass, CLASSIFY_TOL};
use curvlines::{Domain, Surface};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CurvStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidInput = 3,
    /// The computation ran but recorded errors, or failed outright.
    Compute = 4,
    BufferTooSmall = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CurvClass {
    D1 = 0,
    D2 = 1,
    D3 = 2,
    D12Case1 = 3,
    D12Case2 = 4,
    D123 = 5,
    Degenerate = 6,
}

impl From<UmbilicClass> for CurvClass {
    fn from(c: UmbilicClass) -> Self {
        match c {
            UmbilicClass::D1 => CurvClass::D1,
            UmbilicClass::D2 => CurvClass::D2,
            UmbilicClass::D3 => CurvClass::D3,
            UmbilicClass::D12Case1 => CurvClass::D12Case1,
            UmbilicClass::D12Case2 => CurvClass::D12Case2,
            UmbilicClass::D123 => CurvClass::D123,
            UmbilicClass::Degenerate => CurvClass::Degenerate,
        }
    }
}

/// A classified umbilic. `a`, `b`, `c` are the cubic coefficients of the
/// normal form, `delta` the discriminant of the separatrix cubic.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurvUmbilic {
    pub u: f64,
    pub v: f64,
    pub class: CurvClass,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub delta: f64,
}

/// Opaque surface handle.
pub struct CurvSurface {
    surface: Surface,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let s = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(s));
}

fn guard(f: impl FnOnce() -> Result<(), (CurvStatus, String)>) -> CurvStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CurvStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside curvlines");
            CurvStatus::Panic
        }
    }
}

unsafe fn read_str<'a>(p: *const c_char) -> Result<&'a str, (CurvStatus, String)> {
    if p.is_null() {
        return Err((CurvStatus::NullPointer, "null string".into()));
    }
    CStr::from_ptr(p).to_str().map_err(|e| (CurvStatus::InvalidUtf8, e.to_string()))
}

fn null(what: &str) -> (CurvStatus, String) {
    (CurvStatus::NullPointer, format!("{what} is null"))
}

/// Last error message on this thread, or NULL. Valid until the next call
/// into this library on the same thread.
#[no_mangle]
pub extern "C" fn curv_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Build a Monge patch `z = h(u, v)` over `[u0, u1] x [v0, v1]`.
///
/// # Safety
/// `h` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn curv_surface_monge(
    h: *const c_char,
    u0: f64,
    u1: f64,
    v0: f64,
    v1: f64,
    out: *mut *mut CurvSurface,
) -> CurvStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let h = read_str(h)?;
        if !(u0 < u1 && v0 < v1) {
            return Err((CurvStatus::InvalidInput, "empty domain".into()));
        }
        let surface =
            Surface::monge(h, Domain::new(u0, u1, v0, v1)).map_err(|e| (CurvStatus::InvalidInput, e.to_string()))?;
        *out = Box::into_raw(Box::new(CurvSurface { surface }));
        Ok(())
    })
}

/// # Safety
/// `s` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn curv_surface_free(s: *mut CurvSurface) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Fix the family parameter.
///
/// # Safety
/// `s` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn curv_surface_set_lambda(s: *mut CurvSurface, lambda: f64) -> CurvStatus {
    guard(|| {
        let s = s.as_mut().ok_or_else(|| null("surface"))?;
        if !lambda.is_finite() {
            return Err((CurvStatus::InvalidInput, "lambda must be finite".into()));
        }
        s.surface = s.surface.with_lambda(lambda);
        Ok(())
    })
}

/// Locate and classify umbilics on a `grid x grid` search grid. Writes up
/// to `cap` records to `buf` and the total found to `len`; returns
/// `BufferTooSmall` when `len > cap`. `buf` may be NULL when `cap` is 0.
///
/// # Safety
/// `s` must be a live handle, `buf` valid for `cap` writes and `len` valid.
#[no_mangle]
pub unsafe extern "C" fn curv_umbilics(
    s: *const CurvSurface,
    grid: usize,
    buf: *mut CurvUmbilic,
    cap: usize,
    len: *mut usize,
) -> CurvStatus {
    guard(|| {
        let s = s.as_ref().ok_or_else(|| null("surface"))?;
        if len.is_null() {
            return Err(null("len"));
        }
        if buf.is_null() && cap > 0 {
            return Err(null("buf"));
        }
        let compute = |e: &dyn std::fmt::Display| (CurvStatus::Compute, e.to_string());
        let ps = find_umbilics(&s.surface, grid).map_err(|e| compute(&e))?;
        let mut recs = Vec::with_capacity(ps.len());
        for p in ps {
            let r = analyze_umbilic(&s.surface, p, CLASSIFY_TOL).map_err(|e| compute(&e))?;
            recs.push(CurvUmbilic {
                u: p[0],
                v: p[1],
                class: r.classification.class.into(),
                a: r.jet.a,
                b: r.jet.b,
                c: r.jet.c,
                delta: r.classification.delta,
            });
        }
        *len = recs.len();
        for (k, r) in recs.iter().take(cap).enumerate() {
            *buf.add(k) = *r;
        }
        if recs.len() > cap {
            return Err((CurvStatus::BufferTooSmall, format!("{} umbilics, room for {cap}", recs.len())));
        }
        Ok(())
    })
}

/// Run a full analysis from a JSON configuration and return the JSON
/// report in `out`, to be released with [`curv_string_free`]. When the
/// report records computation errors it is still returned, with status
/// `Compute`.
///
/// # Safety
/// `config` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn curv_run_json(config: *const c_char, out: *mut *mut c_char) -> CurvStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let text = read_str(config)?;
        let invalid = |e: report::ConfigError| (CurvStatus::InvalidInput, e.to_string());
        let cfg = AnalysisConfig::from_json(text).map_err(invalid)?;
        let run = report::run(&cfg).map_err(invalid)?;
        let doc = &run.document;
        let json = CString::new(doc.to_json()).map_err(|e| (CurvStatus::Compute, e.to_string()))?;
        *out = json.into_raw();
        match doc.errors.first() {
            Some(e) => Err((CurvStatus::Compute, format!("{}: {}", e.stage, e.message))),
            None => Ok(()),
        }
    })
}

/// # Safety
/// `s` must be NULL or a string returned by this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn curv_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
