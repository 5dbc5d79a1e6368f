//! C ABI for `sos-almost`.
//!
//! Objects cross the boundary as opaque handles that the caller releases
//! with the matching `*_free` function. Every call returns a [`SosStatus`];
//! the message of the last failure on the calling thread is available from
//! [`sos_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use sos_almost::certfile::CertificateDocument;
use sos_almost::certificate::{self, find_r_eps_with, schedule};
use sos_almost::convex_kkt::{solve_convex_program, ConvexProgram};
use sos_almost::poly::{format_poly, parse, Polynomial};
use sos_almost::relaxation::{build_primal, feasible_start, RelaxationConfig};
use sos_almost::sdp::{solve, SolveStatus};
use sos_almost::{CertificateError, KktError, RelaxationError, SolverError};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SosStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    InvalidArgument = 4,
    NegativeInput = 5,
    ScheduleExhausted = 6,
    Solver = 7,
    Malformed = 8,
    NotConvex = 9,
    BufferTooSmall = 10,
    Panic = 11,
}

/// A parsed polynomial.
pub struct SosPolynomial {
    inner: Polynomial,
}

/// A certificate together with the polynomial it certifies.
pub struct SosCertificate {
    f: Polynomial,
    cert: certificate::SosCertificate,
}

/// One relaxation solve.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct SosBound {
    /// 1 when the solver reached the requested tolerance.
    pub optimal: i32,
    pub primal_value: f64,
    pub dual_value: f64,
    pub gap: f64,
    pub lambda: f64,
    pub gamma: f64,
    pub iterations: u32,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl ToString) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.to_string());
}

struct Fail(SosStatus, String);

impl Fail {
    fn new(status: SosStatus, msg: impl ToString) -> Self {
        Fail(status, msg.to_string())
    }
}

fn relaxation_status(e: &RelaxationError) -> SosStatus {
    match e {
        RelaxationError::Poly(_) => SosStatus::Parse,
        _ => SosStatus::InvalidArgument,
    }
}

fn solver_status(e: &SolverError) -> SosStatus {
    match e {
        SolverError::Relaxation(r) => relaxation_status(r),
        _ => SosStatus::Solver,
    }
}

impl From<CertificateError> for Fail {
    fn from(e: CertificateError) -> Self {
        let status = match &e {
            CertificateError::NegativeInput { .. } => SosStatus::NegativeInput,
            CertificateError::ScheduleExhausted { .. } => SosStatus::ScheduleExhausted,
            CertificateError::Malformed(_) => SosStatus::Malformed,
            CertificateError::Poly(_) => SosStatus::Parse,
            CertificateError::Solver(s) => solver_status(s),
            CertificateError::Relaxation(r) => relaxation_status(r),
            CertificateError::Indefinite { .. } => SosStatus::Solver,
            _ => SosStatus::InvalidArgument,
        };
        Fail(status, e.to_string())
    }
}

impl From<KktError> for Fail {
    fn from(e: KktError) -> Self {
        match e {
            KktError::Certificate(c) => c.into(),
            KktError::NotConvex { .. } => Fail(SosStatus::NotConvex, e.to_string()),
            KktError::NoConvergence { .. } => Fail(SosStatus::Solver, e.to_string()),
            _ => Fail(SosStatus::InvalidArgument, e.to_string()),
        }
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> SosStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SosStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            SosStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail::new(SosStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail::new(SosStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref()
        .ok_or_else(|| Fail::new(SosStatus::NullPointer, format!("{what} is null")))
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Fail::new(SosStatus::NullPointer, format!("{what} is null")));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut()
        .ok_or_else(|| Fail::new(SosStatus::NullPointer, format!("{what} is null")))
}

/// Copies `s` with a NUL terminator. `needed` receives the full size.
unsafe fn write_string(s: &str, buf: *mut c_char, cap: usize, needed: *mut usize) -> Result<(), Fail> {
    let bytes = s.as_bytes();
    if !needed.is_null() {
        *needed = bytes.len() + 1;
    }
    if buf.is_null() || cap < bytes.len() + 1 {
        return Err(Fail::new(SosStatus::BufferTooSmall, format!("need {} bytes", bytes.len() + 1)));
    }
    ptr::copy_nonoverlapping(bytes.as_ptr(), buf.cast::<u8>(), bytes.len());
    *buf.add(bytes.len()) = 0;
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sos_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the last error message of this thread into `buf`.
///
/// # Safety
/// `buf` must be valid for `cap` bytes; `needed` may be null.
#[no_mangle]
pub unsafe extern "C" fn sos_last_error_message(buf: *mut c_char, cap: usize, needed: *mut usize) -> SosStatus {
    let msg = LAST_ERROR.with(|e| e.borrow().clone());
    match write_string(&msg, buf, cap, needed) {
        Ok(()) => SosStatus::Ok,
        Err(Fail(s, _)) => s,
    }
}

/// Parses `text` as a polynomial in `n` variables `x1..xn`.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sos_polynomial_parse(text: *const c_char, n: usize, out: *mut *mut SosPolynomial) -> SosStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let text = str_arg(text, "text")?;
        if n == 0 {
            return Err(Fail::new(SosStatus::InvalidArgument, "n must be at least 1"));
        }
        let inner = parse(text, n).map_err(|e| Fail::new(SosStatus::Parse, e))?;
        *out = Box::into_raw(Box::new(SosPolynomial { inner }));
        Ok(())
    })
}

/// # Safety
/// `p` must come from [`sos_polynomial_parse`] or be null.
#[no_mangle]
pub unsafe extern "C" fn sos_polynomial_free(p: *mut SosPolynomial) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// # Safety
/// `p` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn sos_polynomial_degree(p: *const SosPolynomial, out: *mut u32) -> SosStatus {
    guard(|| {
        *out_arg(out, "out")? = ref_arg(p, "polynomial")?.inner.degree();
        Ok(())
    })
}

/// Evaluates at `x` (length `n`).
///
/// # Safety
/// `x` must be valid for `n` reads and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn sos_polynomial_evaluate(
    p: *const SosPolynomial,
    x: *const f64,
    n: usize,
    out: *mut f64,
) -> SosStatus {
    guard(|| {
        let p = ref_arg(p, "polynomial")?;
        let x = slice_arg(x, n, "x")?;
        let v = p.inner.evaluate(x).map_err(|e| Fail::new(SosStatus::InvalidArgument, e))?;
        *out_arg(out, "out")? = v;
        Ok(())
    })
}

/// Writes the canonical text form of `p`.
///
/// # Safety
/// `buf` must be valid for `cap` bytes; `needed` may be null.
#[no_mangle]
pub unsafe extern "C" fn sos_polynomial_to_string(
    p: *const SosPolynomial,
    buf: *mut c_char,
    cap: usize,
    needed: *mut usize,
) -> SosStatus {
    guard(|| write_string(&format_poly(&ref_arg(p, "polynomial")?.inner), buf, cap, needed))
}

/// Solves the order-`r` relaxation on the box of radius `radius`.
///
/// # Safety
/// `p` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn sos_minimize(
    p: *const SosPolynomial,
    r: u32,
    radius: f64,
    tol: f64,
    out: *mut SosBound,
) -> SosStatus {
    guard(|| {
        let f = &ref_arg(p, "polynomial")?.inner;
        let out = out_arg(out, "out")?;
        let cfg = RelaxationConfig::new(r, radius, tol).map_err(|e| Fail::new(relaxation_status(&e), e))?;
        let prob = build_primal(f, &cfg).map_err(|e| Fail::new(relaxation_status(&e), e))?;
        let sol = solve(&prob, &feasible_start(&cfg, f.dim()), tol).map_err(|e| Fail::new(solver_status(&e), e))?;
        *out = SosBound {
            optimal: (sol.status == SolveStatus::Optimal) as i32,
            primal_value: sol.primal_value,
            dual_value: sol.dual_value,
            gap: sol.gap,
            lambda: sol.dual.lambda,
            gamma: sol.dual.gamma,
            iterations: sol.iterations as u32,
        };
        Ok(())
    })
}

/// Searches the schedule `radii × orders` (radius-major) for a certificate
/// that `f + eps Θ_r` is a sum of squares.
///
/// # Safety
/// Arrays must be valid for the given lengths and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn sos_find_certificate(
    p: *const SosPolynomial,
    eps: f64,
    radii: *const f64,
    n_radii: usize,
    orders: *const u32,
    n_orders: usize,
    tol: f64,
    out: *mut *mut SosCertificate,
) -> SosStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let f = &ref_arg(p, "polynomial")?.inner;
        let radii = slice_arg(radii, n_radii, "radii")?;
        let orders = slice_arg(orders, n_orders, "orders")?;
        let sched = schedule(radii, orders.iter().copied());
        let outcome = find_r_eps_with(f, eps, &sched, tol)?;
        *out = Box::into_raw(Box::new(SosCertificate {
            f: f.clone(),
            cert: outcome.certificate,
        }));
        Ok(())
    })
}

/// # Safety
/// `c` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn sos_certificate_free(c: *mut SosCertificate) {
    if !c.is_null() {
        drop(Box::from_raw(c));
    }
}

/// Reads `r_eps`, `epsilon`, the identity residual and the ℓ1 gap. Any
/// output pointer may be null.
///
/// # Safety
/// `c` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn sos_certificate_info(
    c: *const SosCertificate,
    r_eps: *mut u32,
    epsilon: *mut f64,
    residual: *mut f64,
    l1_gap: *mut f64,
) -> SosStatus {
    guard(|| {
        let c = &ref_arg(c, "certificate")?.cert;
        if let Some(v) = r_eps.as_mut() {
            *v = c.r_eps;
        }
        if let Some(v) = epsilon.as_mut() {
            *v = c.epsilon;
        }
        if let Some(v) = residual.as_mut() {
            *v = c.identity_residual;
        }
        if let Some(v) = l1_gap.as_mut() {
            *v = c.l1_gap;
        }
        Ok(())
    })
}

/// Independently rechecks the certificate. `passed` is set to 0 or 1.
///
/// # Safety
/// `c` must be a live handle; `residual` may be null.
#[no_mangle]
pub unsafe extern "C" fn sos_certificate_verify(
    c: *const SosCertificate,
    passed: *mut i32,
    residual: *mut f64,
) -> SosStatus {
    guard(|| {
        let c = ref_arg(c, "certificate")?;
        let passed = out_arg(passed, "passed")?;
        let rep = certificate::verify(&c.f, &c.cert)?;
        *passed = rep.passed as i32;
        if let Some(v) = residual.as_mut() {
            *v = rep.identity_residual;
        }
        Ok(())
    })
}

/// Serializes the certificate as a JSON document.
///
/// # Safety
/// `buf` must be valid for `cap` bytes; `needed` may be null.
#[no_mangle]
pub unsafe extern "C" fn sos_certificate_to_json(
    c: *const SosCertificate,
    buf: *mut c_char,
    cap: usize,
    needed: *mut usize,
) -> SosStatus {
    guard(|| {
        let c = ref_arg(c, "certificate")?;
        let doc = CertificateDocument::from_certificate(&c.f, &c.cert);
        write_string(&doc.to_json(), buf, cap, needed)
    })
}

/// Loads a certificate document.
///
/// # Safety
/// `json` must be NUL-terminated and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn sos_certificate_from_json(json: *const c_char, out: *mut *mut SosCertificate) -> SosStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let doc = CertificateDocument::from_json(str_arg(json, "json")?)?;
        let f = doc.polynomial()?;
        let cert = doc.certificate()?;
        *out = Box::into_raw(Box::new(SosCertificate { f, cert }));
        Ok(())
    })
}

/// Minimizes convex `f` on `{g_j >= 0}` from the Slater point `x0`.
/// Writes `m` multipliers to `lambda`, `n` coordinates to `x_star` and the
/// optimal value to `f_star`.
///
/// # Safety
/// `g` must hold `m` live handles, `x0` and `x_star` `n` doubles, `lambda`
/// `m` doubles.
#[no_mangle]
pub unsafe extern "C" fn sos_kkt_solve(
    f: *const SosPolynomial,
    g: *const *const SosPolynomial,
    m: usize,
    x0: *const f64,
    n: usize,
    tol: f64,
    lambda: *mut f64,
    x_star: *mut f64,
    f_star: *mut f64,
) -> SosStatus {
    guard(|| {
        let f = &ref_arg(f, "f")?.inner;
        let handles = slice_arg(g, m, "g")?;
        let mut gs = Vec::with_capacity(m);
        for &h in handles {
            gs.push(ref_arg(h, "g[j]")?.inner.clone());
        }
        let x0 = slice_arg(x0, n, "x0")?.to_vec();
        if m > 0 && lambda.is_null() {
            return Err(Fail::new(SosStatus::NullPointer, "lambda is null"));
        }
        if x_star.is_null() {
            return Err(Fail::new(SosStatus::NullPointer, "x_star is null"));
        }
        let f_star = out_arg(f_star, "f_star")?;
        let prog = ConvexProgram::new(f.clone(), gs, x0)?;
        prog.check_convexity()?;
        let point = solve_convex_program(&prog, tol)?;
        if m > 0 {
            slice::from_raw_parts_mut(lambda, m).copy_from_slice(&point.lambda);
        }
        slice::from_raw_parts_mut(x_star, n).copy_from_slice(&point.x_star);
        *f_star = point.f_star;
        Ok(())
    })
}
