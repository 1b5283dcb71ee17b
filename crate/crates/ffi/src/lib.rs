//! C ABI for `fintime`.
//!
//! Objects are opaque handles created by `ft_*_new`/`ft_*_compute` functions
//! and released with the matching `ft_*_free`. Every fallible call returns an
//! [`FtStatus`]; on failure a message is available from [`ft_last_error`] on
//! the same thread. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use fintime::cli::{parse_scenario, run_scenario};
use fintime::ftle::lyapunov_exponents;
use fintime::geometry::NormSpec;
use fintime::process::{solve_linear, LinearProcess, SystemSpec};
use fintime::spectral::{compute_spectrum_seeded, stability_radius, SpectrumResult};
use fintime::timeset::TimeSet;
use fintime::Error;
use nalgebra::DMatrix;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FtStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidTimeSet = 3,
    DimensionMismatch = 4,
    IllConditioned = 5,
    NotHyperbolic = 6,
    NotAttractive = 7,
    Numerical = 8,
    BufferTooSmall = 9,
    Config = 10,
    Io = 11,
    Panic = 12,
}

/// Linear process on a compact time set.
pub struct FtProcess {
    inner: LinearProcess,
}

/// Dichotomy spectrum with its extremal growth rates.
pub struct FtSpectrum {
    inner: SpectrumResult,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> FtStatus {
    match e {
        Error::InvalidTimeSet(_) | Error::TimeNotInSet(_) | Error::RequiresIntervalTimeSet => FtStatus::InvalidTimeSet,
        Error::DimensionMismatch { .. } => FtStatus::DimensionMismatch,
        Error::IllConditionedProcess { .. } | Error::NotInvertible => FtStatus::IllConditioned,
        Error::NotHyperbolic => FtStatus::NotHyperbolic,
        Error::NotAttractive => FtStatus::NotAttractive,
        Error::IntegrationBlowup { .. }
        | Error::NonpositiveNorm { .. }
        | Error::TrajectoryCollision { .. }
        | Error::DegenerateFrame { .. }
        | Error::ComplementarityFailure { .. } => FtStatus::Numerical,
        Error::InvalidNorm(_)
        | Error::NormNotDifferentiableAtZero
        | Error::InvalidSystem(_)
        | Error::InvalidArgument(_) => FtStatus::InvalidArgument,
    }
}

/// Runs `f`, converting errors and panics into a status plus message.
fn guard(f: impl FnOnce() -> Result<(), (FtStatus, String)>) -> FtStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => FtStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(&msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(&format!("internal panic: {msg}"));
            FtStatus::Panic
        }
    }
}

fn lib<T>(r: fintime::Result<T>) -> Result<T, (FtStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (FtStatus, String) {
    (FtStatus::NullPointer, format!("{what} is null"))
}

unsafe fn matrix_arg(n: usize, data: *const f64) -> Result<DMatrix<f64>, (FtStatus, String)> {
    if data.is_null() {
        return Err(null("matrix"));
    }
    if n == 0 {
        return Err((FtStatus::InvalidArgument, "dimension must be positive".into()));
    }
    let s = std::slice::from_raw_parts(data, n * n);
    Ok(DMatrix::from_row_slice(n, n, s))
}

unsafe fn store<T>(out: *mut *mut T, value: T) {
    *out = Box::into_raw(Box::new(value));
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ft_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread (empty if none). Valid
/// until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ft_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Process of `ẋ = A x` (`a`: row-major `n × n`) on the sampled interval
/// `[t0, t1]` with `samples` points.
///
/// # Safety
/// `a` must point to `n*n` doubles and `out` to writable storage.
#[no_mangle]
pub unsafe extern "C" fn ft_process_constant_interval(
    n: usize,
    a: *const f64,
    t0: f64,
    t1: f64,
    samples: usize,
    out: *mut *mut FtProcess,
) -> FtStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let m = matrix_arg(n, a)?;
        let sys = lib(SystemSpec::linear_constant(m))?;
        let ts = lib(TimeSet::interval(t0, t1, samples))?;
        store(out, FtProcess { inner: lib(solve_linear(&sys, &ts, None))? });
        Ok(())
    })
}

/// Process of `ẋ = A x` on a finite time set of `count` points.
///
/// # Safety
/// `a` must point to `n*n` doubles, `times` to `count` doubles, `out` to
/// writable storage.
#[no_mangle]
pub unsafe extern "C" fn ft_process_constant_points(
    n: usize,
    a: *const f64,
    times: *const f64,
    count: usize,
    out: *mut *mut FtProcess,
) -> FtStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if times.is_null() {
            return Err(null("times"));
        }
        let m = matrix_arg(n, a)?;
        let sys = lib(SystemSpec::linear_constant(m))?;
        let ts = lib(TimeSet::finite(std::slice::from_raw_parts(times, count)))?;
        store(out, FtProcess { inner: lib(solve_linear(&sys, &ts, None))? });
        Ok(())
    })
}

/// # Safety
/// `p` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ft_process_free(p: *mut FtProcess) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// State dimension, or 0 for a null handle.
///
/// # Safety
/// `p` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ft_process_dim(p: *const FtProcess) -> usize {
    p.as_ref().map_or(0, |p| p.inner.dim())
}

/// The exponentially shifted process `e^{−γ(t−s)} Φ(t, s)`.
///
/// # Safety
/// `p` must be a live handle, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ft_process_shift(p: *const FtProcess, gamma: f64, out: *mut *mut FtProcess) -> FtStatus {
    guard(|| {
        let p = p.as_ref().ok_or_else(|| null("process"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        if !gamma.is_finite() {
            return Err((FtStatus::InvalidArgument, "gamma must be finite".into()));
        }
        store(out, FtProcess { inner: p.inner.shift(gamma) });
        Ok(())
    })
}

/// `−ugr(Rⁿ)` in the Euclidean norm; fails with `NotAttractive` otherwise.
///
/// # Safety
/// `p` must be a live handle, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ft_stability_radius(p: *const FtProcess, resolution: usize, out: *mut f64) -> FtStatus {
    guard(|| {
        let p = p.as_ref().ok_or_else(|| null("process"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = lib(stability_radius(&p.inner, &NormSpec::Euclidean, resolution.max(2)))?;
        Ok(())
    })
}

/// Spectrum in the Euclidean norm. `seed` drives the subspace search in
/// dimension ≥ 4.
///
/// # Safety
/// `p` must be a live handle, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ft_spectrum_compute(
    p: *const FtProcess,
    resolution: usize,
    seed: u64,
    out: *mut *mut FtSpectrum,
) -> FtStatus {
    guard(|| {
        let p = p.as_ref().ok_or_else(|| null("process"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        if resolution < 2 {
            return Err((FtStatus::InvalidArgument, "resolution must be at least 2".into()));
        }
        let s = lib(compute_spectrum_seeded(&p.inner, &NormSpec::Euclidean, resolution, seed))?;
        store(out, FtSpectrum { inner: s });
        Ok(())
    })
}

/// # Safety
/// `s` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ft_spectrum_free(s: *mut FtSpectrum) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Number of spectral intervals, 0 for a null handle.
///
/// # Safety
/// `s` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ft_spectrum_interval_count(s: *const FtSpectrum) -> usize {
    s.as_ref().map_or(0, |s| s.inner.intervals.len())
}

/// Writes intervals as `[lo0, hi0, lo1, hi1, …]` into `out` (capacity
/// `capacity` doubles).
///
/// # Safety
/// `s` must be a live handle, `out` must hold `capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn ft_spectrum_intervals(s: *const FtSpectrum, out: *mut f64, capacity: usize) -> FtStatus {
    guard(|| {
        let s = s.as_ref().ok_or_else(|| null("spectrum"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let flat: Vec<f64> = s.inner.intervals.iter().flat_map(|i| [i[0], i[1]]).collect();
        if capacity < flat.len() {
            return Err((FtStatus::BufferTooSmall, format!("need {} doubles", flat.len())));
        }
        ptr::copy_nonoverlapping(flat.as_ptr(), out, flat.len());
        Ok(())
    })
}

/// Hyperbolicity verdict, EMD rank (−1 if not hyperbolic), `dist(0, Σ)` and
/// whether the subspace search was exhaustive. Any output pointer may be null.
///
/// # Safety
/// `s` must be a live handle; non-null outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn ft_spectrum_summary(
    s: *const FtSpectrum,
    hyperbolic: *mut bool,
    emd_k: *mut i64,
    radius: *mut f64,
    certified: *mut bool,
) -> FtStatus {
    guard(|| {
        let s = &s.as_ref().ok_or_else(|| null("spectrum"))?.inner;
        if let Some(h) = hyperbolic.as_mut() {
            *h = s.hyperbolic;
        }
        if let Some(k) = emd_k.as_mut() {
            *k = s.emd_k.map_or(-1, |k| k as i64);
        }
        if let Some(r) = radius.as_mut() {
            *r = s.radius;
        }
        if let Some(c) = certified.as_mut() {
            *c = s.extremal.certified;
        }
        Ok(())
    })
}

/// Writes `elgr_k` and `eugr_k` for `k = 0..=n` (`n + 1` doubles each;
/// `elgr_0 = +∞`, `eugr_0 = −∞`). Either output may be null.
///
/// # Safety
/// `s` must be a live handle; non-null outputs must hold `capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn ft_spectrum_extremal(
    s: *const FtSpectrum,
    elgr: *mut f64,
    eugr: *mut f64,
    capacity: usize,
) -> FtStatus {
    guard(|| {
        let e = &s.as_ref().ok_or_else(|| null("spectrum"))?.inner.extremal;
        if capacity < e.elgr.len() {
            return Err((FtStatus::BufferTooSmall, format!("need {} doubles", e.elgr.len())));
        }
        if !elgr.is_null() {
            ptr::copy_nonoverlapping(e.elgr.as_ptr(), elgr, e.elgr.len());
        }
        if !eugr.is_null() {
            ptr::copy_nonoverlapping(e.eugr.as_ptr(), eugr, e.eugr.len());
        }
        Ok(())
    })
}

/// Finite-time Lyapunov exponents `(1/T) ln σ_i` of a row-major `n × n`
/// matrix, largest first, written to `out` (`n` doubles).
///
/// # Safety
/// `m` must point to `n*n` doubles and `out` to `n` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn ft_two_point_exponents(n: usize, m: *const f64, t: f64, out: *mut f64) -> FtStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let m = matrix_arg(n, m)?;
        if !(t > 0.0 && t.is_finite()) {
            return Err((FtStatus::InvalidArgument, format!("T must be positive (got {t})")));
        }
        let ex = lib(lyapunov_exponents(&m, t, &NormSpec::Euclidean))?;
        if ex.iter().any(|x| !x.is_finite()) {
            return Err((FtStatus::IllConditioned, "matrix is singular".into()));
        }
        ptr::copy_nonoverlapping(ex.as_ptr(), out, n);
        Ok(())
    })
}

/// Parses and runs a scenario document. `out_dir` (nullable) overrides the
/// scenario's output directory. `exit_code` receives the CLI exit code.
///
/// # Safety
/// `config` must be a NUL-terminated UTF-8 string; `out_dir` null or
/// NUL-terminated; `exit_code` null or writable.
#[no_mangle]
pub unsafe extern "C" fn ft_run_scenario(config: *const c_char, out_dir: *const c_char, exit_code: *mut i32) -> FtStatus {
    guard(|| {
        if config.is_null() {
            return Err(null("config"));
        }
        let text = CStr::from_ptr(config)
            .to_str()
            .map_err(|_| (FtStatus::InvalidArgument, "config is not UTF-8".into()))?;
        let mut cfg = parse_scenario(text).map_err(|e| (FtStatus::Config, e.to_string()))?;
        if !out_dir.is_null() {
            let dir = CStr::from_ptr(out_dir)
                .to_str()
                .map_err(|_| (FtStatus::InvalidArgument, "out_dir is not UTF-8".into()))?;
            cfg.output = Some(dir.to_string());
        }
        let report = run_scenario(&cfg).map_err(|e| (FtStatus::Io, e.to_string()))?;
        if let Some(c) = exit_code.as_mut() {
            *c = report.exit_code();
        }
        Ok(())
    })
}
