//! C ABI for `ssep-core`.
//!
//! Every fallible function returns an [`SsepStatus`] and writes results
//! through out-pointers. Exact solvers hand back opaque handles that must be
//! released with the matching `*_free` function. On failure the message is
//! available from [`ssep_last_error_message`] on the same thread.
//!
//! Point sets are passed as a pointer to `n` strictly increasing site
//! indices; configurations as `size` bytes, nonzero meaning occupied,
//! site 1 first.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use ssep_core::dual::{
    estimate_absorption, pair_absorption_exact, transient_dual_moment, PairAbsorption, SolveMethod,
};
use ssep_core::exact::{build_generator, exact_moment, stationary_distribution, StationaryVector};
use ssep_core::forward::transient_moment;
use ssep_core::ladder::{ladder_tables, LadderTable};
use ssep_core::{Configuration, Error, ModelParams, PointSet, RngStream};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SsepStatus {
    Ok = 0,
    NullPointer = 1,
    Validation = 2,
    NonConvergence = 3,
    Resource = 4,
    Panic = 5,
    Numeric = 6,
    Io = 7,
}

impl From<&Error> for SsepStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Validation(_) => SsepStatus::Validation,
            Error::NonConvergence { .. } => SsepStatus::NonConvergence,
            Error::Resource(_) => SsepStatus::Resource,
            Error::Numeric(_) => SsepStatus::Numeric,
            Error::Io(_) => SsepStatus::Io,
        }
    }
}

/// Exact stationary law of a small system.
pub struct SsepStationary {
    inner: StationaryVector,
}

/// Exact two-particle absorption probabilities.
pub struct SsepPairAbsorption {
    inner: PairAbsorption,
}

/// Meeting-kernel ladder for one starting pair.
pub struct SsepLadder {
    inner: LadderTable,
}

/// Estimate with its standard error.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SsepEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: u64,
}

/// Scalar summary of a ladder.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SsepLadderSummary {
    pub p0: f64,
    pub p_inf: f64,
    pub bound: f64,
    pub slack: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(message: &str) {
    let text = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|cell| *cell.borrow_mut() = text);
}

/// Runs `body`, converting errors and panics into status codes.
fn guard<F>(body: F) -> SsepStatus
where
    F: FnOnce() -> Result<(), SsepStatus>,
{
    set_last_error("");
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => SsepStatus::Ok,
        Ok(Err(status)) => status,
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".to_string());
            set_last_error(&format!("panic: {message}"));
            SsepStatus::Panic
        }
    }
}

trait OrStatus<T> {
    fn or_status(self) -> Result<T, SsepStatus>;
}

impl<T> OrStatus<T> for ssep_core::Result<T> {
    fn or_status(self) -> Result<T, SsepStatus> {
        self.map_err(|e| {
            set_last_error(&e.to_string());
            SsepStatus::from(&e)
        })
    }
}

fn null_error(name: &str) -> SsepStatus {
    set_last_error(&format!("null pointer: {name}"));
    SsepStatus::NullPointer
}

fn validation_error(message: String) -> SsepStatus {
    set_last_error(&message);
    SsepStatus::Validation
}

unsafe fn out_ref<'a, T>(ptr: *mut T, name: &str) -> Result<&'a mut T, SsepStatus> {
    ptr.as_mut().ok_or_else(|| null_error(name))
}

unsafe fn handle_ref<'a, T>(ptr: *const T, name: &str) -> Result<&'a T, SsepStatus> {
    ptr.as_ref().ok_or_else(|| null_error(name))
}

unsafe fn point_set(points: *const usize, n: usize) -> Result<PointSet, SsepStatus> {
    if n == 0 {
        return Ok(PointSet::empty());
    }
    if points.is_null() {
        return Err(null_error("points"));
    }
    PointSet::new(std::slice::from_raw_parts(points, n).to_vec()).or_status()
}

unsafe fn configuration(sites: *const u8, size: usize) -> Result<Configuration, SsepStatus> {
    if sites.is_null() {
        return Err(null_error("configuration"));
    }
    let interior: Vec<bool> = std::slice::from_raw_parts(sites, size)
        .iter()
        .map(|&b| b != 0)
        .collect();
    Configuration::from_interior(&interior).or_status()
}

fn estimate(e: ssep_core::Estimate) -> SsepEstimate {
    SsepEstimate {
        mean: e.mean,
        std_error: e.stderr,
        samples: e.samples,
    }
}

/// Message of the last failed call on this thread; empty after success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn ssep_last_error_message() -> *const c_char {
    LAST_ERROR.with(|cell| cell.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ssep_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Solves the exact stationary law for `size <= 20`.
#[no_mangle]
pub unsafe extern "C" fn ssep_stationary_new(
    size: usize,
    rate: f64,
    tol: f64,
    out: *mut *mut SsepStationary,
) -> SsepStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = ptr::null_mut();
        let params = ModelParams::new(size, rate, 0).or_status()?;
        let generator = build_generator(&params).or_status()?;
        let inner = stationary_distribution(&generator, tol).or_status()?;
        *out = Box::into_raw(Box::new(SsepStationary { inner }));
        Ok(())
    })
}

/// Probability of the configuration with bit `i - 1` of `mask` set for
/// each occupied site `i`.
#[no_mangle]
pub unsafe extern "C" fn ssep_stationary_probability(
    handle: *const SsepStationary,
    mask: u64,
    out: *mut f64,
) -> SsepStatus {
    guard(|| {
        let h = handle_ref(handle, "handle")?;
        let out = out_ref(out, "out")?;
        let len = h.inner.probabilities().len() as u64;
        if mask >= len {
            return Err(validation_error(format!(
                "mask {mask} out of range for {len} states"
            )));
        }
        *out = h.inner.probability(mask as usize);
        Ok(())
    })
}

/// Stationary expectation of the product of occupations at `points`.
#[no_mangle]
pub unsafe extern "C" fn ssep_stationary_moment(
    handle: *const SsepStationary,
    points: *const usize,
    n: usize,
    out: *mut f64,
) -> SsepStatus {
    guard(|| {
        let h = handle_ref(handle, "handle")?;
        let out = out_ref(out, "out")?;
        let set = point_set(points, n)?;
        *out = exact_moment(&h.inner, &set).or_status()?;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ssep_stationary_free(handle: *mut SsepStationary) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Solves the two-particle absorption problem on every pair.
#[no_mangle]
pub unsafe extern "C" fn ssep_pair_absorption_new(
    size: usize,
    rate: f64,
    tol: f64,
    out: *mut *mut SsepPairAbsorption,
) -> SsepStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = ptr::null_mut();
        let params = ModelParams::new(size, rate, 0).or_status()?;
        let inner = pair_absorption_exact(&params, SolveMethod::auto(size), tol).or_status()?;
        *out = Box::into_raw(Box::new(SsepPairAbsorption { inner }));
        Ok(())
    })
}

/// Absorption probability from `(x, y)`, `0 <= x < y <= size + 1`.
#[no_mangle]
pub unsafe extern "C" fn ssep_pair_absorption_get(
    handle: *const SsepPairAbsorption,
    x: usize,
    y: usize,
    out: *mut f64,
) -> SsepStatus {
    guard(|| {
        let h = handle_ref(handle, "handle")?;
        let out = out_ref(out, "out")?;
        if !(x < y && y <= h.inner.size() + 1) {
            return Err(validation_error(format!(
                "need 0 <= x < y <= {}, got ({x}, {y})",
                h.inner.size() + 1
            )));
        }
        *out = h.inner.get(x, y);
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ssep_pair_absorption_free(handle: *mut SsepPairAbsorption) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Builds the ladder from `(x0, y0)` to depth `k_max`.
#[no_mangle]
pub unsafe extern "C" fn ssep_ladder_new(
    size: usize,
    rate: f64,
    x0: usize,
    y0: usize,
    k_max: usize,
    tol: f64,
    out: *mut *mut SsepLadder,
) -> SsepStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = ptr::null_mut();
        let params = ModelParams::new(size, rate, 0).or_status()?;
        let inner = ladder_tables(&params, x0, y0, k_max, tol).or_status()?;
        *out = Box::into_raw(Box::new(SsepLadder { inner }));
        Ok(())
    })
}

/// Number of rungs `k = 1..depth` available.
#[no_mangle]
pub unsafe extern "C" fn ssep_ladder_depth(
    handle: *const SsepLadder,
    out: *mut usize,
) -> SsepStatus {
    guard(|| {
        let h = handle_ref(handle, "handle")?;
        *out_ref(out, "out")? = h.inner.depth();
        Ok(())
    })
}

/// Rung `k` (1-based): `C_k`, `gamma_k` and `P_k`.
#[no_mangle]
pub unsafe extern "C" fn ssep_ladder_row(
    handle: *const SsepLadder,
    k: usize,
    c: *mut f64,
    gamma: *mut f64,
    p: *mut f64,
) -> SsepStatus {
    guard(|| {
        let h = handle_ref(handle, "handle")?;
        let (c, gamma, p) = (out_ref(c, "c")?, out_ref(gamma, "gamma")?, out_ref(p, "p")?);
        if k == 0 || k > h.inner.depth() {
            return Err(validation_error(format!(
                "rung {k} outside 1..={}",
                h.inner.depth()
            )));
        }
        *c = h.inner.c(k);
        *gamma = h.inner.gamma(k);
        *p = h.inner.p(k);
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ssep_ladder_summary(
    handle: *const SsepLadder,
    out: *mut SsepLadderSummary,
) -> SsepStatus {
    guard(|| {
        let h = handle_ref(handle, "handle")?;
        let s = h.inner.summary();
        *out_ref(out, "out")? = SsepLadderSummary {
            p0: s.P0,
            p_inf: s.P_inf,
            bound: s.bound,
            slack: s.slack,
        };
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ssep_ladder_free(handle: *mut SsepLadder) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Monte Carlo probability that the dual started at `points` ends with
/// every particle stuck at the right reservoir.
#[no_mangle]
pub unsafe extern "C" fn ssep_dual_absorption(
    size: usize,
    rate: f64,
    seed: u64,
    points: *const usize,
    n: usize,
    replicas: u64,
    out: *mut SsepEstimate,
) -> SsepStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let params = ModelParams::new(size, rate, seed).or_status()?;
        let set = point_set(points, n)?;
        *out = estimate(
            estimate_absorption(&params, &set, replicas, RngStream::new(seed, 2)).or_status()?,
        );
        Ok(())
    })
}

/// Forward Monte Carlo of the product of occupations at `points` at time
/// `t`, started from `initial` (`size` bytes).
#[no_mangle]
pub unsafe extern "C" fn ssep_transient_moment(
    size: usize,
    rate: f64,
    seed: u64,
    initial: *const u8,
    points: *const usize,
    n: usize,
    t: f64,
    replicas: u64,
    out: *mut SsepEstimate,
) -> SsepStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let params = ModelParams::new(size, rate, seed).or_status()?;
        let config = configuration(initial, size)?;
        let set = point_set(points, n)?;
        *out = estimate(
            transient_moment(&params, &config, t, &set, replicas, RngStream::new(seed, 1))
                .or_status()?,
        );
        Ok(())
    })
}

/// Dual Monte Carlo of the same quantity as [`ssep_transient_moment`].
#[no_mangle]
pub unsafe extern "C" fn ssep_transient_dual_moment(
    size: usize,
    rate: f64,
    seed: u64,
    initial: *const u8,
    points: *const usize,
    n: usize,
    t: f64,
    replicas: u64,
    out: *mut SsepEstimate,
) -> SsepStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let params = ModelParams::new(size, rate, seed).or_status()?;
        let config = configuration(initial, size)?;
        let set = point_set(points, n)?;
        *out = estimate(
            transient_dual_moment(&params, &set, &config, t, replicas, RngStream::new(seed, 2))
                .or_status()?,
        );
        Ok(())
    })
}
