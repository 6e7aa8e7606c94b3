//! C interface to `hslice`.
//!
//! Points cross the boundary as arrays of `2n + 1` doubles laid out as
//! `[x_1..x_n, y_1..y_n, z]`. Graphs live behind the opaque `HsGraph` handle.
//! Every function returns an [`HsStatus`]; on failure the message is kept in
//! a thread-local slot readable through [`hs_last_error`]. Panics are caught
//! at the boundary and reported as [`HsStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use hslice::beta::beta_number;
use hslice::graphs::{make_family, Family, GraphFamilySpec, IntrinsicGraph};
use hslice::harness::{emit_json, run_carleson, run_theta_slices, RunConfig};
use hslice::heisenberg::{project_along, HPoint, HorizontalDirection};
use hslice::HsError;

/// Result codes of every exported function.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HsStatus {
    Ok = 0,
    /// Bad argument, including null pointers and malformed points.
    InvalidArgument = 1,
    DimensionMismatch = 2,
    OutOfDomain = 3,
    TooFewSamples = 4,
    NoConvergence = 5,
    Io = 6,
    Parse = 7,
    Failed = 8,
    Panic = 9,
}

/// Graph families accepted by [`hs_graph_new_family`].
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HsFamily {
    VerticalPlane = 0,
    SmoothBump = 1,
    RandomLipschitz = 2,
}

/// Opaque intrinsic Lipschitz graph.
pub struct HsGraph {
    inner: IntrinsicGraph,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn status_of(e: &HsError) -> HsStatus {
    match e {
        HsError::InvalidArgument(_) | HsError::Dependent(_) | HsError::NotOnGraph { .. } => HsStatus::InvalidArgument,
        HsError::DimensionMismatch { .. } => HsStatus::DimensionMismatch,
        HsError::OutOfDomain | HsError::DomainClipped { .. } => HsStatus::OutOfDomain,
        HsError::TooFewSamples { .. } => HsStatus::TooFewSamples,
        HsError::NoConvergence(_) => HsStatus::NoConvergence,
        HsError::Io(_) => HsStatus::Io,
        HsError::Json(_) | HsError::Format(_) => HsStatus::Parse,
        HsError::Numerical(_) | HsError::Violation(_) => HsStatus::Failed,
    }
}

/// Runs `body`, translating errors and panics into status codes.
fn guard(body: impl FnOnce() -> Result<(), HsError>) -> HsStatus {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => HsStatus::Ok,
        Ok(Err(e)) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {msg}"));
            HsStatus::Panic
        }
    }
}

fn null_error() -> HsError {
    HsError::InvalidArgument("null pointer".into())
}

/// Reads a point of `H_n` from `2n + 1` doubles.
///
/// # Safety
/// `p` must be null or point to `2n + 1` readable doubles.
unsafe fn read_point(n: usize, p: *const f64) -> Result<HPoint, HsError> {
    if p.is_null() {
        return Err(null_error());
    }
    if n == 0 {
        return Err(HsError::InvalidArgument("n must be at least 1".into()));
    }
    let s = std::slice::from_raw_parts(p, 2 * n + 1);
    HPoint::new(s[..n].to_vec(), s[n..2 * n].to_vec(), s[2 * n])
}

/// # Safety
/// `out` must be null or point to `2n + 1` writable doubles.
unsafe fn write_point(p: &HPoint, out: *mut f64) -> Result<(), HsError> {
    if out.is_null() {
        return Err(null_error());
    }
    let n = p.n();
    let s = std::slice::from_raw_parts_mut(out, 2 * n + 1);
    s[..n].copy_from_slice(&p.x);
    s[n..2 * n].copy_from_slice(&p.y);
    s[2 * n] = p.z;
    Ok(())
}

/// # Safety
/// `out` must be null or valid for one write.
unsafe fn write_value<T>(out: *mut T, v: T) -> Result<(), HsError> {
    if out.is_null() {
        return Err(null_error());
    }
    out.write(v);
    Ok(())
}

/// # Safety
/// `s` must be null or a NUL-terminated string.
unsafe fn read_str<'a>(s: *const c_char) -> Result<&'a str, HsError> {
    if s.is_null() {
        return Err(null_error());
    }
    CStr::from_ptr(s).to_str().map_err(|e| HsError::InvalidArgument(format!("string is not UTF-8: {e}")))
}

/// # Safety
/// `out` must be null or valid for one write.
unsafe fn write_string(text: String, out: *mut *mut c_char) -> Result<(), HsError> {
    let c = CString::new(text).map_err(|_| HsError::Format("report contains a NUL byte".into()))?;
    write_value(out, c.into_raw())
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next call into the library on the same thread.
#[no_mangle]
pub extern "C" fn hs_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Frees a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must be null or a string obtained from this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hs_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// `out = a · b` in `H_n`.
///
/// # Safety
/// `a`, `b` and `out` must each hold `2n + 1` doubles.
#[no_mangle]
pub unsafe extern "C" fn hs_group_mul(n: usize, a: *const f64, b: *const f64, out: *mut f64) -> HsStatus {
    guard(|| {
        let (a, b) = (read_point(n, a)?, read_point(n, b)?);
        write_point(&a.try_mul(&b)?, out)
    })
}

/// `out = a⁻¹`.
///
/// # Safety
/// `a` and `out` must each hold `2n + 1` doubles.
#[no_mangle]
pub unsafe extern "C" fn hs_group_inv(n: usize, a: *const f64, out: *mut f64) -> HsStatus {
    guard(|| write_point(&read_point(n, a)?.inv(), out))
}

/// `out = δ_t(a)`.
///
/// # Safety
/// `a` and `out` must each hold `2n + 1` doubles.
#[no_mangle]
pub unsafe extern "C" fn hs_dilate(n: usize, t: f64, a: *const f64, out: *mut f64) -> HsStatus {
    guard(|| write_point(&read_point(n, a)?.dilate(t), out))
}

/// Korányi gauge distance between `a` and `b`.
///
/// # Safety
/// `a` and `b` must each hold `2n + 1` doubles; `out` one double.
#[no_mangle]
pub unsafe extern "C" fn hs_gauge_dist(n: usize, a: *const f64, b: *const f64, out: *mut f64) -> HsStatus {
    guard(|| {
        let (a, b) = (read_point(n, a)?, read_point(n, b)?);
        if a.n() != b.n() {
            return Err(HsError::DimensionMismatch { expected: a.n(), found: b.n() });
        }
        write_value(out, a.gauge_dist(&b))
    })
}

/// Projection of `p` along the horizontal direction `w` (a point with
/// `y_n = 1`, `z = 0`) onto the hyperplane `{y_n = 0}`.
///
/// # Safety
/// `w`, `p` and `out` must each hold `2n + 1` doubles.
#[no_mangle]
pub unsafe extern "C" fn hs_project_along(n: usize, w: *const f64, p: *const f64, out: *mut f64) -> HsStatus {
    guard(|| {
        let w = HorizontalDirection::from_point(read_point(n, w)?)?;
        write_point(&project_along(&w, &read_point(n, p)?), out)
    })
}

/// Builds a test graph over `{y_n = 0}` and stores a new handle in `out`.
/// The handle must be released with [`hs_graph_free`].
///
/// # Safety
/// `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn hs_graph_new_family(
    family: HsFamily,
    n: usize,
    lambda: f64,
    seed: u64,
    resolution: usize,
    out: *mut *mut HsGraph,
) -> HsStatus {
    guard(|| {
        let family = match family {
            HsFamily::VerticalPlane => Family::VerticalPlane,
            HsFamily::SmoothBump => Family::SmoothBump,
            HsFamily::RandomLipschitz => Family::RandomLipschitz,
        };
        let g = make_family(&GraphFamilySpec::new(family, n, lambda, seed, resolution))?;
        write_value(out, Box::into_raw(Box::new(HsGraph { inner: g })))
    })
}

/// Loads a graph from the JSON container format.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn hs_graph_from_json(json: *const c_char, out: *mut *mut HsGraph) -> HsStatus {
    guard(|| {
        let g = IntrinsicGraph::from_json(read_str(json)?)?;
        write_value(out, Box::into_raw(Box::new(HsGraph { inner: g })))
    })
}

/// Serializes a graph to the JSON container format. Free the result with
/// [`hs_string_free`].
///
/// # Safety
/// `g` must be a live handle and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn hs_graph_to_json(g: *const HsGraph, out: *mut *mut c_char) -> HsStatus {
    guard(|| {
        let g = g.as_ref().ok_or_else(null_error)?;
        write_string(g.inner.to_json()?, out)
    })
}

/// Releases a graph handle. Null is ignored.
///
/// # Safety
/// `g` must be null or a handle from this library that was not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hs_graph_free(g: *mut HsGraph) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// Dimension `n` of the graph's group, or 0 for a null handle.
///
/// # Safety
/// `g` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hs_graph_n(g: *const HsGraph) -> usize {
    g.as_ref().map_or(0, |g| g.inner.n())
}

/// Point of the graph above `v`, a point with `y_n = 0`.
///
/// # Safety
/// `g` must be a live handle; `v` and `out` must each hold `2n + 1` doubles.
#[no_mangle]
pub unsafe extern "C" fn hs_graph_point(g: *const HsGraph, v: *const f64, out: *mut f64) -> HsStatus {
    guard(|| {
        let g = &g.as_ref().ok_or_else(null_error)?.inner;
        let p = g.graph_point(&read_point(g.n(), v)?)?;
        write_point(&p, out)
    })
}

/// Monte Carlo beta number of the graph at the graph point `x` and radius
/// `r`, from `samples` proposals.
///
/// # Safety
/// `g` must be a live handle, `x` must hold `2n + 1` doubles, and
/// `value`/`stderr` must each be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn hs_beta_number(
    g: *const HsGraph,
    x: *const f64,
    r: f64,
    samples: usize,
    seed: u64,
    value: *mut f64,
    stderr: *mut f64,
) -> HsStatus {
    guard(|| {
        let g = &g.as_ref().ok_or_else(null_error)?.inner;
        let b = beta_number(g, &read_point(g.n(), x)?, r, samples, seed)?;
        write_value(value, b.value)?;
        write_value(stderr, b.stderr)
    })
}

fn config_from(json: &str) -> Result<RunConfig, HsError> {
    if json.trim().is_empty() {
        Ok(RunConfig::default())
    } else {
        RunConfig::from_json(json)
    }
}

/// Runs the Carleson experiment for a JSON run configuration (an empty
/// string selects the defaults) and returns the JSON report. Free the result
/// with [`hs_string_free`].
///
/// # Safety
/// `config_json` must be a NUL-terminated string and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn hs_run_carleson(config_json: *const c_char, out: *mut *mut c_char) -> HsStatus {
    guard(|| {
        let report = run_carleson(&config_from(read_str(config_json)?)?)?;
        write_string(emit_json(&report, None)?, out)
    })
}

/// As [`hs_run_carleson`], for the slice theta experiment.
///
/// # Safety
/// `config_json` must be a NUL-terminated string and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn hs_run_theta(config_json: *const c_char, out: *mut *mut c_char) -> HsStatus {
    guard(|| {
        let report = run_theta_slices(&config_from(read_str(config_json)?)?)?;
        write_string(emit_json(&report, None)?, out)
    })
}
