//! C ABI for `chaos_ldp`.
//!
//! Every function returns a [`ChaosLdpStatus`]. On failure the message of
//! the last error on the calling thread is available from
//! [`chaos_ldp_last_error`]. Handles are opaque and must be released with
//! their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use chaos_ldp::cli::RunConfig;
use chaos_ldp::grid::GridFn;
use chaos_ldp::ldp::{dominating_point, estimate_prob, Direction, EventSpec};
use chaos_ldp::noise::Control;
use chaos_ldp::process::{skeleton, ChaosSpec};
use chaos_ldp::rate::RateSolver;
use chaos_ldp::Error;

/// Result codes. Zero is success.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChaosLdpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Config = 3,
    Parse = 4,
    Dimension = 5,
    Numerical = 6,
    EffectiveSampleSize = 7,
    Io = 8,
    BufferTooSmall = 9,
    Panic = 10,
}

impl From<&Error> for ChaosLdpStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Config(_) | Error::GridMismatch | Error::NoCertificate | Error::TooLarge(_) => ChaosLdpStatus::Config,
            Error::Parse { .. } | Error::Json(_) => ChaosLdpStatus::Parse,
            Error::Dimension { .. } | Error::OrderMismatch { .. } => ChaosLdpStatus::Dimension,
            Error::Numerical(_) | Error::NonFinite(_) => ChaosLdpStatus::Numerical,
            Error::EffectiveSampleSize { .. } => ChaosLdpStatus::EffectiveSampleSize,
            Error::Io(_) => ChaosLdpStatus::Io,
        }
    }
}

/// Values of the `direction` argument of [`chaos_ldp_estimate_threshold`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChaosLdpDirection {
    Above = 0,
    Below = 1,
}

/// Built kernel family: grid, sites and chaos kernels.
pub struct ChaosLdpSpec {
    spec: ChaosSpec,
    solver: RateSolver,
}

/// Monte Carlo estimate of an event probability.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct ChaosLdpEstimate {
    pub estimate: f64,
    pub stderr: f64,
    pub log_estimate: f64,
    pub ess: f64,
    pub hits: usize,
    pub samples: usize,
    pub reliable: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: ChaosLdpStatus, msg: impl Into<String>) -> ChaosLdpStatus {
    set_error(msg.into());
    status
}

fn guard(f: impl FnOnce() -> Result<(), ChaosLdpStatus>) -> ChaosLdpStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ChaosLdpStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => fail(ChaosLdpStatus::Panic, "internal panic"),
    }
}

trait OrStatus<T> {
    fn or_status(self) -> Result<T, ChaosLdpStatus>;
}

impl<T> OrStatus<T> for chaos_ldp::Result<T> {
    fn or_status(self) -> Result<T, ChaosLdpStatus> {
        self.map_err(|e| fail(ChaosLdpStatus::from(&e), e.to_string()))
    }
}

fn non_null<T>(p: *const T, what: &str) -> Result<(), ChaosLdpStatus> {
    if p.is_null() {
        Err(fail(ChaosLdpStatus::NullPointer, format!("{what} is null")))
    } else {
        Ok(())
    }
}

unsafe fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, ChaosLdpStatus> {
    non_null(p, what)?;
    // SAFETY: non-null and NUL-terminated per the caller contract.
    unsafe { CStr::from_ptr(p) }
        .to_str()
        .map_err(|_| fail(ChaosLdpStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn spec_ref<'a>(spec: *const ChaosLdpSpec) -> Result<&'a ChaosLdpSpec, ChaosLdpStatus> {
    non_null(spec, "spec")?;
    // SAFETY: a live handle from chaos_ldp_spec_from_json.
    Ok(unsafe { &*spec })
}

unsafe fn control_from(spec: &ChaosLdpSpec, u: *const f64, len: usize) -> Result<Control, ChaosLdpStatus> {
    non_null(u, "control")?;
    let grid = spec.spec.family().grid();
    // SAFETY: `u` points to `len` readable doubles.
    let values = unsafe { std::slice::from_raw_parts(u, len) }.to_vec();
    Ok(Control::new(GridFn::new(grid, values).or_status()?))
}

fn write_out<T: Copy>(src: &[T], out: *mut T, out_len: usize) -> Result<(), ChaosLdpStatus> {
    non_null(out, "output buffer")?;
    if out_len < src.len() {
        return Err(fail(
            ChaosLdpStatus::BufferTooSmall,
            format!("output buffer holds {out_len} values, {} needed", src.len()),
        ));
    }
    // SAFETY: `out` has room for `out_len >= src.len()` values.
    unsafe { ptr::copy_nonoverlapping(src.as_ptr(), out, src.len()) };
    Ok(())
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn chaos_ldp_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn chaos_ldp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Build a spec from a run-config JSON document (its `grid`, `family` and
/// `rate_solver` sections). Relative kernel paths resolve against
/// `base_dir`, or the working directory when it is null.
///
/// # Safety
/// `json` and a non-null `base_dir` must be NUL-terminated strings; `out`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn chaos_ldp_spec_from_json(
    json: *const c_char,
    base_dir: *const c_char,
    out: *mut *mut ChaosLdpSpec,
) -> ChaosLdpStatus {
    guard(|| {
        non_null(out, "out")?;
        // SAFETY: forwarded caller contract.
        let text = unsafe { c_str(json, "json") }?;
        let dir = if base_dir.is_null() {
            "."
        } else {
            // SAFETY: forwarded caller contract.
            unsafe { c_str(base_dir, "base_dir") }?
        };
        let cfg = RunConfig::from_json(text, Path::new(dir)).or_status()?;
        let built = cfg.build().or_status()?;
        let solver = RateSolver::new(cfg.rate_solver.clone()).or_status()?;
        let handle = Box::new(ChaosLdpSpec {
            spec: built.spec,
            solver,
        });
        // SAFETY: `out` is non-null and writable.
        unsafe { *out = Box::into_raw(handle) };
        Ok(())
    })
}

/// Release a spec. Null is ignored.
///
/// # Safety
/// `spec` must come from [`chaos_ldp_spec_from_json`] and not be used again.
#[no_mangle]
pub unsafe extern "C" fn chaos_ldp_spec_free(spec: *mut ChaosLdpSpec) {
    if !spec.is_null() {
        // SAFETY: ownership returns from the caller.
        drop(unsafe { Box::from_raw(spec) });
    }
}

/// Number of grid cells, the length of a control vector.
///
/// # Safety
/// `spec` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn chaos_ldp_spec_cells(spec: *const ChaosLdpSpec, out: *mut usize) -> ChaosLdpStatus {
    guard(|| {
        // SAFETY: forwarded caller contract.
        let s = unsafe { spec_ref(spec) }?;
        write_out(&[s.spec.family().grid().len()], out, 1)
    })
}

/// Number of sites, the length of a path value.
///
/// # Safety
/// `spec` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn chaos_ldp_spec_sites(spec: *const ChaosLdpSpec, out: *mut usize) -> ChaosLdpStatus {
    guard(|| {
        // SAFETY: forwarded caller contract.
        let s = unsafe { spec_ref(spec) }?;
        write_out(&[s.spec.sites().len()], out, 1)
    })
}

/// Skeleton `X^u` at every site for the control `u` (one value per cell).
///
/// # Safety
/// `u` must hold `u_len` doubles and `out` room for `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn chaos_ldp_skeleton(
    spec: *const ChaosLdpSpec,
    u: *const f64,
    u_len: usize,
    out: *mut f64,
    out_len: usize,
) -> ChaosLdpStatus {
    guard(|| {
        // SAFETY: forwarded caller contract.
        let s = unsafe { spec_ref(spec) }?;
        // SAFETY: forwarded caller contract.
        let control = unsafe { control_from(s, u, u_len) }?;
        let path = skeleton(&s.spec, &control).or_status()?;
        write_out(&path.values, out, out_len)
    })
}

/// Pointwise rate `inf { |u|^2 / 2 : X^u(site) = level }`; `+inf` when the
/// level is certified unreachable. When `u_out` is non-null the optimal
/// control is written there (zeros if none exists).
///
/// # Safety
/// `lambda` must be writable; a non-null `u_out` must hold `u_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn chaos_ldp_rate_pointwise(
    spec: *const ChaosLdpSpec,
    site: usize,
    level: f64,
    lambda: *mut f64,
    converged: *mut bool,
    u_out: *mut f64,
    u_len: usize,
) -> ChaosLdpStatus {
    guard(|| {
        // SAFETY: forwarded caller contract.
        let s = unsafe { spec_ref(spec) }?;
        non_null(lambda, "lambda")?;
        let r = s.solver.pointwise(&s.spec, site, level).or_status()?;
        if !u_out.is_null() {
            let cells = s.spec.family().grid().len();
            let values = r.u_star.as_ref().map_or(vec![0.0; cells], |u| u.u().values().to_vec());
            write_out(&values, u_out, u_len)?;
        }
        write_out(&[r.lambda], lambda, 1)?;
        if !converged.is_null() {
            write_out(&[r.converged], converged, 1)?;
        }
        Ok(())
    })
}

/// `P(X^eps(site) >= level)` (or `<=`, per a [`ChaosLdpDirection`] value)
/// by Monte Carlo with `samples` paths.
/// With `tilted`, the noise is shifted toward the optimal control(s) and
/// reweighted.
///
/// # Safety
/// `spec` must be a live handle and `out` writable.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn chaos_ldp_estimate_threshold(
    spec: *const ChaosLdpSpec,
    site: usize,
    level: f64,
    direction: u32,
    eps: f64,
    samples: usize,
    seed: u64,
    tilted: bool,
    out: *mut ChaosLdpEstimate,
) -> ChaosLdpStatus {
    guard(|| {
        // SAFETY: forwarded caller contract.
        let s = unsafe { spec_ref(spec) }?;
        non_null(out, "out")?;
        let event = EventSpec::SiteThreshold {
            site,
            level,
            direction: match direction {
                d if d == ChaosLdpDirection::Above as u32 => Direction::Above,
                d if d == ChaosLdpDirection::Below as u32 => Direction::Below,
                d => return Err(fail(ChaosLdpStatus::Config, format!("unknown direction {d}"))),
            },
        };
        let tilt = if tilted {
            dominating_point(&s.spec, &event, &s.solver).or_status()?.tilt
        } else {
            None
        };
        let e = estimate_prob(&s.spec, &event, eps, samples, seed, tilt.as_ref()).or_status()?;
        let result = ChaosLdpEstimate {
            estimate: e.estimate,
            stderr: e.stderr,
            log_estimate: e.log_estimate,
            ess: e.ess,
            hits: e.hits,
            samples: e.samples,
            reliable: e.reliable,
        };
        write_out(&[result], out, 1)
    })
}
