//! C interface to the microwave-ionization solver.
//!
//! Every function returns an [`MwionStatus`]; on failure the message is kept
//! per thread and read with [`mwion_last_error_message`]. Pipelines are opaque
//! handles created by [`mwion_pipeline_new`] and released with
//! [`mwion_pipeline_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use mwion_core::observables::{localization_length, photon_number, shannon_width};
use mwion_core::oracle::{propagate, GridSpec};
use mwion_core::pipeline::{Pipeline, Settings, SolverKind};
use mwion_core::threshold::{find_threshold, SearchSettings};
use mwion_core::units::{unscale, ScaledParams};
use mwion_core::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MwionStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Convergence = 3,
    InsufficientSpectrum = 4,
    NoThreshold = 5,
    Io = 6,
    Internal = 7,
    Panic = 8,
}

/// Solver settings; obtain defaults from [`mwion_settings_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct MwionSettings {
    /// Basis size as a multiple of `n0`.
    pub basis_per_level: f64,
    pub theta: f64,
    pub margin: u32,
    pub window_photons: f64,
    pub eigs_per_shift: u32,
    pub tol: f64,
    /// Use the dense solver instead of shift-invert Arnoldi.
    pub dense: bool,
}

/// Result of a threshold search. Fields other than `converged` and
/// `n_photons` are NaN when no threshold was found.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct MwionThreshold {
    pub f0_threshold: f64,
    pub p_at_threshold: f64,
    pub n_photons: u32,
    pub xi: f64,
    pub shannon: f64,
    pub bracket_low: f64,
    pub bracket_high: f64,
    pub converged: bool,
}

/// Opaque pipeline for one initial state, frequency and interaction time.
pub struct MwionPipeline {
    inner: Pipeline,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> MwionStatus {
    match e {
        Error::Domain(_) | Error::Config(_) | Error::Format(_) => MwionStatus::InvalidArgument,
        Error::Convergence { .. } | Error::SingularShift { .. } => MwionStatus::Convergence,
        Error::InsufficientSpectrum { .. } => MwionStatus::InsufficientSpectrum,
        Error::NoThreshold { .. } => MwionStatus::NoThreshold,
        Error::Io(_) => MwionStatus::Io,
        Error::Internal(_) => MwionStatus::Internal,
    }
}

/// Runs `f`, converting errors and panics to a status code.
fn guard(f: impl FnOnce() -> Result<(), Error>) -> MwionStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MwionStatus::Ok,
        Ok(Err(e)) => {
            set_error(&e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("panic inside mwion");
            MwionStatus::Panic
        }
    }
}

fn null_error(name: &str) -> MwionStatus {
    set_error(&format!("{name} is null"));
    MwionStatus::NullPointer
}

fn to_settings(s: &MwionSettings) -> Settings {
    Settings {
        basis_per_level: s.basis_per_level,
        theta: s.theta,
        margin: s.margin as usize,
        window_photons: s.window_photons,
        eigs_per_shift: s.eigs_per_shift as usize,
        tol: s.tol,
        solver: if s.dense { SolverKind::Dense } else { SolverKind::Iterative },
        ..Settings::default()
    }
}

/// Message of the last failed call on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn mwion_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mwion_version() -> *const c_char {
    static VERSION: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
        Ok(v) => v,
        Err(_) => panic!("version string"),
    };
    VERSION.as_ptr()
}

#[no_mangle]
pub extern "C" fn mwion_settings_default() -> MwionSettings {
    let s = Settings::default();
    MwionSettings {
        basis_per_level: s.basis_per_level,
        theta: s.theta,
        margin: s.margin as u32,
        window_photons: s.window_photons,
        eigs_per_shift: s.eigs_per_shift as u32,
        tol: s.tol,
        dense: s.solver == SolverKind::Dense,
    }
}

/// Minimal number of photons lifting `n0` above `−1/(2 n_eff²)`.
#[no_mangle]
pub extern "C" fn mwion_photon_number(n0: u32, n_eff: f64, omega: f64) -> u32 {
    photon_number(n0, n_eff, omega)
}

/// # Safety
/// `out` must be null or point to writable storage for one `double`.
#[no_mangle]
pub unsafe extern "C" fn mwion_localization_length(f0: f64, omega0: f64, n0: u32, out: *mut f64) -> MwionStatus {
    if out.is_null() {
        return null_error("out");
    }
    guard(|| {
        let xi = localization_length(f0, omega0, n0)?;
        // SAFETY: checked non-null above; caller guarantees it is writable
        unsafe { *out = xi };
        Ok(())
    })
}

/// # Safety
/// `weights` must point to `len` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mwion_shannon_width(weights: *const f64, len: usize, out: *mut f64) -> MwionStatus {
    if weights.is_null() {
        return null_error("weights");
    }
    if out.is_null() {
        return null_error("out");
    }
    guard(|| {
        // SAFETY: caller guarantees `len` readable elements
        let w = unsafe { std::slice::from_raw_parts(weights, len) };
        let width = shannon_width(w)?;
        unsafe { *out = width };
        Ok(())
    })
}

/// Creates a pipeline for level `n0` at scaled frequency `omega0`, interaction
/// time `t_cycles` field periods and effective threshold `n_eff`.
///
/// # Safety
/// `settings` must be null (defaults) or point to a valid [`MwionSettings`];
/// `out` must be writable. On success `*out` owns a handle that must be freed
/// with [`mwion_pipeline_free`].
#[no_mangle]
pub unsafe extern "C" fn mwion_pipeline_new(
    n0: u32,
    omega0: f64,
    t_cycles: f64,
    n_eff: f64,
    settings: *const MwionSettings,
    out: *mut *mut MwionPipeline,
) -> MwionStatus {
    if out.is_null() {
        return null_error("out");
    }
    unsafe { *out = ptr::null_mut() };
    // SAFETY: null or valid per the contract
    let settings = match unsafe { settings.as_ref() } {
        Some(s) => to_settings(s),
        None => Settings::default(),
    };
    guard(|| {
        let params = unscale(&ScaledParams { omega0, f0: 0.0, t_cycles }, n0, n_eff)?;
        let inner = Pipeline::new(&params, &settings)?;
        unsafe { *out = Box::into_raw(Box::new(MwionPipeline { inner })) };
        Ok(())
    })
}

/// Ionization probability at scaled field `f0`; optionally the Shannon width
/// of the decomposition.
///
/// # Safety
/// `handle` must come from [`mwion_pipeline_new`] and not be freed;
/// `p_ion` must be writable; `shannon` may be null.
#[no_mangle]
pub unsafe extern "C" fn mwion_pipeline_pion(
    handle: *const MwionPipeline,
    f0: f64,
    p_ion: *mut f64,
    shannon: *mut f64,
) -> MwionStatus {
    // SAFETY: valid or null per the contract
    let Some(h) = (unsafe { handle.as_ref() }) else {
        return null_error("handle");
    };
    if p_ion.is_null() {
        return null_error("p_ion");
    }
    guard(|| {
        let n = h.inner.params.n0 as f64;
        let out = h.inner.pion(f0 / n.powi(4))?;
        unsafe { *p_ion = out.p_ion };
        if !shannon.is_null() {
            let w = shannon_width(&out.decomposition.weights())?;
            unsafe { *shannon = w };
        }
        Ok(())
    })
}

/// # Safety
/// `handle` must be null or a handle from [`mwion_pipeline_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mwion_pipeline_free(handle: *mut MwionPipeline) {
    if !handle.is_null() {
        // SAFETY: allocated by `mwion_pipeline_new` and owned by the caller
        drop(unsafe { Box::from_raw(handle) });
    }
}

/// Threshold search with default search settings. A missing crossing is
/// reported as `MWION_STATUS_NO_THRESHOLD` with `*out` still filled.
///
/// # Safety
/// `settings` may be null; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mwion_find_threshold(
    n0: u32,
    omega0: f64,
    t_cycles: f64,
    n_eff: f64,
    settings: *const MwionSettings,
    out: *mut MwionThreshold,
) -> MwionStatus {
    if out.is_null() {
        return null_error("out");
    }
    let settings = match unsafe { settings.as_ref() } {
        Some(s) => to_settings(s),
        None => Settings::default(),
    };
    guard(|| {
        if n0 == 0 {
            return Err(Error::Domain("n0 must be at least 1".into()));
        }
        let omega = omega0 / (n0 as f64).powi(3);
        let r = find_threshold(n0, omega, t_cycles, n_eff, &settings, &SearchSettings::default())?;
        unsafe {
            *out = MwionThreshold {
                f0_threshold: r.f0_threshold,
                p_at_threshold: r.p_at_threshold,
                n_photons: r.n_photons,
                xi: r.xi,
                shannon: r.shannon,
                bracket_low: r.bracket.0,
                bracket_high: r.bracket.1,
                converged: r.converged,
            }
        };
        match r.error {
            Some(msg) if msg.starts_with("no threshold") => {
                Err(Error::NoThreshold { f0_max: SearchSettings::default().f0_max })
            }
            Some(msg) => Err(Error::Convergence { message: msg, best_residual: f64::NAN }),
            None => Ok(()),
        }
    })
}

/// Grid-propagation reference with the default grid for the level.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mwion_oracle_pion(
    n0: u32,
    omega0: f64,
    f0: f64,
    t_cycles: f64,
    n_eff: f64,
    out: *mut f64,
) -> MwionStatus {
    if out.is_null() {
        return null_error("out");
    }
    guard(|| {
        let p = unscale(&ScaledParams { omega0, f0, t_cycles }, n0, n_eff)?;
        let grid = GridSpec::for_level(n0, p.omega, n_eff);
        let r = propagate(n0, p.field, p.omega, t_cycles, n_eff, &grid)?;
        unsafe { *out = r.p_ion };
        Ok(())
    })
}
