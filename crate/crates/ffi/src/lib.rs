//! C interface to `zeitlin-core`.
//!
//! Every function returns a [`ZeitlinStatus`]; on failure the message is kept
//! per thread and can be copied out with [`zeitlin_last_error`]. Matrices
//! cross the boundary as row-major interleaved `(re, im)` doubles. Handles
//! are opaque and must be released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use zeitlin_core::diagnostics::{casimirs_of, hamiltonian_of};
use zeitlin_core::harness::{IntegratorKind, Stepper};
use zeitlin_core::integrators::FixedPointConfig;
use zeitlin_core::linalg::{c, CMat};
use zeitlin_core::scenarios::ScenarioSpec;
use zeitlin_core::state::checkpoint::{read_checkpoint, write_checkpoint};
use zeitlin_core::state::{truncated_eig, MatrixState, SkewHermitianState};
use zeitlin_core::{Error, Model};

/// Result code of every call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ZeitlinStatus {
    Ok = 0,
    InvalidArgument = 1,
    Shape = 2,
    Domain = 3,
    NonConvergence = 4,
    Internal = 5,
    Linalg = 6,
    Config = 7,
    Format = 8,
    Io = 9,
    NullPointer = 10,
    Panic = 11,
}

/// Time integrator selector for [`zeitlin_state_step`].
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ZeitlinIntegrator {
    Iso2 = 0,
    Rkmk1 = 1,
    Rkmk2 = 2,
    Midpoint = 3,
    Strang = 4,
    Rk4 = 5,
}

impl From<ZeitlinIntegrator> for IntegratorKind {
    fn from(k: ZeitlinIntegrator) -> Self {
        match k {
            ZeitlinIntegrator::Iso2 => IntegratorKind::Iso2,
            ZeitlinIntegrator::Rkmk1 => IntegratorKind::Rkmk1,
            ZeitlinIntegrator::Rkmk2 => IntegratorKind::Rkmk2,
            ZeitlinIntegrator::Midpoint => IntegratorKind::Midpoint,
            ZeitlinIntegrator::Strang => IntegratorKind::Strang,
            ZeitlinIntegrator::Rk4 => IntegratorKind::Rk4,
        }
    }
}

/// Opaque model handle.
pub struct ZeitlinModel(Model);

/// Opaque state handle (dense or factored).
pub struct ZeitlinState(MatrixState);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn status_of(e: &Error) -> ZeitlinStatus {
    match e {
        Error::InvalidArgument(_) => ZeitlinStatus::InvalidArgument,
        Error::Shape { .. } => ZeitlinStatus::Shape,
        Error::Domain(_) => ZeitlinStatus::Domain,
        Error::NonConvergence { .. } => ZeitlinStatus::NonConvergence,
        Error::Internal(_) => ZeitlinStatus::Internal,
        Error::Linalg(_) => ZeitlinStatus::Linalg,
        Error::Config(_) | Error::Json(_) => ZeitlinStatus::Config,
        Error::Format(_) => ZeitlinStatus::Format,
        Error::Io(_) => ZeitlinStatus::Io,
    }
}

enum Failure {
    Core(Error),
    Null(&'static str),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> ZeitlinStatus {
    let (status, msg) = match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => (ZeitlinStatus::Ok, String::new()),
        Ok(Err(Failure::Core(e))) => (status_of(&e), e.to_string()),
        Ok(Err(Failure::Null(what))) => (ZeitlinStatus::NullPointer, format!("null pointer passed as {what}")),
        Err(_) => (ZeitlinStatus::Panic, "internal panic".to_string()),
    };
    LAST_ERROR.with(|m| *m.borrow_mut() = msg);
    status
}

unsafe fn deref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn deref_mut<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or(Failure::Null(what))
}

unsafe fn c_str<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Failure::Core(Error::InvalidArgument(format!("{what} is not UTF-8"))))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::Null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Copies the calling thread's last error message into `buf` (NUL
/// terminated, truncated to `len`). Returns the full message length.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn zeitlin_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|m| {
        let m = m.borrow();
        if !buf.is_null() && len > 0 {
            let k = m.len().min(len - 1);
            std::ptr::copy_nonoverlapping(m.as_ptr() as *const c_char, buf, k);
            *buf.add(k) = 0;
        }
        m.len()
    })
}

/// Creates a model of size `n`; `n_trunc = 0` means no diagonal truncation.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn zeitlin_model_new(n: usize, n_trunc: usize, out: *mut *mut ZeitlinModel) -> ZeitlinStatus {
    guard(|| {
        let m = Model::truncated(n, (n_trunc > 0).then_some(n_trunc))?;
        put(out, ZeitlinModel(m))
    })
}

/// # Safety
/// `model` must be null or come from [`zeitlin_model_new`], and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn zeitlin_model_free(model: *mut ZeitlinModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Builds an initial condition from a JSON scenario description.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn zeitlin_state_from_scenario(json: *const c_char, out: *mut *mut ZeitlinState) -> ZeitlinStatus {
    guard(|| {
        let spec: ScenarioSpec = serde_json::from_str(c_str(json, "json")?).map_err(Error::from)?;
        put(out, ZeitlinState(MatrixState::Dense(spec.build()?)))
    })
}

/// Wraps a dense skew-Hermitian `n × n` matrix given as `2 n²` doubles.
///
/// # Safety
/// `data` must point to `2 n²` readable doubles and `out` be valid.
#[no_mangle]
pub unsafe extern "C" fn zeitlin_state_from_dense(n: usize, data: *const f64, out: *mut *mut ZeitlinState) -> ZeitlinStatus {
    guard(|| {
        if data.is_null() {
            return Err(Failure::Null("data"));
        }
        let raw = std::slice::from_raw_parts(data, 2 * n * n);
        let vals = raw.chunks_exact(2).map(|p| c(p[0], p[1])).collect();
        let w = CMat::from_shape_vec((n, n), vals).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        put(out, ZeitlinState(MatrixState::Dense(SkewHermitianState::new(w)?)))
    })
}

/// Best rank-`r` factorization `U S U*` of `state`, as a new handle.
///
/// # Safety
/// `state` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn zeitlin_state_truncate(state: *const ZeitlinState, r: usize, out: *mut *mut ZeitlinState) -> ZeitlinStatus {
    guard(|| {
        let s = deref(state, "state")?;
        let f = truncated_eig(&s.0.to_dense(), r)?;
        put(out, ZeitlinState(MatrixState::Factored(f)))
    })
}

/// # Safety
/// `state` must be null or a handle not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn zeitlin_state_free(state: *mut ZeitlinState) {
    if !state.is_null() {
        drop(Box::from_raw(state));
    }
}

/// Writes `N` and the rank (`N` for dense states).
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn zeitlin_state_dims(state: *const ZeitlinState, n: *mut usize, rank: *mut usize) -> ZeitlinStatus {
    guard(|| {
        let s = deref(state, "state")?;
        *deref_mut(n, "n")? = s.0.n();
        *deref_mut(rank, "rank")? = match &s.0 {
            MatrixState::Dense(w) => w.n(),
            MatrixState::Factored(f) => f.rank(),
        };
        Ok(())
    })
}

/// Copies the dense matrix into `out` (`2 N²` doubles); `len` is the buffer length in doubles.
///
/// # Safety
/// `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn zeitlin_state_to_dense(state: *const ZeitlinState, out: *mut f64, len: usize) -> ZeitlinStatus {
    guard(|| {
        let s = deref(state, "state")?;
        let n = s.0.n();
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        if len < 2 * n * n {
            return Err(Error::InvalidArgument(format!("buffer holds {len} doubles, need {}", 2 * n * n)).into());
        }
        let dst = std::slice::from_raw_parts_mut(out, 2 * n * n);
        for (k, z) in s.0.to_dense().matrix().iter().enumerate() {
            dst[2 * k] = z.re;
            dst[2 * k + 1] = z.im;
        }
        Ok(())
    })
}

/// Advances `state` in place by `steps` steps of size `dt`. `tol <= 0`
/// selects the default fixed-point tolerance.
///
/// # Safety
/// `model` and `state` must be live handles.
#[no_mangle]
pub unsafe extern "C" fn zeitlin_state_step(
    model: *const ZeitlinModel,
    state: *mut ZeitlinState,
    integrator: ZeitlinIntegrator,
    dt: f64,
    steps: usize,
    tol: f64,
) -> ZeitlinStatus {
    guard(|| {
        let m = deref(model, "model")?;
        let s = deref_mut(state, "state")?;
        let mut fp = FixedPointConfig::default();
        if tol > 0.0 {
            fp.tol = tol;
        }
        let mut stepper = Stepper::new(m.0.clone(), integrator.into(), fp, s.0.clone())?;
        for _ in 0..steps {
            stepper.step(dt)?;
        }
        s.0 = stepper.into_state();
        Ok(())
    })
}

/// Hamiltonian of `state` under `model`'s stream map.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn zeitlin_hamiltonian(model: *const ZeitlinModel, state: *const ZeitlinState, out: *mut f64) -> ZeitlinStatus {
    guard(|| {
        let v = hamiltonian_of(&deref(model, "model")?.0, &deref(state, "state")?.0)?;
        *deref_mut(out, "out")? = v;
        Ok(())
    })
}

/// Casimirs `C_1 … C_{k_max}` (real part for even `k`, imaginary part for odd `k`).
///
/// # Safety
/// `out` must point to `k_max` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn zeitlin_casimirs(state: *const ZeitlinState, k_max: usize, out: *mut f64) -> ZeitlinStatus {
    guard(|| {
        let v = casimirs_of(&deref(state, "state")?.0, k_max)?;
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        std::slice::from_raw_parts_mut(out, k_max).copy_from_slice(&v);
        Ok(())
    })
}

/// Writes `state` to a checkpoint file.
///
/// # Safety
/// `path` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn zeitlin_checkpoint_write(state: *const ZeitlinState, path: *const c_char) -> ZeitlinStatus {
    guard(|| {
        let s = deref(state, "state")?;
        write_checkpoint(Path::new(c_str(path, "path")?), &s.0, "", None)?;
        Ok(())
    })
}

/// Reads a checkpoint file into a new handle.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn zeitlin_checkpoint_read(path: *const c_char, out: *mut *mut ZeitlinState) -> ZeitlinStatus {
    guard(|| {
        let (_, s) = read_checkpoint(Path::new(c_str(path, "path")?))?;
        put(out, ZeitlinState(s))
    })
}
