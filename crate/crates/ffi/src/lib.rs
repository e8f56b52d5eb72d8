//! C interface to `hypoctrl`.
//!
//! Objects are opaque handles created by `hc_*_new`-style calls and released with
//! the matching `hc_*_free`. Every fallible call returns an [`HcStatus`]; the
//! message for the last failure on the calling thread is available from
//! [`hc_last_error_message`]. Arrays are row-major `f64` buffers with explicit
//! lengths.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use hypoctrl::estimator::{select_weight, EstimationResult, EstimatorOptions};
use hypoctrl::hypo::{h1_rank_check, lag_graph, probe_states};
use hypoctrl::models::{benchmark, model_by_id};
use hypoctrl::simulate::{simulate, Trajectory};
use hypoctrl::{Error, ModelSpec, Params, Vector};

/// Result codes. Zero is success; everything else is a failure.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    UnknownModel = 3,
    Dimension = 4,
    Numerical = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

pub struct HcModel {
    spec: ModelSpec,
}

pub struct HcTrajectory {
    traj: Trajectory,
}

pub struct HcEstimate {
    result: EstimationResult,
    params: Vec<f64>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn fail(status: HcStatus, msg: impl Into<String>) -> HcStatus {
    set_error(msg);
    status
}

fn status_of(e: &Error) -> HcStatus {
    match e {
        Error::UnknownModel(_) => HcStatus::UnknownModel,
        Error::Dimension(_) => HcStatus::Dimension,
        e if e.is_numerical() => HcStatus::Numerical,
        _ => HcStatus::InvalidArgument,
    }
}

fn guard(f: impl FnOnce() -> Result<(), HcStatus>) -> HcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => HcStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => fail(HcStatus::Panic, "internal panic"),
    }
}

fn lift<T>(r: hypoctrl::Result<T>) -> Result<T, HcStatus> {
    r.map_err(|e| fail(status_of(&e), e.to_string()))
}

/// Borrow `len` values; a zero length accepts a null pointer.
unsafe fn view<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], HcStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(HcStatus::NullPointer, format!("{what} is null")));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, HcStatus> {
    p.as_ref().ok_or_else(|| fail(HcStatus::NullPointer, format!("{what} is null")))
}

fn params_for(model: &HcModel, values: &[f64]) -> Result<Params, HcStatus> {
    if values.is_empty() {
        return benchmark(model.spec.id())
            .map(|b| b.truth)
            .ok_or_else(|| fail(HcStatus::InvalidArgument, "parameters are required for this model"));
    }
    let layout = model.spec.layout();
    if values.len() != layout.len() {
        return Err(fail(
            HcStatus::Dimension,
            format!("model has {} parameters, got {}", layout.len(), values.len()),
        ));
    }
    Ok(Params::new(values.to_vec()))
}

unsafe fn copy_out(src: &[f64], out: *mut f64, cap: usize) -> Result<(), HcStatus> {
    if out.is_null() {
        return Err(fail(HcStatus::NullPointer, "output buffer is null"));
    }
    if cap < src.len() {
        return Err(fail(HcStatus::BufferTooSmall, format!("need {} values, buffer holds {cap}", src.len())));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), out, src.len());
    Ok(())
}

/// Message for the last failed call on this thread, or NULL. Free with [`hc_string_free`].
#[no_mangle]
pub extern "C" fn hc_last_error_message() -> *mut c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null_mut(), |s| s.clone().into_raw()))
}

/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn hc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Creates a built-in model (`cyclic`, `fhn`, `synaptic`, `ou`).
///
/// # Safety
/// `id` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hc_model_new(id: *const c_char, out: *mut *mut HcModel) -> HcStatus {
    guard(|| {
        if id.is_null() || out.is_null() {
            return Err(fail(HcStatus::NullPointer, "model id or output is null"));
        }
        let id = CStr::from_ptr(id)
            .to_str()
            .map_err(|_| fail(HcStatus::InvalidArgument, "model id is not UTF-8"))?;
        let spec = lift(model_by_id(id, &Default::default()))?;
        *out = Box::into_raw(Box::new(HcModel { spec }));
        Ok(())
    })
}

/// # Safety
/// `model` must come from [`hc_model_new`] (or be NULL) and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn hc_model_free(model: *mut HcModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Smooth, rough and observed dimensions, and the parameter count.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn hc_model_dims(
    model: *const HcModel,
    d_v: *mut usize,
    d_u: *mut usize,
    d_o: *mut usize,
    n_params: *mut usize,
) -> HcStatus {
    guard(|| {
        let m = handle(model, "model")?;
        if d_v.is_null() || d_u.is_null() || d_o.is_null() || n_params.is_null() {
            return Err(fail(HcStatus::NullPointer, "output is null"));
        }
        let dims = m.spec.dims();
        *d_v = dims.d_v;
        *d_u = dims.d_u;
        *d_o = dims.d_o;
        *n_params = m.spec.layout().len();
        Ok(())
    })
}

/// Reference parameter values of a built-in model, in layout order.
///
/// # Safety
/// `out` must hold `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn hc_model_default_params(model: *const HcModel, out: *mut f64, cap: usize) -> HcStatus {
    guard(|| {
        let m = handle(model, "model")?;
        let p = params_for(m, &[])?;
        copy_out(p.as_slice(), out, cap)
    })
}

/// Euler–Maruyama simulation on `n` steps of `t_end / n`. Passing `n_params = 0`
/// uses the model's reference parameters.
///
/// # Safety
/// Buffers must hold the stated number of values; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn hc_simulate(
    model: *const HcModel,
    params: *const f64,
    n_params: usize,
    z0: *const f64,
    n_z0: usize,
    t_end: f64,
    n: usize,
    seed: u64,
    out: *mut *mut HcTrajectory,
) -> HcStatus {
    guard(|| {
        let m = handle(model, "model")?;
        if out.is_null() {
            return Err(fail(HcStatus::NullPointer, "output is null"));
        }
        let psi = params_for(m, view(params, n_params, "params")?)?;
        let z0 = Vector::from_column_slice(view(z0, n_z0, "z0")?);
        let traj = lift(simulate(m.spec.as_ref(), &psi, &z0, t_end, n, seed))?;
        *out = Box::into_raw(Box::new(HcTrajectory { traj }));
        Ok(())
    })
}

/// # Safety
/// `traj` must come from [`hc_simulate`] (or be NULL) and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn hc_trajectory_free(traj: *mut HcTrajectory) {
    if !traj.is_null() {
        drop(Box::from_raw(traj));
    }
}

/// Number of grid points (`n + 1`) and the step.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn hc_trajectory_shape(traj: *const HcTrajectory, points: *mut usize, dt: *mut f64) -> HcStatus {
    guard(|| {
        let t = handle(traj, "trajectory")?;
        if points.is_null() || dt.is_null() {
            return Err(fail(HcStatus::NullPointer, "output is null"));
        }
        *points = t.traj.times.len();
        *dt = t.traj.dt();
        Ok(())
    })
}

/// Copies the states, `points × d` row-major.
///
/// # Safety
/// `out` must hold `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn hc_trajectory_states(traj: *const HcTrajectory, out: *mut f64, cap: usize) -> HcStatus {
    guard(|| {
        let t = handle(traj, "trajectory")?;
        let flat: Vec<f64> = t.traj.states.iter().flat_map(|z| z.iter().copied()).collect();
        copy_out(&flat, out, cap)
    })
}

/// Copies the observations, `points × d_o` row-major.
///
/// # Safety
/// `out` must hold `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn hc_trajectory_observations(traj: *const HcTrajectory, out: *mut f64, cap: usize) -> HcStatus {
    guard(|| {
        let t = handle(traj, "trajectory")?;
        let flat: Vec<f64> = t.traj.observations.iter().flat_map(|y| y.iter().copied()).collect();
        copy_out(&flat, out, cap)
    })
}

/// Fits the parameters for each weight and keeps the one picked by the
/// control-norm criterion. `y` holds `rows × d_o` observations row-major. A null
/// `z0` profiles the initial state; `n_init = 0` starts from the reference values.
///
/// # Safety
/// Buffers must hold the stated number of values; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn hc_estimate(
    model: *const HcModel,
    y: *const f64,
    rows: usize,
    dt: f64,
    weights: *const f64,
    n_weights: usize,
    init: *const f64,
    n_init: usize,
    z0: *const f64,
    n_z0: usize,
    out: *mut *mut HcEstimate,
) -> HcStatus {
    guard(|| {
        let m = handle(model, "model")?;
        if out.is_null() {
            return Err(fail(HcStatus::NullPointer, "output is null"));
        }
        let d_o = m.spec.dims().d_o;
        let y: Vec<Vector> = view(y, rows * d_o, "observations")?
            .chunks(d_o)
            .map(Vector::from_column_slice)
            .collect();
        let weights = view(weights, n_weights, "weights")?;
        let init = params_for(m, view(init, n_init, "init")?)?;
        let z0 = if z0.is_null() { None } else { Some(Vector::from_column_slice(view(z0, n_z0, "z0")?)) };
        let result = lift(select_weight(m.spec.as_ref(), &y, dt, weights, &init, &EstimatorOptions::default(), z0.as_ref()))?;
        let params = lift(result.psi_params(m.spec.as_ref()))?.as_slice().to_vec();
        *out = Box::into_raw(Box::new(HcEstimate { result, params }));
        Ok(())
    })
}

/// # Safety
/// `est` must come from [`hc_estimate`] (or be NULL) and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn hc_estimate_free(est: *mut HcEstimate) {
    if !est.is_null() {
        drop(Box::from_raw(est));
    }
}

/// Estimated parameters in layout order and the selected weight.
///
/// # Safety
/// `params` must hold `cap` doubles; `w_hat` must be valid.
#[no_mangle]
pub unsafe extern "C" fn hc_estimate_params(est: *const HcEstimate, params: *mut f64, cap: usize, w_hat: *mut f64) -> HcStatus {
    guard(|| {
        let e = handle(est, "estimate")?;
        if w_hat.is_null() {
            return Err(fail(HcStatus::NullPointer, "w_hat is null"));
        }
        copy_out(&e.params, params, cap)?;
        *w_hat = e.result.w_hat;
        Ok(())
    })
}

/// Full report as JSON, or NULL on failure. Free with [`hc_string_free`].
///
/// # Safety
/// `est` must be a valid handle.
#[no_mangle]
pub unsafe extern "C" fn hc_estimate_json(est: *const HcEstimate) -> *mut c_char {
    let Some(e) = est.as_ref() else {
        set_error("estimate is null");
        return ptr::null_mut();
    };
    match serde_json::to_string(&e.result).map(CString::new) {
        Ok(Ok(s)) => s.into_raw(),
        _ => {
            set_error("cannot serialize the report");
            ptr::null_mut()
        }
    }
}

/// Contrast lag and smallest singular value of the rank check along a simulated
/// path of `n` steps. Reports `Numerical` when a smooth coordinate is unreachable.
///
/// # Safety
/// Buffers must hold the stated number of values; outputs must be valid.
#[no_mangle]
pub unsafe extern "C" fn hc_check_hypo(
    model: *const HcModel,
    params: *const f64,
    n_params: usize,
    z0: *const f64,
    n_z0: usize,
    t_end: f64,
    n: usize,
    seed: u64,
    m_b: *mut usize,
    min_singular_value: *mut f64,
) -> HcStatus {
    guard(|| {
        let m = handle(model, "model")?;
        if m_b.is_null() || min_singular_value.is_null() {
            return Err(fail(HcStatus::NullPointer, "output is null"));
        }
        let spec = m.spec.as_ref();
        let values = view(params, n_params, "params")?;
        let psi = if values.is_empty() {
            params_for(m, values)?
        } else {
            if values.len() != spec.layout().len() {
                return Err(fail(HcStatus::Dimension, "parameter count does not match the model"));
            }
            lift(spec.layout().validate_closed(values))?;
            Params::new(values.to_vec())
        };
        let d = spec.dims().d();
        let bounds = benchmark(spec.id()).map(|b| b.probe_box).unwrap_or_else(|| vec![(-3.0, 3.0); d]);
        let report = lift(lag_graph(spec, &psi, &probe_states(&bounds, 50, seed)))?;
        if !report.connected() {
            return Err(fail(HcStatus::Numerical, "a smooth coordinate is not reached by the noise"));
        }
        let z0 = Vector::from_column_slice(view(z0, n_z0, "z0")?);
        let traj = lift(simulate(spec, &psi, &z0, t_end, n, seed))?;
        *m_b = report.m_b;
        *min_singular_value = lift(h1_rank_check(spec, &psi, &traj, report.m_b))?;
        Ok(())
    })
}
