//! C interface to `lastpassage`.
//!
//! Models and value functions are opaque heap handles released with their
//! `*_free` function. Every fallible call returns an [`LpStatus`]; on failure
//! `lp_last_error` returns a message for the calling thread. Panics are
//! caught at the boundary and reported as `LP_PANIC`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use lastpassage::montecarlo::{estimate_objective, McConfig};
use lastpassage::{BoundarySolution, CostFunction, DiffusionModel, Error, ModelSpec, PowerLawFamily, SolveMethod, ValueFunction};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Ok = 0,
    NullPointer = 1,
    /// Parameter outside its domain.
    Domain = 2,
    /// Model is not a transient diffusion of the supported kind.
    InvalidModel = 3,
    /// Malformed JSON model or expression.
    Spec = 4,
    /// Quadrature, root finding or boundary search failed.
    Numeric = 5,
    Simulation = 6,
    Io = 7,
    Panic = 8,
}

/// Opaque model handle.
pub struct LpModel {
    inner: DiffusionModel,
}

/// Opaque value-function handle.
pub struct LpValueFunction {
    inner: ValueFunction,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LpSolution {
    pub z: f64,
    pub r_star: f64,
    pub cost_root: f64,
    /// `G(r*)`, the boundary equation at the returned root.
    pub residual: f64,
    pub bracket_lo: f64,
    pub bracket_hi: f64,
    pub iterations: u32,
    /// 0: power-law closed form, 1: general quadrature.
    pub method: u32,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LpMcConfig {
    pub dt: f64,
    pub n_paths: u64,
    pub upper_barrier_eps: f64,
    pub t_max: f64,
    pub seed: u64,
    pub x0: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LpMcEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_effective: u64,
    pub censor_fraction: f64,
    /// Nonzero when more than 5% of paths were censored.
    pub censor_warning: u32,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> LpStatus {
    match e {
        Error::Domain(_) => LpStatus::Domain,
        Error::InvalidModel(_) => LpStatus::InvalidModel,
        Error::Spec(_) | Error::Json(_) => LpStatus::Spec,
        Error::Io(_) => LpStatus::Io,
        Error::Simulation(_) => LpStatus::Simulation,
        Error::Integrability(_) | Error::Quadrature { .. } | Error::NoRoot(_) | Error::Divergence(_) => {
            LpStatus::Numeric
        }
    }
}

/// Runs `f`, translating errors and panics into a status code.
fn guard<F: FnOnce() -> Result<(), LpStatus>>(f: F) -> LpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            LpStatus::Ok
        }
        Ok(Err(s)) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(&format!("internal panic: {msg}"));
            LpStatus::Panic
        }
    }
}

fn fail(e: Error) -> LpStatus {
    set_error(&e.to_string());
    status_of(&e)
}

fn null(what: &str) -> LpStatus {
    set_error(&format!("{what} is null"));
    LpStatus::NullPointer
}

unsafe fn emit_model(model: lastpassage::Result<DiffusionModel>, out: *mut *mut LpModel) -> Result<(), LpStatus> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = ptr::null_mut();
    let inner = model.map_err(fail)?;
    *out = Box::into_raw(Box::new(LpModel { inner }));
    Ok(())
}

/// Message for the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn lp_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn lp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds a model from a JSON document such as
/// `{"family": "bessel", "params": {"delta": 3}}`.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lp_model_from_json(json: *const c_char, out: *mut *mut LpModel) -> LpStatus {
    guard(|| {
        if json.is_null() {
            return Err(null("json"));
        }
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|e| fail(Error::Spec(format!("model JSON is not UTF-8: {e}"))))?;
        emit_model(ModelSpec::from_json(text).and_then(|s| s.build()), out)
    })
}

/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lp_model_bessel(delta: f64, out: *mut *mut LpModel) -> LpStatus {
    guard(|| emit_model(DiffusionModel::bessel(delta), out))
}

/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lp_model_squared_bessel(delta: f64, out: *mut *mut LpModel) -> LpStatus {
    guard(|| emit_model(DiffusionModel::squared_bessel(delta), out))
}

/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lp_model_gbm(lambda: f64, sigma: f64, out: *mut *mut LpModel) -> LpStatus {
    guard(|| emit_model(DiffusionModel::gbm(lambda, sigma), out))
}

/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lp_model_explosive(lambda: f64, kappa: f64, p: f64, out: *mut *mut LpModel) -> LpStatus {
    guard(|| emit_model(DiffusionModel::explosive(lambda, kappa, p), out))
}

/// Power-law family `s(x) = -alpha x^-mu`, `m(x) = beta x^nu`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lp_model_power_law(
    alpha: f64,
    beta: f64,
    mu: f64,
    nu: f64,
    out: *mut *mut LpModel,
) -> LpStatus {
    guard(|| emit_model(PowerLawFamily::new(alpha, beta, mu, nu).and_then(DiffusionModel::power_law), out))
}

/// # Safety
/// `model` must come from an `lp_model_*` constructor and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn lp_model_free(model: *mut LpModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

unsafe fn model_ref<'a>(model: *const LpModel) -> Result<&'a DiffusionModel, LpStatus> {
    model.as_ref().map(|m| &m.inner).ok_or_else(|| null("model"))
}

/// Scale `s(x)`, derivative `s'(x)` and speed density `m(x)`.
///
/// # Safety
/// Pointers must be valid; any of the outputs may be null to skip it.
#[no_mangle]
pub unsafe extern "C" fn lp_model_eval(
    model: *const LpModel,
    x: f64,
    scale: *mut f64,
    scale_derivative: *mut f64,
    speed_density: *mut f64,
) -> LpStatus {
    guard(|| {
        let m = model_ref(model)?;
        if !(x > 0.0) {
            return Err(fail(Error::Domain(format!("x must be positive, got {x}"))));
        }
        if !scale.is_null() {
            *scale = m.scale(x);
        }
        if !scale_derivative.is_null() {
            *scale_derivative = m.scale_derivative(x);
        }
        if !speed_density.is_null() {
            *speed_density = m.speed_density(x);
        }
        Ok(())
    })
}

/// Running cost `c(x)` for level `z`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn lp_cost(model: *const LpModel, z: f64, x: f64, out: *mut f64) -> LpStatus {
    guard(|| {
        let m = model_ref(model)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let c = CostFunction::new(m, z).and_then(|cf| cf.cost_at(x)).map_err(fail)?;
        *out = c;
        Ok(())
    })
}

fn to_c(sol: &BoundarySolution) -> LpSolution {
    LpSolution {
        z: sol.z,
        r_star: sol.r_star,
        cost_root: sol.cost_root,
        residual: sol.residual,
        bracket_lo: sol.bracket.0,
        bracket_hi: sol.bracket.1,
        iterations: sol.iterations as u32,
        method: match sol.method {
            SolveMethod::ClosedFormPowerLaw => 0,
            SolveMethod::GeneralQuadrature => 1,
        },
    }
}

fn from_c(sol: &LpSolution) -> Result<BoundarySolution, LpStatus> {
    let method = match sol.method {
        0 => SolveMethod::ClosedFormPowerLaw,
        1 => SolveMethod::GeneralQuadrature,
        k => return Err(fail(Error::Domain(format!("unknown solution method {k}")))),
    };
    Ok(BoundarySolution {
        r_star: sol.r_star,
        cost_root: sol.cost_root,
        method,
        residual: sol.residual,
        bracket: (sol.bracket_lo, sol.bracket_hi),
        iterations: sol.iterations as usize,
        z: sol.z,
    })
}

/// Solves for the optimal threshold `r*` at level `z`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn lp_solve(model: *const LpModel, z: f64, out: *mut LpSolution) -> LpStatus {
    guard(|| {
        let m = model_ref(model)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let cf = CostFunction::new(m, z).map_err(fail)?;
        let sol = lastpassage::solver::solve(m, &cf).map_err(fail)?;
        *out = to_c(&sol);
        Ok(())
    })
}

/// Prepares the value function for a solution returned by [`lp_solve`].
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn lp_value_function_new(
    model: *const LpModel,
    solution: *const LpSolution,
    out: *mut *mut LpValueFunction,
) -> LpStatus {
    guard(|| {
        let m = model_ref(model)?;
        let sol = solution.as_ref().ok_or_else(|| null("solution"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let sol = from_c(sol)?;
        let cf = CostFunction::new(m, sol.z).map_err(fail)?;
        let inner = ValueFunction::new(&cf, &sol).map_err(fail)?;
        *out = Box::into_raw(Box::new(LpValueFunction { inner }));
        Ok(())
    })
}

/// `V(x)` and `V'(x)`; either output may be null.
///
/// # Safety
/// `vf` must come from [`lp_value_function_new`].
#[no_mangle]
pub unsafe extern "C" fn lp_value_function_eval(
    vf: *const LpValueFunction,
    x: f64,
    value: *mut f64,
    derivative: *mut f64,
) -> LpStatus {
    guard(|| {
        let vf = &vf.as_ref().ok_or_else(|| null("value function"))?.inner;
        if !value.is_null() {
            *value = vf.value(x).map_err(fail)?.0;
        }
        if !derivative.is_null() {
            *derivative = vf.derivative(x).map_err(fail)?;
        }
        Ok(())
    })
}

/// # Safety
/// `vf` must come from [`lp_value_function_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn lp_value_function_free(vf: *mut LpValueFunction) {
    if !vf.is_null() {
        drop(Box::from_raw(vf));
    }
}

/// Default Monte Carlo settings for level `z`.
#[no_mangle]
pub extern "C" fn lp_mc_config_default(z: f64) -> LpMcConfig {
    let c = McConfig::new(z);
    LpMcConfig {
        dt: c.dt,
        n_paths: c.n_paths as u64,
        upper_barrier_eps: c.upper_barrier_eps,
        t_max: c.t_max,
        seed: c.seed,
        x0: c.x0,
    }
}

/// Monte Carlo estimate of the criterion for the rule "stop at `r`".
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn lp_estimate_objective(
    model: *const LpModel,
    z: f64,
    r: f64,
    config: *const LpMcConfig,
    out: *mut LpMcEstimate,
) -> LpStatus {
    guard(|| {
        let m = model_ref(model)?;
        let c = config.as_ref().ok_or_else(|| null("config"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let mut cfg = McConfig::new(z);
        cfg.dt = c.dt;
        cfg.n_paths = usize::try_from(c.n_paths).map_err(|_| fail(Error::Domain("n_paths too large".into())))?;
        cfg.upper_barrier_eps = c.upper_barrier_eps;
        cfg.t_max = c.t_max;
        cfg.seed = c.seed;
        cfg.x0 = c.x0;
        let cf = CostFunction::new(m, z).map_err(fail)?;
        let e = estimate_objective(m, &cfg, &cf, r).map_err(fail)?;
        *out = LpMcEstimate {
            mean: e.mean,
            std_error: e.std_error,
            n_effective: e.n_effective as u64,
            censor_fraction: e.censor_fraction,
            censor_warning: e.censor_warning as u32,
        };
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn status_mapping() {
        assert_eq!(status_of(&Error::Domain("x".into())), LpStatus::Domain);
        assert_eq!(status_of(&Error::NoRoot("x".into())), LpStatus::Numeric);
        assert_eq!(guard(|| panic!("boom")), LpStatus::Panic);
        let msg = unsafe { CStr::from_ptr(lp_last_error()) }.to_str().unwrap().to_owned();
        assert!(msg.contains("boom"));
    }

    #[test]
    fn solution_round_trip() {
        let s = LpSolution {
            z: 1.0,
            r_star: 2.0,
            cost_root: 1.5,
            residual: 0.0,
            bracket_lo: 1.5,
            bracket_hi: 3.0,
            iterations: 7,
            method: 1,
        };
        assert_eq!(to_c(&from_c(&s).unwrap()), s);
        assert!(from_c(&LpSolution { method: 9, ..s }).is_err());
    }
}
