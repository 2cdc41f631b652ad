//! The value function of the threshold rule at `r*`,
//!
//! ```text
//! V(x) = -s(x) int_0^x c dm - int_x^r* s c dm,   x < r*,
//! V(x) = 0,                                       x >= r*,
//! ```
//!
//! its derivative `V'(x) = -s'(x) int_0^x c dm`, closed forms for the
//! power-law family and a numerical check of the free-boundary problem
//! `a^2 V''/2 + b V' + c = 0` on `(0, r*)`, `V(r*) = V'(r*) = 0`.
//!
//! Products such as `s(x) m(y)` are formed as `exp(ln|s(x)| + ln m(y))`.

use serde::{Deserialize, Serialize};

use crate::cost::CostFunction;
use crate::diffusion::{decades_converge, DiffusionModel, OriginBoundary, PowerLawFamily};
use crate::error::{Error, Result};
use crate::quad::{integrate, integrate_from_zero, integrate_from_zero_graded, Tolerance};
use crate::solver::{power_law_equation, BoundarySolution};

/// Distance from a special case of the power-law family below which the
/// logarithmic closed forms are used.
pub const SPECIAL_CASE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueMethod {
    ClosedForm,
    Quadrature,
}

impl ValueMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            ValueMethod::ClosedForm => "closed_form",
            ValueMethod::Quadrature => "quadrature",
        }
    }
}

/// `V(0+)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum OriginLimit {
    Finite(f64),
    NegativeInfinity,
}

impl OriginLimit {
    pub fn is_finite(&self) -> bool {
        matches!(self, OriginLimit::Finite(_))
    }
}

/// Integrates `f` over `[a, b]`, in the variable `ln y` when the range
/// spans more than a decade.
fn integrate_range<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: Tolerance) -> Result<f64> {
    if b / a > 10.0 {
        let g = |u: f64| {
            let y = u.exp();
            f(y) * y
        };
        Ok(integrate(g, a.ln(), b.ln(), tol)?.value)
    } else {
        Ok(integrate(f, a, b, tol)?.value)
    }
}

/// `E_x int_0^sigma_r f(X_t) dt` where `sigma_r` is the first hitting time
/// of `r`:
/// `int_0^x (s(r) - s(x)) f dm + int_x^r (s(r) - s(y)) f dm`, and 0 for
/// `x >= r`.
pub fn expected_functional<F: Fn(f64) -> f64>(model: &DiffusionModel, f: F, x: f64, r: f64) -> Result<f64> {
    if !(x > 0.0 && r > 0.0) {
        return Err(Error::Domain(format!("expected functional needs x, r > 0, got ({x}, {r})")));
    }
    if x >= r {
        return Ok(0.0);
    }
    let tol = Tolerance::new(1e-12, 0.0);
    let l_r = model.ln_neg_scale(r);
    // s(r) - s(y) = |s(y)| (1 - |s(r)|/|s(y)|)
    let gap = |y: f64| {
        let l_y = model.ln_neg_scale(y);
        (l_y, -(l_r - l_y).exp_m1())
    };
    let (l_x, frac_x) = gap(x);
    let below = integrate_from_zero_graded(|y| f(y) * (l_x + model.ln_speed_density(y)).exp(), x, tol)
        .map_err(|e| Error::Integrability(format!("expected functional near the origin: {e}")))?;
    let above = integrate_range(
        |y| {
            let (l_y, frac) = gap(y);
            f(y) * frac * (l_y + model.ln_speed_density(y)).exp()
        },
        x,
        r,
        tol,
    )?;
    Ok(frac_x * below.value + above)
}

/// Closed-form value function for the power-law family.
pub fn value_closed_form_power_law(fam: &PowerLawFamily, z: f64, sol: &BoundarySolution, x: f64) -> Result<f64> {
    fam.validate()?;
    if !(x > 0.0 && z > 0.0) {
        return Err(Error::Domain(format!("closed form needs x, z > 0, got ({x}, {z})")));
    }
    let r = sol.r_star;
    if x >= r {
        return Ok(0.0);
    }
    let PowerLawFamily { alpha, beta, mu, nu } = *fam;
    let ab = alpha * beta;
    let u = r / z;
    let w = x / z;
    let (lu, lw) = (u.ln(), w.ln());
    let eps = nu - mu + 1.0;
    let v = if eps.abs() < SPECIAL_CASE_TOL {
        if x <= z {
            ab * (2.0 / mu * u.powf(-mu) + lu + lw - 3.0 / mu)
        } else {
            let wm = w.powf(-mu);
            ab * (2.0 / mu * u.powf(-mu) - 4.0 / mu * wm - 2.0 * wm * lw + lu - lw + 1.0 / mu)
        }
    } else if (eps - mu).abs() < SPECIAL_CASE_TOL {
        let k = ab * z.powf(mu);
        if x <= z {
            k * (u.powf(mu) / mu + w.powf(mu) / (2.0 * mu) - 2.0 * lu - 2.0 / mu)
        } else {
            k * (u.powf(mu) / mu - w.powf(mu) / (2.0 * mu) + w.powf(-mu) / mu - 2.0 * lu + 2.0 * lw - 2.0 / mu)
        }
    } else {
        let d = eps - mu;
        let k = ab * z.powf(eps);
        let head = u.powf(eps) / eps - 2.0 * u.powf(d) / d;
        if x <= z {
            k * (head + mu / (eps * (nu + 1.0)) * w.powf(eps) + 2.0 * mu / (d * eps))
        } else {
            k * (head - mu / (eps * (nu + 1.0)) * w.powf(eps)
                + 2.0 * mu / (d * eps) * w.powf(d)
                + 2.0 * mu / (eps * (nu + 1.0)) * w.powf(-mu))
        }
    };
    Ok(v)
}

/// `V(0+)` for the power-law family: finite iff `nu - mu + 1 > 0`.
pub fn power_law_origin_limit(fam: &PowerLawFamily, z: f64, sol: &BoundarySolution) -> OriginLimit {
    let PowerLawFamily { alpha, beta, mu, nu } = *fam;
    let eps = nu - mu + 1.0;
    if eps < SPECIAL_CASE_TOL {
        return OriginLimit::NegativeInfinity;
    }
    let u = sol.r_star / z;
    let ab = alpha * beta;
    if (eps - mu).abs() < SPECIAL_CASE_TOL {
        OriginLimit::Finite(ab * z.powf(mu) * (u.powf(mu) / mu - 2.0 * u.ln() - 2.0 / mu))
    } else {
        let d = eps - mu;
        let head = u.powf(eps) / eps - 2.0 * u.powf(d) / d;
        OriginLimit::Finite(ab * z.powf(eps) * (head + 2.0 * mu / (d * eps)))
    }
}

/// `V'(x) = -s'(x) G(x)` for the power-law family, with `G` in closed form.
pub fn derivative_closed_form_power_law(fam: &PowerLawFamily, z: f64, sol: &BoundarySolution, x: f64) -> f64 {
    if x >= sol.r_star {
        return 0.0;
    }
    let PowerLawFamily { alpha, beta, mu, nu } = *fam;
    let k = alpha * beta * mu * x.powf(nu - mu);
    if x <= z {
        k / (nu + 1.0)
    } else {
        -k * power_law_equation(fam, x / z)
    }
}

/// The value function of the threshold rule at `sol.r_star`.
#[derive(Debug, Clone)]
pub struct ValueFunction {
    cf: CostFunction,
    sol: BoundarySolution,
    closed: Option<PowerLawFamily>,
    /// `int_z^r* |s| c m`.
    t_z: f64,
    tol: Tolerance,
}

impl ValueFunction {
    pub fn new(cf: &CostFunction, sol: &BoundarySolution) -> Result<Self> {
        let z = cf.z();
        if (sol.z - z).abs() > 1e-12 * z {
            return Err(Error::Domain(format!("boundary was solved for z = {}, not {z}", sol.z)));
        }
        if !(sol.r_star > z) {
            return Err(Error::Domain(format!("boundary r* = {} must exceed z = {z}", sol.r_star)));
        }
        let model = cf.model();
        let ln_scale_z = model.ln_neg_scale(z);
        let mass = integrate_from_zero(|y| model.ln_speed_density(y).exp(), z, Tolerance::new(1e-10, 0.0))
            .map_err(|e| Error::Integrability(format!("speed measure near the origin: {e}")))?;
        let magnitude = (ln_scale_z + mass.value.ln()).exp().min(1e300);
        let tol = Tolerance::new(1e-12, 1e-17 * magnitude);
        let x_c = sol.cost_root.clamp(z, sol.r_star);
        let f = |y: f64| cf.eval(y) * (model.ln_neg_scale(y) + model.ln_speed_density(y)).exp();
        let t_z = integrate_range(f, z, x_c, tol)? + integrate_range(f, x_c, sol.r_star, tol)?;
        Ok(Self { cf: cf.clone(), sol: *sol, closed: model.power_law_params(), t_z, tol })
    }

    pub fn model(&self) -> &DiffusionModel {
        self.cf.model()
    }

    pub fn cost(&self) -> &CostFunction {
        &self.cf
    }

    pub fn solution(&self) -> &BoundarySolution {
        &self.sol
    }

    pub fn r_star(&self) -> f64 {
        self.sol.r_star
    }

    pub fn has_closed_form(&self) -> bool {
        self.closed.is_some()
    }

    /// Integrands built from `exp(ln|s(x)| + ln m(y))` carry a relative
    /// error of roughly `eps (|ln|s(x)|| + |ln m(x)|)`; the requested
    /// accuracy never drops below that floor.
    fn tol_at(&self, x: f64) -> Tolerance {
        let model = self.model();
        let spread = model.ln_neg_scale(x).abs() + model.ln_speed_density(x).abs();
        let floor = 100.0 * f64::EPSILON * spread;
        Tolerance::new(self.tol.rel.max(floor), self.tol.abs)
    }

    fn check(&self, x: f64) -> Result<()> {
        if x > 0.0 && x.is_finite() {
            Ok(())
        } else {
            Err(Error::Domain(format!("value function is defined for x > 0, got {x}")))
        }
    }

    /// `V(x)` by quadrature.
    pub fn value_quadrature(&self, x: f64) -> Result<f64> {
        self.check(x)?;
        let r = self.sol.r_star;
        if x >= r {
            return Ok(0.0);
        }
        let model = self.model();
        let z = self.cf.z();
        let ln_s = |y: f64| model.ln_neg_scale(y);
        let ln_m = |y: f64| model.ln_speed_density(y);
        let l_x = ln_s(x);
        if x <= z {
            // V = -|s(x)| M(x) - int_x^z |s| m + int_z^r* |s| c m
            let tol = self.tol_at(x);
            let own = integrate_from_zero_graded(|y| (l_x + ln_m(y)).exp(), x, tol)
                .map_err(|e| Error::Integrability(format!("value function near the origin: {e}")))?;
            let mid = integrate_range(|y| (ln_s(y) + ln_m(y)).exp(), x, z, tol)?;
            Ok(-own.value - mid + self.t_z)
        } else {
            // With G(x) = G(r*) - int_x^r* c m:
            // V = |s(x)| G(r*) - int_x^r* (|s(x)| - |s(y)|) c m
            let f = |y: f64| {
                let l_y = ln_s(y);
                self.cf.eval(y) * (l_x + ln_m(y)).exp() * -(l_y - l_x).exp_m1()
            };
            let x_c = self.sol.cost_root;
            let tail = if x < x_c {
                integrate_range(f, x, x_c, self.tol)? + integrate_range(f, x_c, r, self.tol)?
            } else {
                integrate_range(f, x, r, self.tol)?
            };
            Ok(l_x.exp() * self.sol.residual - tail)
        }
    }

    /// `V'(x) = -s'(x) int_0^x c dm` by quadrature.
    pub fn derivative_quadrature(&self, x: f64) -> Result<f64> {
        self.check(x)?;
        let r = self.sol.r_star;
        if x >= r {
            return Ok(0.0);
        }
        let model = self.model();
        let z = self.cf.z();
        let l_sp = model.ln_scale_derivative(x);
        if x <= z {
            let v = integrate_from_zero_graded(|y| (l_sp + model.ln_speed_density(y)).exp(), x, self.tol_at(x))
                .map_err(|e| Error::Integrability(format!("derivative near the origin: {e}")))?;
            Ok(v.value)
        } else {
            let f = |y: f64| self.cf.eval(y) * (l_sp + model.ln_speed_density(y)).exp();
            let x_c = self.sol.cost_root;
            let tail = if x < x_c {
                integrate_range(f, x, x_c, self.tol)? + integrate_range(f, x_c, r, self.tol)?
            } else {
                integrate_range(f, x, r, self.tol)?
            };
            Ok(tail - l_sp.exp() * self.sol.residual)
        }
    }

    /// `V(x)`, in closed form when the model belongs to the power-law family.
    pub fn value(&self, x: f64) -> Result<(f64, ValueMethod)> {
        self.check(x)?;
        match &self.closed {
            Some(fam) => Ok((value_closed_form_power_law(fam, self.cf.z(), &self.sol, x)?, ValueMethod::ClosedForm)),
            None => Ok((self.value_quadrature(x)?, ValueMethod::Quadrature)),
        }
    }

    pub fn derivative(&self, x: f64) -> Result<f64> {
        self.check(x)?;
        match &self.closed {
            Some(fam) => Ok(derivative_closed_form_power_law(fam, self.cf.z(), &self.sol, x)),
            None => self.derivative_quadrature(x),
        }
    }

    /// `V(0+)`: analytic for the power-law family, otherwise inferred from
    /// `V` at `z 10^-k`.
    pub fn origin_limit(&self) -> Result<OriginLimit> {
        if let Some(fam) = &self.closed {
            return Ok(power_law_origin_limit(fam, self.cf.z(), &self.sol));
        }
        if self.model().origin_value_finite_analytic() == Some(false) {
            return Ok(OriginLimit::NegativeInfinity);
        }
        let samples = self.origin_samples()?;
        Ok(if decades_converge(&samples) {
            OriginLimit::Finite(samples[samples.len() - 1])
        } else {
            OriginLimit::NegativeInfinity
        })
    }

    /// `V(z 10^-k)` for `k = 0..=8`.
    pub fn origin_samples(&self) -> Result<Vec<f64>> {
        let z = self.cf.z();
        (0..=8).map(|k| self.value(z * 10f64.powi(-k)).map(|v| v.0)).collect()
    }
}

/// `V(x)` by quadrature, for a boundary solved on the same model and level.
pub fn value_at(model: &DiffusionModel, cf: &CostFunction, sol: &BoundarySolution, x: f64) -> Result<f64> {
    let _ = model;
    ValueFunction::new(cf, sol)?.value_quadrature(x)
}

/// `V` and `V'` sampled on a grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValueCurve {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub derivative: Vec<f64>,
    pub method: Vec<ValueMethod>,
    pub r_star: f64,
    pub z: f64,
    pub origin_limit: OriginLimit,
}

/// 200 log-spaced points on `[1e-3 z, z]` and 200 evenly spaced points on
/// `(z, 1.2 r*]`.
pub fn default_grid(z: f64, r_star: f64) -> Vec<f64> {
    let (a, b) = ((1e-3 * z).ln(), z.ln());
    let mut grid: Vec<f64> = (0..200).map(|i| (a + (b - a) * i as f64 / 199.0).exp()).collect();
    grid[199] = z;
    let top = 1.2 * r_star;
    grid.extend((1..=200).map(|i| z + (top - z) * i as f64 / 200.0));
    grid
}

impl ValueCurve {
    pub fn compute(vf: &ValueFunction, grid: &[f64]) -> Result<Self> {
        if grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Domain("value grid must be strictly increasing".into()));
        }
        let mut values = Vec::with_capacity(grid.len());
        let mut derivative = Vec::with_capacity(grid.len());
        let mut method = Vec::with_capacity(grid.len());
        for &x in grid {
            let (v, m) = vf.value(x)?;
            values.push(v);
            method.push(m);
            derivative.push(vf.derivative(x)?);
        }
        Ok(Self {
            grid: grid.to_vec(),
            values,
            derivative,
            method,
            r_star: vf.r_star(),
            z: vf.cost().z(),
            origin_limit: vf.origin_limit()?,
        })
    }

    /// CSV with header `x,V,Vprime,method`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,V,Vprime,method\n");
        for i in 0..self.grid.len() {
            out.push_str(&format!(
                "{:.16e},{:.16e},{:.16e},{}\n",
                self.grid[i],
                self.values[i],
                self.derivative[i],
                self.method[i].as_str()
            ));
        }
        out
    }
}

/// Origin behaviour of `V`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OriginBehaviour {
    Finite,
    Divergent,
}

impl From<OriginBoundary> for OriginBehaviour {
    fn from(b: OriginBoundary) -> Self {
        match b {
            OriginBoundary::Entrance => OriginBehaviour::Finite,
            OriginBoundary::Natural => OriginBehaviour::Divergent,
        }
    }
}

/// Pass/fail thresholds of [`verify_free_boundary`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VerificationTolerances {
    pub ode_residual: f64,
    pub value_match: f64,
    pub smooth_fit: f64,
    pub nonpositive: f64,
    pub kink_rel: f64,
    pub derivative_rel: f64,
}

impl Default for VerificationTolerances {
    fn default() -> Self {
        Self {
            ode_residual: 1e-4,
            value_match: 1e-8,
            smooth_fit: 1e-6,
            nonpositive: 1e-12,
            kink_rel: 0.1,
            derivative_rel: 1e-5,
        }
    }
}

/// Numerical certificate that `V` solves the free-boundary problem.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    /// Largest `|a^2 V''/2 + b V' + c| / (a^2 |V''|/2 + |b V'| + |c|)`
    /// over interior points, with `V''` and `V'` from finite differences.
    pub ode_residual: f64,
    pub ode_points: usize,
    pub ode_ok: bool,
    /// `|V(r* - h)| / |V(z)|` with `h = 1e-7 r*`.
    pub value_match: f64,
    pub value_match_ok: bool,
    /// `|V'(r* - h)| z / |V(z)|` from the analytic derivative.
    pub smooth_fit: f64,
    pub smooth_fit_ok: bool,
    pub origin_expected: OriginBehaviour,
    /// From `V(z 10^-k)`: finite when the decade increments shrink.
    pub origin_numeric: OriginBehaviour,
    pub origin_analytic: Option<OriginBehaviour>,
    pub origin_ok: bool,
    /// `V(1e-6 z)`.
    pub origin_sample: f64,
    /// Largest curve value; must not exceed the tolerance.
    pub max_value: f64,
    pub nonpositive_ok: bool,
    /// Smallest `V'` on `(0, x_c]`.
    pub min_derivative_below_cost_root: f64,
    pub monotone_ok: bool,
    /// One-sided `V''(r*-)` and `V''(r*+)` against `-2 c(r*) / a^2(r*)`.
    pub kink_left: f64,
    pub kink_right: f64,
    pub kink_expected: f64,
    pub kink_ok: bool,
    /// Largest relative gap between `V'` and a central difference of `V`.
    pub derivative_consistency: f64,
    pub derivative_ok: bool,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.ode_ok
            && self.value_match_ok
            && self.smooth_fit_ok
            && self.origin_ok
            && self.nonpositive_ok
            && self.monotone_ok
            && self.kink_ok
            && self.derivative_ok
    }
}

fn log_points(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
}

/// Finite-difference step at `x`: `max(1e-4 r*, 1e-6)`, capped at
/// `2e-3 x` so the stencil stays well inside `(0, inf)`.
fn fd_step(x: f64, r_star: f64) -> f64 {
    (1e-4 * r_star).max(1e-6).min(2e-3 * x)
}

pub fn verify_free_boundary(vf: &ValueFunction, curve: &ValueCurve) -> VerificationReport {
    verify_free_boundary_with(vf, curve, VerificationTolerances::default())
}

pub fn verify_free_boundary_with(
    vf: &ValueFunction,
    curve: &ValueCurve,
    tol: VerificationTolerances,
) -> VerificationReport {
    let model = vf.model();
    let cf = vf.cost();
    let z = cf.z();
    let r = vf.r_star();
    let x_c = vf.solution().cost_root;
    let v = |x: f64| vf.value(x).map(|p| p.0).unwrap_or(f64::NAN);
    let dv = |x: f64| vf.derivative(x).unwrap_or(f64::NAN);
    let v_z = v(z).abs();

    // (i) ODE residual at 100 interior points away from the kink of c at z.
    let mut ode_residual = 0.0f64;
    let mut derivative_consistency = 0.0f64;
    let mut ode_points = 0;
    let candidates = log_points(1e-2 * z, 0.99 * r, 130);
    let usable: Vec<f64> = candidates
        .into_iter()
        .filter(|&x| (x - z).abs() > 2.5 * fd_step(x, r))
        .collect();
    let stride = usable.len() as f64 / 100.0;
    for i in 0..usable.len().min(100) {
        let x = usable[((i as f64) * stride) as usize];
        let h = fd_step(x, r);
        let (fm, f0, fp) = (v(x - h), v(x), v(x + h));
        let d2 = (fp - 2.0 * f0 + fm) / (h * h);
        let d1 = (fp - fm) / (2.0 * h);
        let a = model.diffusion(x);
        let b = model.drift(x);
        let c = cf.eval(x);
        let res = (0.5 * a * a * d2 + b * d1 + c).abs() / (0.5 * a * a * d2.abs() + (b * d1).abs() + c.abs());
        ode_residual = if res.is_nan() { f64::NAN } else { ode_residual.max(res) };
        let analytic = dv(x);
        let gap = (analytic - d1).abs() / (analytic.abs() + 1e-8 * v_z / z);
        derivative_consistency = if gap.is_nan() { f64::NAN } else { derivative_consistency.max(gap) };
        ode_points += 1;
    }

    // (ii), (iii) value match and smooth fit.
    let h_edge = 1e-7 * r;
    let value_match = v(r - h_edge).abs() / v_z;
    let smooth_fit = dv(r - h_edge).abs() * z / v_z;

    // (iv) origin.
    let samples = vf.origin_samples().unwrap_or_default();
    let origin_numeric = if samples.len() == 9 && decades_converge(&samples) {
        OriginBehaviour::Finite
    } else {
        OriginBehaviour::Divergent
    };
    let origin_sample = samples.get(6).copied().unwrap_or(f64::NAN);
    let origin_analytic = match model.origin_value_finite_analytic() {
        Some(true) => Some(OriginBehaviour::Finite),
        Some(false) => Some(OriginBehaviour::Divergent),
        None => None,
    };
    let origin_expected = OriginBehaviour::from(model.origin());
    let origin_ok = origin_numeric == origin_expected && origin_analytic.map_or(true, |o| o == origin_expected);

    // Sign and monotonicity on the curve.
    let max_value = curve.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let nonpositive_ok = max_value <= tol.nonpositive && curve.values.iter().all(|v| !v.is_nan());
    let min_derivative_below_cost_root = curve
        .grid
        .iter()
        .zip(&curve.derivative)
        .filter(|(x, _)| **x <= x_c)
        .map(|(_, d)| *d)
        .fold(f64::INFINITY, f64::min);
    let monotone_ok = min_derivative_below_cost_root >= -tol.nonpositive * (1.0 + v_z / z);

    // Kink of V'' at r*.
    let hk = 1e-4 * r;
    let (f0, f1, f2, f3) = (v(r * (1.0 - 1e-12)), v(r - hk), v(r - 2.0 * hk), v(r - 3.0 * hk));
    let kink_left = (2.0 * f0 - 5.0 * f1 + 4.0 * f2 - f3) / (hk * hk);
    let (g1, g2, g3) = (v(r + hk), v(r + 2.0 * hk), v(r + 3.0 * hk));
    let kink_right = (2.0 * v(r) - 5.0 * g1 + 4.0 * g2 - g3) / (hk * hk);
    let a_r = model.diffusion(r);
    let kink_expected = -2.0 * cf.eval(r) / (a_r * a_r);
    let kink_ok = kink_left < 0.0
        && ((kink_left - kink_expected) / kink_expected).abs() < tol.kink_rel
        && kink_right == 0.0;

    VerificationReport {
        ode_residual,
        ode_points,
        ode_ok: ode_residual < tol.ode_residual && ode_points >= 100,
        value_match,
        value_match_ok: value_match < tol.value_match,
        smooth_fit,
        smooth_fit_ok: smooth_fit < tol.smooth_fit,
        origin_expected,
        origin_numeric,
        origin_analytic,
        origin_ok,
        origin_sample,
        max_value,
        nonpositive_ok,
        min_derivative_below_cost_root,
        monotone_ok,
        kink_left,
        kink_right,
        kink_expected,
        kink_ok,
        derivative_consistency,
        derivative_ok: derivative_consistency < tol.derivative_rel,
    }
}
