//! The optimal threshold `r*`, root of `G(r) = int_0^r c dm`.
//!
//! `G` decreases on `(0, x_c)` and increases on `(x_c, inf)`, so the
//! positive root lies beyond the cost root and is unique.

use serde::{Deserialize, Serialize};

use crate::cost::CostFunction;
use crate::diffusion::{DiffusionModel, PowerLawFamily};
use crate::error::{Error, Result};
use crate::quad::{integrate, integrate_from_zero, Tolerance};
use crate::roots::{brent, RootTolerance};

/// Quadrature tolerance for the boundary integral.
pub const BOUNDARY_TOL: Tolerance = Tolerance::new(1e-10, 1e-14);
/// Relative residual tolerance: `|G(r*)| <= 1e-10 int_0^r* |c| dm`.
pub const RESIDUAL_REL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    ClosedFormPowerLaw,
    GeneralQuadrature,
}

impl SolveMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolveMethod::ClosedFormPowerLaw => "closed_form_power_law",
            SolveMethod::GeneralQuadrature => "general_quadrature",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundarySolution {
    pub r_star: f64,
    pub cost_root: f64,
    pub method: SolveMethod,
    /// `G(r*)`.
    pub residual: f64,
    pub bracket: (f64, f64),
    pub iterations: usize,
    pub z: f64,
}

/// `M(x) = int_0^x m` for `x` at most a moderate multiple of `z`.
pub(crate) fn speed_mass(model: &DiffusionModel, x: f64, tol: Tolerance) -> Result<f64> {
    let m = |y: f64| model.ln_speed_density(y).exp();
    integrate_from_zero(m, x, tol)
        .map(|i| i.value)
        .map_err(|e| Error::Integrability(format!("speed measure is not finite near the origin: {e}")))
}

/// `int_a^b c m` over `a >= z`.
fn cost_mass(cf: &CostFunction, a: f64, b: f64, tol: Tolerance) -> Result<(f64, f64)> {
    let model = cf.model();
    let signed = integrate(|y| cf.eval(y) * model.ln_speed_density(y).exp(), a, b, tol)?;
    let abs = integrate(|y| cf.eval(y).abs() * model.ln_speed_density(y).exp(), a, b, tol)?;
    Ok((signed.value, abs.value))
}

/// `G(r) = -M(min(r, z)) + int_z^r c m`.
pub fn boundary_integral(model: &DiffusionModel, cf: &CostFunction, r: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::Domain(format!("boundary level must be positive, got {r}")));
    }
    let z = cf.z();
    let below = speed_mass(model, r.min(z), BOUNDARY_TOL)?;
    if r <= z {
        return Ok(-below);
    }
    Ok(-below + cost_mass(cf, z, r, BOUNDARY_TOL)?.0)
}

/// Solves `G(r*) = 0` by quadrature and Brent's method on
/// `[x_c, R]`, where `R` doubles from `2 x_c` until `G(R) > 0`.
pub fn solve_boundary(model: &DiffusionModel, cf: &CostFunction) -> Result<BoundarySolution> {
    let z = cf.z();
    let x_c = cf.cost_root()?;
    let m_z = speed_mass(model, z, BOUNDARY_TOL)?;
    // G(x_c) and the |c| mass up to x_c are reused for every bracket.
    let (g_c, abs_c) = cost_mass(cf, z, x_c, BOUNDARY_TOL)?;
    let g = |r: f64| -> Result<f64> { Ok(-m_z + g_c + cost_mass(cf, x_c, r, BOUNDARY_TOL)?.0) };

    let mut lo = x_c;
    let mut hi = 2.0 * x_c;
    let mut g_hi = g(hi)?;
    while g_hi <= 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > 1e12 * z {
            return Err(Error::Divergence(format!(
                "boundary integral stays negative up to r = {lo}; no optimal threshold found"
            )));
        }
        g_hi = g(hi)?;
    }

    let tol = RootTolerance { x_rel: 1e-14, x_abs: 0.0, f_abs: 0.0, max_iter: 200 };
    let root = brent(g, lo, hi, tol)?;
    let r_star = root.x;
    let mid = 0.5 * (root.bracket.0 + root.bracket.1);
    let abs_mass = m_z + abs_c + cost_mass(cf, x_c, mid, BOUNDARY_TOL)?.1;
    let tol_g = RESIDUAL_REL_TOL * abs_mass;
    if root.fx.abs() > tol_g {
        return Err(Error::NoRoot(format!(
            "boundary residual {} exceeds tolerance {tol_g} at r = {r_star}",
            root.fx
        )));
    }
    Ok(BoundarySolution {
        r_star,
        cost_root: x_c,
        method: SolveMethod::GeneralQuadrature,
        residual: root.fx,
        bracket: (lo, hi),
        iterations: root.iterations,
        z,
    })
}

/// `expm1(e l) / e`, continuous at `e = 0`.
fn exp_ratio(e: f64, l: f64) -> f64 {
    if e == 0.0 {
        l
    } else {
        (e * l).exp_m1() / e
    }
}

/// The boundary equation in `u = r/z` divided by `u^(nu+1)`:
/// `(1 - 2u^-(nu+1))/(nu+1) - 2 u^-mu (1 - u^-eps)/eps` with
/// `eps = nu - mu + 1`. Multiplying by `(nu+1) eps u^(nu+1)` recovers
/// `eps u^(nu+1) - 2(nu+1) u^eps + 2mu`; at `eps = 0` it is
/// `(u^mu - 2 mu ln u - 2) / (mu u^mu)`.
pub(crate) fn power_law_equation(fam: &PowerLawFamily, u: f64) -> f64 {
    let PowerLawFamily { mu, nu, .. } = *fam;
    let eps = nu - mu + 1.0;
    let l = u.ln();
    (1.0 - 2.0 * (-(nu + 1.0) * l).exp()) / (nu + 1.0) - 2.0 * (-mu * l).exp() * exp_ratio(-eps, l)
}

/// Roots of the power-law boundary equation on `u in (1, 1e6]`. Each
/// sign change on a fine log grid is refined by Brent's method.
pub fn power_law_roots(fam: &PowerLawFamily) -> Result<Vec<f64>> {
    fam.validate()?;
    const N: usize = 6000;
    let (lo, hi) = (0.0f64, 1e6f64.ln());
    let h = |u: f64| power_law_equation(fam, u);
    let tol = RootTolerance { x_rel: 1e-15, x_abs: 0.0, f_abs: 0.0, max_iter: 200 };
    let mut roots = Vec::new();
    let mut prev_u = (lo + (hi - lo) / N as f64).exp();
    let mut prev_h = h(prev_u);
    for i in 2..=N {
        let u = (lo + (hi - lo) * i as f64 / N as f64).exp();
        let hu = h(u);
        if hu == 0.0 {
            roots.push(u);
        } else if prev_h != 0.0 && hu.signum() != prev_h.signum() {
            roots.push(brent(|v| Ok(h(v)), prev_u, u, tol)?.x);
        }
        prev_u = u;
        prev_h = hu;
    }
    Ok(roots)
}

/// Closed-form boundary for the power-law family: the unique root of the
/// boundary equation with `u = r*/z > 2^(1/mu)`.
pub fn solve_boundary_power_law(fam: &PowerLawFamily, z: f64) -> Result<BoundarySolution> {
    if !(z > 0.0 && z.is_finite()) {
        return Err(Error::Domain(format!("target level z must be positive, got {z}")));
    }
    let u_c = 2f64.powf(1.0 / fam.mu);
    let roots = power_law_roots(fam)?;
    let admissible: Vec<f64> = roots.iter().copied().filter(|&u| u > u_c * (1.0 + 1e-12)).collect();
    let u = match admissible.as_slice() {
        [u] => *u,
        [] => {
            return Err(Error::Divergence(format!(
                "no admissible root of the boundary equation on (2^(1/mu), 1e6]; roots found: {roots:?}"
            )))
        }
        many => return Err(Error::NoRoot(format!("several admissible boundary roots: {many:?}"))),
    };
    let r_star = u * z;
    // Exact scaling: G(r) = beta z^(nu+1) u^(nu+1) h(u).
    let scale = fam.beta * ((fam.nu + 1.0) * r_star.ln()).exp();
    let residual = scale * power_law_equation(fam, u);
    Ok(BoundarySolution {
        r_star,
        cost_root: u_c * z,
        method: SolveMethod::ClosedFormPowerLaw,
        residual,
        bracket: (r_star, r_star),
        iterations: roots.len(),
        z,
    })
}

/// Closed form for power-law models, quadrature otherwise.
pub fn solve(model: &DiffusionModel, cf: &CostFunction) -> Result<BoundarySolution> {
    match model.power_law_params() {
        Some(fam) => solve_boundary_power_law(&fam, cf.z()),
        None => solve_boundary(model, cf),
    }
}
