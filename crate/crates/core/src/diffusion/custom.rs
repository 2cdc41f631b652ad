//! User-supplied diffusions given by expression strings.
//!
//! Either the coefficients `(b, a)` or the pair `(s, m)` must be present.
//! From coefficients alone the scale is rebuilt numerically:
//! `ln s'(x) = -int_1^x 2b/a^2` and `s(x) = -int_x^inf s'`. Both integrals
//! are tabulated on a log-spaced lattice over `[1e-8, 1e8]` so that a point
//! evaluation costs one short Gauss-Kronrod panel.

use crate::error::{Error, Result};
use crate::expr::Expression;
use crate::quad::{gauss_kronrod_15, integrate, integrate_to_infinity, Tolerance};

use super::OriginBoundary;

const LATTICE_LO_DECADE: f64 = -8.0;
const PER_DECADE: usize = 16;
const DECADES: usize = 16;
const NODES: usize = PER_DECADE * DECADES + 1;
const ANCHOR: usize = NODES / 2;

fn node(i: usize) -> f64 {
    10f64.powf(LATTICE_LO_DECADE + i as f64 / PER_DECADE as f64)
}

/// Index of the lattice cell `[node(i), node(i+1)]` containing `x`.
fn cell(x: f64) -> Option<usize> {
    let pos = (x.log10() - LATTICE_LO_DECADE) * PER_DECADE as f64;
    if !(0.0..=(NODES - 1) as f64).contains(&pos) {
        return None;
    }
    Some((pos.floor() as usize).min(NODES - 2))
}

const TOL: Tolerance = Tolerance::new(1e-12, 0.0);

/// Scale function reconstructed from `(b, a)`.
#[derive(Debug, Clone)]
struct NumericScale {
    drift: Expression,
    diffusion: Expression,
    /// `ln s'` at the lattice nodes, anchored so that `s'(1) = 1`.
    ln_sp: Vec<f64>,
    /// `int_{node(i)}^inf s'`.
    tail: Vec<f64>,
}

impl NumericScale {
    fn build(drift: Expression, diffusion: Expression) -> Result<Self> {
        let mut ns = Self { drift, diffusion, ln_sp: vec![0.0; NODES], tail: vec![0.0; NODES] };
        for i in ANCHOR + 1..NODES {
            ns.ln_sp[i] = ns.ln_sp[i - 1] - ns.q_integral(node(i - 1), node(i))?;
        }
        for i in (0..ANCHOR).rev() {
            ns.ln_sp[i] = ns.ln_sp[i + 1] + ns.q_integral(node(i), node(i + 1))?;
        }
        if ns.ln_sp.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidModel("scale derivative over- or underflows on [1e-8, 1e8]".into()));
        }

        let top = node(NODES - 1);
        let far = integrate_to_infinity(|y| ns.ln_scale_derivative(y).exp(), top, Tolerance::new(1e-9, 0.0))
            .map_err(|e| {
                Error::InvalidModel(format!("scale does not converge at infinity, the process is not transient ({e})"))
            })?;
        ns.tail[NODES - 1] = far.value;
        for i in (0..NODES - 1).rev() {
            let (a, b) = (node(i), node(i + 1));
            let piece = integrate(|u: f64| ns.sp_log_variable(u), a.ln(), b.ln(), TOL)?;
            ns.tail[i] = ns.tail[i + 1] + piece.value;
        }
        Ok(ns)
    }

    fn q(&self, x: f64) -> f64 {
        let a = self.diffusion.eval(x);
        2.0 * self.drift.eval(x) / (a * a)
    }

    /// `int_a^b 2b/a^2` in the variable `ln x`.
    fn q_integral(&self, a: f64, b: f64) -> Result<f64> {
        let f = |u: f64| {
            let x = u.exp();
            self.q(x) * x
        };
        Ok(integrate(f, a.ln(), b.ln(), TOL)?.value)
    }

    fn q_panel(&self, a: f64, b: f64) -> f64 {
        let f = |u: f64| {
            let x = u.exp();
            self.q(x) * x
        };
        gauss_kronrod_15(&f, a.ln(), b.ln()).map(|r| r.0).unwrap_or(f64::NAN)
    }

    fn ln_scale_derivative(&self, x: f64) -> f64 {
        if !(x > 0.0) {
            return f64::NAN;
        }
        match cell(x) {
            Some(i) => {
                let (lo, hi) = (node(i), node(i + 1));
                if x - lo <= hi - x {
                    self.ln_sp[i] - self.q_panel(lo, x)
                } else {
                    self.ln_sp[i + 1] + self.q_panel(x, hi)
                }
            }
            None if x < node(0) => self.ln_sp[0] + self.q_integral(x, node(0)).unwrap_or(f64::NAN),
            None => self.ln_sp[NODES - 1] - self.q_integral(node(NODES - 1), x).unwrap_or(f64::NAN),
        }
    }

    /// `s'(e^u) e^u`.
    fn sp_log_variable(&self, u: f64) -> f64 {
        (self.ln_scale_derivative(u.exp()) + u).exp()
    }

    /// `int_x^inf s'`.
    fn tail(&self, x: f64) -> f64 {
        if !(x > 0.0) {
            return f64::NAN;
        }
        let f = |u: f64| self.sp_log_variable(u);
        match cell(x) {
            Some(i) => {
                let hi = node(i + 1);
                let panel = gauss_kronrod_15(&f, x.ln(), hi.ln()).map(|r| r.0).unwrap_or(f64::NAN);
                self.tail[i + 1] + panel
            }
            None if x < node(0) => {
                self.tail[0] + integrate(f, x.ln(), node(0).ln(), TOL).map(|r| r.value).unwrap_or(f64::NAN)
            }
            None => integrate_to_infinity(|y| self.ln_scale_derivative(y).exp(), x, Tolerance::new(1e-9, 0.0))
                .map(|r| r.value)
                .unwrap_or(f64::NAN),
        }
    }
}

#[derive(Debug, Clone)]
enum Repr {
    Coefficients(NumericScale),
    ScaleSpeed { scale: Expression, speed: Expression },
}

/// A diffusion assembled from expression strings in the variable `x`.
#[derive(Debug, Clone)]
pub struct CustomModel {
    name: String,
    origin: OriginBoundary,
    drift: Option<Expression>,
    diffusion: Option<Expression>,
    repr: Repr,
}

fn parse_opt(src: Option<&str>) -> Result<Option<Expression>> {
    src.map(Expression::parse).transpose()
}

impl CustomModel {
    /// Builds a model from `(b, a)` and/or `(s, m)`. When the scale and
    /// speed are given they take precedence for every quantity except the
    /// coefficients used in simulation. Without a declared origin type the
    /// origin is classified as an entrance boundary iff `int_0 s dm` is
    /// finite.
    pub fn new(
        name: Option<&str>,
        drift: Option<&str>,
        diffusion: Option<&str>,
        scale: Option<&str>,
        speed: Option<&str>,
        origin: Option<OriginBoundary>,
    ) -> Result<Self> {
        let drift = parse_opt(drift)?;
        let diffusion = parse_opt(diffusion)?;
        let scale = parse_opt(scale)?;
        let speed = parse_opt(speed)?;
        let repr = match (scale, speed, &drift, &diffusion) {
            (Some(scale), Some(speed), _, _) => Repr::ScaleSpeed { scale, speed },
            (None, None, Some(b), Some(a)) => Repr::Coefficients(NumericScale::build(b.clone(), a.clone())?),
            _ => {
                return Err(Error::Spec(
                    "custom model needs either `drift` and `diffusion` or `scale` and `speed`".into(),
                ))
            }
        };
        let describe = |e: &Option<Expression>| e.as_ref().map(|e| e.source().to_owned());
        let name = name.map(str::to_owned).unwrap_or_else(|| match &repr {
            Repr::ScaleSpeed { scale, speed } => format!("custom(scale={}, speed={})", scale.source(), speed.source()),
            Repr::Coefficients(_) => format!(
                "custom(drift={}, diffusion={})",
                describe(&drift).unwrap_or_default(),
                describe(&diffusion).unwrap_or_default()
            ),
        });
        let mut model = Self { name, origin: OriginBoundary::Natural, drift, diffusion, repr };
        model.origin = match origin {
            Some(o) => o,
            None => model.classify_origin(),
        };
        Ok(model)
    }

    fn classify_origin(&self) -> OriginBoundary {
        let f = |y: f64| -(self.ln_neg_scale(y) + self.ln_speed_density(y)).exp();
        match crate::quad::integrate_from_zero(f, 1.0, Tolerance::new(1e-8, 0.0)) {
            Ok(_) => OriginBoundary::Entrance,
            Err(_) => OriginBoundary::Natural,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn origin(&self) -> OriginBoundary {
        self.origin
    }

    pub(crate) fn scale(&self, x: f64) -> f64 {
        match &self.repr {
            Repr::ScaleSpeed { scale, .. } => scale.eval(x),
            Repr::Coefficients(ns) => -ns.tail(x),
        }
    }

    pub(crate) fn ln_neg_scale(&self, x: f64) -> f64 {
        (-self.scale(x)).ln()
    }

    pub(crate) fn scale_derivative(&self, x: f64) -> f64 {
        match &self.repr {
            Repr::ScaleSpeed { scale, .. } => {
                // Five-point stencil.
                let h = 1e-3 * x;
                let f = |t: f64| scale.eval(t);
                (f(x - 2.0 * h) - 8.0 * f(x - h) + 8.0 * f(x + h) - f(x + 2.0 * h)) / (12.0 * h)
            }
            Repr::Coefficients(ns) => ns.ln_scale_derivative(x).exp(),
        }
    }

    pub(crate) fn ln_scale_derivative(&self, x: f64) -> f64 {
        match &self.repr {
            Repr::Coefficients(ns) => ns.ln_scale_derivative(x),
            Repr::ScaleSpeed { .. } => self.scale_derivative(x).ln(),
        }
    }

    pub(crate) fn scale_second_derivative(&self, x: f64) -> f64 {
        match &self.repr {
            Repr::ScaleSpeed { scale, .. } => {
                let h = 1e-3 * x;
                let f = |t: f64| scale.eval(t);
                (-f(x - 2.0 * h) + 16.0 * f(x - h) - 30.0 * f(x) + 16.0 * f(x + h) - f(x + 2.0 * h))
                    / (12.0 * h * h)
            }
            Repr::Coefficients(ns) => -ns.q(x) * self.scale_derivative(x),
        }
    }

    pub(crate) fn speed_density(&self, x: f64) -> f64 {
        match &self.repr {
            Repr::ScaleSpeed { speed, .. } => speed.eval(x),
            Repr::Coefficients(_) => self.ln_speed_density(x).exp(),
        }
    }

    pub(crate) fn ln_speed_density(&self, x: f64) -> f64 {
        match &self.repr {
            Repr::ScaleSpeed { speed, .. } => speed.eval(x).ln(),
            Repr::Coefficients(ns) => {
                let a = ns.diffusion.eval(x);
                std::f64::consts::LN_2 - 2.0 * a.abs().ln() - ns.ln_scale_derivative(x)
            }
        }
    }

    pub(crate) fn drift(&self, x: f64) -> f64 {
        match &self.drift {
            Some(b) => b.eval(x),
            None => {
                let a = self.diffusion(x);
                -0.5 * a * a * self.scale_second_derivative(x) / self.scale_derivative(x)
            }
        }
    }

    pub(crate) fn diffusion(&self, x: f64) -> f64 {
        match &self.diffusion {
            Some(a) => a.eval(x).abs(),
            None => (2.0 / (self.speed_density(x) * self.scale_derivative(x))).sqrt(),
        }
    }

    /// True when both the coefficients and the scale/speed pair were given.
    pub fn is_overdetermined(&self) -> bool {
        matches!(self.repr, Repr::ScaleSpeed { .. }) && self.drift.is_some() && self.diffusion.is_some()
    }
}
