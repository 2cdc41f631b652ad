//! Transient diffusions on `(0, inf)` described by their coefficients
//! `dX = b(X) dt + a(X) dB`, their scale function `s` and their speed
//! density `m = 2 / (a^2 s')`.
//!
//! Every model is normalized so that `s < 0` and `s(inf-) = 0`. The cost
//! and value formulas downstream rely on that gauge.
//!
//! Besides plain evaluations each model exposes `ln(-s)`, `ln s'` and
//! `ln m`. Products such as `s(x) m(y)` are formed in log space so that
//! models with exponentially large scale near the origin (the explosive
//! family) stay representable.

mod custom;
mod spec;
mod validate;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use custom::CustomModel;
pub use spec::ModelSpec;
pub(crate) use validate::decades_converge;
pub use validate::{default_probe_grid, validate_assumptions, ValidationReport};

/// Behaviour of the diffusion at the origin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OriginBoundary {
    /// Unattainable, and the process cannot be started there.
    Natural,
    /// Unattainable, but the process can be started there.
    Entrance,
}

/// Diffusions with `s(x) = -alpha x^-mu` and `m(dx) = beta x^nu dx`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFamily {
    pub alpha: f64,
    pub beta: f64,
    pub mu: f64,
    pub nu: f64,
}

impl PowerLawFamily {
    pub fn new(alpha: f64, beta: f64, mu: f64, nu: f64) -> Result<Self> {
        let fam = Self { alpha, beta, mu, nu };
        fam.validate()?;
        Ok(fam)
    }

    pub fn validate(&self) -> Result<()> {
        let Self { alpha, beta, mu, nu } = *self;
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::Domain(format!("power law requires alpha > 0, got {alpha}")));
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::Domain(format!("power law requires beta > 0, got {beta}")));
        }
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::Domain(format!("power law requires mu > 0, got {mu}")));
        }
        if !(nu > -1.0 && nu.is_finite()) {
            return Err(Error::Domain(format!("power law requires nu > -1, got {nu}")));
        }
        Ok(())
    }

    /// `ln(-s(x))`.
    fn ln_neg_scale(&self, x: f64) -> f64 {
        self.alpha.ln() - self.mu * x.ln()
    }

    fn ln_scale_derivative(&self, x: f64) -> f64 {
        (self.alpha * self.mu).ln() - (self.mu + 1.0) * x.ln()
    }

    fn ln_speed_density(&self, x: f64) -> f64 {
        self.beta.ln() + self.nu * x.ln()
    }

    fn scale(&self, x: f64) -> f64 {
        -self.alpha * x.powf(-self.mu)
    }

    fn scale_derivative(&self, x: f64) -> f64 {
        self.alpha * self.mu * x.powf(-self.mu - 1.0)
    }

    fn scale_second_derivative(&self, x: f64) -> f64 {
        -self.alpha * self.mu * (self.mu + 1.0) * x.powf(-self.mu - 2.0)
    }

    fn speed_density(&self, x: f64) -> f64 {
        self.beta * x.powf(self.nu)
    }

    /// `a^2 = 2 / (m s')`, pinned by the scale function and speed density.
    fn diffusion_squared(&self, x: f64) -> f64 {
        2.0 / (self.alpha * self.beta * self.mu) * x.powf(self.mu + 1.0 - self.nu)
    }

    /// Drift recovered from the scale equation `a^2 s'' / 2 + b s' = 0`.
    fn drift(&self, x: f64) -> f64 {
        (self.mu + 1.0) / (self.alpha * self.beta * self.mu) * x.powf(self.mu - self.nu)
    }

    /// Whether `int_0 s dm` is finite, i.e. whether the value function has a
    /// finite limit at the origin.
    pub fn origin_value_finite(&self) -> bool {
        self.nu - self.mu + 1.0 > 0.0
    }
}

#[derive(Debug, Clone)]
enum Kind {
    Bessel { delta: f64, fam: PowerLawFamily },
    SquaredBessel { delta: f64, fam: PowerLawFamily },
    Gbm { lambda: f64, sigma: f64, fam: PowerLawFamily },
    PowerLaw(PowerLawFamily),
    Explosive(Explosive),
    Custom(Arc<CustomModel>),
}

/// `b = lambda kappa x^p + kappa^2 p x^(2p-1) / 2`, `a = kappa x^p`.
#[derive(Debug, Clone, Copy)]
struct Explosive {
    lambda: f64,
    kappa: f64,
    p: f64,
    /// `2 lambda / (kappa (1 - p))`, negative.
    k: f64,
}

impl Explosive {
    /// `t(x) = -k x^(1-p) > 0`; the scale is `1 - e^t`.
    fn t(&self, x: f64) -> f64 {
        -self.k * x.powf(1.0 - self.p)
    }

    fn ln_neg_scale(&self, x: f64) -> f64 {
        let t = self.t(x);
        if t > 1.0 {
            t + (-(-t).exp()).ln_1p()
        } else {
            t.exp_m1().ln()
        }
    }

    fn ln_scale_derivative(&self, x: f64) -> f64 {
        (2.0 * self.lambda / self.kappa).ln() - self.p * x.ln() + self.t(x)
    }

    fn ln_speed_density(&self, x: f64) -> f64 {
        -(self.lambda * self.kappa).ln() - self.p * x.ln() - self.t(x)
    }

    fn scale(&self, x: f64) -> f64 {
        -self.t(x).exp_m1()
    }

    fn scale_derivative(&self, x: f64) -> f64 {
        self.ln_scale_derivative(x).exp()
    }

    fn scale_second_derivative(&self, x: f64) -> f64 {
        self.scale_derivative(x) * (-self.p / x - 2.0 * self.lambda / self.kappa * x.powf(-self.p))
    }

    fn speed_density(&self, x: f64) -> f64 {
        self.ln_speed_density(x).exp()
    }

    fn drift(&self, x: f64) -> f64 {
        let Self { lambda, kappa, p, .. } = *self;
        lambda * kappa * x.powf(p) + 0.5 * kappa * kappa * p * x.powf(2.0 * p - 1.0)
    }

    fn diffusion(&self, x: f64) -> f64 {
        self.kappa * x.powf(self.p)
    }
}

/// A transient diffusion on `(0, inf)`. Immutable and cheap to clone.
#[derive(Debug, Clone)]
pub struct DiffusionModel {
    name: String,
    kind: Kind,
    origin: OriginBoundary,
    spec: ModelSpec,
}

fn check_finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must be finite, got {v}")))
    }
}

impl DiffusionModel {
    /// Bessel process of dimension `delta > 2`: `b = (delta - 1) / (2x)`,
    /// `a = 1`, `s = -x^-(delta-2)`, `m = 2 x^(delta-1) / (delta - 2)`.
    pub fn bessel(delta: f64) -> Result<Self> {
        check_finite("delta", delta)?;
        if delta <= 2.0 {
            return Err(Error::Domain(format!(
                "Bessel dimension must exceed 2 for a transient process, got {delta}"
            )));
        }
        let fam = PowerLawFamily::new(1.0, 2.0 / (delta - 2.0), delta - 2.0, delta - 1.0)?;
        Ok(Self {
            name: format!("bessel(delta={delta})"),
            kind: Kind::Bessel { delta, fam },
            origin: OriginBoundary::Entrance,
            spec: ModelSpec::Bessel { delta },
        })
    }

    /// Squared Bessel process of dimension `delta > 2`: `b = delta`,
    /// `a = 2 sqrt(x)`.
    pub fn squared_bessel(delta: f64) -> Result<Self> {
        check_finite("delta", delta)?;
        if delta <= 2.0 {
            return Err(Error::Domain(format!(
                "squared Bessel dimension must exceed 2 for a transient process, got {delta}"
            )));
        }
        let half = 0.5 * (delta - 2.0);
        let fam = PowerLawFamily::new(1.0, 1.0 / (delta - 2.0), half, half)?;
        Ok(Self {
            name: format!("squared_bessel(delta={delta})"),
            kind: Kind::SquaredBessel { delta, fam },
            origin: OriginBoundary::Entrance,
            spec: ModelSpec::SquaredBessel { delta },
        })
    }

    /// Geometric Brownian motion `b = lambda x`, `a = sigma x`, transient
    /// when `kappa = lambda / sigma^2 - 1/2 > 0`.
    pub fn gbm(lambda: f64, sigma: f64) -> Result<Self> {
        check_finite("lambda", lambda)?;
        check_finite("sigma", sigma)?;
        if sigma <= 0.0 {
            return Err(Error::Domain(format!("GBM volatility must be positive, got {sigma}")));
        }
        let kappa = lambda / (sigma * sigma) - 0.5;
        if kappa <= 0.0 {
            return Err(Error::Domain(format!(
                "GBM is not transient: kappa = lambda/sigma^2 - 1/2 = {kappa} <= 0"
            )));
        }
        let fam = PowerLawFamily::new(0.5 / kappa, 2.0 / (sigma * sigma), 2.0 * kappa, 2.0 * kappa - 1.0)?;
        Ok(Self {
            name: format!("gbm(lambda={lambda}, sigma={sigma})"),
            kind: Kind::Gbm { lambda, sigma, fam },
            origin: OriginBoundary::Natural,
            spec: ModelSpec::Gbm { lambda, sigma },
        })
    }

    /// The explosive diffusion `b = lambda kappa x^p + kappa^2 p x^(2p-1) / 2`,
    /// `a = kappa x^p` with `lambda, kappa > 0`, `p > 1`. Its scale
    /// `1 - exp(-2 lambda x^(1-p) / (kappa (1-p)))` already vanishes at
    /// infinity, so no shift is applied.
    pub fn explosive(lambda: f64, kappa: f64, p: f64) -> Result<Self> {
        for (n, v) in [("lambda", lambda), ("kappa", kappa), ("p", p)] {
            check_finite(n, v)?;
        }
        if lambda <= 0.0 || kappa <= 0.0 || p <= 1.0 {
            return Err(Error::Domain(format!(
                "explosive model requires lambda > 0, kappa > 0, p > 1; got ({lambda}, {kappa}, {p})"
            )));
        }
        let k = 2.0 * lambda / (kappa * (1.0 - p));
        Ok(Self {
            name: format!("explosive(lambda={lambda}, kappa={kappa}, p={p})"),
            kind: Kind::Explosive(Explosive { lambda, kappa, p, k }),
            origin: OriginBoundary::Natural,
            spec: ModelSpec::Explosive { lambda, kappa, p },
        })
    }

    /// A generic member of the power-law family. The coefficients follow
    /// from the scale and speed: `a^2 = 2/(m s')`, `b = -a^2 s''/(2 s')`.
    pub fn power_law(fam: PowerLawFamily) -> Result<Self> {
        fam.validate()?;
        let origin = if fam.origin_value_finite() {
            OriginBoundary::Entrance
        } else {
            OriginBoundary::Natural
        };
        let PowerLawFamily { alpha, beta, mu, nu } = fam;
        Ok(Self {
            name: format!("power_law(alpha={alpha}, beta={beta}, mu={mu}, nu={nu})"),
            kind: Kind::PowerLaw(fam),
            origin,
            spec: ModelSpec::PowerLaw { alpha, beta, mu, nu },
        })
    }

    pub(crate) fn from_custom(custom: CustomModel, spec: ModelSpec) -> Self {
        let name = custom.name().to_owned();
        let origin = custom.origin();
        Self { name, kind: Kind::Custom(Arc::new(custom)), origin, spec }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn origin(&self) -> OriginBoundary {
        self.origin
    }

    /// The specification this model was built from.
    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    /// True when infinity is attainable in finite time.
    pub fn is_explosive(&self) -> bool {
        matches!(self.kind, Kind::Explosive(_))
    }

    /// The power-law parameters, for models that belong to that family.
    pub fn power_law_params(&self) -> Option<PowerLawFamily> {
        match &self.kind {
            Kind::Bessel { fam, .. } | Kind::SquaredBessel { fam, .. } | Kind::Gbm { fam, .. } => Some(*fam),
            Kind::PowerLaw(fam) => Some(*fam),
            _ => None,
        }
    }

    /// Analytic knowledge of `s(0+) = -inf`, when available.
    pub(crate) fn scale_diverges_at_zero_analytic(&self) -> Option<bool> {
        match &self.kind {
            Kind::Custom(_) => None,
            _ => Some(true),
        }
    }

    /// Analytic knowledge of whether `int_0 s dm` is finite.
    pub fn origin_value_finite_analytic(&self) -> Option<bool> {
        match &self.kind {
            Kind::Explosive(_) => Some(false),
            Kind::Custom(_) => None,
            _ => self.power_law_params().map(|f| f.origin_value_finite()),
        }
    }

    pub fn scale(&self, x: f64) -> f64 {
        match &self.kind {
            Kind::Bessel { fam, .. } | Kind::SquaredBessel { fam, .. } | Kind::Gbm { fam, .. } => fam.scale(x),
            Kind::PowerLaw(fam) => fam.scale(x),
            Kind::Explosive(e) => e.scale(x),
            Kind::Custom(c) => c.scale(x),
        }
    }

    pub fn scale_derivative(&self, x: f64) -> f64 {
        match &self.kind {
            Kind::Bessel { fam, .. } | Kind::SquaredBessel { fam, .. } | Kind::Gbm { fam, .. } => {
                fam.scale_derivative(x)
            }
            Kind::PowerLaw(fam) => fam.scale_derivative(x),
            Kind::Explosive(e) => e.scale_derivative(x),
            Kind::Custom(c) => c.scale_derivative(x),
        }
    }

    pub fn scale_second_derivative(&self, x: f64) -> f64 {
        match &self.kind {
            Kind::Bessel { fam, .. } | Kind::SquaredBessel { fam, .. } | Kind::Gbm { fam, .. } => {
                fam.scale_second_derivative(x)
            }
            Kind::PowerLaw(fam) => fam.scale_second_derivative(x),
            Kind::Explosive(e) => e.scale_second_derivative(x),
            Kind::Custom(c) => c.scale_second_derivative(x),
        }
    }

    pub fn speed_density(&self, x: f64) -> f64 {
        match &self.kind {
            Kind::Bessel { fam, .. } | Kind::SquaredBessel { fam, .. } | Kind::Gbm { fam, .. } => {
                fam.speed_density(x)
            }
            Kind::PowerLaw(fam) => fam.speed_density(x),
            Kind::Explosive(e) => e.speed_density(x),
            Kind::Custom(c) => c.speed_density(x),
        }
    }

    /// `ln(-s(x))`.
    pub fn ln_neg_scale(&self, x: f64) -> f64 {
        match &self.kind {
            Kind::Bessel { fam, .. } | Kind::SquaredBessel { fam, .. } | Kind::Gbm { fam, .. } => {
                fam.ln_neg_scale(x)
            }
            Kind::PowerLaw(fam) => fam.ln_neg_scale(x),
            Kind::Explosive(e) => e.ln_neg_scale(x),
            Kind::Custom(c) => c.ln_neg_scale(x),
        }
    }

    pub fn ln_scale_derivative(&self, x: f64) -> f64 {
        match &self.kind {
            Kind::Bessel { fam, .. } | Kind::SquaredBessel { fam, .. } | Kind::Gbm { fam, .. } => {
                fam.ln_scale_derivative(x)
            }
            Kind::PowerLaw(fam) => fam.ln_scale_derivative(x),
            Kind::Explosive(e) => e.ln_scale_derivative(x),
            Kind::Custom(c) => c.ln_scale_derivative(x),
        }
    }

    pub fn ln_speed_density(&self, x: f64) -> f64 {
        match &self.kind {
            Kind::Bessel { fam, .. } | Kind::SquaredBessel { fam, .. } | Kind::Gbm { fam, .. } => {
                fam.ln_speed_density(x)
            }
            Kind::PowerLaw(fam) => fam.ln_speed_density(x),
            Kind::Explosive(e) => e.ln_speed_density(x),
            Kind::Custom(c) => c.ln_speed_density(x),
        }
    }

    /// Drift coefficient `b(x)`.
    #[inline]
    pub fn drift(&self, x: f64) -> f64 {
        match &self.kind {
            Kind::Bessel { delta, .. } => 0.5 * (delta - 1.0) / x,
            Kind::SquaredBessel { delta, .. } => *delta,
            Kind::Gbm { lambda, .. } => lambda * x,
            Kind::PowerLaw(fam) => fam.drift(x),
            Kind::Explosive(e) => e.drift(x),
            Kind::Custom(c) => c.drift(x),
        }
    }

    /// Diffusion coefficient `a(x) > 0`.
    #[inline]
    pub fn diffusion(&self, x: f64) -> f64 {
        match &self.kind {
            Kind::Bessel { .. } => 1.0,
            Kind::SquaredBessel { .. } => 2.0 * x.sqrt(),
            Kind::Gbm { sigma, .. } => sigma * x,
            Kind::PowerLaw(fam) => fam.diffusion_squared(x).sqrt(),
            Kind::Explosive(e) => e.diffusion(x),
            Kind::Custom(c) => c.diffusion(x),
        }
    }

    /// Inverse of the scale function on `(0, inf)`, by bisection in `ln x`.
    pub fn inverse_scale(&self, s: f64) -> Result<f64> {
        if !(s < 0.0) {
            return Err(Error::Domain(format!("scale values are negative, got {s}")));
        }
        self.inverse_ln_neg_scale((-s).ln())
    }

    /// The `x` with `ln(-s(x)) = target`.
    pub fn inverse_ln_neg_scale(&self, target: f64) -> Result<f64> {
        if !target.is_finite() {
            return Err(Error::Domain(format!("log-scale target must be finite, got {target}")));
        }
        let s = -target.exp();
        // ln(-s) is decreasing in x.
        let g = |u: f64| self.ln_neg_scale(u.exp()) - target;
        let (mut lo, mut hi) = (-1.0f64, 1.0f64);
        let mut guard = 0;
        while g(lo) < 0.0 {
            lo *= 2.0;
            guard += 1;
            if guard > 12 {
                return Err(Error::NoRoot(format!("scale never reaches {s} near the origin")));
            }
        }
        guard = 0;
        while g(hi) > 0.0 {
            hi *= 2.0;
            guard += 1;
            if guard > 12 {
                return Err(Error::NoRoot(format!("scale never reaches {s} at large x")));
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if g(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok((0.5 * (lo + hi)).exp())
    }
}
