use serde::Serialize;

use super::{DiffusionModel, OriginBoundary};
use crate::error::{Error, Result};
use crate::quad::{integrate_from_zero, Tolerance};

/// Outcome of the transience checks on a model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub scale_diverges_at_zero: bool,
    pub scale_vanishes_at_infinity: bool,
    pub speed_integrable_at_zero: bool,
    /// `s < 0` and `m > 0` on the probe grid.
    pub signs_ok: bool,
    /// Strictly increasing scale on the probe grid. A flat scale is reported
    /// here; a decreasing one is rejected outright.
    pub scale_strictly_increasing: bool,
    pub origin_declared: OriginBoundary,
    /// Classification from the finiteness of `int_0 s dm`.
    pub origin_numeric: OriginBoundary,
    pub origin_consistent: bool,
    /// Largest normalized residual of `a^2 s''/2 + b s' = 0` on the grid.
    pub scale_ode_residual: Option<f64>,
}

impl ValidationReport {
    /// The three conditions that make the process transient with an
    /// unattainable origin.
    pub fn transient(&self) -> bool {
        self.scale_diverges_at_zero && self.scale_vanishes_at_infinity && self.speed_integrable_at_zero
    }

    pub fn is_valid(&self) -> bool {
        self.transient() && self.signs_ok && self.scale_strictly_increasing
    }

    /// Human-readable list of the failed checks.
    pub fn failures(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if !self.scale_diverges_at_zero {
            out.push("scale does not diverge at the origin");
        }
        if !self.scale_vanishes_at_infinity {
            out.push("scale does not vanish at infinity");
        }
        if !self.speed_integrable_at_zero {
            out.push("speed measure is not integrable at the origin");
        }
        if !self.signs_ok {
            out.push("scale must be negative and speed density positive");
        }
        if !self.scale_strictly_increasing {
            out.push("scale is not strictly increasing");
        }
        out
    }
}

/// 200 log-spaced points on `[1e-3 z, 1e3 z]`.
pub fn default_probe_grid(z: f64) -> Vec<f64> {
    let (lo, hi) = ((1e-3 * z).ln(), (1e3 * z).ln());
    (0..200).map(|i| (lo + (hi - lo) * i as f64 / 199.0).exp()).collect()
}

/// Whether a sequence sampled at successive decades settles down. The
/// increments of a convergent sequence shrink geometrically; those of a
/// divergent one (logarithmic or faster) do not.
pub(crate) fn decades_converge(values: &[f64]) -> bool {
    let inc: Vec<f64> = values.windows(2).map(|w| w[1] - w[0]).collect();
    if inc.iter().any(|d| !d.is_finite()) {
        return false;
    }
    let tail = &inc[inc.len().saturating_sub(5)..];
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    if tail.iter().all(|d| d.abs() <= 1e-14 * scale) {
        return true;
    }
    let mut ratios: Vec<f64> = tail
        .windows(2)
        .filter(|w| w[0] != 0.0)
        .map(|w| (w[1] / w[0]).abs())
        .collect();
    if ratios.is_empty() {
        return true;
    }
    ratios.sort_by(f64::total_cmp);
    ratios[ratios.len() / 2] < 0.9
}

/// Runs the structural checks on `model` over `probe_grid`.
pub fn validate_assumptions(model: &DiffusionModel, probe_grid: &[f64]) -> Result<ValidationReport> {
    if probe_grid.is_empty() {
        return Err(Error::Domain("probe grid is empty".into()));
    }
    if probe_grid.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
        return Err(Error::Domain("probe grid points must be positive and finite".into()));
    }
    if probe_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain("probe grid must be strictly increasing".into()));
    }

    let mut signs_ok = true;
    let mut strictly = true;
    let mut prev: Option<f64> = None;
    for &x in probe_grid {
        let ln_s = model.ln_neg_scale(x);
        let ln_m = model.ln_speed_density(x);
        if !(ln_s > f64::NEG_INFINITY) || !(ln_m > f64::NEG_INFINITY) {
            signs_ok = false;
        }
        // ln(-s) must decrease as s increases.
        if let Some(p) = prev {
            if ln_s > p {
                return Err(Error::InvalidModel(format!("scale function decreases near x = {x}")));
            }
            if ln_s == p {
                strictly = false;
            }
        }
        prev = Some(ln_s);
    }

    let lo = probe_grid[0];
    let hi = probe_grid[probe_grid.len() - 1];

    let scale_diverges_at_zero = model.scale_diverges_at_zero_analytic().unwrap_or_else(|| {
        let vals: Vec<f64> = (0..=12).map(|k| model.ln_neg_scale(lo * 10f64.powi(-k))).collect();
        vals.iter().all(|v| !v.is_nan()) && !decades_converge(&vals)
    });

    let scale_vanishes_at_infinity = {
        let vals: Vec<f64> = (0..=12).map(|k| model.ln_neg_scale(hi * 10f64.powi(k))).collect();
        let last = vals[vals.len() - 1];
        let tiny = last.is_finite() && last < (-model.scale(hi)).ln() + (1e-8f64).ln();
        last == f64::NEG_INFINITY || tiny || (!decades_converge(&vals) && last < vals[0])
    };

    let tol = Tolerance::new(1e-8, 0.0);
    let speed_integrable_at_zero = integrate_from_zero(|y| model.ln_speed_density(y).exp(), lo, tol).is_ok();

    let s_dm = |y: f64| -(model.ln_neg_scale(y) + model.ln_speed_density(y)).exp();
    let origin_numeric = match integrate_from_zero(s_dm, lo, tol) {
        Ok(_) => OriginBoundary::Entrance,
        Err(_) => OriginBoundary::Natural,
    };

    let scale_ode_residual = {
        let mut worst: Option<f64> = None;
        for &x in probe_grid {
            let a = model.diffusion(x);
            let b = model.drift(x);
            let s1 = model.scale_derivative(x);
            // Step on the local length scale of s'.
            let h = 1e-4 * x.min((s1 / model.scale_second_derivative(x)).abs());
            let s2 = (model.scale_derivative(x + h) - model.scale_derivative(x - h)) / (2.0 * h);
            let den = 0.5 * a * a * s2.abs() + (b * s1).abs();
            let r = (0.5 * a * a * s2 + b * s1).abs() / den;
            if r.is_finite() {
                worst = Some(worst.map_or(r, |w: f64| w.max(r)));
            }
        }
        worst
    };

    Ok(ValidationReport {
        scale_diverges_at_zero,
        scale_vanishes_at_infinity,
        speed_integrable_at_zero,
        signs_ok,
        scale_strictly_increasing: strictly,
        origin_declared: model.origin(),
        origin_numeric,
        origin_consistent: origin_numeric == model.origin(),
        scale_ode_residual,
    })
}
