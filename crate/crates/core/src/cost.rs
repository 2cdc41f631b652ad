//! The running cost `c(x) = 1 - 2 min(s(x)/s(z), 1)`.
//!
//! Minimizing `E|tau - gamma_z|` over stopping times is equivalent to
//! minimizing `E int_0^tau c(X_t) dt`. The cost equals `-1` on `(0, z]`,
//! increases to `1` at infinity and has a single root `x_c > z`.

use crate::diffusion::DiffusionModel;
use crate::error::{Error, Result};
use crate::roots::{bisect, RootTolerance};

#[derive(Debug, Clone)]
pub struct CostFunction {
    model: DiffusionModel,
    z: f64,
    s_z: f64,
    ln_neg_s_z: f64,
}

impl CostFunction {
    pub fn new(model: &DiffusionModel, z: f64) -> Result<Self> {
        if !(z > 0.0 && z.is_finite()) {
            return Err(Error::Domain(format!("target level z must be positive, got {z}")));
        }
        let ln_neg_s_z = model.ln_neg_scale(z);
        if !ln_neg_s_z.is_finite() {
            return Err(Error::InvalidModel(format!("scale function is not finite and negative at z = {z}")));
        }
        Ok(Self { model: model.clone(), z, s_z: model.scale(z), ln_neg_s_z })
    }

    pub fn model(&self) -> &DiffusionModel {
        &self.model
    }

    pub fn z(&self) -> f64 {
        self.z
    }

    /// `s(z)`; may be `-inf` for scales that overflow, see [`Self::ln_neg_scale_z`].
    pub fn scale_z(&self) -> f64 {
        self.s_z
    }

    pub fn ln_neg_scale_z(&self) -> f64 {
        self.ln_neg_s_z
    }

    /// `s(x)/s(z)`, the probability of ever reaching `z` from `x > z`.
    pub fn scale_ratio(&self, x: f64) -> f64 {
        (self.model.ln_neg_scale(x) - self.ln_neg_s_z).exp()
    }

    /// Evaluates `c(x)`; no domain check.
    #[inline]
    pub(crate) fn eval(&self, x: f64) -> f64 {
        if x <= self.z {
            -1.0
        } else {
            1.0 - 2.0 * self.scale_ratio(x).min(1.0)
        }
    }

    pub fn cost_at(&self, x: f64) -> Result<f64> {
        if !(x > 0.0) {
            return Err(Error::Domain(format!("cost is defined for x > 0, got {x}")));
        }
        Ok(self.eval(x))
    }

    /// The root `x_c = s^-1(s(z)/2)`, by bisection on `[z, X]` where `X`
    /// doubles from `2z` until `c(X) > 0`.
    pub fn cost_root(&self) -> Result<f64> {
        let z = self.z;
        let mut hi = 2.0 * z;
        while self.eval(hi) <= 0.0 {
            if self.eval(hi) == 0.0 {
                return Ok(hi);
            }
            hi *= 2.0;
            if hi > 1e12 * z {
                return Err(Error::NoRoot(format!(
                    "cost stays non-positive up to {hi}; the scale does not vanish at infinity"
                )));
            }
        }
        let tol = RootTolerance { x_rel: 1e-15, x_abs: 0.0, f_abs: 0.0, max_iter: 400 };
        let root = bisect(|x| Ok(self.eval(x)), z, hi, tol)?;
        Ok(root.x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::PowerLawFamily;

    #[test]
    fn bessel_three_cost() {
        let cf = CostFunction::new(&DiffusionModel::bessel(3.0).unwrap(), 1.0).unwrap();
        assert_eq!(cf.cost_at(0.5).unwrap(), -1.0);
        assert_eq!(cf.cost_at(1.0).unwrap(), -1.0);
        assert!(cf.cost_at(2.0).unwrap().abs() < 1e-15);
        assert!((cf.cost_at(4.0).unwrap() - 0.5).abs() < 1e-15);
        assert!((cf.cost_root().unwrap() - 2.0).abs() < 1e-10);
        assert!(matches!(cf.cost_at(0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn power_law_root() {
        for (mu, z) in [(1.0, 1.0), (0.5, 3.0), (2.0, 0.1), (7.5, 12.0)] {
            let m = DiffusionModel::power_law(PowerLawFamily::new(1.3, 0.7, mu, 1.0).unwrap()).unwrap();
            let cf = CostFunction::new(&m, z).unwrap();
            let expected = z * 2f64.powf(1.0 / mu);
            let x_c = cf.cost_root().unwrap();
            assert!((x_c - expected).abs() <= 1e-12 * expected, "{x_c} vs {expected}");
            assert!(cf.cost_at(x_c).unwrap().abs() < 1e-10);
        }
        let cf = CostFunction::new(&DiffusionModel::squared_bessel(4.0).unwrap(), 1.0).unwrap();
        assert!((cf.cost_root().unwrap() - 2.0).abs() < 1e-10);
    }

    #[test]
    fn explosive_root_matches_inverse_scale() {
        let m = DiffusionModel::explosive(1.0, 1.0, 2.0).unwrap();
        let cf = CostFunction::new(&m, 1.0).unwrap();
        // s(x) = 1 - e^(2/x), root solves e^(2/x) = (1 + e^2)/2
        let expected = 2.0 / ((1.0 + 2f64.exp()) / 2.0).ln();
        assert!((cf.cost_root().unwrap() - expected).abs() < 1e-12);
        // tiny z overflows s(z) but the ratio stays exact
        let cf = CostFunction::new(&m, 1e-3).unwrap();
        assert_eq!(cf.scale_z(), f64::NEG_INFINITY);
        assert!(cf.cost_root().unwrap() > 1e-3);
    }

    #[test]
    fn bad_level() {
        let m = DiffusionModel::bessel(3.0).unwrap();
        assert!(matches!(CostFunction::new(&m, 0.0), Err(Error::Domain(_))));
        assert!(matches!(CostFunction::new(&m, f64::NAN), Err(Error::Domain(_))));
    }
}
