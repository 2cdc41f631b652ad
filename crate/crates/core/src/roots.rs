//! Bracketing root finders.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub x: f64,
    pub fx: f64,
    pub bracket: (f64, f64),
    pub iterations: usize,
}

/// Stopping rule for the bracketing solvers. The search ends when the
/// bracket is narrower than `x_rel * |x| + x_abs` or `|f(x)| <= f_abs`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootTolerance {
    pub x_rel: f64,
    pub x_abs: f64,
    pub f_abs: f64,
    pub max_iter: usize,
}

impl Default for RootTolerance {
    fn default() -> Self {
        Self { x_rel: 1e-12, x_abs: 0.0, f_abs: 0.0, max_iter: 500 }
    }
}

fn check_bracket(a: f64, fa: f64, b: f64, fb: f64) -> Result<()> {
    if !(fa.is_finite() && fb.is_finite()) {
        return Err(Error::NoRoot(format!("non-finite function values f({a}) = {fa}, f({b}) = {fb}")));
    }
    if fa.signum() == fb.signum() && fa != 0.0 && fb != 0.0 {
        return Err(Error::NoRoot(format!("no sign change on [{a}, {b}]: f = {fa}, {fb}")));
    }
    Ok(())
}

/// Plain bisection.
pub fn bisect<F>(mut f: F, mut a: f64, mut b: f64, tol: RootTolerance) -> Result<Root>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut fa = f(a)?;
    let fb = f(b)?;
    check_bracket(a, fa, b, fb)?;
    if fa == 0.0 {
        return Ok(Root { x: a, fx: 0.0, bracket: (a, a), iterations: 0 });
    }
    if fb == 0.0 {
        return Ok(Root { x: b, fx: 0.0, bracket: (b, b), iterations: 0 });
    }
    let mut best = if fa.abs() < fb.abs() { (a, fa) } else { (b, fb) };
    for it in 1..=tol.max_iter {
        let m = 0.5 * (a + b);
        let fm = f(m)?;
        if fm.abs() < best.1.abs() {
            best = (m, fm);
        }
        if fm == 0.0 || fm.abs() <= tol.f_abs {
            return Ok(Root { x: m, fx: fm, bracket: (a, b), iterations: it });
        }
        if m <= a.min(b) || m >= a.max(b) {
            return Ok(Root { x: best.0, fx: best.1, bracket: (a, b), iterations: it });
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
        if (b - a).abs() <= tol.x_rel * m.abs() + tol.x_abs {
            return Ok(Root { x: best.0, fx: best.1, bracket: (a, b), iterations: it });
        }
    }
    Ok(Root { x: best.0, fx: best.1, bracket: (a, b), iterations: tol.max_iter })
}

/// Brent's method: bisection safeguarded by secant and inverse quadratic
/// interpolation steps. The bracket shrinks on every iteration.
pub fn brent<F>(mut f: F, a: f64, b: f64, tol: RootTolerance) -> Result<Root>
where
    F: FnMut(f64) -> Result<f64>,
{
    let (mut a, mut b) = (a, b);
    let mut fa = f(a)?;
    let mut fb = f(b)?;
    check_bracket(a, fa, b, fb)?;
    if fa == 0.0 {
        return Ok(Root { x: a, fx: 0.0, bracket: (a, a), iterations: 0 });
    }
    if fb == 0.0 {
        return Ok(Root { x: b, fx: 0.0, bracket: (b, b), iterations: 0 });
    }

    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for it in 1..=tol.max_iter {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * (tol.x_rel * b.abs() + tol.x_abs);
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 || fb.abs() <= tol.f_abs {
            let (lo, hi) = if b < c { (b, c) } else { (c, b) };
            return Ok(Root { x: b, fx: fb, bracket: (lo, hi), iterations: it });
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            let min1 = 3.0 * xm * q - (tol1 * q).abs();
            let min2 = (e * q).abs();
            if 2.0 * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1.copysign(xm) };
        fb = f(b)?;
        if !fb.is_finite() {
            return Err(Error::NoRoot(format!("function is {fb} at {b}")));
        }
    }
    Err(Error::NoRoot(format!("Brent iteration did not converge within {} steps", tol.max_iter)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bisection_finds_sqrt2() {
        let r = bisect(|x| Ok(x * x - 2.0), 0.0, 2.0, RootTolerance::default()).unwrap();
        assert!((r.x - 2f64.sqrt()).abs() < 1e-11);
    }

    #[test]
    fn brent_finds_cos_fixed_point() {
        let r = brent(|x: f64| Ok(x.cos() - x), 0.0, 1.0, RootTolerance { x_rel: 1e-15, ..Default::default() })
            .unwrap();
        assert!((r.x - 0.739_085_133_215_160_6).abs() < 1e-14);
        assert!(r.iterations < 20);
    }

    #[test]
    fn missing_sign_change() {
        let err = brent(|x| Ok(x * x + 1.0), -1.0, 1.0, RootTolerance::default()).unwrap_err();
        assert!(matches!(err, Error::NoRoot(_)));
        assert!(bisect(|x| Ok(x * x + 1.0), -1.0, 1.0, RootTolerance::default()).is_err());
    }

    #[test]
    fn brent_on_steep_function() {
        let r = brent(|x: f64| Ok(x.powi(9) - 1e-3), 0.0, 4.0, RootTolerance { x_rel: 1e-14, ..Default::default() })
            .unwrap();
        assert!((r.x - 1e-3f64.powf(1.0 / 9.0)).abs() < 1e-12);
    }
}
