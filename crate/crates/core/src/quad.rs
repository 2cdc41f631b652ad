//! Adaptive Gauss–Kronrod quadrature and the two improper-integral
//! wrappers the solver needs: integrals down to an integrable singularity
//! at the origin, and integrals out to infinity.
//!
//! The adaptive core follows the QUADPACK `qag` scheme with the 7/15 point
//! Gauss–Kronrod pair: the interval with the largest error estimate is
//! bisected until the summed error meets the tolerance.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

// Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

const MAX_SEGMENTS: usize = 2000;
const MAX_DECADES: usize = 330;
const MAX_DOUBLINGS: usize = 1100;

/// Requested accuracy: the integral is accepted once the error estimate
/// drops below `max(abs, rel * |value|)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub rel: f64,
    pub abs: f64,
}

impl Tolerance {
    pub const fn new(rel: f64, abs: f64) -> Self {
        Self { rel, abs }
    }

    fn bound(&self, value: f64) -> f64 {
        self.abs.max(self.rel * value.abs())
    }
}

impl Default for Tolerance {
    /// Relative 1e-10 with an absolute floor of 1e-14.
    fn default() -> Self {
        Self::new(1e-10, 1e-14)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
    roundoff: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error.total_cmp(&other.error) == Ordering::Equal
    }
}

impl Eq for Segment {}

impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// One application of the 15-point Kronrod rule with the embedded 7-point
/// Gauss estimate. Returns `(kronrod, error, roundoff_floor)`.
pub(crate) fn gauss_kronrod_15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Result<(f64, f64, f64)> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];

    let fc = eval(f, center)?;
    let mut res_g = fc * WG[3];
    let mut res_k = fc * WGK[7];
    let mut res_abs = res_k.abs();
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = eval(f, center - dx)?;
        let f2 = eval(f, center + dx)?;
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }

    let hl = half.abs();
    let value = res_k * half;
    res_abs *= hl;
    res_asc *= hl;
    let mut err = ((res_k - res_g) * half).abs();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    let roundoff = 50.0 * f64::EPSILON * res_abs;
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(roundoff);
    }
    Ok((value, err, roundoff))
}

fn eval<F: Fn(f64) -> f64>(f: &F, x: f64) -> Result<f64> {
    let y = f(x);
    if y.is_finite() {
        Ok(y)
    } else {
        Err(Error::Integrability(format!("integrand is {y} at x = {x:e}")))
    }
}

/// Adaptive integral of `f` over `[a, b]` (either orientation).
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: Tolerance) -> Result<Integral> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Domain(format!("integration limits must be finite, got [{a}, {b}]")));
    }
    if a == b {
        return Ok(Integral { value: 0.0, error: 0.0, evaluations: 0 });
    }
    if b < a {
        let r = integrate(f, b, a, tol)?;
        return Ok(Integral { value: -r.value, ..r });
    }

    let (value, error, roundoff) = gauss_kronrod_15(&f, a, b)?;
    let mut evaluations = 15;
    let mut total = value;
    let mut total_err = error;
    let mut total_roundoff = roundoff;
    let mut heap = BinaryHeap::new();
    heap.push(Segment { a, b, value, error, roundoff });
    // Segments too narrow to split stay out of the heap but keep their share.
    let mut frozen_err = 0.0;
    let mut frozen_value = 0.0;

    while total_err > tol.bound(total).max(2.0 * total_roundoff) {
        let Some(seg) = heap.pop() else { break };
        let mid = 0.5 * (seg.a + seg.b);
        if heap.len() + 2 > MAX_SEGMENTS {
            return Err(Error::Quadrature { a, b, estimate: total, error: total_err });
        }
        if mid <= seg.a || mid >= seg.b || (seg.b - seg.a) <= 4.0 * f64::EPSILON * mid.abs() {
            frozen_err += seg.error;
            frozen_value += seg.value;
            continue;
        }
        let (v1, e1, r1) = gauss_kronrod_15(&f, seg.a, mid)?;
        let (v2, e2, r2) = gauss_kronrod_15(&f, mid, seg.b)?;
        evaluations += 30;
        total += v1 + v2 - seg.value;
        total_roundoff += r1 + r2 - seg.roundoff;
        heap.push(Segment { a: seg.a, b: mid, value: v1, error: e1, roundoff: r1 });
        heap.push(Segment { a: mid, b: seg.b, value: v2, error: e2, roundoff: r2 });
        total_err = frozen_err + heap.iter().map(|s| s.error).sum::<f64>();
    }

    // Re-sum from the leaves to shed the drift of the running total.
    if heap.len() > 1 {
        total = frozen_value + heap.iter().map(|s| s.value).sum::<f64>();
    }
    Ok(Integral { value: total, error: total_err, evaluations })
}

/// Integral of `f` over `(0, upper]` for integrands that may be singular
/// (but integrable) at the origin.
///
/// The range is peeled into decades `[upper 10^-(k+1), upper 10^-k]`.
/// Successive decade contributions of a power-law-like integrand shrink
/// geometrically; the remaining tail is estimated from the ratio of the
/// last two contributions and the loop stops once that estimate drops
/// below the tolerance. The estimated tail is added to the result.
pub fn integrate_from_zero<F: Fn(f64) -> f64>(f: F, upper: f64, tol: Tolerance) -> Result<Integral> {
    from_zero(f, upper, tol, false)
}

/// Like [`integrate_from_zero`], for integrands that may concentrate in a
/// thin layer just below `upper`. The top decade is split into pieces
/// whose widths halve towards `upper`, so no feature narrower than the
/// initial panel goes unseen.
pub fn integrate_from_zero_graded<F: Fn(f64) -> f64>(f: F, upper: f64, tol: Tolerance) -> Result<Integral> {
    from_zero(f, upper, tol, true)
}

fn graded_top_decade<F: Fn(f64) -> f64>(f: &F, upper: f64, tol: Tolerance) -> Result<Integral> {
    let mut total = Integral { value: 0.0, error: 0.0, evaluations: 0 };
    let mut d = 0.9 * upper;
    let mut lo = upper - d;
    while d > 8.0 * f64::EPSILON * upper {
        let hi = upper - 0.5 * d;
        let piece = integrate(f, lo, hi, tol)?;
        total.value += piece.value;
        total.error += piece.error;
        total.evaluations += piece.evaluations;
        lo = hi;
        d *= 0.5;
    }
    let piece = integrate(f, lo, upper, tol)?;
    total.value += piece.value;
    total.error += piece.error;
    total.evaluations += piece.evaluations;
    Ok(total)
}

fn from_zero<F: Fn(f64) -> f64>(f: F, upper: f64, tol: Tolerance, graded: bool) -> Result<Integral> {
    if !(upper > 0.0 && upper.is_finite()) {
        return Err(Error::Domain(format!("upper limit must be positive, got {upper}")));
    }
    let mut sum = 0.0;
    let mut err = 0.0;
    let mut evaluations = 0;
    let mut prev: Option<f64> = None;
    let mut hi = upper;
    for _ in 0..MAX_DECADES {
        let lo = hi * 0.1;
        if lo < 1e-300 {
            break;
        }
        let piece = if graded && hi == upper {
            graded_top_decade(&f, upper, tol)?
        } else {
            integrate(&f, lo, hi, tol)?
        };
        evaluations += piece.evaluations;
        sum += piece.value;
        err += piece.error;
        let inc = piece.value;
        match prev {
            Some(p) if inc == 0.0 && p == 0.0 => {
                return Ok(Integral { value: sum, error: err, evaluations });
            }
            Some(p) if p != 0.0 => {
                let rho = inc / p;
                if (0.0..0.99).contains(&rho) {
                    let tail = inc * rho / (1.0 - rho);
                    if tail.abs() <= tol.bound(sum) {
                        return Ok(Integral { value: sum + tail, error: err + tail.abs(), evaluations });
                    }
                }
            }
            _ => {}
        }
        prev = Some(inc);
        hi = lo;
    }
    Err(Error::Integrability(format!(
        "integral over (0, {upper:e}] did not converge (partial sum {sum:e})"
    )))
}

/// Integral of `f` over `[lower, inf)`, peeled into doubling intervals with
/// the same geometric tail test as [`integrate_from_zero`].
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(f: F, lower: f64, tol: Tolerance) -> Result<Integral> {
    if !(lower > 0.0 && lower.is_finite()) {
        return Err(Error::Domain(format!("lower limit must be positive, got {lower}")));
    }
    let mut sum = 0.0;
    let mut err = 0.0;
    let mut evaluations = 0;
    let mut prev: Option<f64> = None;
    let mut lo = lower;
    for _ in 0..MAX_DOUBLINGS {
        let hi = lo * 2.0;
        if !hi.is_finite() || hi > 1e300 {
            break;
        }
        let piece = integrate(&f, lo, hi, tol)?;
        evaluations += piece.evaluations;
        sum += piece.value;
        err += piece.error;
        let inc = piece.value;
        match prev {
            Some(p) if inc == 0.0 && p == 0.0 => {
                return Ok(Integral { value: sum, error: err, evaluations });
            }
            Some(p) if p != 0.0 => {
                let rho = inc / p;
                if (0.0..0.99).contains(&rho) {
                    let tail = inc * rho / (1.0 - rho);
                    if tail.abs() <= tol.bound(sum) {
                        return Ok(Integral { value: sum + tail, error: err + tail.abs(), evaluations });
                    }
                }
            }
            _ => {}
        }
        prev = Some(inc);
        lo = hi;
    }
    Err(Error::Integrability(format!(
        "integral over [{lower:e}, inf) did not converge (partial sum {sum:e})"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kronrod_rule_is_exact_for_degree_22() {
        for k in 0..=22 {
            let (v, _, _) = gauss_kronrod_15(&|x: f64| x.powi(k), -1.0, 1.0).unwrap();
            let exact = if k % 2 == 0 { 2.0 / (k as f64 + 1.0) } else { 0.0 };
            assert!((v - exact).abs() < 1e-14, "degree {k}: {v} vs {exact}");
        }
    }

    #[test]
    fn gauss_weights_sum_to_two() {
        let s = 2.0 * (WG[0] + WG[1] + WG[2]) + WG[3];
        assert!((s - 2.0).abs() < 1e-15);
        let sk = 2.0 * WGK[..7].iter().sum::<f64>() + WGK[7];
        assert!((sk - 2.0).abs() < 1e-15);
    }

    #[test]
    fn smooth_integrals() {
        let tol = Tolerance::new(1e-12, 0.0);
        let r = integrate(f64::exp, 0.0, 1.0, tol).unwrap();
        assert!((r.value - (std::f64::consts::E - 1.0)).abs() < 1e-13);
        let r = integrate(|x: f64| 1.0 / (1.0 + x * x), -50.0, 50.0, tol).unwrap();
        assert!((r.value - 2.0 * 50f64.atan()).abs() < 1e-11);
        let r = integrate(|x: f64| x.sin(), 1.0, 0.0, tol).unwrap();
        assert!((r.value + (1.0 - 1f64.cos())).abs() < 1e-13);
    }

    #[test]
    fn singular_at_origin() {
        let tol = Tolerance::new(1e-12, 0.0);
        // integral of y^-1/2 over (0, 4] is 4
        let r = integrate_from_zero(|y: f64| y.powf(-0.5), 4.0, tol).unwrap();
        assert!((r.value - 4.0).abs() < 1e-10, "{}", r.value);
        // slow decay: y^-0.9 over (0, 1] is 10
        let r = integrate_from_zero(|y: f64| y.powf(-0.9), 1.0, tol).unwrap();
        assert!((r.value - 10.0).abs() < 1e-8, "{}", r.value);
        // integrand underflowing to zero near the origin
        let r = integrate_from_zero(|y: f64| (-2.0 / y).exp() / (y * y), 1.0, tol).unwrap();
        assert!((r.value - 0.5 * (-2f64).exp()).abs() < 1e-14);
    }

    #[test]
    fn graded_top_decade_sees_boundary_layer() {
        // A layer of width 1e-7 at the top; sampling y in floating point
        // limits the attainable accuracy to about eps / w.
        let w = 1e-7;
        let f = |y: f64| ((y - 1.0) / w).exp();
        let tol = Tolerance::new(1e-12, 0.0);
        let r = integrate_from_zero_graded(f, 1.0, tol).unwrap();
        assert!((r.value - w).abs() < 1e-7 * w, "{}", r.value);
        let r = integrate_from_zero_graded(|y: f64| y.powf(-0.5), 4.0, tol).unwrap();
        assert!((r.value - 4.0).abs() < 1e-10);
    }

    #[test]
    fn non_integrable_origin_is_reported() {
        let err = integrate_from_zero(|y: f64| 1.0 / y, 1.0, Tolerance::default()).unwrap_err();
        assert!(matches!(err, Error::Integrability(_)));
    }

    #[test]
    fn tail_to_infinity() {
        let tol = Tolerance::new(1e-12, 0.0);
        let r = integrate_to_infinity(|y: f64| y.powi(-2), 1.0, tol).unwrap();
        assert!((r.value - 1.0).abs() < 1e-11);
        let r = integrate_to_infinity(|y: f64| (-y).exp(), 0.5, tol).unwrap();
        assert!((r.value - (-0.5f64).exp()).abs() < 1e-13);
    }

    #[test]
    fn non_finite_integrand_errors() {
        assert!(integrate(|x: f64| 1.0 / x, -1.0, 1.0, Tolerance::default()).is_err());
    }
}
