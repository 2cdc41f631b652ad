//! Euler–Maruyama simulation of the pathwise criterion.
//!
//! A path runs until the transience cutoff `s(X)/s(z) <= eps`, an explosion
//! guard, or the horizon. Along the way it records the last passage of `z`
//! and the first passage of each threshold `r`, and scores the bounded payoff
//! `tau - 2 min(tau, gamma)`, which equals `(tau - gamma)+ - min(tau, gamma)`.
//!
//! Each path draws from its own ChaCha8 stream selected by the path index, so
//! results do not depend on how paths are split across threads.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cost::CostFunction;
use crate::diffusion::DiffusionModel;
use crate::error::{Error, Result};

/// State used when an Euler step lands at or below zero.
pub const X_FLOOR: f64 = 1e-12;
/// Paths of explosive models stop once `X > EXPLOSION_GUARD * z`.
pub const EXPLOSION_GUARD: f64 = 1e8;
/// Bridge crossings with probability below `exp(-BRIDGE_CUTOFF)` are ignored
/// and cost no random draw.
const BRIDGE_CUTOFF: f64 = 40.0;
/// Censoring above this fraction sets [`McEstimate::censor_warning`].
pub const CENSOR_WARNING_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrossingRule {
    /// Sign changes between grid points only.
    Grid,
    /// Grid sign changes plus the Brownian-bridge probability of an
    /// excursion across a level inside a step.
    Bridge,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    /// Base time step, used whenever the path is near a monitored level.
    pub dt: f64,
    pub n_paths: usize,
    /// Transience cutoff: stop once `s(X)/s(z) <= eps`.
    pub upper_barrier_eps: f64,
    pub t_max: f64,
    pub seed: u64,
    pub x0: f64,
    /// Per-path step budget; exhausting it censors the path.
    pub max_steps: u64,
    /// Adaptive step factor. Away from the levels a step may grow until the
    /// expected move is `theta` times the distance to the nearest level (and
    /// to the origin). Zero keeps every step at `dt`.
    pub theta: f64,
    pub crossing: CrossingRule,
    /// Stop once every threshold is reached, leaving `gamma_z` unresolved.
    /// Only for first-passage studies; payoffs are then meaningless.
    pub first_passage_only: bool,
}

impl McConfig {
    /// Defaults scaled to the level `z`: `dt = 1e-4 z^2`, `x0 = z`.
    pub fn new(z: f64) -> Self {
        Self {
            dt: 1e-4 * z * z,
            n_paths: 100_000,
            upper_barrier_eps: 1e-4,
            t_max: 1e12 * z * z,
            seed: 0x5eed,
            x0: z,
            max_steps: 50_000_000,
            theta: 0.1,
            crossing: CrossingRule::Bridge,
            first_passage_only: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Domain(m));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if self.n_paths == 0 {
            return bad("n_paths must be at least 1".into());
        }
        if !(self.upper_barrier_eps > 0.0 && self.upper_barrier_eps < 1.0) {
            return bad(format!("eps must lie in (0, 1), got {}", self.upper_barrier_eps));
        }
        if !(self.t_max > 0.0) {
            return bad(format!("t_max must be positive, got {}", self.t_max));
        }
        if !(self.x0 > 0.0 && self.x0.is_finite()) {
            return bad(format!("x0 must be positive, got {}", self.x0));
        }
        if self.max_steps == 0 {
            return bad("max_steps must be at least 1".into());
        }
        if !(self.theta >= 0.0 && self.theta.is_finite()) {
            return bad(format!("theta must be non-negative, got {}", self.theta));
        }
        Ok(())
    }
}

/// One simulated path scored against a single threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PathOutcome {
    pub gamma_z: f64,
    /// `+inf` if `r` was never reached (censored paths only).
    pub tau_r: f64,
    pub exploded: bool,
    pub censored: bool,
    pub payoff: f64,
    pub touched_z: bool,
    /// Number of steps clamped to [`X_FLOOR`].
    pub clamped: u32,
    pub steps: u64,
}

/// One path scored against several thresholds at once.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MultiOutcome {
    pub gamma_z: f64,
    pub tau: Vec<f64>,
    pub exploded: bool,
    pub censored: bool,
    pub touched_z: bool,
    pub clamped: u32,
    pub steps: u64,
}

impl MultiOutcome {
    pub fn payoff(&self, i: usize) -> f64 {
        payoff(self.tau[i], self.gamma_z)
    }

    fn single(&self, i: usize) -> PathOutcome {
        PathOutcome {
            gamma_z: self.gamma_z,
            tau_r: self.tau[i],
            exploded: self.exploded,
            censored: self.censored,
            payoff: self.payoff(i),
            touched_z: self.touched_z,
            clamped: self.clamped,
            steps: self.steps,
        }
    }
}

/// `(tau - gamma)+ - min(tau, gamma)`.
#[inline]
pub fn payoff(tau: f64, gamma: f64) -> f64 {
    if tau.is_finite() {
        tau - 2.0 * tau.min(gamma)
    } else {
        f64::NAN
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    /// Paths that finished without censoring; only these enter the mean.
    pub n_effective: usize,
    pub n_paths: usize,
    pub censor_fraction: f64,
    pub exploded_fraction: f64,
    pub censor_warning: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub points: Vec<(f64, McEstimate)>,
    pub argmin: usize,
    /// Standard error of `mean[i] - mean[argmin]` from paired differences.
    pub paired_std_error: Vec<f64>,
}

impl SweepResult {
    pub fn argmin_r(&self) -> f64 {
        self.points[self.argmin].0
    }

    pub fn to_csv(&self) -> String {
        estimates_csv(&self.points)
    }
}

/// Neumaier-compensated sum, taken in index order.
fn compensated_sum(it: impl Iterator<Item = f64>) -> f64 {
    let (mut s, mut c) = (0.0f64, 0.0f64);
    for v in it {
        let t = s + v;
        if s.abs() >= v.abs() {
            c += (s - t) + v;
        } else {
            c += (v - t) + s;
        }
        s = t;
    }
    s + c
}

/// Mean and standard error of a sample; the error is 0 for fewer than two values.
pub fn mean_and_std_error(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = compensated_sum(xs.iter().copied()) / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let ss = compensated_sum(xs.iter().map(|v| (v - mean) * (v - mean)));
    (mean, (ss / (n - 1) as f64 / n as f64).sqrt())
}

fn check_levels(levels: &[f64]) -> Result<()> {
    if levels.is_empty() {
        return Err(Error::Domain("at least one threshold r is required".into()));
    }
    if levels.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
        return Err(Error::Domain("thresholds must be positive and finite".into()));
    }
    if levels.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain("thresholds must be strictly increasing".into()));
    }
    Ok(())
}

/// Per-run constants shared by all paths.
struct Plan<'a> {
    model: &'a DiffusionModel,
    cfg: &'a McConfig,
    z: f64,
    x_cut: f64,
    guard: Option<f64>,
}

impl<'a> Plan<'a> {
    fn new(model: &'a DiffusionModel, cfg: &'a McConfig, cf: &CostFunction) -> Result<Self> {
        cfg.validate()?;
        let z = cf.z();
        let x_cut = model.inverse_ln_neg_scale(cf.ln_neg_scale_z() + cfg.upper_barrier_eps.ln())?;
        let guard = model.is_explosive().then_some(EXPLOSION_GUARD * z);
        Ok(Self { model, cfg, z, x_cut, guard })
    }

    fn simulate(&self, levels: &[f64], stream: u64) -> Result<MultiOutcome> {
        let cfg = self.cfg;
        let model = self.model;
        let z = self.z;
        let bridge = cfg.crossing == CrossingRule::Bridge;
        let theta = cfg.theta;

        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(stream);

        let mut x = cfg.x0;
        let mut t = 0.0f64;
        let mut gamma = 0.0f64;
        let mut touched = x == z;
        let mut tau = vec![f64::INFINITY; levels.len()];
        // Levels are increasing, so the reached ones form a prefix.
        let mut next = 0usize;
        while next < levels.len() && x >= levels[next] {
            tau[next] = 0.0;
            next += 1;
        }
        let mut out = MultiOutcome {
            gamma_z: 0.0,
            tau: Vec::new(),
            exploded: false,
            censored: false,
            touched_z: touched,
            clamped: 0,
            steps: 0,
        };

        loop {
            if next == levels.len() && (cfg.first_passage_only || x >= self.x_cut) {
                break;
            }
            if t >= cfg.t_max || out.steps >= cfg.max_steps {
                out.censored = true;
                break;
            }
            let b = model.drift(x);
            let a = model.diffusion(x);
            if !(a.is_finite() && b.is_finite()) {
                return Err(Error::Simulation(format!(
                    "non-finite coefficients b = {b}, a = {a} at x = {x}, t = {t} (path {stream})"
                )));
            }

            let mut h = cfg.dt;
            if theta > 0.0 {
                let mut d = (x - z).abs();
                if next < levels.len() {
                    d = d.min(levels[next] - x);
                }
                let far = step_limit(theta * d, a, b);
                h = h.max(far).min(step_limit(theta * x, a, b));
            }
            h = h.min(cfg.t_max - t);

            let dw: f64 = rng.sample(StandardNormal);
            let sq = h.sqrt();
            let mut y = x + b * h + a * sq * dw;
            if y.is_nan() {
                return Err(Error::Simulation(format!(
                    "state became NaN after x = {x}, t = {t}, step {h} (path {stream})"
                )));
            }
            if y <= 0.0 {
                y = X_FLOOR;
                out.clamped += 1;
            }
            let var = a * a * h;

            // Last passage of z.
            if (x - z) * (y - z) <= 0.0 {
                gamma = if bridge && x != y { t + h * (x - z) / (x - y) } else { t + h };
                touched = true;
            } else if bridge {
                let e = 2.0 * (x - z) * (y - z) / var;
                if e < BRIDGE_CUTOFF && rng.gen::<f64>() < (-e).exp() {
                    gamma = t + 0.5 * h;
                    touched = true;
                }
            }

            // First passages of the thresholds above the running maximum.
            if next < levels.len() {
                let r = levels[next];
                let near = 2.0 * (r - x) * (r - y) < BRIDGE_CUTOFF * var;
                let u: Option<f64> = if bridge && y < r && near { Some(rng.gen()) } else { None };
                while next < levels.len() {
                    let r = levels[next];
                    if y >= r {
                        tau[next] = if bridge && y != x { t + h * (r - x) / (y - x) } else { t + h };
                    } else if let Some(u) = u {
                        let p = (-2.0 * (r - x) * (r - y) / var).exp();
                        if u < p {
                            tau[next] = t + 0.5 * h;
                        } else {
                            break;
                        }
                    } else {
                        break;
                    }
                    next += 1;
                }
            }

            t += h;
            x = y;
            out.steps += 1;

            if let Some(g) = self.guard {
                if x > g || x.is_infinite() {
                    out.exploded = true;
                    for tk in tau.iter_mut().skip(next) {
                        *tk = t;
                    }
                    break;
                }
            }
        }
        out.gamma_z = gamma;
        out.touched_z = touched;
        out.tau = tau;
        Ok(out)
    }

    fn run(&self, levels: &[f64]) -> Result<Vec<MultiOutcome>> {
        (0..self.cfg.n_paths as u64)
            .into_par_iter()
            .map(|i| self.simulate(levels, i))
            .collect()
    }
}

/// Largest step whose drift move stays below `d` and whose diffusive move
/// stays below `d` in standard deviations.
#[inline]
fn step_limit(d: f64, a: f64, b: f64) -> f64 {
    let by_noise = (d / a).powi(2);
    let by_drift = if b != 0.0 { d / b.abs() } else { f64::INFINITY };
    by_noise.min(by_drift)
}

/// Simulates path number `stream` against the threshold `r`.
pub fn simulate_path(
    model: &DiffusionModel,
    cfg: &McConfig,
    cf: &CostFunction,
    r: f64,
    stream: u64,
) -> Result<PathOutcome> {
    check_levels(&[r])?;
    let plan = Plan::new(model, cfg, cf)?;
    Ok(plan.simulate(&[r], stream)?.single(0))
}

/// Simulates `cfg.n_paths` paths against all `levels` with common random numbers.
pub fn simulate_paths(
    model: &DiffusionModel,
    cfg: &McConfig,
    cf: &CostFunction,
    levels: &[f64],
) -> Result<Vec<MultiOutcome>> {
    check_levels(levels)?;
    Plan::new(model, cfg, cf)?.run(levels)
}

fn estimate_from(paths: &[MultiOutcome], i: usize) -> McEstimate {
    let n_paths = paths.len();
    let payoffs: Vec<f64> = paths.iter().filter(|p| !p.censored).map(|p| p.payoff(i)).collect();
    let n_effective = payoffs.len();
    let (mean, std_error) = mean_and_std_error(&payoffs);
    let censor_fraction = (n_paths - n_effective) as f64 / n_paths as f64;
    let exploded_fraction = paths.iter().filter(|p| p.exploded).count() as f64 / n_paths as f64;
    McEstimate {
        mean,
        std_error,
        n_effective,
        n_paths,
        censor_fraction,
        exploded_fraction,
        censor_warning: censor_fraction > CENSOR_WARNING_FRACTION,
    }
}

/// Monte Carlo estimate of `E_x0[(tau_r - gamma_z)+ - min(tau_r, gamma_z)]`.
pub fn estimate_objective(model: &DiffusionModel, cfg: &McConfig, cf: &CostFunction, r: f64) -> Result<McEstimate> {
    let paths = simulate_paths(model, cfg, cf, &[r])?;
    Ok(estimate_from(&paths, 0))
}

/// Estimates for several thresholds from one set of paths.
pub fn sweep_boundary(
    model: &DiffusionModel,
    cfg: &McConfig,
    cf: &CostFunction,
    r_values: &[f64],
) -> Result<SweepResult> {
    let paths = simulate_paths(model, cfg, cf, r_values)?;
    Ok(sweep_from_paths(&paths, r_values))
}

/// Builds a [`SweepResult`] from paths simulated against `r_values`.
pub fn sweep_from_paths(paths: &[MultiOutcome], r_values: &[f64]) -> SweepResult {
    let points: Vec<(f64, McEstimate)> =
        r_values.iter().enumerate().map(|(i, &r)| (r, estimate_from(paths, i))).collect();
    let argmin = points
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .1.mean.total_cmp(&b.1 .1.mean))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let paired_std_error = (0..r_values.len())
        .map(|i| {
            let d: Vec<f64> =
                paths.iter().filter(|p| !p.censored).map(|p| p.payoff(i) - p.payoff(argmin)).collect();
            mean_and_std_error(&d).1
        })
        .collect();
    SweepResult { points, argmin, paired_std_error }
}

fn fmt_f(v: f64) -> String {
    format!("{v:.16e}")
}

/// CSV with header `r,mean,std_error,n_paths,censor_fraction`.
pub fn estimates_csv(points: &[(f64, McEstimate)]) -> String {
    let mut s = String::from("r,mean,std_error,n_paths,censor_fraction\n");
    for (r, e) in points {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            fmt_f(*r),
            fmt_f(e.mean),
            fmt_f(e.std_error),
            e.n_paths,
            fmt_f(e.censor_fraction)
        );
    }
    s
}

/// Per-path CSV, `path_id,gamma_z,tau_r,payoff,censored,exploded`, scored at level `i`.
pub fn paths_csv(paths: &[MultiOutcome], i: usize) -> String {
    let mut s = String::from("path_id,gamma_z,tau_r,payoff,censored,exploded\n");
    for (k, p) in paths.iter().enumerate() {
        let _ = writeln!(
            s,
            "{k},{},{},{},{},{}",
            fmt_f(p.gamma_z),
            fmt_f(p.tau[i]),
            fmt_f(p.payoff(i)),
            p.censored,
            p.exploded
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bessel3() -> (DiffusionModel, CostFunction) {
        let m = DiffusionModel::bessel(3.0).unwrap();
        let cf = CostFunction::new(&m, 1.0).unwrap();
        (m, cf)
    }

    #[test]
    fn payoff_identity() {
        assert_eq!(payoff(3.0, 1.0), 1.0);
        assert_eq!(payoff(1.0, 3.0), -1.0);
        assert_eq!(payoff(0.0, 5.0), 0.0);
        for (t, g) in [(0.3f64, 2.0f64), (4.0, 0.5), (1.0, 1.0)] {
            let direct = (t - g).max(0.0) - t.min(g);
            assert!((payoff(t, g) - direct).abs() < 1e-15);
        }
        assert!(payoff(f64::INFINITY, 1.0).is_nan());
    }

    #[test]
    fn config_checks() {
        let mut c = McConfig::new(1.0);
        assert!(c.validate().is_ok());
        c.upper_barrier_eps = 1.0;
        assert!(c.validate().is_err());
        let mut c = McConfig::new(1.0);
        c.n_paths = 0;
        assert!(c.validate().is_err());
        let mut c = McConfig::new(1.0);
        c.dt = -1.0;
        assert!(matches!(c.validate(), Err(Error::Domain(_))));
    }

    #[test]
    fn start_above_threshold() {
        let (m, cf) = bessel3();
        let mut c = McConfig::new(1.0);
        c.x0 = 3.0;
        for k in 0..20 {
            let p = simulate_path(&m, &c, &cf, 2.0, k).unwrap();
            assert_eq!(p.tau_r, 0.0);
            assert_eq!(p.payoff, 0.0);
        }
    }

    #[test]
    fn paths_are_reproducible() {
        let (m, cf) = bessel3();
        let c = McConfig::new(1.0);
        let a = simulate_path(&m, &c, &cf, 2.5, 7).unwrap();
        let b = simulate_path(&m, &c, &cf, 2.5, 7).unwrap();
        assert_eq!(a, b);
        let d = simulate_path(&m, &c, &cf, 2.5, 8).unwrap();
        assert_ne!(a.gamma_z, d.gamma_z);
        assert!(a.gamma_z > 0.0 && a.tau_r > 0.0 && a.touched_z);
        assert!(a.payoff.abs() <= a.tau_r.max(a.gamma_z));
    }

    #[test]
    fn explosive_paths_terminate() {
        let m = DiffusionModel::explosive(1.0, 1.0, 2.0).unwrap();
        let cf = CostFunction::new(&m, 1.0).unwrap();
        let c = McConfig::new(1.0);
        for k in 0..20 {
            let p = simulate_path(&m, &c, &cf, 3.7788, k).unwrap();
            assert!(!p.censored);
            assert!(p.tau_r.is_finite());
        }
    }

    #[test]
    fn censoring_is_reported() {
        let (m, cf) = bessel3();
        let mut c = McConfig::new(1.0);
        c.t_max = 0.01;
        c.n_paths = 50;
        let e = estimate_objective(&m, &c, &cf, 2.0).unwrap();
        assert_eq!(e.censor_fraction, 1.0);
        assert!(e.censor_warning);
        assert_eq!(e.n_effective, 0);
    }

    #[test]
    fn compensated_mean() {
        let xs = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(mean_and_std_error(&xs).0, 0.5);
        let (m, se) = mean_and_std_error(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((se - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn bad_levels() {
        let (m, cf) = bessel3();
        let c = McConfig::new(1.0);
        assert!(sweep_boundary(&m, &c, &cf, &[2.0, 1.0]).is_err());
        assert!(sweep_boundary(&m, &c, &cf, &[]).is_err());
        assert!(simulate_path(&m, &c, &cf, -1.0, 0).is_err());
    }

    #[test]
    fn csv_headers() {
        let (m, cf) = bessel3();
        let mut c = McConfig::new(1.0);
        c.n_paths = 4;
        let paths = simulate_paths(&m, &c, &cf, &[2.0]).unwrap();
        let csv = paths_csv(&paths, 0);
        assert!(csv.starts_with("path_id,gamma_z,tau_r,payoff,censored,exploded\n"));
        assert_eq!(csv.lines().count(), 5);
        let sweep = sweep_from_paths(&paths, &[2.0]);
        assert_eq!(sweep.argmin, 0);
        assert!(sweep.to_csv().starts_with("r,mean,std_error,n_paths,censor_fraction\n"));
    }
}
