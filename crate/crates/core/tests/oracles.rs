//! Reference values computed independently at high precision, and
//! statistical laws the simulator must reproduce.

#![allow(clippy::excessive_precision)]

use lastpassage::montecarlo::{estimate_objective, mean_and_std_error, simulate_paths, McConfig};
use lastpassage::solver::{solve, solve_boundary, solve_boundary_power_law};
use lastpassage::valuation::expected_functional;
use lastpassage::{CostFunction, DiffusionModel, ValueFunction};

fn setup(m: DiffusionModel, z: f64) -> (DiffusionModel, CostFunction) {
    let cf = CostFunction::new(&m, z).unwrap();
    (m, cf)
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * b.abs()
}

#[test]
fn thresholds() {
    let cases = [
        (DiffusionModel::bessel(3.0).unwrap(), 2.879385241571816768),
        (DiffusionModel::bessel(4.0).unwrap(), 1.8477590650225735),
        (DiffusionModel::bessel(5.0).unwrap(), 1.5548743564122449),
        (DiffusionModel::bessel(8.0).unwrap(), 1.2759083732740432),
        (DiffusionModel::squared_bessel(4.0).unwrap(), 2.0 + 2f64.sqrt()),
        (DiffusionModel::gbm(1.0, 1.0).unwrap(), 5.356693980033321),
        (DiffusionModel::gbm(1.5, 1.0).unwrap(), 2.3144532788616238),
        (DiffusionModel::gbm(2.5, 1.0).unwrap(), 1.5213327311477998),
        (DiffusionModel::explosive(1.0, 1.0, 2.0).unwrap(), 3.7788235139113093),
    ];
    for (m, u) in cases {
        let (m, cf) = setup(m, 1.0);
        let sol = solve(&m, &cf).unwrap();
        assert!(close(sol.r_star, u, 1e-10), "{}: {} vs {u}", m.name(), sol.r_star);
    }
}

#[test]
fn bessel_three_root_is_trigonometric() {
    let (m, cf) = setup(DiffusionModel::bessel(3.0).unwrap(), 1.0);
    let fam = m.power_law_params().unwrap();
    let u = 1.0 + 2.0 * (std::f64::consts::PI / 9.0).cos();
    assert!((solve_boundary_power_law(&fam, 1.0).unwrap().r_star - u).abs() < 1e-10);
    assert!(close(solve_boundary(&m, &cf).unwrap().r_star, u, 1e-8));
}

#[test]
fn explosive_cost_root() {
    let (_, cf) = setup(DiffusionModel::explosive(1.0, 1.0, 2.0).unwrap(), 1.0);
    assert!(close(cf.cost_root().unwrap(), 1.3949133350640620, 1e-12));
}

#[test]
fn values() {
    let cases: [(DiffusionModel, &[(f64, f64)]); 4] = [
        (
            DiffusionModel::bessel(3.0).unwrap(),
            &[(1.0, -0.89334826357234415), (0.5, -1.1433482635723441), (2.0, -0.22668159690567741)],
        ),
        (DiffusionModel::squared_bessel(4.0).unwrap(), &[(1.0, -0.27084039611296816)]),
        (DiffusionModel::gbm(1.0, 1.0).unwrap(), &[(1.0, -1.8965767845633305)]),
        (DiffusionModel::explosive(1.0, 1.0, 2.0).unwrap(), &[(1.0, -0.42523676207893922)]),
    ];
    for (m, pts) in cases {
        let (m, cf) = setup(m, 1.0);
        let sol = solve(&m, &cf).unwrap();
        let vf = ValueFunction::new(&cf, &sol).unwrap();
        for &(x, v) in pts {
            let got = vf.value(x).unwrap().0;
            assert!(close(got, v, 1e-9), "{} at {x}: {got} vs {v}", m.name());
        }
    }
}

#[test]
fn bessel_three_exit_times() {
    let m = DiffusionModel::bessel(3.0).unwrap();
    for (x, r) in [(0.1, 1.0), (0.5, 2.0), (1.0, 1.5), (2.0, 10.0)] {
        let e = expected_functional(&m, |_| 1.0, x, r).unwrap();
        assert!(close(e, (r * r - x * x) / 3.0, 1e-8), "{e}");
    }
}

/// `P_x(reach z) = s(x)/s(z)` for `x > z`.
#[test]
fn hitting_probabilities() {
    for m in [
        DiffusionModel::bessel(3.0).unwrap(),
        DiffusionModel::squared_bessel(4.0).unwrap(),
        DiffusionModel::gbm(1.0, 1.0).unwrap(),
    ] {
        let (m, cf) = setup(m, 1.0);
        let mut cfg = McConfig::new(1.0);
        cfg.n_paths = 20_000;
        cfg.x0 = 2.0;
        let paths = simulate_paths(&m, &cfg, &cf, &[2.5]).unwrap();
        let hits: Vec<f64> = paths.iter().map(|p| p.touched_z as u8 as f64).collect();
        let (p, se) = mean_and_std_error(&hits);
        let exact = cf.scale_ratio(2.0);
        assert!((p - exact).abs() < 3.0 * se, "{}: {p} +- {se} vs {exact}", m.name());
    }
}

#[test]
fn time_step_refinement() {
    let (m, cf) = setup(DiffusionModel::bessel(3.0).unwrap(), 1.0);
    let mut cfg = McConfig::new(1.0);
    cfg.n_paths = 20_000;
    cfg.x0 = 1.0;
    let r = 2.879385241571817;
    let coarse = estimate_objective(&m, &cfg, &cf, r).unwrap();
    cfg.dt /= 2.0;
    let fine = estimate_objective(&m, &cfg, &cf, r).unwrap();
    let se = coarse.std_error.hypot(fine.std_error);
    assert!((coarse.mean - fine.mean).abs() < 2.0 * se, "{coarse:?} vs {fine:?}");
}
