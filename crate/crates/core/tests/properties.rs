use lastpassage::montecarlo::{simulate_paths, McConfig};
use lastpassage::solver::{solve, solve_boundary, solve_boundary_power_law};
use lastpassage::valuation::{default_grid, ValueCurve};
use lastpassage::{CostFunction, DiffusionModel, PowerLawFamily, ValueFunction};
use proptest::prelude::*;

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
}

fn builtin(kind: u8, p: f64) -> DiffusionModel {
    match kind % 4 {
        0 => DiffusionModel::bessel(2.5 + p * 6.0).unwrap(),
        1 => DiffusionModel::squared_bessel(2.5 + p * 6.0).unwrap(),
        2 => DiffusionModel::gbm(0.75 + p * 2.0, 1.0).unwrap(),
        _ => DiffusionModel::explosive(0.5 + p, 0.5 + p, 1.5 + p).unwrap(),
    }
}

fn family() -> impl Strategy<Value = PowerLawFamily> {
    (0.1f64..10.0, 0.1f64..10.0, 0.3f64..4.0, -0.5f64..3.0)
        .prop_map(|(a, b, mu, nu)| PowerLawFamily::new(a, b, mu, nu).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn scale_derivative_matches_differences(kind in 0u8..4, p in 0.0f64..1.0) {
        let m = builtin(kind, p);
        for x in log_grid(1e-3, 1e3, 60) {
            let d = m.scale_derivative(x);
            prop_assert!(d > 0.0);
            let h = 1e-5 * x.min((d / m.scale_second_derivative(x)).abs());
            let fd = (m.scale(x + h) - m.scale(x - h)) / (2.0 * h);
            if fd.is_finite() && d.is_finite() && d > 1e-250 {
                prop_assert!((fd - d).abs() <= 1e-6 * d, "{} at {x}: {fd} vs {d}", m.name());
            }
        }
    }

    #[test]
    fn speed_times_scale_derivative(kind in 0u8..4, p in 0.0f64..1.0) {
        let m = builtin(kind, p);
        for x in log_grid(1e-2, 1e2, 40) {
            let a = m.diffusion(x);
            let prod = (m.ln_speed_density(x) + m.ln_scale_derivative(x)).exp() * a * a;
            prop_assert!((prod - 2.0).abs() <= 1e-12 * 2.0, "{}: {prod}", m.name());
        }
    }

    #[test]
    fn cost_is_monotone_and_flat_below_z(kind in 0u8..4, p in 0.0f64..1.0, z in 0.2f64..5.0,
                                          below in prop::collection::vec(0.0f64..1.0, 100)) {
        let m = builtin(kind, p);
        let cf = CostFunction::new(&m, z).unwrap();
        let grid = log_grid(1e-3 * z, 1e3 * z, 200);
        for w in grid.windows(2) {
            prop_assert!(cf.cost_at(w[0]).unwrap() <= cf.cost_at(w[1]).unwrap());
        }
        for u in below {
            let x = z * (1.0 - u).max(1e-12);
            prop_assert_eq!(cf.cost_at(x).unwrap(), -1.0);
        }
    }

    #[test]
    fn cost_depends_on_scale_ratio_only(fam in family(), k in 0.01f64..100.0, z in 0.1f64..10.0) {
        let scaled = PowerLawFamily::new(fam.alpha * k, fam.beta / k, fam.mu, fam.nu).unwrap();
        let a = CostFunction::new(&DiffusionModel::power_law(fam).unwrap(), z).unwrap();
        let b = CostFunction::new(&DiffusionModel::power_law(scaled).unwrap(), z).unwrap();
        for x in log_grid(1e-2 * z, 1e2 * z, 50) {
            let (ca, cb) = (a.cost_at(x).unwrap(), b.cost_at(x).unwrap());
            prop_assert!((ca - cb).abs() < 1e-13, "{ca} vs {cb}");
        }
    }

    #[test]
    fn roots_are_ordered(fam in family(), z in 0.1f64..10.0) {
        let m = DiffusionModel::power_law(fam).unwrap();
        let cf = CostFunction::new(&m, z).unwrap();
        let sol = solve(&m, &cf).unwrap();
        prop_assert!(z < sol.cost_root && sol.cost_root < sol.r_star, "{sol:?}");
    }

    #[test]
    fn threshold_is_linear_in_z(fam in family(), z1 in 0.01f64..100.0, z2 in 0.01f64..100.0) {
        let r1 = solve_boundary_power_law(&fam, z1).unwrap().r_star;
        let r2 = solve_boundary_power_law(&fam, z2).unwrap().r_star;
        prop_assert!(((r2 / r1) / (z2 / z1) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn value_function_shape(fam in family(), z in 0.2f64..5.0) {
        let m = DiffusionModel::power_law(fam).unwrap();
        let cf = CostFunction::new(&m, z).unwrap();
        let sol = solve(&m, &cf).unwrap();
        let vf = ValueFunction::new(&cf, &sol).unwrap();
        let curve = ValueCurve::compute(&vf, &default_grid(z, sol.r_star)).unwrap();
        let scale = curve.values.iter().fold(0.0f64, |s, v| s.max(v.abs()));
        for (i, &x) in curve.grid.iter().enumerate() {
            prop_assert!(curve.values[i] <= 1e-12 * scale.max(1.0), "V({x}) = {}", curve.values[i]);
            if x <= sol.cost_root {
                prop_assert!(curve.derivative[i] >= 0.0, "V'({x}) = {}", curve.derivative[i]);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, ..ProptestConfig::default() })]

    #[test]
    fn closed_form_matches_quadrature(fam in family(), z in 0.2f64..5.0) {
        let m = DiffusionModel::power_law(fam).unwrap();
        let cf = CostFunction::new(&m, z).unwrap();
        let closed = solve_boundary_power_law(&fam, z).unwrap();
        let general = solve_boundary(&m, &cf).unwrap();
        prop_assert!((closed.r_star - general.r_star).abs() < 1e-8 * closed.r_star,
            "{} vs {}", closed.r_star, general.r_star);
        let vf = ValueFunction::new(&cf, &closed).unwrap();
        for x in log_grid(1e-2 * z, 0.99 * closed.r_star, 25) {
            let (v, _) = vf.value(x).unwrap();
            let q = vf.value_quadrature(x).unwrap();
            prop_assert!((v - q).abs() <= 1e-6 * v.abs().max(1e-300), "x = {x}: {v} vs {q}");
        }
    }
}

#[test]
fn bessel_maps_onto_power_law() {
    for delta in [2.5, 3.0, 4.0, 5.0, 8.0, 11.3] {
        let b = DiffusionModel::bessel(delta).unwrap();
        let p = DiffusionModel::power_law(b.power_law_params().unwrap()).unwrap();
        for x in log_grid(1e-3, 1e3, 200) {
            for (u, v) in [
                (b.scale(x), p.scale(x)),
                (b.scale_derivative(x), p.scale_derivative(x)),
                (b.speed_density(x), p.speed_density(x)),
                (b.drift(x), p.drift(x)),
                (b.diffusion(x), p.diffusion(x)),
            ] {
                assert!((u - v).abs() <= 1e-12 * u.abs(), "delta {delta}, x {x}: {u} vs {v}");
            }
        }
    }
}

#[test]
fn threshold_decreases_with_dimension_and_drift() {
    let u: Vec<f64> = [3.0, 4.0, 5.0, 8.0]
        .iter()
        .map(|&d| {
            let m = DiffusionModel::bessel(d).unwrap();
            solve(&m, &CostFunction::new(&m, 1.0).unwrap()).unwrap().r_star
        })
        .collect();
    assert!(u.windows(2).all(|w| w[1] < w[0]), "{u:?}");
    // kappa = lambda - 1/2 for sigma = 1
    let u: Vec<f64> = [1.0, 1.5, 2.5]
        .iter()
        .map(|&l| {
            let m = DiffusionModel::gbm(l, 1.0).unwrap();
            solve(&m, &CostFunction::new(&m, 1.0).unwrap()).unwrap().r_star
        })
        .collect();
    assert!(u.windows(2).all(|w| w[1] < w[0]), "{u:?}");
}

#[test]
fn simulation_is_partition_independent() {
    let m = DiffusionModel::bessel(3.0).unwrap();
    let cf = CostFunction::new(&m, 1.0).unwrap();
    let mut cfg = McConfig::new(1.0);
    cfg.n_paths = 400;
    cfg.seed = 99;
    let levels = [2.0, 2.879385241571817];
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| simulate_paths(&m, &cfg, &cf, &levels).unwrap())
    };
    let one = run(1);
    assert_eq!(one, run(3));
    assert_eq!(one, run(8));
    for p in &one {
        for i in 0..levels.len() {
            assert!(p.payoff(i).abs() <= p.tau[i].max(p.gamma_z));
            assert!(p.payoff(i) >= -p.tau[i].min(p.gamma_z));
        }
    }
}

#[test]
fn zero_stopping_time_has_zero_payoff() {
    let m = DiffusionModel::gbm(1.0, 1.0).unwrap();
    let cf = CostFunction::new(&m, 1.0).unwrap();
    let mut cfg = McConfig::new(1.0);
    cfg.n_paths = 200;
    cfg.x0 = 3.0;
    let paths = simulate_paths(&m, &cfg, &cf, &[0.5, 3.0, 6.0]).unwrap();
    for p in &paths {
        assert_eq!(p.tau[0], 0.0);
        assert_eq!(p.tau[1], 0.0);
        assert_eq!(p.payoff(0), 0.0);
        assert_eq!(p.payoff(1), 0.0);
        assert!(p.tau[2] > 0.0);
    }
}
