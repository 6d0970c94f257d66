use cavbeat_core::{integrate, ComplexMatrix, IntegratorConfig};
use num_complex::Complex64;

const LAMBDA: Complex64 = Complex64::new(-1.0, 3.0);
const T_END: f64 = 2.0;

fn global_error(cfg: &IntegratorConfig) -> f64 {
    let y0 = ComplexMatrix::identity(1);
    let traj = integrate(|_, y| y.scale(LAMBDA), &y0, &[0.0, T_END], cfg).unwrap();
    (traj.states[1][(0, 0)] - (LAMBDA * T_END).exp()).norm()
}

/// Tolerances so loose that no step is rejected: a fixed step `h`.
fn fixed_step(h: f64) -> IntegratorConfig {
    IntegratorConfig {
        rel_tol: 1e10,
        abs_tol: 1e10,
        max_step: h,
        initial_step: h,
        max_steps: 1_000_000,
    }
}

#[test]
fn fixed_step_convergence_is_fifth_order() {
    let hs = [0.1, 0.05, 0.025];
    let errs: Vec<f64> = hs.iter().map(|&h| global_error(&fixed_step(h))).collect();
    for w in errs.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!((4.6..5.4).contains(&order), "observed order {order}, errors {errs:?}");
    }
}

#[test]
fn global_error_tracks_tolerance() {
    let ratios: Vec<f64> = (5..=11)
        .map(|k| {
            let tol = 10f64.powi(-k);
            let cfg = IntegratorConfig {
                rel_tol: tol,
                abs_tol: tol,
                ..IntegratorConfig::default()
            };
            global_error(&cfg) / tol
        })
        .collect();
    let max = ratios.iter().cloned().fold(f64::MIN, f64::max);
    let min = ratios.iter().cloned().fold(f64::MAX, f64::min);
    assert!(max / min <= 10.0, "{ratios:?}");
}

#[test]
fn reruns_are_identical() {
    let cfg = IntegratorConfig::default();
    let y0 = ComplexMatrix::identity(2);
    let grid: Vec<f64> = (0..50).map(|i| i as f64 * 0.1).collect();
    let run = || integrate(|t, y| y.scale(Complex64::new(-0.3, t.sin())), &y0, &grid, &cfg).unwrap();
    assert_eq!(run(), run());
}
