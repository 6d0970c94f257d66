//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion
//! and exits non-zero if any fails.

use std::cell::Cell;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::Instant;

use cavbeat::output::TableRow;
use cavbeat::{run_preset, run_scenario, run_validation, Mode, Preset, RunOptions, Scenario};
use cavbeat_core::analytic::{secular_solution, SecularParams};
use cavbeat_core::model::{interference_condition, preselected_product, sigma_dipoles, summed_product, Vec3};
use cavbeat_core::series::uniform_grid;
use cavbeat_core::{
    evolve, integrate, rhs_element_form, rhs_operator_form, CavityParams, ComplexMatrix, Configuration, CouplingSet,
    DensityMatrix, Diagnostic, IntegratorConfig, LevelScheme, ReducedModel, TimeSeries,
};
use num_complex::Complex64;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};

type Check = Result<String, String>;
type Criterion = (&'static str, &'static str, fn(&Path) -> Check);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn read_csv(path: &Path) -> Vec<Vec<f64>> {
    let text = std::fs::read_to_string(path).unwrap();
    text.lines()
        .skip(1)
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect()
}

fn opts(dir: &Path, sub: &str) -> RunOptions {
    RunOptions::new(dir.join(sub))
}

fn runner(cases: u32) -> TestRunner {
    TestRunner::new_with_rng(
        Config {
            cases,
            failure_persistence: None,
            ..Config::default()
        },
        proptest::test_runner::TestRng::deterministic_rng(proptest::test_runner::RngAlgorithm::ChaCha),
    )
}

fn complex(scale: f64) -> impl Strategy<Value = Complex64> {
    (-scale..scale, -scale..scale).prop_map(|(re, im)| Complex64::new(re, im))
}

/// Random reduced model: complex couplings, unequal cavity rates and detunings.
fn model_strategy() -> impl Strategy<Value = ReducedModel> {
    (
        [complex(1.2), complex(1.2), complex(1.2), complex(1.2)],
        0.3..2.0f64,
        0.3..2.0f64,
        -4.0..4.0f64,
        -2.0..2.0f64,
        -2.0..2.0f64,
    )
        .prop_map(|(g, ka, kb, om, da, db)| {
            let w = 30.0;
            ReducedModel::new(
                LevelScheme::new(2.0 * w + da, w + om, w - om).unwrap(),
                CavityParams::new(w, w + db, ka, kb).unwrap(),
                CouplingSet::new(g[0], g[1], g[2], g[3]).unwrap(),
                1.0,
            )
            .unwrap()
        })
}

fn density_strategy() -> impl Strategy<Value = ComplexMatrix> {
    proptest::collection::vec(complex(1.0), 16).prop_map(|d| {
        let m = ComplexMatrix::new(4, 4, d).unwrap();
        let p = &m * &m.adjoint();
        let tr = p.trace();
        p.scale(1.0 / tr)
    })
}

/// Mixture of `(a, b, 0, c)` and `(a', 0, b', c')`: arbitrary coherences
/// except `ρ₁₂ = 0`.
fn no_12_coherence_strategy() -> impl Strategy<Value = DensityMatrix> {
    (
        [complex(1.0), complex(1.0), complex(1.0)],
        [complex(1.0), complex(1.0), complex(1.0)],
        0.0..1.0f64,
    )
        .prop_map(|(u, v, p)| {
            let pure = |psi: [Complex64; 4]| {
                let n: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt().max(1e-6);
                DensityMatrix::pure(&psi.map(|z| z / n)).unwrap().into_matrix()
            };
            let zero = Complex64::new(0.0, 0.0);
            let a = pure([u[0], u[1], zero, u[2]]);
            let b = pure([v[0], zero, v[1], v[2]]);
            let m = &a.scale(Complex64::new(p, 0.0)) + &b.scale(Complex64::new(1.0 - p, 0.0));
            let tr = m.trace();
            DensityMatrix::new(m.scale(1.0 / tr)).unwrap()
        })
}

fn ac1(dir: &Path) -> Check {
    let times = uniform_grid(6.0, 601);
    let cfg = IntegratorConfig::default();
    let worst = Cell::new(0.0f64);
    let cases = Cell::new(0);
    runner(64)
        .run(&(model_strategy(), no_12_coherence_strategy()), |(model, rho0)| {
            let series = evolve(&model.with_eta(0.0).unwrap(), &rho0, &times, &cfg).unwrap();
            let m = series.max_abs_coherence_12();
            worst.set(worst.get().max(m));
            cases.set(cases.get() + 1);
            prop_assert!(m <= 1e-10, "max |rho_12| = {m:e}");
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    let (mut worst, cases) = (worst.get(), cases.get());

    let batch = run_preset(Preset::Fig3, Some(0.0), &opts(dir, "ac1")).map_err(|e| e.to_string())?;
    for row in &batch.rows {
        let csv = read_csv(&dir.join("ac1").join(format!("{}.csv", row.name)));
        let m = csv.iter().map(|r| r[7]).fold(0.0, f64::max);
        worst = worst.max(m);
        ensure(m <= 1e-10, || format!("{}: max |rho_12| = {m:e}", row.name))?;
    }
    Ok(format!(
        "{cases} random scenarios + fig3 eta=0 preset, max |rho_12| = {worst:.1e}"
    ))
}

fn ac2(dir: &Path) -> Check {
    let o = opts(dir, "ac2");
    let mut worst = 0.0f64;
    for omega in [0.0, 0.5, 1.0, 3.0] {
        let reduced = Scenario::centred(&format!("num_{omega}"), Mode::Reduced, omega, 1.0).unwrap();
        let closed = Scenario::centred(&format!("cf_{omega}"), Mode::Analytic, omega, 1.0).unwrap();
        let a = read_csv(&run_scenario(&reduced, &o).map_err(|e| e.to_string())?.csv);
        let b = read_csv(&run_scenario(&closed, &o).map_err(|e| e.to_string())?.csv);
        ensure(a.len() == 601 && b.len() == 601, || "row count".into())?;
        let dev = a
            .iter()
            .zip(&b)
            .flat_map(|(x, y)| (1..5).map(move |k| (x[k] - y[k]).abs()))
            .fold(0.0, f64::max);
        worst = worst.max(dev);
        ensure(dev <= 1e-6, || format!("Omega = {omega}: deviation {dev:e}"))?;
        for r in a.iter().chain(&b) {
            let s: f64 = r[1..5].iter().sum();
            ensure((s - 1.0).abs() <= 1e-8, || {
                format!("populations sum to {s} at t = {}", r[0])
            })?;
        }
    }
    Ok(format!("Omega in {{0, 0.5, 1, 3}}, max deviation {worst:.1e}"))
}

fn fig4_row(rows: &[TableRow], omega: f64, eta: f64) -> &TableRow {
    rows.iter()
        .find(|r| {
            let s = r.summary.as_ref().unwrap();
            s.rates.omega == omega && s.eta == eta
        })
        .unwrap()
}

fn ac3(dir: &Path) -> Check {
    let batch = run_preset(Preset::Fig4, Some(1.0), &opts(dir, "ac3")).map_err(|e| e.to_string())?;
    let mut details = Vec::new();
    for omega in [0.5, 1.0, 3.0] {
        let s = fig4_row(&batch.rows, omega, 1.0).summary.as_ref().unwrap();
        let p = s.predicted.unwrap();
        ensure(p.beats, || format!("Omega = {omega}: beats not predicted"))?;
        let predicted = p.two_f.re;
        let measured = s
            .measured
            .as_ref()
            .and_then(|m| m.two_f)
            .ok_or(format!("Omega = {omega}: no beats measured"))?;
        let rel = (measured - predicted).abs() / predicted;
        ensure(rel <= 0.02, || {
            format!("Omega = {omega}: predicted {predicted}, measured {measured}")
        })?;
        details.push(format!("{omega}: {predicted:.4}/{measured:.4}"));
    }
    let s0 = fig4_row(&batch.rows, 0.0, 1.0).summary.as_ref().unwrap();
    ensure(!s0.predicted.unwrap().beats, || "Omega = 0: beats predicted".into())?;
    let m0 = s0.measured.as_ref().ok_or("Omega = 0: no measurement")?;
    ensure(m0.two_f.is_none(), || {
        format!("Omega = 0: oscillation detected ({:?})", m0.two_f)
    })?;
    Ok(format!("2f predicted/measured {}; Omega = 0 none", details.join(", ")))
}

/// Steepest descent of `ρ_gg` over steps inside `[0.2, 3]`.
fn min_gg_slope(rows: &[Vec<f64>]) -> f64 {
    rows.windows(2)
        .filter(|w| w[0][0] >= 0.2 - 1e-12 && w[1][0] <= 3.0 + 1e-12)
        .map(|w| (w[1][4] - w[0][4]) / (w[1][0] - w[0][0]))
        .fold(f64::INFINITY, f64::min)
}

fn ac4(dir: &Path) -> Check {
    run_preset(Preset::Fig4, None, &opts(dir, "ac4")).map_err(|e| e.to_string())?;
    let with = min_gg_slope(&read_csv(&dir.join("ac4/fig4_omega3_eta1.csv")));
    let without = min_gg_slope(&read_csv(&dir.join("ac4/fig4_omega3_eta0.csv")));
    ensure(with < -1e-4, || format!("eta = 1: min slope {with:e}"))?;
    ensure(without >= -1e-4, || format!("eta = 0: min slope {without:e}"))?;
    Ok(format!(
        "min d(rho_gg)/dt on [0.2, 3]: eta=1 {with:.3e}, eta=0 {without:.3e}"
    ))
}

fn secular_gap(g: f64, omega: f64, t_end: f64) -> Result<(f64, TimeSeries), String> {
    let config = Configuration::centred(g, 1.0, omega).map_err(|e| e.to_string())?;
    let model = ReducedModel::new(config.levels, config.cavity, config.couplings, 1.0).map_err(|e| e.to_string())?;
    let times = uniform_grid(t_end, 501);
    let series = evolve(
        &model,
        &DensityMatrix::basis_state(4, 0),
        &times,
        &IntegratorConfig::default(),
    )
    .map_err(|e| e.to_string())?;
    let p = SecularParams::from_rates(model.rates()).map_err(|e| e.to_string())?;
    let mut dev = 0.0f64;
    for (t, s) in series.times.iter().zip(&series.states) {
        let sec = secular_solution(*t, &p).map_err(|e| e.to_string())?.as_array();
        for (k, expected) in sec.iter().enumerate() {
            dev = dev.max((s.population(k) - expected).abs());
        }
    }
    Ok((dev, series))
}

fn ac5(_: &Path) -> Check {
    let (dev, _) = secular_gap(1.0, 50.0, 5.0)?;
    ensure(dev <= 0.01, || format!("G = kappa: deviation {dev:e}"))?;
    // stronger coupling so the populations move appreciably: Γ = 0.05κ
    let g = (0.05f64 * (1.0 + 2500.0)).sqrt();
    let (dev_strong, series) = secular_gap(g, 50.0, 30.0)?;
    let gg = series.states.last().unwrap().population(3);
    ensure(dev_strong <= 0.01 && gg > 0.3, || {
        format!("Gamma = 0.05: deviation {dev_strong:e}, final rho_gg {gg}")
    })?;
    Ok(format!(
        "G = kappa over [0, 5]: {dev:.1e}; Gamma = 0.05 over [0, 30]: {dev_strong:.1e}"
    ))
}

fn ac6(dir: &Path) -> Check {
    let mut details = Vec::new();
    for omega in [1.0, 2.0, 3.0, 5.0] {
        let mut s = Scenario::centred(&format!("elim_{omega}"), Mode::Validate, omega, 1.0).unwrap();
        s.samples = 401;
        s.g_values = Some(vec![0.2, 0.1, 0.05]);
        let out = run_validation(&s, None, &opts(dir, "ac6")).map_err(|e| format!("Omega = {omega}: {e}"))?;
        let devs: Vec<f64> = out.report.points.iter().map(|p| p.max_deviation).collect();
        ensure(out.report.monotone, || {
            format!("Omega = {omega}: not monotone {devs:?}")
        })?;
        ensure(devs[2] < 2e-2, || {
            format!("Omega = {omega}: deviation at g = 0.05 is {}", devs[2])
        })?;
        for p in &out.report.points {
            for d in &p.diagnostics {
                ensure(!matches!(d, Diagnostic::ExcitationIncrease { .. }), || format!("{d:?}"))?;
            }
        }
        details.push(format!("{omega}: {:.1e}/{:.1e}/{:.1e}", devs[0], devs[1], devs[2]));
    }
    Ok(format!(
        "deviation at g = 0.2/0.1/0.05 for Omega {}",
        details.join(", ")
    ))
}

fn ac7(_: &Path) -> Check {
    let d = 0.8;
    let (plus, minus) = sigma_dipoles(d);
    let summed = summed_product(&plus, &minus, [0.0, 0.0, 1.0], 1.0);
    ensure(summed.norm() <= 1e-12, || format!("summed product {summed}"))?;
    let x: Vec3 = [1.0, 0.0, 0.0].map(|v| Complex64::new(v, 0.0));
    let pre = preselected_product(&plus, &minus, &x, 1.0);
    ensure(pre == Complex64::new(-d * d, 0.0), || {
        format!("preselected product {pre}")
    })?;
    ensure(!interference_condition(&plus, &minus), || {
        "sigma pair interferes".into()
    })?;
    let z: Vec3 = [0.0, 0.0, 1.0].map(|v| Complex64::new(v, 0.0));
    let z2 = z.map(|c| c * 2.0);
    ensure(interference_condition(&z, &z2), || {
        "parallel dipoles do not interfere".into()
    })?;
    Ok(format!(
        "summed {:.1e}, preselected {pre}, interference false/true",
        summed.norm()
    ))
}

fn ac8(dir: &Path) -> Check {
    // operator and element forms
    let form_cases = Cell::new(0);
    runner(1000)
        .run(
            &(model_strategy(), density_strategy(), 0.0..0.5f64, 0.0..10.0f64),
            |(model, rho, eta, t)| {
                let model = model.with_eta(eta).unwrap();
                let a = rhs_operator_form(t, &rho, &model).unwrap();
                let b = rhs_element_form(t, &rho, &model).unwrap();
                let scale = a.max_abs().max(1.0);
                prop_assert!(a.max_abs_diff(&b).unwrap() <= 1e-12 * scale);
                prop_assert!(a.trace().norm() <= 1e-13 * scale);
                prop_assert!(a.hermiticity_defect() <= 1e-13 * scale);
                form_cases.set(form_cases.get() + 1);
                Ok(())
            },
        )
        .map_err(|e| format!("rhs forms: {e}"))?;

    // trace and Hermiticity along trajectories, before correction
    let times = uniform_grid(6.0, 121);
    let drift = Cell::new(0.0f64);
    runner(32)
        .run(&(model_strategy(), density_strategy()), |(model, rho)| {
            let rho0 = DensityMatrix::new(rho).unwrap();
            let series = evolve(&model, &rho0, &times, &IntegratorConfig::default()).unwrap();
            for d in &series.diagnostics {
                if let Diagnostic::Drift {
                    max_anti_hermitian,
                    max_trace_error,
                } = d
                {
                    drift.set(drift.get().max(*max_anti_hermitian).max(*max_trace_error));
                    prop_assert!(*max_anti_hermitian <= 1e-10 && *max_trace_error <= 1e-10);
                }
            }
            Ok(())
        })
        .map_err(|e| format!("trajectory drift: {e}"))?;

    // fifth-order convergence at fixed step
    let lambda = Complex64::new(-1.0, 3.0);
    let err = |h: f64| {
        let cfg = IntegratorConfig {
            rel_tol: 1e10,
            abs_tol: 1e10,
            max_step: h,
            initial_step: h,
            max_steps: 1_000_000,
        };
        let traj = integrate(|_, y| y.scale(lambda), &ComplexMatrix::identity(1), &[0.0, 2.0], &cfg).unwrap();
        (traj.states[1][(0, 0)] - (lambda * 2.0).exp()).norm()
    };
    let orders: Vec<f64> = [0.1, 0.05, 0.025]
        .windows(2)
        .map(|w| (err(w[0]) / err(w[1])).log2())
        .collect();
    ensure(orders.iter().all(|p| (4.6..5.4).contains(p)), || {
        format!("observed orders {orders:?}")
    })?;

    // byte-identical reruns
    let s = Scenario::centred("rerun", Mode::Reduced, 3.0, 1.0).unwrap();
    let first = run_scenario(&s, &opts(dir, "ac8a")).map_err(|e| e.to_string())?;
    let second = run_scenario(&s, &opts(dir, "ac8b")).map_err(|e| e.to_string())?;
    let same = |a: &PathBuf, b: &PathBuf| std::fs::read(a).unwrap() == std::fs::read(b).unwrap();
    ensure(same(&first.csv, &second.csv), || "CSV differs between runs".into())?;
    ensure(same(&first.summary_path, &second.summary_path), || {
        "summary differs between runs".into()
    })?;
    let p1 = run_preset(Preset::Fig4, None, &opts(dir, "ac8c")).map_err(|e| e.to_string())?;
    let p2 = run_preset(Preset::Fig4, None, &opts(dir, "ac8d")).map_err(|e| e.to_string())?;
    ensure(same(&p1.table, &p2.table), || {
        "preset table differs between runs".into()
    })?;
    for r in &p1.rows {
        let name = format!("{}.csv", r.name);
        ensure(
            same(&dir.join("ac8c").join(&name), &dir.join("ac8d").join(&name)),
            || format!("{name} differs"),
        )?;
    }

    Ok(format!(
        "{} rhs samples, trajectory drift {:.1e}, orders {:.2}/{:.2}, reruns identical",
        form_cases.get(),
        drift.get(),
        orders[0],
        orders[1]
    ))
}

fn main() {
    let dir = tempfile::tempdir().expect("temporary directory");
    let criteria: [Criterion; 8] = [
        ("AC1", "no coherence without interference", ac1),
        ("AC2", "closed form matches integration", ac2),
        ("AC3", "beat frequency", ac3),
        ("AC4", "ground-state dip", ac4),
        ("AC5", "secular limit", ac5),
        ("AC6", "elimination validation", ac6),
        ("AC7", "polarization algebra", ac7),
        ("AC8", "structural invariants", ac8),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (id, title, check) in criteria {
        let start = Instant::now();
        let result = panic::catch_unwind(AssertUnwindSafe(|| check(dir.path()))).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("{id} PASS {title} ({secs:.2}s): {detail}"),
            Err(detail) => {
                failed += 1;
                println!("{id} FAIL {title} ({secs:.2}s): {detail}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
