//! Scenario, sweep, preset and validation runs.

use std::path::{Path, PathBuf};

use cavbeat_core::analytic::{
    beat_frequency, beat_probe_grid, measure_beats_samples, secular_solution, symmetric_solution, BeatDecay,
    BeatFrequency, BeatMeasurement, SecularParams, SymmetricParams,
};
use cavbeat_core::composite::{
    evolve_composite, reduced_from_composite, validate_point, CompositeModel, ValidationOptions, ValidationReport,
};
use cavbeat_core::linalg::partial_trace_trailing;
use cavbeat_core::series::{min_slope, uniform_grid};
use cavbeat_core::{
    evolve, ComplexMatrix, Configuration, Diagnostic, DynamicsError, IntegrationStats, IntegratorConfig, ReducedModel,
    TimeSeries,
};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::AppError;
use crate::output::{self, Probe, Row, Summary, TableRow};
use crate::scenario::{Mode, Resolved, Scenario, SweepParam};

/// Settings shared by every command.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    pub tol_rel: Option<f64>,
    pub tol_abs: Option<f64>,
    /// Recorded in summaries; no run draws random numbers.
    pub seed: Option<u64>,
    /// κ in s⁻¹; converts the CSV time column to seconds.
    pub kappa_hz: Option<f64>,
}

impl RunOptions {
    pub fn new(out_dir: impl Into<PathBuf>) -> Self {
        Self {
            out_dir: out_dir.into(),
            ..Self::default()
        }
    }

    fn check(&self) -> Result<(), AppError> {
        for (v, flag) in [
            (self.tol_rel, "--tol-rel"),
            (self.tol_abs, "--tol-abs"),
            (self.kappa_hz, "--kappa-hz"),
        ] {
            if let Some(v) = v {
                if !(v.is_finite() && v > 0.0) {
                    return Err(AppError::Validation(format!("{flag} must be positive, got {v}")));
                }
            }
        }
        Ok(())
    }

    fn integrator(&self, base: IntegratorConfig) -> IntegratorConfig {
        IntegratorConfig {
            rel_tol: self.tol_rel.unwrap_or(base.rel_tol),
            abs_tol: self.tol_abs.unwrap_or(base.abs_tol),
            ..base
        }
    }

    fn prepare_dir(&self) -> Result<(), AppError> {
        std::fs::create_dir_all(&self.out_dir)?;
        Ok(())
    }
}

/// Files written by one scenario run.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub csv: PathBuf,
    pub summary_path: PathBuf,
    pub summary: Summary,
}

/// Output of a run before anything is written.
struct Computed {
    rows: Vec<Row>,
    summary: Summary,
    failure: Option<AppError>,
}

/// Observables of one run, complete or cut short.
struct Trace {
    rows: Vec<Row>,
    diagnostics: Vec<Diagnostic>,
    stats: Option<IntegrationStats>,
    min_eigenvalue: Option<f64>,
}

fn rows_from_series(series: &TimeSeries) -> Vec<Row> {
    series
        .times
        .iter()
        .zip(&series.states)
        .map(|(&t, s)| Row {
            t,
            populations: [0, 1, 2, 3].map(|k| s.population(k)),
            rho_12: Some(s.element(1, 2)),
        })
        .collect()
}

fn trace_from_series(series: &TimeSeries) -> Trace {
    Trace {
        rows: rows_from_series(series),
        diagnostics: series.diagnostics.clone(),
        stats: Some(series.stats),
        min_eigenvalue: Some(series.min_eigenvalue()),
    }
}

/// Rows from raw integrator states. Composite states are traced over the
/// field; their coherence is left out because it is in the rotating frame.
fn rows_from_raw(times: &[f64], states: &[ComplexMatrix]) -> Vec<Row> {
    times
        .iter()
        .zip(states)
        .map(|(&t, m)| {
            let (atom, coherent) = if m.rows() == 4 {
                (m.clone(), true)
            } else {
                (
                    partial_trace_trailing(m, 4, m.rows() / 4).expect("composite dimension is 4·n"),
                    false,
                )
            };
            Row {
                t,
                populations: [0, 1, 2, 3].map(|k| atom[(k, k)].re),
                rho_12: coherent.then(|| atom[(1, 2)]),
            }
        })
        .collect()
}

/// A failed run with whatever output it produced.
type Failure = (Option<Box<Trace>>, AppError);

fn dynamics_failure(e: DynamicsError) -> Failure {
    match e {
        DynamicsError::Integrator(inner) => {
            let trace = inner.partial().map(|p| {
                Box::new(Trace {
                    rows: rows_from_raw(&p.times, &p.states),
                    diagnostics: Vec::new(),
                    stats: Some(p.stats),
                    min_eigenvalue: None,
                })
            });
            (trace, AppError::Integration(inner.to_string()))
        }
        DynamicsError::NonFinite(_) => (None, AppError::Integration(e.to_string())),
        other => (None, AppError::Validation(other.to_string())),
    }
}

fn reduced_model(r: &Resolved) -> Result<ReducedModel, AppError> {
    let c = &r.config;
    ReducedModel::new(c.levels, c.cavity, c.couplings, r.eta).map_err(|e| AppError::Validation(e.to_string()))
}

fn symmetric_params(config: &Configuration) -> Option<SymmetricParams> {
    SymmetricParams::from_components(&config.levels, &config.cavity, &config.couplings).ok()
}

fn analytic_rows(r: &Resolved, times: &[f64]) -> Result<Vec<Row>, AppError> {
    if !r.starts_excited {
        return Err(AppError::Validation(
            "analytic mode starts from |e>; set initial_state to \"e\"".into(),
        ));
    }
    let invalid = |e: cavbeat_core::analytic::AnalyticError| AppError::Validation(format!("analytic mode: {e}"));
    if r.eta == 0.0 {
        let p = SecularParams::from_rates(&r.config.rates()).map_err(invalid)?;
        times
            .iter()
            .map(|&t| {
                let pops = secular_solution(t, &p).map_err(invalid)?;
                Ok(Row {
                    t,
                    populations: pops.as_array(),
                    rho_12: Some(Complex64::new(0.0, 0.0)),
                })
            })
            .collect()
    } else if r.eta == 1.0 {
        let p = symmetric_params(&r.config).ok_or_else(|| {
            AppError::Validation(
                "analytic mode with eta = 1 needs equal couplings, equal cavity rates and both modes tuned to the doublet centre"
                    .into(),
            )
        })?;
        times
            .iter()
            .map(|&t| {
                let pops = symmetric_solution(t, &p).map_err(invalid)?;
                Ok(Row {
                    t,
                    populations: pops.as_array(),
                    rho_12: None,
                })
            })
            .collect()
    } else {
        Err(AppError::Validation(format!(
            "analytic mode needs eta = 0 or 1, got {}",
            r.eta
        )))
    }
}

fn simulate(scenario: &Scenario, r: &Resolved) -> Result<Trace, Failure> {
    match scenario.mode {
        Mode::Reduced => {
            let model = reduced_model(r).map_err(|e| (None, e))?;
            let series = evolve(&model, &r.rho0, &r.times, &r.integrator).map_err(dynamics_failure)?;
            Ok(trace_from_series(&series))
        }
        Mode::Composite => {
            if r.eta != 1.0 {
                return Err((
                    None,
                    AppError::Validation(format!(
                        "composite mode has full interference; eta must be 1, got {}",
                        r.eta
                    )),
                ));
            }
            let c = &r.config;
            let model = CompositeModel::new(c.levels, c.cavity, c.couplings, r.n_max, r.n_max)
                .map_err(|e| (None, AppError::Validation(e.to_string())))?;
            let rho0 = model
                .with_vacuum(&r.rho0)
                .map_err(|e| (None, AppError::Validation(e.to_string())))?;
            let full = evolve_composite(&model, &rho0, &r.times, &r.integrator).map_err(dynamics_failure)?;
            let atomic = reduced_from_composite(&full, &model).map_err(dynamics_failure)?;
            Ok(trace_from_series(&atomic))
        }
        Mode::Analytic => {
            let rows = analytic_rows(r, &r.times).map_err(|e| (None, e))?;
            Ok(Trace {
                rows,
                diagnostics: Vec::new(),
                stats: None,
                min_eigenvalue: None,
            })
        }
        Mode::Validate => Err((
            None,
            AppError::Validation("validate-mode scenarios are run with the `validate` command".into()),
        )),
    }
}

/// Integrator settings for beat probes: long windows take populations far
/// below the default absolute tolerance.
fn probe_integrator(base: IntegratorConfig) -> IntegratorConfig {
    IntegratorConfig {
        rel_tol: base.rel_tol.min(1e-10),
        abs_tol: 1e-300,
        ..base
    }
}

/// Measures `2f` from `ρ_11`. When beats are predicted, a dedicated run
/// covers at least three periods; otherwise the scenario's own rows are used.
/// Nothing is measured at `η = 0`.
fn measure(
    scenario: &Scenario,
    r: &Resolved,
    predicted: Option<BeatFrequency>,
    rows: &[Row],
) -> (Option<BeatMeasurement>, Option<Probe>) {
    let decay = BeatDecay::from_rates(&r.config.rates());
    let predicted_two_f = predicted.filter(|p| p.beats).map(|p| p.two_f.re);
    if r.eta == 0.0 {
        return (
            Some(BeatMeasurement {
                two_f: None,
                crossings: 0,
                diagnostic: Some("no interference at eta = 0".into()),
            }),
            None,
        );
    }
    let Some(two_f) = predicted_two_f else {
        if rows.len() < 4 {
            return (None, None);
        }
        let times: Vec<f64> = rows.iter().map(|x| x.t).collect();
        let values: Vec<f64> = rows.iter().map(|x| x.populations[1]).collect();
        return (Some(measure_beats_samples(&times, &values, decay)), None);
    };

    let (t_end, samples) = beat_probe_grid(two_f, scenario.t_end, scenario.samples);
    let times = uniform_grid(t_end, samples);
    let probe = Probe { t_end, samples };
    let values: Result<Vec<f64>, String> = if scenario.mode == Mode::Analytic {
        analytic_rows(r, &times)
            .map(|rows| rows.iter().map(|x| x.populations[1]).collect())
            .map_err(|e| e.to_string())
    } else {
        reduced_model(r).map_err(|e| e.to_string()).and_then(|model| {
            evolve(&model, &r.rho0, &times, &probe_integrator(r.integrator))
                .map(|s| s.states.iter().map(|x| x.population(1)).collect())
                .map_err(|e| e.to_string())
        })
    };
    let measurement = match values {
        Ok(v) => measure_beats_samples(&times, &v, decay),
        Err(e) => BeatMeasurement {
            two_f: None,
            crossings: 0,
            diagnostic: Some(format!("beat probe failed: {e}")),
        },
    };
    (Some(measurement), Some(probe))
}

fn compute(scenario: &Scenario, opts: &RunOptions) -> Result<Computed, AppError> {
    let mut scenario = scenario.clone();
    scenario.integrator = opts.integrator(scenario.integrator);
    let r = scenario.resolve()?;
    let rates = r.config.rates();
    let sym = symmetric_params(&r.config);
    let predicted = sym.as_ref().filter(|_| r.eta == 1.0).map(beat_frequency);

    let (trace, failure) = match simulate(&scenario, &r) {
        Ok(t) => (Some(t), None),
        Err((partial, e)) => {
            if partial.is_none() && matches!(e, AppError::Validation(_)) {
                return Err(e);
            }
            (partial.map(|b| *b), Some(e))
        }
    };
    let trace = trace.unwrap_or(Trace {
        rows: Vec::new(),
        diagnostics: Vec::new(),
        stats: None,
        min_eigenvalue: None,
    });
    let rows = trace.rows;
    let (measured, beat_probe) = if failure.is_none() {
        measure(&scenario, &r, predicted, &rows)
    } else {
        (None, None)
    };

    let times: Vec<f64> = rows.iter().map(|x| x.t).collect();
    let gg: Vec<f64> = rows.iter().map(|x| x.populations[3]).collect();
    let max_abs_rho_12 = rows
        .iter()
        .map(|x| x.rho_12.map(|z| z.norm()))
        .try_fold(0.0f64, |acc, z| z.map(|z| acc.max(z)))
        .filter(|_| !rows.is_empty());

    let summary = Summary {
        name: scenario.name.clone(),
        mode: scenario.mode,
        eta: r.eta,
        samples: scenario.samples,
        t_end: scenario.t_end,
        time_column: if opts.kappa_hz.is_some() { "t_s" } else { "t" },
        kappa_hz: opts.kappa_hz,
        seed: opts.seed,
        rates,
        symmetric: r.config.is_symmetric(),
        predicted,
        measured,
        beat_probe,
        max_abs_rho_12,
        min_rho_gg_slope: min_slope(&times, &gg),
        min_eigenvalue: trace.min_eigenvalue,
        final_populations: rows.last().map(|x| x.populations),
        diagnostics: trace.diagnostics,
        integration: trace.stats,
        partial: failure.is_some(),
        error: failure.as_ref().map(|e| e.to_string()),
    };
    Ok(Computed { rows, summary, failure })
}

fn write_computed(c: &Computed, name: &str, opts: &RunOptions) -> Result<RunOutcome, AppError> {
    let csv = opts.out_dir.join(format!("{name}.csv"));
    let summary_path = opts.out_dir.join(format!("{name}.summary.json"));
    output::write_csv(&csv, &c.rows, opts.kappa_hz)?;
    output::write_json(&summary_path, &c.summary)?;
    Ok(RunOutcome {
        csv,
        summary_path,
        summary: c.summary.clone(),
    })
}

/// Runs one scenario and writes `<name>.csv` and `<name>.summary.json`.
/// On integration failure the partial output is still written and
/// [`AppError::Integration`] is returned.
pub fn run_scenario(scenario: &Scenario, opts: &RunOptions) -> Result<RunOutcome, AppError> {
    opts.check()?;
    let computed = compute(scenario, opts)?;
    opts.prepare_dir()?;
    let outcome = write_computed(&computed, &scenario.name, opts)?;
    match computed.failure {
        Some(e) => Err(e),
        None => Ok(outcome),
    }
}

/// Result of a sweep or preset batch.
#[derive(Clone, Debug)]
pub struct BatchOutcome {
    pub table: PathBuf,
    pub rows: Vec<TableRow>,
    /// Most severe exit code among failed points; `0` when all succeeded.
    pub exit_code: i32,
}

fn run_batch(
    label: &str,
    param: &str,
    points: Vec<(String, f64, Result<Scenario, AppError>)>,
    opts: &RunOptions,
) -> Result<BatchOutcome, AppError> {
    opts.check()?;
    opts.prepare_dir()?;
    let results: Vec<Result<Computed, AppError>> = points
        .par_iter()
        .map(|(_, _, s)| match s {
            Ok(s) => compute(s, opts),
            Err(e) => Err(AppError::Validation(e.to_string())),
        })
        .collect();

    let mut rows = Vec::with_capacity(points.len());
    let mut exit_code = 0;
    for (index, ((name, value, scenario), result)) in points.iter().zip(results).enumerate() {
        let row = match result {
            Ok(c) => {
                let failure = c.failure.as_ref().map(|e| (e.exit_code(), e.to_string()));
                let name = scenario
                    .as_ref()
                    .map(|s| s.name.clone())
                    .unwrap_or_else(|_| name.clone());
                write_computed(&c, &name, opts)?;
                if let Some((code, _)) = &failure {
                    exit_code = exit_code.max(*code);
                }
                TableRow {
                    index,
                    name,
                    value: *value,
                    status: if failure.is_some() { "partial" } else { "ok" }.into(),
                    summary: Some(c.summary),
                    message: failure.map(|f| f.1),
                }
            }
            Err(e) => {
                exit_code = exit_code.max(e.exit_code());
                TableRow {
                    index,
                    name: name.clone(),
                    value: *value,
                    status: "error".into(),
                    summary: None,
                    message: Some(e.to_string()),
                }
            }
        };
        rows.push(row);
    }
    let table = opts.out_dir.join(format!("{label}.csv"));
    std::fs::write(&table, output::render_table(param, &rows))?;
    output::write_json(&opts.out_dir.join(format!("{label}.json")), &rows)?;
    Ok(BatchOutcome { table, rows, exit_code })
}

fn value_tag(v: f64) -> String {
    format!("{v}").replace('-', "m").replace('.', "p")
}

/// Runs `base` once per value of `param`, in parallel. Output files are
/// named `<base>_<param><index>`; the combined table is
/// `<base>_sweep_<param>.csv`. Failed points are recorded and skipped.
pub fn run_sweep(
    base: &Scenario,
    param: SweepParam,
    values: &[f64],
    opts: &RunOptions,
) -> Result<BatchOutcome, AppError> {
    if values.is_empty() {
        return Err(AppError::Validation("sweep needs at least one value".into()));
    }
    if base.mode == Mode::Validate {
        return Err(AppError::Validation("validate-mode scenarios cannot be swept".into()));
    }
    let width = (values.len() - 1).to_string().len();
    let points = values
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let name = format!("{}_{}{:0width$}", base.name, param.name(), i);
            let scenario = base.with_param(param, v).map(|mut s| {
                s.name = name.clone();
                s
            });
            (name, v, scenario)
        })
        .collect();
    run_batch(
        &format!("{}_sweep_{}", base.name, param.name()),
        param.name(),
        points,
        opts,
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    /// Splittings `Ω ∈ {1, 2, 3, 5}`.
    Fig3,
    /// Splittings `Ω ∈ {0, 0.5, 1, 3}`.
    Fig4,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::Fig3 => "fig3",
            Preset::Fig4 => "fig4",
        }
    }

    pub fn omegas(self) -> &'static [f64] {
        match self {
            Preset::Fig3 => &[1.0, 2.0, 3.0, 5.0],
            Preset::Fig4 => &[0.0, 0.5, 1.0, 3.0],
        }
    }

    /// Reduced-dynamics scenarios with `G = κ = 1` over `[0, 6]`, 601
    /// samples, for each splitting and each requested `η`.
    pub fn scenarios(self, etas: &[f64]) -> Vec<Result<Scenario, AppError>> {
        etas.iter()
            .flat_map(|&eta| {
                self.omegas().iter().map(move |&omega| {
                    let name = format!("{}_omega{}_eta{}", self.name(), value_tag(omega), value_tag(eta));
                    Scenario::centred(&name, Mode::Reduced, omega, eta)
                })
            })
            .collect()
    }
}

impl std::str::FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fig3" => Ok(Preset::Fig3),
            "fig4" => Ok(Preset::Fig4),
            _ => Err(format!("unknown preset {s:?}; expected fig3 or fig4")),
        }
    }
}

/// Runs a preset for `eta`, or for both `η = 1` and `η = 0` when `None`.
/// The combined table is `<preset>_summary.csv`.
pub fn run_preset(preset: Preset, eta: Option<f64>, opts: &RunOptions) -> Result<BatchOutcome, AppError> {
    let etas = match eta {
        Some(e) => vec![e],
        None => vec![1.0, 0.0],
    };
    let omegas = preset.omegas().iter().cycle();
    let points = preset
        .scenarios(&etas)
        .into_iter()
        .zip(omegas)
        .map(|(s, &omega)| {
            let name = s
                .as_ref()
                .map(|s| s.name.clone())
                .unwrap_or_else(|_| preset.name().to_string());
            (name, omega, s)
        })
        .collect();
    run_batch(&format!("{}_summary", preset.name()), "Omega", points, opts)
}

pub const DEFAULT_G_VALUES: [f64; 3] = [0.2, 0.1, 0.05];

#[derive(Clone, Debug, Serialize)]
pub struct ValidationOutput {
    pub name: String,
    pub g_values: Vec<f64>,
    pub n_max: usize,
    pub eta: f64,
    pub samples: usize,
    pub report: ValidationReport,
}

/// Compares composite and reduced dynamics at each coupling magnitude (in
/// parallel) and writes `<name>.validation.json`. Returns
/// [`AppError::Acceptance`] when the deviation does not shrink with `g`.
pub fn run_validation(
    scenario: &Scenario,
    g_values: Option<&[f64]>,
    opts: &RunOptions,
) -> Result<ValidationOutput, AppError> {
    opts.check()?;
    let mut scenario = scenario.clone();
    scenario.integrator = opts.integrator(scenario.integrator);
    let r = scenario.resolve()?;
    let g_values: Vec<f64> = g_values
        .map(<[f64]>::to_vec)
        .or_else(|| scenario.g_values.clone())
        .unwrap_or_else(|| DEFAULT_G_VALUES.to_vec());
    if g_values.is_empty() || g_values.iter().any(|g| !(g.is_finite() && *g >= 0.0)) {
        return Err(AppError::Validation(
            "g values must be a non-empty list of finite values >= 0".into(),
        ));
    }
    let vopts = ValidationOptions {
        samples: scenario.samples,
        fallback_t_end: scenario.t_end,
        n_max: r.n_max,
        eta: r.eta,
        integrator: r.integrator,
    };
    let points = g_values
        .par_iter()
        .map(|&g| validate_point(&r.config, g, &vopts))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| dynamics_failure(e).1)?;
    let out = ValidationOutput {
        name: scenario.name.clone(),
        g_values,
        n_max: r.n_max,
        eta: r.eta,
        samples: scenario.samples,
        report: ValidationReport::from_points(points),
    };
    opts.prepare_dir()?;
    output::write_json(&validation_path(&opts.out_dir, &scenario.name), &out)?;
    if out.report.passed {
        Ok(out)
    } else {
        let devs: Vec<String> = out
            .report
            .points
            .iter()
            .map(|p| format!("g={}: {:.3e}", p.g, p.max_deviation))
            .collect();
        Err(AppError::Acceptance(format!(
            "composite/reduced deviation does not shrink with g ({})",
            devs.join(", ")
        )))
    }
}

pub fn validation_path(dir: &Path, name: &str) -> PathBuf {
    dir.join(format!("{name}.validation.json"))
}
