//! CSV and JSON writers.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use cavbeat_core::analytic::{BeatFrequency, BeatMeasurement};
use cavbeat_core::{Diagnostic, IntegrationStats, RateSet};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::AppError;
use crate::scenario::Mode;

/// Atomic observables at one output time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Row {
    pub t: f64,
    /// `ρ_ee, ρ_11, ρ_22, ρ_gg`.
    pub populations: [f64; 4],
    /// `None` where the method does not provide the coherence.
    pub rho_12: Option<Complex64>,
}

pub const CSV_COLUMNS: [&str; 7] = [
    "rho_ee",
    "rho_11",
    "rho_22",
    "rho_gg",
    "re_rho_12",
    "im_rho_12",
    "abs_rho_12",
];

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Time-series CSV. With `kappa_hz` the time column is `t_s = t/κ` in
/// seconds; otherwise `t` in units of `1/κ`.
pub fn render_csv(rows: &[Row], kappa_hz: Option<f64>) -> String {
    let mut out = String::with_capacity(rows.len() * 190);
    out.push_str(if kappa_hz.is_some() { "t_s" } else { "t" });
    for c in CSV_COLUMNS {
        out.push(',');
        out.push_str(c);
    }
    out.push('\n');
    for r in rows {
        let t = kappa_hz.map_or(r.t, |k| r.t / k);
        let z = r.rho_12.unwrap_or(Complex64::new(f64::NAN, f64::NAN));
        let abs = r.rho_12.map_or(f64::NAN, |z| z.norm());
        let fields = [
            t,
            r.populations[0],
            r.populations[1],
            r.populations[2],
            r.populations[3],
            z.re,
            z.im,
            abs,
        ];
        let line: Vec<String> = fields.iter().map(|&x| num(x)).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

pub fn write_csv(path: &Path, rows: &[Row], kappa_hz: Option<f64>) -> Result<(), AppError> {
    fs::write(path, render_csv(rows, kappa_hz))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), AppError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| AppError::Validation(e.to_string()))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Probe {
    pub t_end: f64,
    pub samples: usize,
}

/// Per-run summary written next to the CSV.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub name: String,
    pub mode: Mode,
    pub eta: f64,
    pub samples: usize,
    pub t_end: f64,
    pub time_column: &'static str,
    pub kappa_hz: Option<f64>,
    pub seed: Option<u64>,
    pub rates: RateSet,
    pub symmetric: bool,
    /// Closed-form `2f` and beat predicate (symmetric configuration, `η = 1`).
    pub predicted: Option<BeatFrequency>,
    /// `2f` measured from `ρ_11` zero crossings.
    pub measured: Option<BeatMeasurement>,
    /// Grid of the dedicated run used for `measured`, if any.
    pub beat_probe: Option<Probe>,
    pub max_abs_rho_12: Option<f64>,
    pub min_rho_gg_slope: Option<f64>,
    pub min_eigenvalue: Option<f64>,
    pub final_populations: Option<[f64; 4]>,
    pub diagnostics: Vec<Diagnostic>,
    pub integration: Option<IntegrationStats>,
    pub partial: bool,
    pub error: Option<String>,
}

/// One line of a sweep or preset table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TableRow {
    pub index: usize,
    pub name: String,
    pub value: f64,
    pub status: String,
    pub summary: Option<Summary>,
    pub message: Option<String>,
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn csv_text(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn render_table(param: &str, rows: &[TableRow]) -> String {
    let mut out = format!(
        "index,name,{param},status,omega,eta,predicted_two_f,beats,measured_two_f,max_abs_rho_12,min_rho_gg_slope,final_rho_gg,message\n"
    );
    for r in rows {
        let s = r.summary.as_ref();
        let predicted = s.and_then(|s| s.predicted);
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.index,
            csv_text(&r.name),
            num(r.value),
            r.status,
            opt(s.map(|s| s.rates.omega)),
            opt(s.map(|s| s.eta)),
            opt(predicted.filter(|p| p.beats).map(|p| p.two_f.re)),
            predicted.map(|p| p.beats.to_string()).unwrap_or_default(),
            opt(s.and_then(|s| s.measured.as_ref()).and_then(|m| m.two_f)),
            opt(s.and_then(|s| s.max_abs_rho_12)),
            opt(s.and_then(|s| s.min_rho_gg_slope)),
            opt(s.and_then(|s| s.final_populations).map(|p| p[3])),
            csv_text(r.message.as_deref().unwrap_or("")),
        );
    }
    out
}
