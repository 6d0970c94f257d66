//! Sampled trajectories and the observables derived from them.

use num_complex::Complex64;
use serde::Serialize;

use crate::integrator::IntegrationStats;
use crate::linalg::DensityMatrix;

/// Atomic levels in basis order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Level {
    E,
    One,
    Two,
    G,
}

impl Level {
    pub const ALL: [Level; 4] = [Level::E, Level::One, Level::Two, Level::G];

    pub fn index(self) -> usize {
        match self {
            Level::E => 0,
            Level::One => 1,
            Level::Two => 2,
            Level::G => 3,
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "e" => Some(Level::E),
            "1" => Some(Level::One),
            "2" => Some(Level::Two),
            "g" => Some(Level::G),
            _ => None,
        }
    }
}

/// Non-fatal observations made while producing a trajectory.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Diagnostic {
    /// Smallest eigenvalue of the state fell below the reporting threshold.
    Positivity { t: f64, min_eigenvalue: f64 },
    /// Total excitation number grew between two output times.
    ExcitationIncrease { t: f64, increase: f64 },
    /// Largest Hermiticity/trace correction applied to any output state.
    Drift {
        max_anti_hermitian: f64,
        max_trace_error: f64,
    },
}

/// States sampled on a time grid (units of 1/κ).
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSeries {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
    pub diagnostics: Vec<Diagnostic>,
    pub stats: IntegrationStats,
}

impl TimeSeries {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn population(&self, level: Level) -> Vec<f64> {
        self.states.iter().map(|s| s.population(level.index())).collect()
    }

    /// ρ₁₂ at each time.
    pub fn coherence_12(&self) -> Vec<Complex64> {
        self.states.iter().map(|s| s.element(1, 2)).collect()
    }

    pub fn max_abs_coherence_12(&self) -> f64 {
        self.coherence_12().iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Smallest eigenvalue over all stored states.
    pub fn min_eigenvalue(&self) -> f64 {
        self.states
            .iter()
            .map(DensityMatrix::min_eigenvalue)
            .fold(f64::INFINITY, f64::min)
    }

    /// Largest elementwise deviation of the four populations from `other`.
    pub fn max_population_deviation(&self, other: &TimeSeries) -> f64 {
        self.states
            .iter()
            .zip(&other.states)
            .flat_map(|(a, b)| Level::ALL.map(|l| (a.population(l.index()) - b.population(l.index())).abs()))
            .fold(0.0, f64::max)
    }
}

/// `n` equally spaced times on `[0, t_end]`, each computed from its index.
pub fn uniform_grid(t_end: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n).map(|i| t_end * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Smallest forward-difference slope of `values` over `times`.
pub fn min_slope(times: &[f64], values: &[f64]) -> Option<f64> {
    times
        .windows(2)
        .zip(values.windows(2))
        .map(|(t, v)| (v[1] - v[0]) / (t[1] - t[0]))
        .min_by(f64::total_cmp)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_endpoints_are_exact() {
        let g = uniform_grid(6.0, 601);
        assert_eq!(g[0], 0.0);
        assert_eq!(g[600], 6.0);
        assert_eq!(g[300], 3.0);
        assert_eq!(uniform_grid(1.0, 1), vec![0.0]);
    }

    #[test]
    fn slopes() {
        assert_eq!(min_slope(&[0.0, 1.0, 2.0], &[0.0, 2.0, 1.0]), Some(-1.0));
        assert_eq!(min_slope(&[0.0], &[1.0]), None);
    }

    #[test]
    fn level_names() {
        for l in Level::ALL {
            let name = ["e", "1", "2", "g"][l.index()];
            assert_eq!(Level::from_name(name), Some(l));
        }
        assert_eq!(Level::from_name("x"), None);
    }
}
