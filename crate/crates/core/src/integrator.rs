//! Adaptive Dormand–Prince 5(4) integrator for matrix ODEs `dY/dt = F(t, Y)`.
//!
//! Step control is proportional (safety 0.9, step ratio clamped to
//! `[0.2, 5]`) on the mixed norm `max |err_i| / (atol + rtol·|y_i|)`.
//! Requested output times are served by the method's 4th-order continuous
//! extension, so the step sequence does not depend on the output grid
//! except through the final endpoint.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::ComplexMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub initial_step: f64,
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-9,
            abs_tol: 1e-12,
            max_step: 1.0,
            initial_step: 1e-3,
            max_steps: 10_000_000,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<(), IntegratorError> {
        let ok = self.rel_tol > 0.0
            && self.abs_tol > 0.0
            && self.max_step > 0.0
            && self.initial_step > 0.0
            && self.max_steps > 0
            && self.rel_tol.is_finite()
            && self.abs_tol.is_finite()
            && self.initial_step.is_finite();
        if ok {
            Ok(())
        } else {
            Err(IntegratorError::InvalidConfig(format!("{self:?}")))
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct IntegrationStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}

/// States at the requested output times.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<ComplexMatrix>,
    pub stats: IntegrationStats,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IntegratorError {
    #[error("invalid output grid: {0}")]
    InvalidGrid(String),
    #[error("invalid integrator configuration: {0}")]
    InvalidConfig(String),
    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepUnderflow {
        t: f64,
        h: f64,
        last_state: Box<ComplexMatrix>,
        partial: Box<Trajectory>,
    },
    #[error("maximum number of steps ({steps}) exceeded at t = {t}")]
    MaxStepsExceeded {
        t: f64,
        steps: usize,
        last_state: Box<ComplexMatrix>,
        partial: Box<Trajectory>,
    },
    #[error("right-hand side produced non-finite values at t = {t}")]
    NonFinite {
        t: f64,
        last_state: Box<ComplexMatrix>,
        partial: Box<Trajectory>,
    },
}

impl IntegratorError {
    /// Outputs produced before the failure, if any.
    pub fn partial(&self) -> Option<&Trajectory> {
        match self {
            Self::StepUnderflow { partial, .. }
            | Self::MaxStepsExceeded { partial, .. }
            | Self::NonFinite { partial, .. } => Some(partial),
            _ => None,
        }
    }
}

// Dormand–Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// 5th minus embedded 4th order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

// Continuous extension.
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 5.0;
const UNDERFLOW: f64 = 1e-12;

/// `y + h Σ cᵢ kᵢ`
fn stage(y: &ComplexMatrix, h: f64, terms: &[(f64, &ComplexMatrix)]) -> ComplexMatrix {
    let mut out = y.clone();
    for (coef, k) in terms {
        let s = h * coef;
        for (o, &x) in out.as_mut_slice().iter_mut().zip(k.as_slice()) {
            *o += s * x;
        }
    }
    out
}

/// Dense-output coefficients for one accepted step.
struct Interpolant {
    r1: Vec<Complex64>,
    r2: Vec<Complex64>,
    r3: Vec<Complex64>,
    r4: Vec<Complex64>,
    r5: Vec<Complex64>,
    shape: (usize, usize),
}

impl Interpolant {
    fn eval(&self, theta: f64) -> ComplexMatrix {
        let one_minus = 1.0 - theta;
        let data = (0..self.r1.len())
            .map(|i| {
                self.r1[i]
                    + theta * (self.r2[i] + one_minus * (self.r3[i] + theta * (self.r4[i] + one_minus * self.r5[i])))
            })
            .collect();
        ComplexMatrix::new(self.shape.0, self.shape.1, data).unwrap_or_else(|_| {
            ComplexMatrix::from_fn(self.shape.0, self.shape.1, |_, _| Complex64::new(f64::NAN, 0.0))
        })
    }
}

/// Integrates `dY/dt = rhs(t, Y)` and returns `Y` at every time in `t_grid`.
///
/// `t_grid` must be strictly ascending; `Y(t_grid[0]) = y0`. Output times are
/// copied from the grid verbatim.
pub fn integrate<F>(
    mut rhs: F,
    y0: &ComplexMatrix,
    t_grid: &[f64],
    cfg: &IntegratorConfig,
) -> Result<Trajectory, IntegratorError>
where
    F: FnMut(f64, &ComplexMatrix) -> ComplexMatrix,
{
    cfg.validate()?;
    if t_grid.is_empty() {
        return Err(IntegratorError::InvalidGrid("empty time grid".into()));
    }
    if t_grid.iter().any(|t| !t.is_finite()) {
        return Err(IntegratorError::InvalidGrid("non-finite time".into()));
    }
    if t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(IntegratorError::InvalidGrid("times must be strictly ascending".into()));
    }

    let t0 = t_grid[0];
    let t_end = *t_grid.last().unwrap_or(&t0);
    let span = t_end - t0;
    let shape = y0.shape();

    let mut out = Trajectory {
        times: vec![t0],
        states: vec![y0.clone()],
        stats: IntegrationStats::default(),
    };
    if t_grid.len() == 1 {
        return Ok(out);
    }

    let mut next_out = 1;
    let mut t = t0;
    let mut y = y0.clone();
    let mut k1 = rhs(t, &y);
    out.stats.rhs_evals += 1;
    let mut h = cfg.initial_step.min(cfg.max_step).min(span);
    let mut last_rejected = false;

    macro_rules! fail {
        ($variant:ident { $($field:ident : $value:expr),* }) => {
            return Err(IntegratorError::$variant {
                $($field: $value,)*
                last_state: Box::new(y.clone()),
                partial: Box::new(out.clone()),
            })
        };
    }

    while next_out < t_grid.len() {
        if out.stats.accepted + out.stats.rejected >= cfg.max_steps {
            fail!(MaxStepsExceeded {
                t: t,
                steps: cfg.max_steps
            });
        }
        if h < UNDERFLOW * span {
            fail!(StepUnderflow { t: t, h: h });
        }
        let remaining = t_end - t;
        let last_step = h >= remaining;
        let h_step = if last_step { remaining } else { h };

        let k2 = rhs(t + C2 * h_step, &stage(&y, h_step, &[(A21, &k1)]));
        let k3 = rhs(t + C3 * h_step, &stage(&y, h_step, &[(A31, &k1), (A32, &k2)]));
        let k4 = rhs(
            t + C4 * h_step,
            &stage(&y, h_step, &[(A41, &k1), (A42, &k2), (A43, &k3)]),
        );
        let k5 = rhs(
            t + C5 * h_step,
            &stage(&y, h_step, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
        );
        let t_new = if last_step { t_end } else { t + h_step };
        let k6 = rhs(
            t_new,
            &stage(
                &y,
                h_step,
                &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
            ),
        );
        let y_new = stage(
            &y,
            h_step,
            &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)],
        );
        let k7 = rhs(t_new, &y_new);
        out.stats.rhs_evals += 6;

        let mut err: f64 = 0.0;
        for i in 0..y.as_slice().len() {
            let e = h_step
                * (E1 * k1.as_slice()[i]
                    + E3 * k3.as_slice()[i]
                    + E4 * k4.as_slice()[i]
                    + E5 * k5.as_slice()[i]
                    + E6 * k6.as_slice()[i]
                    + E7 * k7.as_slice()[i]);
            let scale = cfg.abs_tol + cfg.rel_tol * y.as_slice()[i].norm().max(y_new.as_slice()[i].norm());
            err = err.max(e.norm() / scale);
        }
        if !err.is_finite() {
            fail!(NonFinite { t: t });
        }

        if err <= 1.0 {
            out.stats.accepted += 1;
            if t_grid[next_out] <= t_new {
                let n = y.as_slice().len();
                let (y0s, y1s) = (y.as_slice(), y_new.as_slice());
                let mut interp = Interpolant {
                    r1: y0s.to_vec(),
                    r2: Vec::with_capacity(n),
                    r3: Vec::with_capacity(n),
                    r4: Vec::with_capacity(n),
                    r5: Vec::with_capacity(n),
                    shape,
                };
                for i in 0..n {
                    let r2 = y1s[i] - y0s[i];
                    let r3 = h_step * k1.as_slice()[i] - r2;
                    let r4 = r2 - h_step * k7.as_slice()[i] - r3;
                    let r5 = h_step
                        * (D1 * k1.as_slice()[i]
                            + D3 * k3.as_slice()[i]
                            + D4 * k4.as_slice()[i]
                            + D5 * k5.as_slice()[i]
                            + D6 * k6.as_slice()[i]
                            + D7 * k7.as_slice()[i]);
                    interp.r2.push(r2);
                    interp.r3.push(r3);
                    interp.r4.push(r4);
                    interp.r5.push(r5);
                }
                while next_out < t_grid.len() && t_grid[next_out] <= t_new {
                    let tq = t_grid[next_out];
                    let state = if tq == t_new {
                        y_new.clone()
                    } else {
                        interp.eval((tq - t) / h_step)
                    };
                    out.times.push(tq);
                    out.states.push(state);
                    next_out += 1;
                }
            }
            t = t_new;
            y = y_new;
            k1 = k7;

            let mut factor = if err == 0.0 {
                MAX_FACTOR
            } else {
                (SAFETY * err.powf(-0.2)).clamp(MIN_FACTOR, MAX_FACTOR)
            };
            if last_rejected {
                factor = factor.min(1.0);
            }
            last_rejected = false;
            h = (h_step * factor).min(cfg.max_step);
        } else {
            out.stats.rejected += 1;
            last_rejected = true;
            h = h_step * (SAFETY * err.powf(-0.2)).clamp(MIN_FACTOR, 1.0);
        }
    }

    Ok(out)
}
