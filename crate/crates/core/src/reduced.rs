//! Reduced master equation for the atom after the cavity modes have been
//! eliminated in the bad-cavity limit.
//!
//! Interaction picture, basis `(e, 1, 2, g)`. The equation is provided in two
//! independently written forms: [`rhs_operator_form`] assembles it from
//! atomic projectors and commutators, [`rhs_element_form`] writes out every
//! matrix element. The interference parameter `η` multiplies exactly the
//! terms that carry products of different couplings (`G_1e G*_2e`,
//! `G_g1 G*_g2` and their conjugates).

use num_complex::Complex64;

use crate::error::DynamicsError;
use crate::integrator::{integrate, IntegratorConfig};
use crate::linalg::{commutator, hermitize_and_check, ComplexMatrix, DensityMatrix, I};
use crate::model::{derive_rates, CavityParams, CouplingSet, Detunings, LevelScheme, ModelError, RateSet};
use crate::series::{Diagnostic, TimeSeries};

/// Output states whose Hermiticity or trace drift exceeds this are rejected.
pub const DRIFT_TOL: f64 = 1e-8;
/// Eigenvalues below `−POSITIVITY_REPORT` are reported as diagnostics.
pub const POSITIVITY_REPORT: f64 = 1e-6;

const E: usize = 0;
const L1: usize = 1;
const L2: usize = 2;
const G: usize = 3;

#[derive(Clone, Debug, PartialEq)]
pub struct ReducedModel {
    levels: LevelScheme,
    cavity: CavityParams,
    couplings: CouplingSet,
    rates: RateSet,
    eta: f64,
}

impl ReducedModel {
    pub fn new(
        levels: LevelScheme,
        cavity: CavityParams,
        couplings: CouplingSet,
        eta: f64,
    ) -> Result<Self, ModelError> {
        if !(0.0..=1.0).contains(&eta) {
            return Err(ModelError::EtaOutOfRange(eta));
        }
        Ok(Self {
            rates: derive_rates(&couplings, &levels, &cavity),
            levels,
            cavity,
            couplings,
            eta,
        })
    }

    pub fn levels(&self) -> &LevelScheme {
        &self.levels
    }

    pub fn cavity(&self) -> &CavityParams {
        &self.cavity
    }

    pub fn couplings(&self) -> &CouplingSet {
        &self.couplings
    }

    pub fn rates(&self) -> &RateSet {
        &self.rates
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn with_eta(&self, eta: f64) -> Result<Self, ModelError> {
        Self::new(self.levels, self.cavity, self.couplings, eta)
    }
}

fn check_input(rho: &ComplexMatrix) -> Result<(), DynamicsError> {
    if rho.shape() != (4, 4) {
        return Err(DynamicsError::InvalidInput(format!(
            "reduced dynamics needs a 4x4 state, got {:?}",
            rho.shape()
        )));
    }
    Ok(())
}

fn check_output(t: f64, d: ComplexMatrix) -> Result<ComplexMatrix, DynamicsError> {
    if d.is_finite() {
        Ok(d)
    } else {
        Err(DynamicsError::NonFinite(t))
    }
}

/// `dρ/dt` assembled from projectors `A_ij = |i⟩⟨j|`.
pub fn rhs_operator_form(t: f64, rho: &ComplexMatrix, model: &ReducedModel) -> Result<ComplexMatrix, DynamicsError> {
    check_input(rho)?;
    check_output(t, operator_form(t, rho, model))
}

fn operator_form(t: f64, rho: &ComplexMatrix, model: &ReducedModel) -> ComplexMatrix {
    let r = &model.rates;
    let a = |i, j| ComplexMatrix::basis_operator(4, i, j);
    let (a_ee, a_11, a_22, a_gg, a_12) = (a(E, E), a(L1, L1), a(L2, L2), a(G, G), a(L1, L2));
    let c = |x: f64| Complex64::new(x, 0.0);
    let comm = |x: &ComplexMatrix| commutator(x, rho).expect("4x4 operands");
    let anti = |x: &ComplexMatrix| &(x * rho) + &(rho * x);

    // level shifts
    let mut d = comm(&a_ee).scale(-I * (r.delta_1 + r.delta_2));
    let lower_shift = &a_11.scale(c(r.delta_1p)) + &a_22.scale(c(r.delta_2p));
    d = &d + &comm(&lower_shift).scale(-I);

    // relaxation
    let rho_ee = rho[(E, E)];
    let rho_11 = rho[(L1, L1)];
    let rho_22 = rho[(L2, L2)];
    let bracket = |gamma: f64, upper: &ComplexMatrix, lower: &ComplexMatrix, pop: Complex64| {
        (&anti(upper) - &lower.scale(2.0 * pop)).scale(c(-gamma))
    };
    d = &d + &bracket(r.gamma_1, &a_ee, &a_11, rho_ee);
    d = &d + &bracket(r.gamma_2, &a_ee, &a_22, rho_ee);
    d = &d + &bracket(r.gamma_1p, &a_11, &a_gg, rho_11);
    d = &d + &bracket(r.gamma_2p, &a_22, &a_gg, rho_22);

    // interference groups
    let eta = c(model.eta);
    let phase = Complex64::new(0.0, 2.0 * r.omega * t).exp();
    let with_hc = |x: ComplexMatrix| &x + &x.adjoint();
    let upper = with_hc(a_12.scale(r.cross.upper_feed * phase * rho_ee));
    let ground = with_hc(a_gg.scale(r.cross.ground_feed * phase.conj() * rho[(L1, L2)]));
    let lower =
        with_hc((&(&a_12 * rho).scale(r.cross.lower_left) + &(rho * &a_12).scale(r.cross.lower_right)).scale(phase));
    let cross = &(&upper + &ground) - &lower;
    &d + &cross.scale(eta)
}

/// `dρ/dt` written element by element.
pub fn rhs_element_form(t: f64, rho: &ComplexMatrix, model: &ReducedModel) -> Result<ComplexMatrix, DynamicsError> {
    check_input(rho)?;
    check_output(t, element_form(t, rho, model))
}

fn element_form(t: f64, rho: &ComplexMatrix, model: &ReducedModel) -> ComplexMatrix {
    let r = &model.rates;
    let g = &model.couplings;
    let det = Detunings::new(&model.levels, &model.cavity);
    let (ka, kb) = (model.cavity.kappa_a(), model.cavity.kappa_b());
    let om = model.levels.half_splitting();
    let eta = model.eta;
    let cx = Complex64::new;
    let p = |i: usize, j: usize| rho[(i, j)];

    let ph = cx(0.0, 2.0 * om * t).exp();
    let phc = ph.conj();

    let (g1, g2, g1p, g2p) = (r.gamma_1, r.gamma_2, r.gamma_1p, r.gamma_2p);
    let (d1p, d2p) = (r.delta_1p, r.delta_2p);
    let ge = g1 + g2;
    let se = r.delta_1 + r.delta_2;

    // G*_g1 G_g2 and the two Lorentzian denominators of the lower group
    let low = g.g_g1.conj() * g.g_g2;
    let low_c = low.conj();
    let inv_m2 = 1.0 / cx(kb, -det.delta_2p); // 1/(κ_b − iΔ′₂)
    let inv_p2 = 1.0 / cx(kb, det.delta_2p); // 1/(κ_b + iΔ′₂)
    let inv_m1 = 1.0 / cx(kb, -det.delta_1p); // 1/(κ_b − iΔ′₁)
    let inv_p1 = 1.0 / cx(kb, det.delta_1p); // 1/(κ_b + iΔ′₁)

    let src_a = 2.0 * g.g_1e * g.g_2e.conj() * cx(ka, om) / (cx(ka, det.delta_2) * cx(ka, -det.delta_1));
    let src_b = 2.0 * g.g_g1 * g.g_g2.conj() * cx(kb, -om) / (cx(kb, det.delta_2p) * cx(kb, -det.delta_1p));
    let src_b_c = 2.0 * g.g_g1.conj() * g.g_g2 * cx(kb, om) / (cx(kb, -det.delta_2p) * cx(kb, det.delta_1p));

    let mut d = ComplexMatrix::zeros(4, 4);

    d[(E, E)] = -2.0 * ge * p(E, E);

    d[(L1, L1)] = -2.0 * g1p * p(L1, L1) + 2.0 * g1 * p(E, E)
        - eta * low * inv_m2 * p(L2, L1) * ph
        - eta * low_c * inv_p2 * p(L1, L2) * phc;

    // ρ₁₁ with 1↔2 and Ω→−Ω
    d[(L2, L2)] = -2.0 * g2p * p(L2, L2) + 2.0 * g2 * p(E, E)
        - eta * low_c * inv_m1 * p(L1, L2) * phc
        - eta * low * inv_p1 * p(L2, L1) * ph;

    d[(L1, L2)] = -(g1p + g2p + I * (d1p - d2p)) * p(L1, L2) + eta * src_a * p(E, E) * ph
        - eta * low * (p(L2, L2) * inv_m2 + p(L1, L1) * inv_p1) * ph;

    d[(L2, L1)] = -(g1p + g2p - I * (d1p - d2p)) * p(L2, L1) + eta * src_a.conj() * p(E, E) * phc
        - eta * low_c * (p(L2, L2) * inv_p2 + p(L1, L1) * inv_m1) * phc;

    d[(G, G)] =
        2.0 * g1p * p(L1, L1) + 2.0 * g2p * p(L2, L2) + eta * src_b * p(L1, L2) * phc + eta * src_b_c * p(L2, L1) * ph;

    // coherences with |e⟩
    d[(E, L1)] = -(ge + g1p + I * (se - d1p)) * p(E, L1) - eta * low_c * inv_p2 * p(E, L2) * phc;
    d[(E, L2)] = -(ge + g2p + I * (se - d2p)) * p(E, L2) - eta * low * inv_p1 * p(E, L1) * ph;
    d[(L1, E)] = -(ge + g1p - I * (se - d1p)) * p(L1, E) - eta * low * inv_m2 * p(L2, E) * ph;
    d[(L2, E)] = -(ge + g2p - I * (se - d2p)) * p(L2, E) - eta * low_c * inv_m1 * p(L1, E) * phc;
    d[(E, G)] = -(ge + I * se) * p(E, G);
    d[(G, E)] = -(ge - I * se) * p(G, E);

    // coherences with |g⟩
    d[(L1, G)] = -(g1p + I * d1p) * p(L1, G) - eta * low * inv_m2 * p(L2, G) * ph;
    d[(L2, G)] = -(g2p + I * d2p) * p(L2, G) - eta * low_c * inv_m1 * p(L1, G) * phc;
    d[(G, L1)] = -(g1p - I * d1p) * p(G, L1) - eta * low_c * inv_p2 * p(G, L2) * phc;
    d[(G, L2)] = -(g2p - I * d2p) * p(G, L2) - eta * low * inv_p1 * p(G, L1) * ph;

    d
}

/// Converts raw integrator output into validated states and diagnostics.
pub(crate) fn finish_series(
    times: Vec<f64>,
    raw: Vec<ComplexMatrix>,
    stats: crate::integrator::IntegrationStats,
) -> Result<TimeSeries, DynamicsError> {
    let mut states = Vec::with_capacity(raw.len());
    let mut max_anti: f64 = 0.0;
    let mut max_trace: f64 = 0.0;
    let mut worst: Option<(f64, f64)> = None;
    for (&t, m) in times.iter().zip(&raw) {
        let (rho, corr) = hermitize_and_check(m, DRIFT_TOL)?;
        max_anti = max_anti.max(corr.anti_hermitian);
        max_trace = max_trace.max(corr.trace_error);
        let min = rho.min_eigenvalue();
        if min < -POSITIVITY_REPORT && worst.is_none_or(|(_, w)| min < w) {
            worst = Some((t, min));
        }
        states.push(rho);
    }
    let mut diagnostics = vec![Diagnostic::Drift {
        max_anti_hermitian: max_anti,
        max_trace_error: max_trace,
    }];
    if let Some((t, min_eigenvalue)) = worst {
        diagnostics.push(Diagnostic::Positivity { t, min_eigenvalue });
    }
    Ok(TimeSeries {
        times,
        states,
        diagnostics,
        stats,
    })
}

pub(crate) fn check_grid(t_grid: &[f64]) -> Result<(), DynamicsError> {
    let t0 = *t_grid
        .first()
        .ok_or_else(|| DynamicsError::InvalidInput("empty time grid".into()))?;
    if t0 != 0.0 {
        return Err(DynamicsError::InvalidInput(format!(
            "time grid must start at 0, got {t0}"
        )));
    }
    Ok(())
}

/// Integrates the reduced master equation from `rho0` at `t = 0`.
///
/// Output states are Hermitian with unit trace; a positivity violation
/// below `−1e-6` is recorded in `diagnostics` rather than treated as an
/// error.
pub fn evolve(
    model: &ReducedModel,
    rho0: &DensityMatrix,
    t_grid: &[f64],
    cfg: &IntegratorConfig,
) -> Result<TimeSeries, DynamicsError> {
    check_input(rho0.matrix())?;
    check_grid(t_grid)?;
    let traj = integrate(|t, rho| operator_form(t, rho, model), rho0.matrix(), t_grid, cfg)?;
    finish_series(traj.times, traj.states, traj.stats)
}
