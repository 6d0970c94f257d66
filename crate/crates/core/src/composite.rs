//! Atom ⊗ mode a ⊗ mode b with damped cavity modes, used to check the
//! reduced dynamics without eliminating the field.
//!
//! Basis index: `atom·(n_a+1)(n_b+1) + n_a·(n_b+1) + n_b`, atom order
//! `(e, 1, 2, g)`. The total excitation number
//! `N = 2A_ee + A_11 + A_22 + a†a + b†b` commutes with the Hamiltonian and
//! the damping, so evolution is carried out in a frame rotating at
//! `ω_frame·N`; the Hamiltonian stays time-independent and `ω_frame = 0`
//! is the plain Schrödinger picture.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::DynamicsError;
use crate::integrator::{integrate, IntegratorConfig};
use crate::linalg::{kron, partial_trace_field, ComplexMatrix, DensityMatrix, I, ZERO};
use crate::model::{CavityParams, Configuration, CouplingSet, LevelScheme, ModelError};
use crate::reduced::{check_grid, evolve, finish_series, ReducedModel};
use crate::series::{uniform_grid, Diagnostic, TimeSeries};

/// Excitation number of each atomic level.
const ATOM_EXCITATION: [f64; 4] = [2.0, 1.0, 1.0, 0.0];
/// Increases of `⟨N⟩` smaller than this are integration noise.
const EXCITATION_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CompositeModel {
    levels: LevelScheme,
    cavity: CavityParams,
    couplings: CouplingSet,
    n_max_a: usize,
    n_max_b: usize,
    frame: f64,
}

impl CompositeModel {
    /// Photon numbers are truncated at `n_max_a`, `n_max_b` (both ≥ 1). The
    /// evolution frame defaults to the mean cavity frequency.
    pub fn new(
        levels: LevelScheme,
        cavity: CavityParams,
        couplings: CouplingSet,
        n_max_a: usize,
        n_max_b: usize,
    ) -> Result<Self, DynamicsError> {
        if n_max_a == 0 || n_max_b == 0 {
            return Err(DynamicsError::InvalidInput(format!(
                "photon truncation must be at least 1 per mode, got ({n_max_a}, {n_max_b})"
            )));
        }
        Ok(Self {
            levels,
            cavity,
            couplings,
            n_max_a,
            n_max_b,
            frame: 0.5 * (cavity.omega_a() + cavity.omega_b()),
        })
    }

    pub fn from_configuration(config: &Configuration, n_max: usize) -> Result<Self, DynamicsError> {
        Self::new(config.levels, config.cavity, config.couplings, n_max, n_max)
    }

    /// Same model evolved in a frame rotating at `omega · N`.
    pub fn with_frame(mut self, omega: f64) -> Result<Self, DynamicsError> {
        if !omega.is_finite() {
            return Err(ModelError::NonFinite("frame").into());
        }
        self.frame = omega;
        Ok(self)
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

    pub fn frame(&self) -> f64 {
        self.frame
    }

    pub fn truncation(&self) -> (usize, usize) {
        (self.n_max_a, self.n_max_b)
    }

    /// `[4, n_max_a + 1, n_max_b + 1]`.
    pub fn dims(&self) -> [usize; 3] {
        [4, self.n_max_a + 1, self.n_max_b + 1]
    }

    pub fn dim(&self) -> usize {
        self.dims().iter().product()
    }

    pub fn index(&self, atom: usize, na: usize, nb: usize) -> usize {
        let [_, da, db] = self.dims();
        atom * da * db + na * db + nb
    }

    fn atom_op(&self, op: &ComplexMatrix) -> ComplexMatrix {
        let [_, da, db] = self.dims();
        kron(&kron(op, &ComplexMatrix::identity(da)), &ComplexMatrix::identity(db))
    }

    /// Annihilation operator of mode a on the composite space.
    pub fn annihilate_a(&self) -> ComplexMatrix {
        let [_, da, db] = self.dims();
        kron(
            &kron(&ComplexMatrix::identity(4), &ladder(da)),
            &ComplexMatrix::identity(db),
        )
    }

    /// Annihilation operator of mode b on the composite space.
    pub fn annihilate_b(&self) -> ComplexMatrix {
        let [_, da, db] = self.dims();
        kron(
            &kron(&ComplexMatrix::identity(4), &ComplexMatrix::identity(da)),
            &ladder(db),
        )
    }

    /// Total excitation number `N`.
    pub fn excitation_operator(&self) -> ComplexMatrix {
        let [_, da, db] = self.dims();
        ComplexMatrix::from_diagonal(
            &(0..self.dim())
                .map(|k| {
                    let (atom, na, nb) = (k / (da * db), (k / db) % da, k % db);
                    Complex64::new(ATOM_EXCITATION[atom] + (na + nb) as f64, 0.0)
                })
                .collect::<Vec<_>>(),
        )
    }

    /// `|atom⟩⟨atom| ⊗ |0⟩⟨0| ⊗ |0⟩⟨0|` for an atomic state.
    pub fn with_vacuum(&self, atom: &DensityMatrix) -> Result<DensityMatrix, DynamicsError> {
        if atom.dim() != 4 {
            return Err(DynamicsError::InvalidInput(format!(
                "atomic state must be 4x4, got dimension {}",
                atom.dim()
            )));
        }
        let [_, da, db] = self.dims();
        let vac = DensityMatrix::basis_state(da, 0).tensor(&DensityMatrix::basis_state(db, 0));
        Ok(atom.tensor(&vac))
    }

    /// Atomic energies in the evolution frame.
    fn frame_energies(&self) -> [f64; 4] {
        let e = self.levels.energies();
        std::array::from_fn(|k| e[k] - self.frame * ATOM_EXCITATION[k])
    }
}

/// Truncated annihilation operator on `dim` Fock states.
fn ladder(dim: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(dim, dim, |i, j| {
        if j == i + 1 {
            Complex64::new((j as f64).sqrt(), 0.0)
        } else {
            ZERO
        }
    })
}

/// `H_A + H_F + H_AF`, Hermitian, in the fixed composite basis.
///
/// `H_AF = V + V†` with `V = −i Σ_j (G_je a† A_je + G_gj b† A_gj)`.
pub fn build_hamiltonian(model: &CompositeModel) -> ComplexMatrix {
    hamiltonian_in_frame(model, 0.0)
}

fn hamiltonian_in_frame(model: &CompositeModel, frame: f64) -> ComplexMatrix {
    let a = model.annihilate_a();
    let b = model.annihilate_b();
    let proj = |i, j| model.atom_op(&ComplexMatrix::basis_operator(4, i, j));
    let energies = model.levels.energies();
    let c = |x: f64| Complex64::new(x, 0.0);

    let mut h = ComplexMatrix::zeros(model.dim(), model.dim());
    for (k, e) in energies.iter().enumerate() {
        h = &h + &proj(k, k).scale(c(e - frame * ATOM_EXCITATION[k]));
    }
    h = &h + &(&a.adjoint() * &a).scale(c(model.cavity.omega_a() - frame));
    h = &h + &(&b.adjoint() * &b).scale(c(model.cavity.omega_b() - frame));

    let g = &model.couplings;
    let (ad, bd) = (a.adjoint(), b.adjoint());
    let v = [
        (&ad * &proj(1, 0)).scale(g.g_1e),
        (&ad * &proj(2, 0)).scale(g.g_2e),
        (&bd * &proj(3, 1)).scale(g.g_g1),
        (&bd * &proj(3, 2)).scale(g.g_g2),
    ]
    .iter()
    .fold(ComplexMatrix::zeros(model.dim(), model.dim()), |acc, x| &acc + x)
    .scale(-I);
    &(&h + &v) + &v.adjoint()
}

/// `−i[H, ρ] − κ_a(a†aρ − 2aρa† + ρa†a) − κ_b(b†bρ − 2bρb† + ρb†b)` with the
/// bare Hamiltonian, evaluated densely.
pub fn lindblad_rhs(rho: &ComplexMatrix, model: &CompositeModel) -> Result<ComplexMatrix, DynamicsError> {
    let n = model.dim();
    if rho.shape() != (n, n) {
        return Err(DynamicsError::InvalidInput(format!(
            "composite state must be {n}x{n}, got {:?}",
            rho.shape()
        )));
    }
    let h = build_hamiltonian(model);
    let mut out = (&(&h * rho) - &(rho * &h)).scale(-I);
    for (op, kappa) in [
        (model.annihilate_a(), model.cavity.kappa_a()),
        (model.annihilate_b(), model.cavity.kappa_b()),
    ] {
        let num = &op.adjoint() * &op;
        let jump = &(&op * rho) * &op.adjoint();
        let damp = &(&(&num * rho) + &(rho * &num)) - &jump.scale(Complex64::new(2.0, 0.0));
        out = &out - &damp.scale(Complex64::new(kappa, 0.0));
    }
    Ok(out)
}

/// Sparse matrix as a row-sorted list of non-zero entries.
#[derive(Clone, Debug, PartialEq)]
struct Sparse {
    entries: Vec<(usize, usize, Complex64)>,
}

impl Sparse {
    fn from_dense(m: &ComplexMatrix) -> Self {
        let mut entries = Vec::new();
        for i in 0..m.rows() {
            for j in 0..m.cols() {
                if m[(i, j)] != ZERO {
                    entries.push((i, j, m[(i, j)]));
                }
            }
        }
        Self { entries }
    }
}

/// The composite generator in the evolution frame, stored sparsely:
/// `L ρ = −i(H_eff ρ − ρ H_eff†) + Σ 2κ cρc†`, `H_eff = H − iΣ κ c†c`.
#[derive(Clone, Debug, PartialEq)]
pub struct Superoperator {
    dim: usize,
    h_eff: Sparse,
    jumps: Vec<(f64, Sparse)>,
}

impl Superoperator {
    pub fn new(model: &CompositeModel) -> Self {
        let a = model.annihilate_a();
        let b = model.annihilate_b();
        let ka = model.cavity.kappa_a();
        let kb = model.cavity.kappa_b();
        let damping =
            &(&a.adjoint() * &a).scale(Complex64::new(0.0, -ka)) + &(&b.adjoint() * &b).scale(Complex64::new(0.0, -kb));
        let h_eff = &hamiltonian_in_frame(model, model.frame) + &damping;
        Self {
            dim: model.dim(),
            h_eff: Sparse::from_dense(&h_eff),
            jumps: vec![(2.0 * ka, Sparse::from_dense(&a)), (2.0 * kb, Sparse::from_dense(&b))],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `L ρ`; `rho` must be `dim × dim`.
    pub fn apply(&self, rho: &ComplexMatrix) -> ComplexMatrix {
        let n = self.dim;
        assert_eq!(rho.shape(), (n, n), "superoperator dimension mismatch");
        let r = rho.as_slice();
        let mut out = vec![ZERO; n * n];
        // −i H ρ + i ρ H†
        for &(i, k, v) in &self.h_eff.entries {
            let lv = -I * v;
            let rv = I * v.conj();
            for j in 0..n {
                out[i * n + j] += lv * r[k * n + j];
                // (ρ H†)[j, i] = Σ_k ρ[j, k] conj(H[i, k])
                out[j * n + i] += rv * r[j * n + k];
            }
        }
        for (rate, c) in &self.jumps {
            for &(i, k, v) in &c.entries {
                for &(j, l, w) in &c.entries {
                    out[i * n + j] += rate * v * w.conj() * r[k * n + l];
                }
            }
        }
        ComplexMatrix::new(n, n, out).expect("square output")
    }

    /// Dense `dim² × dim²` matrix acting on row-major vectorised states.
    pub fn to_matrix(&self) -> ComplexMatrix {
        let n = self.dim;
        let mut m = ComplexMatrix::zeros(n * n, n * n);
        for col in 0..n * n {
            let image = self.apply(&ComplexMatrix::basis_operator(n, col / n, col % n));
            for (row, v) in image.as_slice().iter().enumerate() {
                m[(row, col)] = *v;
            }
        }
        m
    }
}

/// Integrates the composite model. States are in the model's evolution
/// frame; use [`reduced_from_composite`] to compare with the reduced
/// dynamics. Growth of `⟨N⟩` between outputs is reported as a diagnostic.
pub fn evolve_composite(
    model: &CompositeModel,
    rho0: &DensityMatrix,
    t_grid: &[f64],
    cfg: &IntegratorConfig,
) -> Result<TimeSeries, DynamicsError> {
    if rho0.dim() != model.dim() {
        return Err(DynamicsError::InvalidInput(format!(
            "initial state has dimension {}, model needs {}",
            rho0.dim(),
            model.dim()
        )));
    }
    check_grid(t_grid)?;
    let generator = Superoperator::new(model);
    let traj = integrate(|_, rho| generator.apply(rho), rho0.matrix(), t_grid, cfg)?;
    let mut series = finish_series(traj.times, traj.states, traj.stats)?;

    let n_op = model.excitation_operator();
    let counts: Vec<f64> = series
        .states
        .iter()
        .map(|s| s.expectation(&n_op).map(|z| z.re))
        .collect::<Result<_, _>>()?;
    let worst = counts
        .windows(2)
        .zip(&series.times[1..])
        .map(|(w, &t)| (t, w[1] - w[0]))
        .max_by(|a, b| a.1.total_cmp(&b.1));
    if let Some((t, increase)) = worst.filter(|(_, inc)| *inc > EXCITATION_TOL) {
        series.diagnostics.push(Diagnostic::ExcitationIncrease { t, increase });
    }
    Ok(series)
}

/// Traces out both modes and applies the phase map
/// `ρ̃_jk = ρ_jk e^{i(ω_j − ω_k)t}`, giving atomic states in the same
/// picture as the reduced dynamics.
pub fn reduced_from_composite(series: &TimeSeries, model: &CompositeModel) -> Result<TimeSeries, DynamicsError> {
    let energies = model.frame_energies();
    let states = series
        .times
        .iter()
        .zip(&series.states)
        .map(|(&t, s)| {
            let atom = partial_trace_field(s, model.dims())?;
            let m = ComplexMatrix::from_fn(4, 4, |j, k| {
                atom.element(j, k) * Complex64::new(0.0, (energies[j] - energies[k]) * t).exp()
            });
            // the phase map is a unitary conjugation, so positivity carries over
            let (rho, _) = crate::linalg::hermitize_and_check(&m, crate::reduced::DRIFT_TOL)?;
            Ok(rho)
        })
        .collect::<Result<Vec<_>, DynamicsError>>()?;
    Ok(TimeSeries {
        times: series.times.clone(),
        states,
        diagnostics: series.diagnostics.clone(),
        stats: series.stats,
    })
}

/// Settings shared by every coupling strength of an elimination check.
#[derive(Clone, Debug, PartialEq)]
pub struct ValidationOptions {
    pub samples: usize,
    /// Window used when `g = 0` (the `5κ/g²` rule is undefined there).
    pub fallback_t_end: f64,
    pub n_max: usize,
    pub eta: f64,
    pub integrator: IntegratorConfig,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        Self {
            samples: 401,
            fallback_t_end: 6.0,
            n_max: 1,
            eta: 1.0,
            integrator: IntegratorConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationPoint {
    pub g: f64,
    pub t_end: f64,
    /// Largest absolute population difference over the grid.
    pub max_deviation: f64,
    pub diagnostics: Vec<Diagnostic>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationReport {
    pub points: Vec<ValidationPoint>,
    /// Least-squares slope of `log deviation` against `log g`.
    pub scaling_exponent: Option<f64>,
    /// Deviation strictly shrinks as `g` decreases.
    pub monotone: bool,
    pub passed: bool,
}

impl ValidationReport {
    pub fn from_points(mut points: Vec<ValidationPoint>) -> Self {
        points.sort_by(|a, b| b.g.total_cmp(&a.g));
        let positive: Vec<&ValidationPoint> = points.iter().filter(|p| p.g > 0.0).collect();
        let monotone = positive.windows(2).all(|w| w[1].max_deviation < w[0].max_deviation);
        let logs: Vec<(f64, f64)> = positive
            .iter()
            .filter(|p| p.max_deviation > 0.0)
            .map(|p| (p.g.ln(), p.max_deviation.ln()))
            .collect();
        let scaling_exponent = (logs.len() >= 2).then(|| {
            let n = logs.len() as f64;
            let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
            let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
            let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
            let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
            sxy / sxx
        });
        Self {
            points,
            scaling_exponent,
            monotone,
            passed: monotone,
        }
    }
}

/// Runs composite and reduced dynamics from `|e⟩` with the couplings of
/// `config` rescaled to largest magnitude `g`, over `[0, 5κ/g²]` with
/// `κ = (κ_a + κ_b)/2`.
pub fn validate_point(
    config: &Configuration,
    g: f64,
    opts: &ValidationOptions,
) -> Result<ValidationPoint, DynamicsError> {
    if !(g.is_finite() && g >= 0.0) {
        return Err(DynamicsError::InvalidInput(format!(
            "coupling magnitude must be finite and >= 0, got {g}"
        )));
    }
    let norm = config.couplings.max_norm();
    let couplings = if norm > 0.0 {
        config.couplings.scaled(g / norm)
    } else {
        CouplingSet::uniform(g)
    };
    let kappa = 0.5 * (config.cavity.kappa_a() + config.cavity.kappa_b());
    let t_end = if g > 0.0 {
        5.0 * kappa / (g * g)
    } else {
        opts.fallback_t_end
    };
    let times = uniform_grid(t_end, opts.samples);

    let reduced_model = ReducedModel::new(config.levels, config.cavity, couplings, opts.eta)?;
    let excited = DensityMatrix::basis_state(4, 0);
    let reduced = evolve(&reduced_model, &excited, &times, &opts.integrator)?;

    let composite_model = CompositeModel::new(config.levels, config.cavity, couplings, opts.n_max, opts.n_max)?;
    let full = evolve_composite(
        &composite_model,
        &composite_model.with_vacuum(&excited)?,
        &times,
        &opts.integrator,
    )?;
    let traced = reduced_from_composite(&full, &composite_model)?;

    Ok(ValidationPoint {
        g,
        t_end,
        max_deviation: traced.max_population_deviation(&reduced),
        diagnostics: full.diagnostics,
    })
}

/// [`validate_point`] for each `g`, sequentially.
pub fn validate_elimination(
    config: &Configuration,
    g_values: &[f64],
    opts: &ValidationOptions,
) -> Result<ValidationReport, DynamicsError> {
    let points = g_values
        .iter()
        .map(|&g| validate_point(config, g, opts))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ValidationReport::from_points(points))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{commutator, ONE};

    fn model(g: f64, omega: f64) -> CompositeModel {
        CompositeModel::from_configuration(&Configuration::centred(g, 1.0, omega).unwrap(), 1).unwrap()
    }

    #[test]
    fn basis_index_matches_kron_order() {
        let m = CompositeModel::new(
            LevelScheme::new(20.0, 11.0, 9.0).unwrap(),
            CavityParams::new(10.0, 10.0, 1.0, 1.0).unwrap(),
            CouplingSet::uniform(0.1),
            2,
            1,
        )
        .unwrap();
        assert_eq!(m.dims(), [4, 3, 2]);
        assert_eq!(m.index(1, 2, 1), 6 + 5);
        let a = m.annihilate_a();
        // a|e, 2, 1⟩ = √2 |e, 1, 1⟩
        assert!((a[(m.index(0, 1, 1), m.index(0, 2, 1))].re - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn uncoupled_hamiltonian_is_bare_energies() {
        let m = model(0.0, 1.0);
        let h = build_hamiltonian(&m);
        let [_, da, db] = m.dims();
        let e = m.levels().energies();
        for k in 0..m.dim() {
            let (atom, na, nb) = (k / (da * db), (k / db) % da, k % db);
            let bare = e[atom] + m.cavity().omega_a() * na as f64 + m.cavity().omega_b() * nb as f64;
            assert_eq!(h[(k, k)], Complex64::new(bare, 0.0));
        }
        assert_eq!(
            h.max_abs_diff(&ComplexMatrix::from_diagonal(
                &(0..m.dim()).map(|k| h[(k, k)]).collect::<Vec<_>>()
            ))
            .unwrap(),
            0.0
        );
    }

    #[test]
    fn emission_matrix_element() {
        let g = Complex64::new(0.3, -0.2);
        let couplings = CouplingSet::new(g, ONE, ONE, ONE).unwrap();
        let c = Configuration::centred(1.0, 1.0, 1.0).unwrap();
        let m = CompositeModel::new(c.levels, c.cavity, couplings, 1, 1).unwrap();
        let h = build_hamiltonian(&m);
        assert_eq!(h[(m.index(1, 1, 0), m.index(0, 0, 0))], -I * g);
        assert!(h.hermiticity_defect() <= 1e-14);
    }

    #[test]
    fn hamiltonian_conserves_excitations() {
        let m = model(0.4, 1.0);
        let c = commutator(&build_hamiltonian(&m), &m.excitation_operator()).unwrap();
        assert!(c.max_abs() < 1e-14);
    }

    #[test]
    fn stationary_and_decaying_states() {
        let m = CompositeModel::from_configuration(&Configuration::centred(0.0, 1.0, 1.0).unwrap(), 1).unwrap();
        let ground = DensityMatrix::basis_state(m.dim(), m.index(3, 0, 0));
        assert_eq!(lindblad_rhs(ground.matrix(), &m).unwrap().max_abs(), 0.0);
        let photon = ComplexMatrix::basis_operator(m.dim(), m.index(3, 1, 0), m.index(3, 1, 0));
        let d = lindblad_rhs(&photon, &m).unwrap();
        assert!((d[(m.index(3, 1, 0), m.index(3, 1, 0))].re + 2.0).abs() < 1e-15);
    }

    #[test]
    fn sparse_generator_matches_dense_form() {
        let m = model(0.3, 1.0).with_frame(0.0).unwrap();
        let n = m.dim();
        let rho = ComplexMatrix::from_fn(n, n, |i, j| {
            Complex64::new((i * 7 + j * 3) as f64 % 5.0, (i as f64) - (j as f64))
        });
        let sparse = Superoperator::new(&m).apply(&rho);
        let dense = lindblad_rhs(&rho, &m).unwrap();
        assert!(sparse.max_abs_diff(&dense).unwrap() < 1e-12);
    }

    #[test]
    fn generator_matrix_annihilates_trace() {
        let m = model(0.5, 0.7);
        let l = Superoperator::new(&m).to_matrix();
        let n = m.dim();
        for col in 0..n * n {
            let tr: Complex64 = (0..n).map(|k| l[(k * n + k, col)]).sum();
            assert!(tr.norm() < 1e-12);
        }
    }

    #[test]
    fn bad_inputs() {
        let c = Configuration::centred(0.1, 1.0, 1.0).unwrap();
        assert!(CompositeModel::new(c.levels, c.cavity, c.couplings, 0, 1).is_err());
        let m = model(0.1, 1.0);
        assert!(lindblad_rhs(&ComplexMatrix::identity(4), &m).is_err());
        assert!(m.with_vacuum(&DensityMatrix::basis_state(3, 0)).is_err());
    }

    #[test]
    fn uncoupled_excited_state_is_stationary() {
        let m = model(0.0, 1.0);
        let rho0 = m.with_vacuum(&DensityMatrix::basis_state(4, 0)).unwrap();
        let series = evolve_composite(&m, &rho0, &uniform_grid(10.0, 11), &IntegratorConfig::default()).unwrap();
        for s in &series.states {
            assert!(s.matrix().max_abs_diff(rho0.matrix()).unwrap() < 1e-14);
        }
    }

    #[test]
    fn frame_choice_does_not_change_atomic_state() {
        let base = model(0.3, 1.0);
        let rho0 = base
            .with_vacuum(
                &DensityMatrix::pure(&[
                    Complex64::new(0.8, 0.0),
                    Complex64::new(0.36, 0.0),
                    Complex64::new(0.0, 0.48),
                    ZERO,
                ])
                .unwrap(),
            )
            .unwrap();
        let times = uniform_grid(4.0, 41);
        let cfg = IntegratorConfig {
            rel_tol: 1e-11,
            abs_tol: 1e-13,
            max_step: 0.05,
            ..IntegratorConfig::default()
        };
        let lab = base.with_frame(0.0).unwrap();
        let a = reduced_from_composite(&evolve_composite(&lab, &rho0, &times, &cfg).unwrap(), &lab).unwrap();
        let b = reduced_from_composite(&evolve_composite(&base, &rho0, &times, &cfg).unwrap(), &base).unwrap();
        for (x, y) in a.states.iter().zip(&b.states) {
            assert!(x.matrix().max_abs_diff(y.matrix()).unwrap() < 1e-8);
        }
        assert!((a.states[0].element(1, 2) - Complex64::new(0.0, -0.36 * 0.48)).norm() < 1e-15);
    }

    #[test]
    fn trace_and_excitation_behave() {
        let m = model(0.5, 1.0);
        let rho0 = m.with_vacuum(&DensityMatrix::basis_state(4, 0)).unwrap();
        let series = evolve_composite(&m, &rho0, &uniform_grid(10.0, 101), &IntegratorConfig::default()).unwrap();
        for s in &series.states {
            assert!((s.trace() - ONE).norm() < 1e-9);
        }
        assert!(!series
            .diagnostics
            .iter()
            .any(|d| matches!(d, Diagnostic::ExcitationIncrease { .. })));
    }

    #[test]
    fn report_flags_non_shrinking_deviation() {
        let point = |g, d| ValidationPoint {
            g,
            t_end: 1.0,
            max_deviation: d,
            diagnostics: Vec::new(),
        };
        let good = ValidationReport::from_points(vec![
            point(0.05, 0.001),
            point(0.2, 0.016),
            point(0.1, 0.004),
            point(0.0, 0.0),
        ]);
        assert!(good.passed);
        assert!((good.scaling_exponent.unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(good.points[0].g, 0.2);
        let bad = ValidationReport::from_points(vec![point(0.2, 0.01), point(0.1, 0.02)]);
        assert!(!bad.passed);
    }
}
