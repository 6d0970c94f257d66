//! Level scheme, cavity modes, dipole geometry and the derived coupling
//! constants, decay rates and level shifts.
//!
//! Units: every frequency and rate is expressed in units of a reference
//! cavity decay rate κ, and ħ = 1. The coupling prefactor
//! `(2π ω / V)^{1/2}` is collapsed into a single scale factor so scenarios
//! can specify the couplings `G` directly.

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::linalg::{I, ZERO};

/// Complex Cartesian 3-vector (dipole matrix element or polarization).
pub type Vec3 = [Complex64; 3];

const UNIT_TOL: f64 = 1e-12;
/// `|d₁·d₂*|` above this counts as non-orthogonal.
pub const INTERFERENCE_THRESHOLD: f64 = 1e-12;
/// Relative tolerance used when deciding whether a configuration satisfies
/// the symmetric closed-form preconditions.
pub const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("cascade ordering violated: need omega_eg > omega_1g and omega_eg > omega_2g (got {omega_eg}, {omega_1g}, {omega_2g})")]
    CascadeOrdering {
        omega_eg: f64,
        omega_1g: f64,
        omega_2g: f64,
    },
    #[error("cavity decay rates must be positive (kappa_a = {kappa_a}, kappa_b = {kappa_b})")]
    NonPositiveKappa { kappa_a: f64, kappa_b: f64 },
    #[error("parameter `{0}` is not finite")]
    NonFinite(&'static str),
    #[error("polarization `{0}` is not a unit vector")]
    NotUnit(&'static str),
    #[error("polarization `{0}` is not transverse to the propagation direction")]
    NotTransverse(&'static str),
    #[error("interference parameter eta = {0} outside [0, 1]")]
    EtaOutOfRange(f64),
}

fn finite(value: f64, name: &'static str) -> Result<f64, ModelError> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(ModelError::NonFinite(name))
    }
}

/// Atomic level energies relative to `|g⟩`. Basis order is `(e, 1, 2, g)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LevelScheme {
    omega_eg: f64,
    omega_1g: f64,
    omega_2g: f64,
}

impl LevelScheme {
    pub fn new(omega_eg: f64, omega_1g: f64, omega_2g: f64) -> Result<Self, ModelError> {
        finite(omega_eg, "omega_eg")?;
        finite(omega_1g, "omega_1g")?;
        finite(omega_2g, "omega_2g")?;
        if !(omega_eg > omega_1g && omega_eg > omega_2g) {
            return Err(ModelError::CascadeOrdering {
                omega_eg,
                omega_1g,
                omega_2g,
            });
        }
        Ok(Self {
            omega_eg,
            omega_1g,
            omega_2g,
        })
    }

    pub fn omega_eg(&self) -> f64 {
        self.omega_eg
    }

    pub fn omega_1g(&self) -> f64 {
        self.omega_1g
    }

    pub fn omega_2g(&self) -> f64 {
        self.omega_2g
    }

    /// Half the splitting of the intermediate levels, `(ω_1g − ω_2g)/2`.
    pub fn half_splitting(&self) -> f64 {
        0.5 * (self.omega_1g - self.omega_2g)
    }

    /// Bare energies in basis order `(e, 1, 2, g)`.
    pub fn energies(&self) -> [f64; 4] {
        [self.omega_eg, self.omega_1g, self.omega_2g, 0.0]
    }

    /// Same centre and upper level, intermediate levels split by `2Ω`.
    ///
    /// Keeps a cavity tuned to the centre of the doublet tuned to the centre.
    pub fn with_half_splitting(&self, omega: f64) -> Result<Self, ModelError> {
        let centre = 0.5 * (self.omega_1g + self.omega_2g);
        Self::new(self.omega_eg, centre + omega, centre - omega)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CavityParams {
    omega_a: f64,
    omega_b: f64,
    kappa_a: f64,
    kappa_b: f64,
}

impl CavityParams {
    pub fn new(omega_a: f64, omega_b: f64, kappa_a: f64, kappa_b: f64) -> Result<Self, ModelError> {
        finite(omega_a, "omega_a")?;
        finite(omega_b, "omega_b")?;
        finite(kappa_a, "kappa_a")?;
        finite(kappa_b, "kappa_b")?;
        if !(kappa_a > 0.0 && kappa_b > 0.0) {
            return Err(ModelError::NonPositiveKappa { kappa_a, kappa_b });
        }
        Ok(Self {
            omega_a,
            omega_b,
            kappa_a,
            kappa_b,
        })
    }

    pub fn omega_a(&self) -> f64 {
        self.omega_a
    }

    pub fn omega_b(&self) -> f64 {
        self.omega_b
    }

    pub fn kappa_a(&self) -> f64 {
        self.kappa_a
    }

    pub fn kappa_b(&self) -> f64 {
        self.kappa_b
    }
}

/// Cavity detunings `Δ_j = ω_ej − ω_a` and `Δ′_j = ω_jg − ω_b`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Detunings {
    pub delta_1: f64,
    pub delta_2: f64,
    pub delta_1p: f64,
    pub delta_2p: f64,
}

impl Detunings {
    pub fn new(levels: &LevelScheme, cavity: &CavityParams) -> Self {
        let omega_e1 = levels.omega_eg - levels.omega_1g;
        let omega_e2 = levels.omega_eg - levels.omega_2g;
        Self {
            delta_1: omega_e1 - cavity.omega_a,
            delta_2: omega_e2 - cavity.omega_a,
            delta_1p: levels.omega_1g - cavity.omega_b,
            delta_2p: levels.omega_2g - cavity.omega_b,
        }
    }
}

/// Dipole matrix elements, cavity polarizations and propagation direction.
#[derive(Clone, Debug, PartialEq)]
pub struct DipoleGeometry {
    pub d_1e: Vec3,
    pub d_2e: Vec3,
    pub d_g1: Vec3,
    pub d_g2: Vec3,
    pub epsilon_a: Vec3,
    pub epsilon_b: Vec3,
    pub k_hat: [f64; 3],
}

impl DipoleGeometry {
    pub fn new(
        d_1e: Vec3,
        d_2e: Vec3,
        d_g1: Vec3,
        d_g2: Vec3,
        epsilon_a: Vec3,
        epsilon_b: Vec3,
        k_hat: [f64; 3],
    ) -> Result<Self, ModelError> {
        let k = real_vec(k_hat);
        for (name, eps) in [("epsilon_a", &epsilon_a), ("epsilon_b", &epsilon_b)] {
            if (norm(eps) - 1.0).abs() > UNIT_TOL {
                return Err(ModelError::NotUnit(name));
            }
            if dot(eps, &k).norm() > UNIT_TOL {
                return Err(ModelError::NotTransverse(name));
            }
        }
        if (norm(&k) - 1.0).abs() > UNIT_TOL {
            return Err(ModelError::NotUnit("k_hat"));
        }
        Ok(Self {
            d_1e,
            d_2e,
            d_g1,
            d_g2,
            epsilon_a,
            epsilon_b,
            k_hat,
        })
    }

    /// Cavity modes along ŷ polarized along x̂, σ± dipoles on both
    /// transitions (upper ones taken as the conjugates of the lower ones).
    pub fn sigma_cascade(reduced_d: f64) -> Self {
        let (d_g1, d_g2) = sigma_dipoles(reduced_d);
        let x = real_vec([1.0, 0.0, 0.0]);
        Self {
            d_1e: conj(&d_g1),
            d_2e: conj(&d_g2),
            d_g1,
            d_g2,
            epsilon_a: x,
            epsilon_b: x,
            k_hat: [0.0, 1.0, 0.0],
        }
    }
}

/// Atom–cavity coupling constants `G_je` (mode a) and `G_gj` (mode b).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CouplingSet {
    pub g_1e: Complex64,
    pub g_2e: Complex64,
    pub g_g1: Complex64,
    pub g_g2: Complex64,
}

impl CouplingSet {
    pub fn new(g_1e: Complex64, g_2e: Complex64, g_g1: Complex64, g_g2: Complex64) -> Result<Self, ModelError> {
        for (name, g) in [("g_1e", g_1e), ("g_2e", g_2e), ("g_g1", g_g1), ("g_g2", g_g2)] {
            if !(g.re.is_finite() && g.im.is_finite()) {
                return Err(ModelError::NonFinite(name));
            }
        }
        Ok(Self { g_1e, g_2e, g_g1, g_g2 })
    }

    /// All four couplings equal to the real value `g`.
    pub fn uniform(g: f64) -> Self {
        let g = Complex64::new(g, 0.0);
        Self {
            g_1e: g,
            g_2e: g,
            g_g1: g,
            g_g2: g,
        }
    }

    /// Couplings from dipole projections onto the cavity polarizations,
    /// `G = scale · (d·ε̂)`, with separate scales for modes a and b.
    pub fn from_geometry(geometry: &DipoleGeometry, scale_a: f64, scale_b: f64) -> Self {
        Self {
            g_1e: scale_a * dot(&geometry.d_1e, &geometry.epsilon_a),
            g_2e: scale_a * dot(&geometry.d_2e, &geometry.epsilon_a),
            g_g1: scale_b * dot(&geometry.d_g1, &geometry.epsilon_b),
            g_g2: scale_b * dot(&geometry.d_g2, &geometry.epsilon_b),
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            g_1e: self.g_1e * factor,
            g_2e: self.g_2e * factor,
            g_g1: self.g_g1 * factor,
            g_g2: self.g_g2 * factor,
        }
    }

    /// Largest coupling modulus.
    pub fn max_norm(&self) -> f64 {
        [self.g_1e, self.g_2e, self.g_g1, self.g_g2]
            .iter()
            .map(|g| g.norm())
            .fold(0.0, f64::max)
    }
}

/// The complex prefactors multiplying the interference terms of the reduced
/// master equation. Each is the full coefficient of one η-marked group.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CrossCoefficients {
    /// `2 G_1e G*_2e (κ_a + iΩ) / ((κ_a + iΔ₂)(κ_a − iΔ₁))`, feeds ρ₁₂ from ρ_ee.
    pub upper_feed: Complex64,
    /// `2 G_g1 G*_g2 (κ_b − iΩ) / ((κ_b + iΔ′₂)(κ_b − iΔ′₁))`, feeds ρ_gg from ρ₁₂.
    pub ground_feed: Complex64,
    /// `G*_g1 G_g2 / (κ_b − iΔ′₂)`, coefficient of `A₁₂ ρ`.
    pub lower_left: Complex64,
    /// `G*_g1 G_g2 / (κ_b + iΔ′₁)`, coefficient of `ρ A₁₂`.
    pub lower_right: Complex64,
}

/// Decay rates and shifts of the reduced atomic dynamics.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RateSet {
    pub gamma_1: f64,
    pub gamma_2: f64,
    pub gamma_1p: f64,
    pub gamma_2p: f64,
    pub delta_1: f64,
    pub delta_2: f64,
    pub delta_1p: f64,
    pub delta_2p: f64,
    /// Half splitting Ω of the intermediate doublet.
    pub omega: f64,
    pub cross: CrossCoefficients,
    /// `G G*/(κ + iΩ)`, populated only for the symmetric configuration.
    pub alpha: Option<Complex64>,
}

/// Lorentzian response `|G|²/(κ − iΔ)` split into rate and shift.
fn lorentzian(g: Complex64, kappa: f64, detuning: f64) -> (f64, f64) {
    let denom = kappa * kappa + detuning * detuning;
    let g2 = g.norm_sqr();
    (g2 * kappa / denom, g2 * detuning / denom)
}

fn rel_close(a: f64, b: f64) -> bool {
    (a - b).abs() <= SYMMETRY_TOL * a.abs().max(b.abs()).max(1.0)
}

fn complex_close(a: Complex64, b: Complex64) -> bool {
    (a - b).norm() <= SYMMETRY_TOL * a.norm().max(b.norm()).max(1.0)
}

/// Levels, cavity and couplings of one configuration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Configuration {
    pub levels: LevelScheme,
    pub cavity: CavityParams,
    pub couplings: CouplingSet,
}

impl Configuration {
    /// Symmetric configuration: all couplings `g`, both cavity rates `kappa`,
    /// mode `a` tuned midway between `|e⟩` and the doublet, mode `b` midway
    /// between the doublet and `|g⟩`, doublet split by `2Ω`. Absolute
    /// frequencies are referenced to `10κ + 2|Ω|` so the cascade ordering
    /// holds for any `Ω`.
    pub fn centred(g: f64, kappa: f64, omega: f64) -> Result<Self, ModelError> {
        finite(g, "g")?;
        finite(omega, "omega")?;
        let reference = 10.0 * kappa + 2.0 * omega.abs();
        Ok(Self {
            levels: LevelScheme::new(2.0 * reference, reference + omega, reference - omega)?,
            cavity: CavityParams::new(reference, reference, kappa, kappa)?,
            couplings: CouplingSet::uniform(g),
        })
    }

    pub fn rates(&self) -> RateSet {
        derive_rates(&self.couplings, &self.levels, &self.cavity)
    }

    pub fn is_symmetric(&self) -> bool {
        is_symmetric(&self.couplings, &self.levels, &self.cavity)
    }
}

/// Whether couplings, cavity rates and tuning satisfy the symmetric
/// closed-form preconditions: equal couplings, equal κ, both modes tuned to
/// the centre of the doublet.
pub fn is_symmetric(couplings: &CouplingSet, levels: &LevelScheme, cavity: &CavityParams) -> bool {
    let omega = levels.half_splitting();
    let det = Detunings::new(levels, cavity);
    let g = couplings.g_1e;
    complex_close(couplings.g_2e, g)
        && complex_close(couplings.g_g1, g)
        && complex_close(couplings.g_g2, g)
        && rel_close(cavity.kappa_a, cavity.kappa_b)
        && rel_close(det.delta_1, -omega)
        && rel_close(det.delta_2, omega)
        && rel_close(det.delta_1p, omega)
        && rel_close(det.delta_2p, -omega)
}

pub fn derive_rates(couplings: &CouplingSet, levels: &LevelScheme, cavity: &CavityParams) -> RateSet {
    let det = Detunings::new(levels, cavity);
    let (ka, kb) = (cavity.kappa_a, cavity.kappa_b);
    let omega = levels.half_splitting();
    let (gamma_1, delta_1) = lorentzian(couplings.g_1e, ka, det.delta_1);
    let (gamma_2, delta_2) = lorentzian(couplings.g_2e, ka, det.delta_2);
    let (gamma_1p, delta_1p) = lorentzian(couplings.g_g1, kb, det.delta_1p);
    let (gamma_2p, delta_2p) = lorentzian(couplings.g_g2, kb, det.delta_2p);

    let c = |re: f64, im: f64| Complex64::new(re, im);
    let upper_feed =
        2.0 * couplings.g_1e * couplings.g_2e.conj() * c(ka, omega) / (c(ka, det.delta_2) * c(ka, -det.delta_1));
    let ground_feed =
        2.0 * couplings.g_g1 * couplings.g_g2.conj() * c(kb, -omega) / (c(kb, det.delta_2p) * c(kb, -det.delta_1p));
    let lower = couplings.g_g1.conj() * couplings.g_g2;
    let cross = CrossCoefficients {
        upper_feed,
        ground_feed,
        lower_left: lower / c(kb, -det.delta_2p),
        lower_right: lower / c(kb, det.delta_1p),
    };

    let alpha = is_symmetric(couplings, levels, cavity).then(|| couplings.g_1e.norm_sqr() / (ka + I * omega));

    RateSet {
        gamma_1,
        gamma_2,
        gamma_1p,
        gamma_2p,
        delta_1,
        delta_2,
        delta_1p,
        delta_2p,
        omega,
        cross,
        alpha,
    }
}

fn real_vec(v: [f64; 3]) -> Vec3 {
    v.map(|x| Complex64::new(x, 0.0))
}

/// Bilinear product `a·b` (no conjugation).
pub fn dot(a: &Vec3, b: &Vec3) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn conj(a: &Vec3) -> Vec3 {
    a.map(|z| z.conj())
}

pub fn norm(a: &Vec3) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// σ± dipoles of a j=1 → j=0 transition:
/// `d_g1 = −|d|(x̂ + iŷ)`, `d_g2 = |d|(x̂ − iŷ)`.
pub fn sigma_dipoles(reduced_d: f64) -> (Vec3, Vec3) {
    let d = reduced_d;
    (
        [Complex64::new(-d, 0.0), Complex64::new(0.0, -d), ZERO],
        [Complex64::new(d, 0.0), Complex64::new(0.0, -d), ZERO],
    )
}

/// `(2π ω / V)^{1/2}` with ħ = 1.
pub fn coupling_scale(mode_omega: f64, volume: f64) -> f64 {
    (2.0 * std::f64::consts::PI * mode_omega / volume).sqrt()
}

pub fn coupling_constant(dipole: &Vec3, polarization: &Vec3, mode_omega: f64, volume: f64) -> Complex64 {
    coupling_scale(mode_omega, volume) * dot(dipole, polarization)
}

/// `scale · (d₁·ε̂)(d₂*·ε̂*)`: coupling product for one pre-selected
/// polarization.
pub fn preselected_product(d1: &Vec3, d2: &Vec3, pol: &Vec3, scale: f64) -> Complex64 {
    scale * dot(d1, pol) * dot(&conj(d2), &conj(pol))
}

/// Two real orthonormal polarizations transverse to `k_hat`.
///
/// The first is Gram–Schmidt of the coordinate axis least aligned with
/// `k_hat` (lowest index on ties); the second is `k̂ × ε̂₁`.
pub fn transverse_basis(k_hat: [f64; 3]) -> [[f64; 3]; 2] {
    let axis = (0..3)
        .min_by(|&i, &j| k_hat[i].abs().total_cmp(&k_hat[j].abs()))
        .unwrap_or(0);
    let mut e1 = [0.0; 3];
    e1[axis] = 1.0;
    let proj = k_hat[axis];
    for (e, k) in e1.iter_mut().zip(k_hat) {
        *e -= proj * k;
    }
    let n = e1.iter().map(|x| x * x).sum::<f64>().sqrt();
    e1.iter_mut().for_each(|x| *x /= n);
    let k = k_hat;
    let e2 = [
        k[1] * e1[2] - k[2] * e1[1],
        k[2] * e1[0] - k[0] * e1[2],
        k[0] * e1[1] - k[1] * e1[0],
    ];
    [e1, e2]
}

/// Coupling product summed over both transverse polarizations. Equals
/// `scale · (d₁·d₂*)` for dipoles transverse to `k_hat`.
pub fn summed_product(d1: &Vec3, d2: &Vec3, k_hat: [f64; 3], scale: f64) -> Complex64 {
    transverse_basis(k_hat)
        .iter()
        .map(|&e| preselected_product(d1, d2, &real_vec(e), scale))
        .sum()
}

/// True when free-space decay through `d1` and `d2` can interfere,
/// i.e. `|d₁·d₂*| > 1e-12`.
pub fn interference_condition(d1: &Vec3, d2: &Vec3) -> bool {
    dot(d1, &conj(d2)).norm() > INTERFERENCE_THRESHOLD
}
