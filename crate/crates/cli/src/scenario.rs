//! Scenario files: strict JSON, validated into core model types.

use std::path::Path;

use cavbeat_core::model::{Configuration, DipoleGeometry, Vec3};
use cavbeat_core::series::uniform_grid;
use cavbeat_core::{CavityParams, ComplexMatrix, CouplingSet, DensityMatrix, IntegratorConfig, Level, LevelScheme};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::AppError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Reduced,
    Composite,
    Analytic,
    Validate,
}

/// A complex number written as a plain number or `[re, im]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum JsonComplex {
    Real(f64),
    Pair(f64, f64),
}

impl JsonComplex {
    pub fn value(self) -> Complex64 {
        match self {
            JsonComplex::Real(re) => Complex64::new(re, 0.0),
            JsonComplex::Pair(re, im) => Complex64::new(re, im),
        }
    }
}

impl From<Complex64> for JsonComplex {
    fn from(z: Complex64) -> Self {
        if z.im == 0.0 {
            JsonComplex::Real(z.re)
        } else {
            JsonComplex::Pair(z.re, z.im)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelsSpec {
    pub omega_eg: f64,
    pub omega_1g: f64,
    pub omega_2g: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CavitySpec {
    pub omega_a: f64,
    pub omega_b: f64,
    pub kappa_a: f64,
    pub kappa_b: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingsSpec {
    pub g_1e: JsonComplex,
    pub g_2e: JsonComplex,
    pub g_g1: JsonComplex,
    pub g_g2: JsonComplex,
}

/// Couplings derived from dipoles and cavity polarizations:
/// `G_je = scale_a (d_je·ε̂_a)`, `G_gj = scale_b (d_gj·ε̂_b)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySpec {
    pub d_1e: [JsonComplex; 3],
    pub d_2e: [JsonComplex; 3],
    pub d_g1: [JsonComplex; 3],
    pub d_g2: [JsonComplex; 3],
    pub epsilon_a: [JsonComplex; 3],
    pub epsilon_b: [JsonComplex; 3],
    pub k_hat: [f64; 3],
    pub scale_a: f64,
    pub scale_b: f64,
}

/// `"e" | "1" | "2" | "g"` or an explicit 4×4 matrix of complex entries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialState {
    Named(String),
    Matrix(Vec<Vec<JsonComplex>>),
}

impl Default for InitialState {
    fn default() -> Self {
        InitialState::Named("e".into())
    }
}

fn default_eta() -> f64 {
    1.0
}

fn default_n_max() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub mode: Mode,
    pub levels: LevelsSpec,
    pub cavity: CavitySpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub couplings: Option<CouplingsSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geometry: Option<GeometrySpec>,
    #[serde(default = "default_eta")]
    pub eta: f64,
    #[serde(default)]
    pub initial_state: InitialState,
    pub t_end: f64,
    pub samples: usize,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    /// Photon truncation per mode for composite and validate modes.
    #[serde(default = "default_n_max")]
    pub n_max: usize,
    /// Coupling magnitudes for validate mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g_values: Option<Vec<f64>>,
}

/// A scenario checked and converted to model types.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub config: Configuration,
    pub eta: f64,
    pub rho0: DensityMatrix,
    /// Whether the initial state is `|e⟩⟨e|`.
    pub starts_excited: bool,
    pub times: Vec<f64>,
    pub integrator: IntegratorConfig,
    pub n_max: usize,
}

fn invalid(field: &str, msg: impl std::fmt::Display) -> AppError {
    AppError::Validation(format!("field `{field}`: {msg}"))
}

fn vec3(v: &[JsonComplex; 3]) -> Vec3 {
    v.map(JsonComplex::value)
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, AppError> {
        serde_json::from_str(text).map_err(|e| AppError::Validation(format!("scenario: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, AppError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| AppError::Validation(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            AppError::Validation(msg) => AppError::Validation(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    /// Symmetric configuration of [`Configuration::centred`] with `G = κ = 1`,
    /// starting in `|e⟩`, 601 samples over `[0, 6]`.
    pub fn centred(name: &str, mode: Mode, omega: f64, eta: f64) -> Result<Self, AppError> {
        let c = Configuration::centred(1.0, 1.0, omega).map_err(|e| AppError::Validation(e.to_string()))?;
        Ok(Self {
            name: name.to_string(),
            mode,
            levels: LevelsSpec {
                omega_eg: c.levels.omega_eg(),
                omega_1g: c.levels.omega_1g(),
                omega_2g: c.levels.omega_2g(),
            },
            cavity: CavitySpec {
                omega_a: c.cavity.omega_a(),
                omega_b: c.cavity.omega_b(),
                kappa_a: c.cavity.kappa_a(),
                kappa_b: c.cavity.kappa_b(),
            },
            couplings: Some(couplings_spec(&c.couplings)),
            geometry: None,
            eta,
            initial_state: InitialState::default(),
            t_end: 6.0,
            samples: 601,
            integrator: IntegratorConfig::default(),
            n_max: 1,
            g_values: None,
        })
    }

    fn couplings(&self) -> Result<CouplingSet, AppError> {
        match (&self.couplings, &self.geometry) {
            (Some(c), None) => CouplingSet::new(c.g_1e.value(), c.g_2e.value(), c.g_g1.value(), c.g_g2.value())
                .map_err(|e| invalid("couplings", e)),
            (None, Some(g)) => {
                let geom = DipoleGeometry::new(
                    vec3(&g.d_1e),
                    vec3(&g.d_2e),
                    vec3(&g.d_g1),
                    vec3(&g.d_g2),
                    vec3(&g.epsilon_a),
                    vec3(&g.epsilon_b),
                    g.k_hat,
                )
                .map_err(|e| invalid("geometry", e))?;
                if !(g.scale_a.is_finite() && g.scale_b.is_finite()) {
                    return Err(invalid("geometry", "scales must be finite"));
                }
                Ok(CouplingSet::from_geometry(&geom, g.scale_a, g.scale_b))
            }
            (Some(_), Some(_)) => Err(invalid("couplings", "give either `couplings` or `geometry`, not both")),
            (None, None) => Err(invalid("couplings", "one of `couplings` or `geometry` is required")),
        }
    }

    fn initial(&self) -> Result<(DensityMatrix, bool), AppError> {
        match &self.initial_state {
            InitialState::Named(name) => {
                let level = Level::from_name(name).ok_or_else(|| {
                    invalid(
                        "initial_state",
                        format!("unknown state {name:?}; expected e, 1, 2 or g"),
                    )
                })?;
                Ok((DensityMatrix::basis_state(4, level.index()), level == Level::E))
            }
            InitialState::Matrix(rows) => {
                let rows: Vec<Vec<Complex64>> = rows.iter().map(|r| r.iter().map(|z| z.value()).collect()).collect();
                let m = ComplexMatrix::from_rows(&rows).map_err(|e| invalid("initial_state", e))?;
                if m.shape() != (4, 4) {
                    return Err(invalid(
                        "initial_state",
                        format!("matrix must be 4x4, got {:?}", m.shape()),
                    ));
                }
                let excited = m == DensityMatrix::basis_state(4, 0).into_matrix();
                Ok((DensityMatrix::new(m).map_err(|e| invalid("initial_state", e))?, excited))
            }
        }
    }

    pub fn resolve(&self) -> Result<Resolved, AppError> {
        if self.name.is_empty()
            || !self
                .name
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
        {
            return Err(invalid(
                "name",
                "must be non-empty and use only letters, digits, '_', '-', '.'",
            ));
        }
        let l = &self.levels;
        let levels = LevelScheme::new(l.omega_eg, l.omega_1g, l.omega_2g).map_err(|e| invalid("levels", e))?;
        let c = &self.cavity;
        let cavity = CavityParams::new(c.omega_a, c.omega_b, c.kappa_a, c.kappa_b).map_err(|e| invalid("cavity", e))?;
        let couplings = self.couplings()?;
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(invalid("eta", format!("{} is outside [0, 1]", self.eta)));
        }
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            return Err(invalid("t_end", format!("must be positive, got {}", self.t_end)));
        }
        if self.samples < 2 {
            return Err(invalid("samples", format!("need at least 2, got {}", self.samples)));
        }
        self.integrator.validate().map_err(|e| invalid("integrator", e))?;
        if self.n_max == 0 {
            return Err(invalid("n_max", "must be at least 1"));
        }
        if let Some(gs) = &self.g_values {
            if gs.is_empty() || gs.iter().any(|g| !(g.is_finite() && *g >= 0.0)) {
                return Err(invalid("g_values", "need a non-empty list of finite values >= 0"));
            }
        }
        let (rho0, starts_excited) = self.initial()?;
        Ok(Resolved {
            config: Configuration {
                levels,
                cavity,
                couplings,
            },
            eta: self.eta,
            rho0,
            starts_excited,
            times: uniform_grid(self.t_end, self.samples),
            integrator: self.integrator,
            n_max: self.n_max,
        })
    }

    /// Copy with one numeric parameter replaced.
    ///
    /// `Omega` re-splits the doublet about its centre, `G` rescales all
    /// couplings so the largest has magnitude `value`, `kappa` sets both
    /// cavity rates.
    pub fn with_param(&self, param: SweepParam, value: f64) -> Result<Self, AppError> {
        let mut s = self.clone();
        match param {
            SweepParam::Omega => {
                let levels = LevelScheme::new(self.levels.omega_eg, self.levels.omega_1g, self.levels.omega_2g)
                    .and_then(|l| l.with_half_splitting(value))
                    .map_err(|e| invalid("levels", e))?;
                s.levels = LevelsSpec {
                    omega_eg: levels.omega_eg(),
                    omega_1g: levels.omega_1g(),
                    omega_2g: levels.omega_2g(),
                };
            }
            SweepParam::Eta => s.eta = value,
            SweepParam::G => {
                let couplings = self.couplings()?;
                let norm = couplings.max_norm();
                let scaled = if norm > 0.0 {
                    couplings.scaled(value / norm)
                } else {
                    CouplingSet::uniform(value)
                };
                s.couplings = Some(couplings_spec(&scaled));
                s.geometry = None;
            }
            SweepParam::Kappa => {
                s.cavity.kappa_a = value;
                s.cavity.kappa_b = value;
            }
            SweepParam::TEnd => s.t_end = value,
        }
        Ok(s)
    }
}

fn couplings_spec(c: &CouplingSet) -> CouplingsSpec {
    CouplingsSpec {
        g_1e: c.g_1e.into(),
        g_2e: c.g_2e.into(),
        g_g1: c.g_g1.into(),
        g_g2: c.g_g2.into(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepParam {
    Omega,
    Eta,
    G,
    Kappa,
    TEnd,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Omega => "Omega",
            SweepParam::Eta => "eta",
            SweepParam::G => "G",
            SweepParam::Kappa => "kappa",
            SweepParam::TEnd => "t_end",
        }
    }
}

impl std::str::FromStr for SweepParam {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "Omega" | "omega" => Ok(SweepParam::Omega),
            "eta" => Ok(SweepParam::Eta),
            "G" | "g" => Ok(SweepParam::G),
            "kappa" => Ok(SweepParam::Kappa),
            "t_end" => Ok(SweepParam::TEnd),
            _ => Err(format!(
                "unknown parameter {s:?}; expected Omega, eta, G, kappa or t_end"
            )),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "name": "demo",
        "mode": "reduced",
        "levels": {"omega_eg": 20, "omega_1g": 11, "omega_2g": 9},
        "cavity": {"omega_a": 10, "omega_b": 10, "kappa_a": 1, "kappa_b": 1},
        "couplings": {"g_1e": 1, "g_2e": [1, 0], "g_g1": 1, "g_g2": 1},
        "t_end": 6,
        "samples": 61
    }"#;

    #[test]
    fn minimal_scenario_resolves() {
        let s = Scenario::from_json(MINIMAL).unwrap();
        assert_eq!(s.eta, 1.0);
        assert_eq!(s.initial_state, InitialState::Named("e".into()));
        let r = s.resolve().unwrap();
        assert!(r.starts_excited);
        assert_eq!(r.times.len(), 61);
        assert!(r.config.is_symmetric());
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let text = MINIMAL.replace("\"samples\": 61", "\"samples\": 61, \"sampels\": 3");
        let err = Scenario::from_json(&text).unwrap_err().to_string();
        assert!(err.contains("sampels") && err.contains("line"), "{err}");
        let nested = MINIMAL.replace("\"kappa_b\": 1}", "\"kappa_b\": 1, \"q\": 2}");
        assert!(Scenario::from_json(&nested).is_err());
    }

    #[test]
    fn field_errors_name_the_field() {
        let mut s = Scenario::from_json(MINIMAL).unwrap();
        s.eta = 1.5;
        assert!(s.resolve().unwrap_err().to_string().contains("`eta`"));
        let mut s = Scenario::from_json(MINIMAL).unwrap();
        s.samples = 1;
        assert!(s.resolve().unwrap_err().to_string().contains("`samples`"));
        let mut s = Scenario::from_json(MINIMAL).unwrap();
        s.initial_state = InitialState::Named("x".into());
        assert!(s.resolve().unwrap_err().to_string().contains("`initial_state`"));
        let mut s = Scenario::from_json(MINIMAL).unwrap();
        s.cavity.kappa_a = 0.0;
        assert!(s.resolve().unwrap_err().to_string().contains("`cavity`"));
        let mut s = Scenario::from_json(MINIMAL).unwrap();
        s.couplings = None;
        assert!(s.resolve().is_err());
    }

    #[test]
    fn explicit_initial_matrix() {
        let mut s = Scenario::from_json(MINIMAL).unwrap();
        let half = JsonComplex::Real(0.5);
        let zero = JsonComplex::Real(0.0);
        let row = |i: usize| {
            (0..4)
                .map(|j| if i == j && i < 2 { half } else { zero })
                .collect::<Vec<_>>()
        };
        s.initial_state = InitialState::Matrix((0..4).map(row).collect());
        let r = s.resolve().unwrap();
        assert!(!r.starts_excited);
        assert_eq!(r.rho0.population(1), 0.5);
        // not positive
        let mut bad = s.clone();
        if let InitialState::Matrix(m) = &mut bad.initial_state {
            m[0][0] = JsonComplex::Real(1.5);
            m[1][1] = JsonComplex::Real(-0.5);
        }
        assert!(bad.resolve().is_err());
    }

    #[test]
    fn geometry_input() {
        let d = 1.0;
        let c = |re: f64, im: f64| JsonComplex::Pair(re, im);
        let z = JsonComplex::Real(0.0);
        let g = GeometrySpec {
            d_1e: [c(-d, 0.0), c(0.0, d), z],
            d_2e: [c(d, 0.0), c(0.0, d), z],
            d_g1: [c(-d, 0.0), c(0.0, -d), z],
            d_g2: [c(d, 0.0), c(0.0, -d), z],
            epsilon_a: [JsonComplex::Real(1.0), z, z],
            epsilon_b: [JsonComplex::Real(1.0), z, z],
            k_hat: [0.0, 1.0, 0.0],
            scale_a: 1.0,
            scale_b: 1.0,
        };
        let mut s = Scenario::from_json(MINIMAL).unwrap();
        s.couplings = None;
        s.geometry = Some(g.clone());
        let r = s.resolve().unwrap();
        assert_eq!(r.config.couplings.g_1e, Complex64::new(-1.0, 0.0));
        let mut both = s.clone();
        both.couplings = Scenario::from_json(MINIMAL).unwrap().couplings;
        assert!(both.resolve().is_err());
        let mut skew = s;
        skew.geometry.as_mut().unwrap().epsilon_a = [z, JsonComplex::Real(1.0), z];
        assert!(skew.resolve().unwrap_err().to_string().contains("transverse"));
    }

    #[test]
    fn parameter_substitution() {
        let s = Scenario::from_json(MINIMAL).unwrap();
        let o = s.with_param(SweepParam::Omega, 3.0).unwrap();
        assert_eq!((o.levels.omega_1g, o.levels.omega_2g), (13.0, 7.0));
        let g = s.with_param(SweepParam::G, 0.2).unwrap().resolve().unwrap();
        assert!((g.config.couplings.max_norm() - 0.2).abs() < 1e-15);
        let k = s.with_param(SweepParam::Kappa, 2.0).unwrap();
        assert_eq!((k.cavity.kappa_a, k.cavity.kappa_b), (2.0, 2.0));
        assert_eq!("Omega".parse::<SweepParam>().unwrap(), SweepParam::Omega);
        assert!("omega2".parse::<SweepParam>().is_err());
    }

    #[test]
    fn round_trip() {
        let s = Scenario::centred("x", Mode::Reduced, 3.0, 1.0).unwrap();
        assert_eq!(Scenario::from_json(&s.to_json()).unwrap(), s);
    }
}
