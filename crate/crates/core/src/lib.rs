//! Four-level cascade atom in a two-mode bad cavity: cavity-eliminated
//! reduced dynamics, closed-form solutions, and the full atom-field model
//! used to check the elimination.

pub mod analytic;
pub mod composite;
pub mod error;
pub mod integrator;
pub mod linalg;
pub mod model;
pub mod reduced;
pub mod series;

pub use error::DynamicsError;
pub use integrator::{integrate, IntegrationStats, IntegratorConfig, IntegratorError, Trajectory};
pub use linalg::{ComplexMatrix, DensityMatrix, LinalgError};
pub use model::{
    CavityParams, Configuration, CouplingSet, Detunings, DipoleGeometry, LevelScheme, ModelError, RateSet,
};
pub use reduced::{evolve, rhs_element_form, rhs_operator_form, ReducedModel};
pub use series::{Diagnostic, Level, TimeSeries};
