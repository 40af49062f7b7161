//! Identifiability testing of ODE model parameters by radial penalization.
//!
//! After a model has been fitted, a second fit is performed with a penalty
//! that pulls the parameter vector to a sphere of radius `R` around the
//! estimate. If the objective does not increase, the parameters can be moved
//! without losing agreement with the data and the model is structurally
//! non-identifiable.
//!
//! The numerical core is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the scalar to `f64`, which is what the CLI and the shipped
//! models use.

pub mod error;
pub mod exprlang;
pub mod identifiability;
pub mod linalg;
pub mod model;
pub mod objective;
pub mod optimize;
pub mod scalar;
pub mod simulate;

pub use error::{Error, IntegrationError, Result};
pub use scalar::Real;

pub use identifiability::{ItrpConfig, ProfileGrid, Verdict};
pub use model::{load_data, load_model, Dataset, Model, ParameterSpace, PositiveControlTransform};
pub use objective::Problem;
pub use optimize::OptimizerConfig;
pub use simulate::IntegratorConfig;

pub type FitResult = optimize::FitResult<f64>;
pub type StartRecord = optimize::StartRecord<f64>;
pub type ItrpReport = identifiability::ItrpReport<f64>;
pub type IterationTrail = identifiability::IterationTrail<f64>;
pub type RadialProfile = identifiability::RadialProfile<f64>;
pub type ProfileCurve = identifiability::ProfileCurve<f64>;
pub type Trajectory = simulate::Trajectory<f64>;
pub type RadialPenalty = objective::RadialPenalty<f64>;
pub type ObjectiveSpec = objective::ObjectiveSpec<f64>;
