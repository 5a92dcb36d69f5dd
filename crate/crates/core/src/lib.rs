//! Dynamics of a seven-qubit photon/matter cavity model of hydrogen
//! association and dissociation, and the photon/matter quantum discord
//! along its trajectories.
//!
//! The numerical core is generic over [`scalar::Real`] (`f32` or `f64`);
//! the aliases below fix it to `f64`.

pub mod analysis;
pub mod cli;
pub mod config;
pub mod discord;
pub mod dynamics;
pub mod experiment;
pub mod operators;
pub mod scalar;
pub mod statespace;

pub use discord::{DiscordEvaluator, DiscordPoint, MeasurementConfig, SearchConfig};
pub use dynamics::{evolve, initial_state, DensityMatrix, SimConfig, Trajectory};
pub use experiment::{Model, Run};
pub use operators::{ModelParams, OperatorMatrix};
pub use statespace::{BasisState, GatingPolicy, SpaceMode, StateSpace};

/// Complex `f64`.
pub type C64 = scalar::Cx<f64>;
/// Dense complex `f64` matrix.
pub type CMatrix64 = scalar::CMatrix<f64>;
pub type DensityMatrix64 = DensityMatrix<f64>;
pub type OperatorMatrix64 = OperatorMatrix<f64>;
pub type ModelParams64 = ModelParams<f64>;
pub type Trajectory64 = Trajectory<f64>;
pub type DiscordPoint64 = DiscordPoint<f64>;
