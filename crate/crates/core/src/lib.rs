//! Leading cruise control (LCC) for mixed traffic.
//!
//! A single CAV drives inside a chain of human-driven vehicles (HDVs) that
//! follow the optimal velocity model. The crate builds the linearized
//! platoon models, checks controllability and observability, computes
//! control-energy metrics, evaluates head-to-tail string stability of the
//! CAV feedback law, and runs nonlinear time-domain simulations.

pub mod analysis;
pub mod error;
pub mod linalg;
pub mod scenarios;
pub mod sim;
pub mod stability;
pub mod system;
pub mod vehicle;

pub use error::{LccError, Result};
pub use system::{build_system, closed_loop_matrix, FeedbackGains, GainPair, StateSpaceModel, SystemVariant};
pub use vehicle::{DriverParams, Equilibrium, LinearCoeffs};
