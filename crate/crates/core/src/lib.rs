//! Elitist particle filter based on evolutionary strategies (EPFES) for
//! nonlinear state-space system identification.

pub mod aec;
pub mod epfes;
pub mod error;
pub mod experiments;
pub mod oracles;
pub mod par;
pub mod reference;
pub mod signal;
pub mod ssm;
pub mod ungm;

pub use epfes::{ElitistParticleFilter, EpfesConfig, ScatterWeighting, ThresholdMode};
pub use error::{Error, Result};
pub use ssm::{NoiseSpec, ParticleSet, StateSpaceModel, StateVector};

/// Version of this crate, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
