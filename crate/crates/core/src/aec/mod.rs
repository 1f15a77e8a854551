//! Nonlinear acoustic echo cancellation benchmark.
//!
//! The echo path is a memoryless loudspeaker nonlinearity followed by a room
//! impulse response (a Hammerstein system). The canceller preprocesses the
//! loudspeaker signal with an odd Legendre polynomial, identifies the linear
//! part by NLMS and tracks the polynomial coefficients with a particle filter
//! that only models the direct-path region of the impulse response.

pub mod erle;
pub mod experiment;
pub mod legendre;
pub mod model;
pub mod nlms;
pub mod scenario;
pub mod split;

pub use erle::{erle_trace, ErleTracker};
pub use experiment::{
    direct_path_observation, run_aec_experiment, AecRunResult, AecRunSpec, AecSchedule, EstimatorFailure,
};
pub use legendre::{legendre_odd, preprocess, Preprocessor};
pub use model::{aec_observation_g, DirectPathInput, DirectPathModel};
pub use nlms::{FirFilter, NlmsParams};
pub use scenario::{simulate_microphone, true_nonlinearity, AecScenario, Nonlinearity, RirSpec, ScenarioSpec};
pub use split::{detect_peak_and_split, SaSplit};
