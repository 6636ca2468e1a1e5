//! Exact transition probabilities for the inhomogeneous q-deformed totally
//! asymmetric zero range process on `Z`.
//!
//! Particles sit on integer sites, several per site. The top particle of a
//! stack of height `h` at site `s` jumps to `s + 1` at rate `a_s (1 - q^h)`.
//! States are recorded as weakly decreasing coordinate vectors.
//!
//! [`transition`] evaluates the Bethe-ansatz permutation sum of contour
//! integrals. [`oracle`] solves the truncated master equation and
//! [`montecarlo`] samples trajectories; both serve as independent checks.

pub mod bethe;
pub mod cli;
pub mod montecarlo;
pub mod oracle;
pub mod qcore;
pub mod quadrature;
pub mod transition;
pub mod verify;

pub use qcore::{ModelError, QParams, RateProfile, StateVector};
pub use transition::{
    one_particle_prob, step_init_prob, transition_probability, ContourOptions, ProbabilityResult,
    TransitionError, TransitionRequest,
};
