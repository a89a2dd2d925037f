//! Ruin probabilities of a biased nearest-neighbour walk on `{0, ..., a}` that
//! is sent back to its start with probability `gamma` at every tick.
//!
//! Three independent routes give the same number: a spectral closed form
//! ([`ruin_probability_spectral`]), the renewal ratio of generating functions
//! ([`ruin_probability_renewal`]) and a direct solve of the one-step recursion
//! ([`exact_ruin`]). [`montecarlo`] simulates the walk itself and [`critical`]
//! studies how the ruin probability responds to the reset rate.

pub mod config;
pub mod critical;
pub mod error;
pub mod montecarlo;
pub mod oracle;
mod precision;
pub mod renewal;
pub mod spectral;

pub use config::WalkConfig;
pub use critical::{
    bias_shift_coefficient, central_site_bound, derivative, midpoint_invariance_sweep, sign_change,
    Bracket, CriticalPointReport, DerivativeComponents,
};
pub use error::{Error, Result};
pub use montecarlo::{estimate_ruin, simulate_trajectory, Boundary, McEstimate, StreamRng, TrajectoryOutcome};
pub use oracle::{discounted_dp, doob_symmetry_check, exact_ruin, exact_split, finite_time_dp, LinearSystem};
pub use renewal::{
    finite_time_spectral, generating_functions, ruin_probability_renewal, truncation_horizon,
    FiniteTimeDistribution, GeneratingFunctions,
};
pub use spectral::{
    absorption_split, classical_ruin, decompose, eigenvalue, midpoint_value, reset_weight,
    ruin_probability_spectral, AbsorptionSplit, SpectralDecomposition, SpectralMode,
};
