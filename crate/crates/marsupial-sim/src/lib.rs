//! Simulation library for marsupial carrier-passenger robot pairs.
//!
//! A large carrier robot transports a small passenger robot toward a fixed
//! target the carrier itself must never reach. Both robots follow single
//! integrator dynamics. The passenger's controller is driven by a cubic
//! potential gradient in the passenger-carrier distance whose equilibrium
//! structure depends on the carrier-target distance: while the carrier is far
//! away the passenger's resting point on the carrier is attracting, and as
//! the carrier closes in the attraction region shrinks to nothing, releasing
//! the passenger smoothly toward the target with no input discontinuity.
//!
//! The crate provides:
//!
//! - [`core`]: domain types (vectors, gains, world state) and validation,
//! - [`potential`]: the cubic potential gradient and its root structure,
//! - [`control`]: carrier/passenger control laws plus an event-triggered
//!   baseline used for smoothness comparisons,
//! - [`safety`]: a small quadratic-program control-barrier-function filter
//!   for obstacle avoidance,
//! - [`sim`]: fixed-step closed-loop integration with separation-event
//!   localization and trajectory recording,
//! - [`analysis`]: quantitative pass/fail property verification
//!   (separation, navigation, avoidance, Lyapunov monotonicity, smoothness),
//! - [`scenario`]: a strict `key = value` scenario file format,
//! - [`csv`]: deterministic trajectory serialization.
//!
//! All quantities are SI (meters, seconds, meters/second).

pub mod analysis;
pub mod control;
pub mod core;
pub mod csv;
pub mod potential;
pub mod safety;
pub mod scenario;
pub mod sim;

pub use crate::core::{
    compute_errors, validate, AttachmentMode, ErrorTriple, Params, Validity, Vector, Violation,
};
pub use crate::sim::{run, separation_time_oracle, SimConfig, Trajectory};
