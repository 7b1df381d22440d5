//! Once-reinforced random walk (ORRW) on the half-line.
//!
//! The walk starts at 0, is reflected at the origin, moves as a fair coin in
//! the interior of its range, and steps onto a fresh site from its running
//! maximum with probability `1/(1+c)`. This crate provides
//!
//! * [`walk`]: the step kernel, trajectory simulation and first-passage samplers,
//! * [`exact`]: forward dynamic programming for the law of `(X_n, R_n)`,
//! * [`genfun`]: closed-form generating functions of hitting and first-passage times,
//! * [`asymptotics`]: limit constants of the range moments and numerical
//!   checks of the Tauberian transfer,
//! * [`montecarlo`]: reproducible replicated estimators and goodness-of-fit reports,
//! * [`cli`]: the `orrw` command-line front end.

pub mod asymptotics;
pub mod cli;
mod error;
pub mod exact;
pub mod genfun;
pub mod montecarlo;
pub mod quadrature;
pub mod stats;
pub mod walk;

pub use error::{Error, Result};
pub use walk::{ReinforcementParams, SeedSpec, WalkState};
