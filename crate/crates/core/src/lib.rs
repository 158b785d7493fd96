//! Randomized leader election on anonymous, unidirectional rings whose
//! links only guarantee a bound on the *expected* message delay.
//!
//! The crate is organized bottom-up:
//!
//! - [`protocol`]: the pure per-node state machine.
//! - [`timing`]: delay, clock and processing-time models.
//! - [`sim`]: the seeded discrete-event simulator, and [`batch`] for
//!   independent repetitions.
//! - [`monitor`]: the correctness invariants as executable checks.
//! - [`analysis`]: closed-form complexity bounds and the optimal activation
//!   parameter.
//! - [`dtmc`]: exact Markov-chain analysis of small synchronous rings.
//! - [`experiment`] and [`checks`]: sweeps, scaling studies, CSV output and
//!   the acceptance matrix driven by the command-line front end.

pub mod analysis;
pub mod batch;
pub mod checks;
pub mod dtmc;
pub mod error;
pub mod experiment;
pub mod monitor;
pub mod protocol;
pub mod sim;
pub mod timing;

pub use error::{ElectionError, Result};
