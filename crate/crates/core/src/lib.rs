//! Compressive recovery of block-sparse signals whose blocks live in the
//! subspaces of a fusion frame.
//!
//! The crate is organised bottom-up:
//!
//! - [`block`]: block vectors, mixed norms, block sign and best s-term error.
//! - [`frame`]: fusion frames, frame bounds and the incoherence matrix.
//! - [`measurement`]: random scalar matrices and the induced block operators.
//! - [`solver`]: mixed ℓ2,1 recovery programs (noiseless, noisy, block baseline).
//! - [`certificate`]: Gram conditions and golfing-scheme dual certificates.
//! - [`bounds`]: closed-form sample-complexity conditions and tail bounds.
//! - [`experiments`]: seeded Monte-Carlo sweeps emitting CSV.

pub mod block;
pub mod bounds;
pub mod certificate;
pub mod error;
pub mod experiments;
pub mod frame;
mod linalg;
pub mod measurement;
pub mod rng;
pub mod solver;

pub use block::{BlockForm, BlockSupport, BlockVector};
pub use error::{Error, Result};
pub use frame::{FusionFrame, IncoherenceMatrix, RestrictedNorms};
pub use measurement::{MatrixKind, MeasurementEnsemble, NoisySample};
pub use solver::{SolveReport, SolverConfig};
