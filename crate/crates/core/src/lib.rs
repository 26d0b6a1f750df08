//! Message-passing optimization of sparse random constraint satisfaction
//! problems at large clause density.
//!
//! The pipeline: a boolean predicate is expanded over the Fourier basis of
//! the cube ([`predicate`]), its mixture polynomial drives a Parisi PDE
//! whose minimizing order parameter supplies per-iteration nonlinearities
//! ([`parisi`]), and an iterative message-passing engine runs those
//! nonlinearities on an index-regular random hypergraph ([`engine`]).
//! Statistical checks of the Gaussian state-evolution predictions live in
//! [`analysis`]; [`pipeline`] glues everything into reproducible runs.

pub mod analysis;
pub mod engine;
pub mod error;
pub mod instance;
pub mod parisi;
pub mod pipeline;
pub mod predicate;
pub mod rng;

pub use error::Error;
pub use instance::CspInstance;
pub use parisi::{ParisiSolution, PdeGrid, StepFunction};
pub use predicate::{MixturePolynomial, Predicate};

/// Embedded in every output file so results can be traced to a build.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
