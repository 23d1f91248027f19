//! Exact and sampled thermodynamics of spin systems with Curie-Weiss or
//! orthogonal coupling matrices, aimed at checking mean-field factorization
//! of their correlation functions at finite size.
//!
//! * [`interactions`]: coupling matrices and their algebraic identities.
//! * [`gibbs`]: full enumeration of the Gibbs measure.
//! * [`correlations`]: higher correlation tensors, connected correlations
//!   and the restricted weighted sums built from them.
//! * [`montecarlo`]: Metropolis sampling beyond enumeration reach.
//! * [`analytics`]: closed-form limits and power-law decay fits.
//! * [`report`]: the CSV/JSON result schema shared with the CLI.

pub mod analytics;
pub mod correlations;
pub mod enumeration;
pub mod error;
pub mod format;
pub mod gibbs;
pub mod interactions;
pub mod montecarlo;
pub mod report;
pub mod spin;

pub use error::{Error, Result};
pub use gibbs::{EnsembleSummary, GibbsContext};
pub use interactions::{InteractionMatrix, MatrixKind, ModelSpec, SelfInteraction, SignPattern};
pub use spin::SpinConfiguration;

#[cfg(test)]
mod proptests;
