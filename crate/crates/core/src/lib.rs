//! Relative-entropy-regularized empirical risk minimization over finite or
//! countable model sets: Gibbs posteriors, log-partition cumulants,
//! optimality diagnostics and generalization quantities.

pub mod config;
pub mod error;
pub mod generalization;
pub mod gibbs;
pub mod io;
pub mod measure;
pub mod optimality;
pub mod partition;
pub mod risk;
pub mod verify;

pub use error::{Error, Result};
