//! Batch front-end for the Steklov-Dirichlet solver: sweeps over the hole
//! offset, convergence studies, derivative checks and closed-form bounds.

pub mod config;
pub mod error;
pub mod output;
pub mod runs;

pub use config::Config;
pub use error::CliError;
