//! First Steklov-Dirichlet eigenvalue of a domain with a translated circular
//! hole: P1 discretization, eigensolver, shape derivatives in the offset and
//! closed-form shell values.

pub mod analytic;
pub mod eig;
pub mod error;
pub mod fem;
pub mod geometry;
pub mod instance;
pub mod shape;
pub mod sparse;

pub use error::{Error, Result};
