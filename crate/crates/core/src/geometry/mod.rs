//! Outer domains, the moving hole and boundary-fitted triangulations of the
//! perforated domain.

mod domain;
mod mesh;

pub use domain::*;
pub use mesh::*;
