//! Numerical toolkit for spherical means and maximal functions on the
//! Heisenberg group.

pub mod corpus;
pub mod dyadic;
pub mod error;
pub mod func;
pub mod heis;
pub mod laguerre;
pub mod means;
pub mod quad;
pub mod regions;
pub mod spectral;
pub mod sparse;
pub mod weights;

pub use error::{HeisError, Result};
pub use heis::{BoxRegion, HeisPoint};
