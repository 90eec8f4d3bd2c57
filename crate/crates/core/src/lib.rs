//! Particle creation by moving mirrors in 1+1 dimensions: homographic ray
//! maps, cavity ray iteration, energy densities and spectra.

pub mod error;
pub mod homography;
pub mod iteration;
pub mod jet;
pub mod quadrature;
pub mod radiation_cavity;
pub mod radiation_single;
pub mod specfun;
pub mod trajectory;
pub mod verify;

pub use error::{Error, Result};
