//! Resonances of 2x2 matrix semiclassical Schrödinger operators with a
//! crossing between a bound and a dissociative channel.
//!
//! The crate builds the operator from expression-tree potentials, computes
//! the Agmon geometry that predicts the width, solves the complex-distorted
//! eigenproblem, and fits the width law over sweeps in `h`.

pub mod error;
pub mod geometry;
pub mod harness;
pub mod model;
pub mod numerics;
pub mod spectral;
pub mod width;
pub mod wkb;

pub use error::{Error, Result};
