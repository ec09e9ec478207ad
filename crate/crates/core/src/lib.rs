//! Semi-discrete Brownian last-passage percolation on a uniform time grid.
//!
//! Environments are fields of two-sided Brownian lines sampled on a
//! [`GridSpec`]. Every supremum and argmax below is taken over grid points.

pub mod busemann;
pub mod distlib;
pub mod envgen;
pub mod geodesics;
pub mod lpp;
pub mod queueops;
pub mod rng;
pub mod stationary;

mod error;

pub use envgen::{BrownianField, GridFunction, GridSpec};
pub use error::{Error, Result};
pub use lpp::{PassagePath, Side, Site};
pub use rng::Stream;
