//! Trace a point in the circular restricted three-body problem to the halo
//! orbit it lies on, using partially inverted third-order
//! Lindstedt-Poincaré solutions.

pub mod config;
pub mod cr3bp;
pub mod cubic;
pub mod error;
pub mod experiment;
pub mod halo;
pub mod integrate;
pub mod inverse;
pub mod lp_series;

pub use error::{Error, Result};
