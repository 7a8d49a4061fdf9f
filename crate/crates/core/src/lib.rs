//! Extended-source internal DLA on the square lattice, together with the
//! discrete potential theory used to analyse it.

pub mod aggregation;
pub mod analysis;
pub mod error;
pub mod grid;
pub mod harmonic;
pub mod lattice;
pub mod potential;
pub mod rng;
pub mod sources;

pub use error::{Error, Result};
