//! Computational companion for monochromatic solutions of `p1 - p2 = p3 - 1`
//! in colourings of the primes: prime-weighted exponential sums, Farey arcs,
//! density increments, translate averaging, the colour bootstrap and exact
//! small-case threshold searches.

pub mod arcs;
pub mod csv;
pub mod error;
pub mod increment;
pub mod phase;
pub mod prime_core;
pub mod regularity;
pub mod set;
pub mod spectral;

pub use error::{LabError, Result};
pub use set::IntSet;
