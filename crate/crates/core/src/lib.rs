//! Numerical laboratory for dispersive equations with general symbols:
//! sector decompositions, directional norms, randomized data, ternary-tree
//! Duhamel expansions, the remainder fixed point and threshold arithmetic.

pub mod basis;
pub mod error;
pub mod evolution;
pub mod experiments;
pub mod field;
pub mod fixedpoint;
pub mod geometry;
pub mod norms;
pub mod symbol;
pub mod thresholds;
pub mod trees;

pub use error::{Error, Result};
