//! Discrete harmonic analysis on spaces of homogeneous type.
//!
//! The crate builds finite lattices with a quasi-metric and a cell measure,
//! dyadic cube systems on them, and the operators, square functions and
//! sparse families that act on scalar functions over those lattices. All
//! computations are deterministic.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dyadic;
pub mod error;
pub mod function;
pub mod harness;
pub mod martingale;
pub mod operators;
pub mod space;
pub mod sparse;
pub mod stats;
pub mod variation;
pub mod weights;

pub use error::{Error, Result};
pub use function::GridFunction;
pub use space::{Space, SpaceKind, SpaceSpec};
