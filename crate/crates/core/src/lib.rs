//! Finite-scale laboratory for l^p dimension of representations of sofic equivalence
//! relations, and for discrete l^p cohomology of graphings.
//!
//! Measure spaces are finite weighted atom spaces; sofic approximations are explicit
//! partial-bijection images at a chosen scale `d`.

pub mod algebra;
pub mod covering;
pub mod error;
pub mod graphcoh;
pub mod graphings;
pub mod homdim;
pub mod lp;
pub mod relation;
pub mod sofic;

pub use error::{Error, Result};
