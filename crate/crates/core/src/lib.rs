//! Numerical laboratory for the long-time behavior of potential mean field
//! games on the flat torus.
//!
//! The crate solves finite-horizon potential MFG by direct minimization and by
//! fictitious play, estimates the ergodic constant from value slopes and from
//! the N-particle cell problem, and checks the energy invariant, corrector
//! convergence, Mather-measure properties and the Lax-Oleinik semigroup laws on
//! small grids.

// `!(x > 0.0)` is used on purpose so that NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acceptance;
pub mod ergodic;
pub mod error;
pub mod harness;
pub mod mather;
pub mod mfg;
pub mod model;
pub mod particle;
pub mod semigroup;
pub mod torus;

pub use error::{Error, Result};
