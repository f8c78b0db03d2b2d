//! Staggered-grid simulation of isothermal binary compressible fluid mixtures
//! with a linear, second-order, energy-stable time discretisation.

// `!(x > 0.0)` is used on purpose so that NaN fails the check
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod energy;
pub mod error;
pub mod grid;
pub mod io_cli;
pub mod scheme;
pub mod solver;

pub use error::{Error, Result};
