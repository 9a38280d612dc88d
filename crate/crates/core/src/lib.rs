//! Floquet and complex-scaling solver for microwave ionization of a
//! one-dimensional Rydberg atom.

// `!(x > 0.0)` rejects NaN along with non-positive values
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// banded kernels read clearer with explicit indices
#![allow(clippy::needless_range_loop)]

pub mod banded;
pub mod basis;
pub mod cli;
pub mod eigensolve;
pub mod error;
pub mod floquet;
pub mod observables;
pub mod oracle;
pub mod pipeline;
pub mod quadrature;
pub mod threshold;
pub mod units;

pub use error::{Error, Result};
