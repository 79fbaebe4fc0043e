//! Fenchel-Young losses, gradient-energy diagnostics for neural networks,
//! extended-smoothness SGD and information-theoretic risk bounds.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod dataio;
pub mod diagnostics;
pub mod error;
pub mod generators;
pub mod harness;
pub mod netcore;
pub mod optim;

pub use error::{Error, Result};
