// `!(x > 0.0)` is the NaN-rejecting form; index loops mirror the maths.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analysis;
pub mod cohort;
pub mod error;
pub mod eval;
pub mod model;
pub mod nn;
pub mod rng;
pub mod selftest;

pub use error::{Error, Result};
pub use nn::Matrix;
pub use rng::Rng;
