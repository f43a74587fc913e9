//! Stable laws, the stable generator, Lindeberg swapping and rate
//! experiments for normalized sums of heavy-tailed variables.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attraction;
pub mod bounds;
pub mod distances;
pub mod error;
pub mod experiment;
pub mod generator;
pub mod lindeberg;
pub mod mc;
pub mod quad;
pub mod rng;
pub mod smooth;
pub mod stable;

pub use error::{Error, ErrorClass, Result};
pub use quad::QuadConfig;
pub use stable::{SampleBatch, StableParams};
