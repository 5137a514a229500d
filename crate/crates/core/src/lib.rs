#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod bernstein;
pub mod bounds;
pub mod cli;
pub mod error;
pub mod functions;
pub mod numerics;
pub mod report;
pub mod sharpness;
pub mod subgaussian;

pub use error::{Error, Result};
