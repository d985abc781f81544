//! Modal output-feedback boundary control of a semilinear heat equation on a
//! rectangle: spectral basis, boundary lifting, gain synthesis, sensor
//! partitions and closed-loop simulation.

// `!(x > 0.0)` is the NaN-rejecting form; index loops mirror the formulas.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod config;
pub mod design;
pub mod error;
pub mod fit;
pub mod io;
pub mod lifting;
pub mod linalg;
pub mod par;
pub mod sensors;
pub mod sim;
pub mod spectral;
pub mod verify;

pub use error::{Error, Result};
