//! Wiener chaos expansions of random fields driven by discretized white
//! noise, their large-deviations rate functions, and tilted Monte Carlo
//! estimators for rare-event probabilities.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod applications;
pub mod chaos;
pub mod cli;
pub mod checks;
pub mod error;
pub mod family;
pub mod fbm;
pub mod grid;
pub mod kernel;
pub mod kernel_io;
pub mod ldp;
pub mod noise;
pub mod process;
pub mod rate;
pub mod serde_ext;

pub use error::{Error, Result};
