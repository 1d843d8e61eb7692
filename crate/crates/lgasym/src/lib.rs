//! Exact ψ-class, Θ-class and r-spin intersection numbers from determinantal
//! kernel formulas, and the subleading large-genus asymptotics obtained from
//! the Borel singularities of the correlators.

#![allow(clippy::needless_range_loop, clippy::type_complexity)]

pub mod asymptotics;
pub mod correlators;
pub mod error;
pub mod exact;
pub mod harness;
pub mod series;
pub mod symfun;
pub mod wave;

pub use error::{Error, Result};
