//! Decentralized consensus ADMM over agent graphs where some agents broadcast
//! corrupted values, with a robust thresholding variant and numerical checks
//! of the associated convergence bounds.

pub mod costs;
pub mod engine;
pub mod error;
pub mod errors;
pub mod harness;
pub mod operators;
pub mod road;
pub mod theory;

pub use error::{AdmmError, Result};
