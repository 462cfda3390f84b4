//! Degrees-of-freedom region calculator for the 3-user M×N MIMO interference
//! channel, with alignment-chain constructions checked numerically on random
//! channels and an independent leakage-minimization oracle.

pub mod alignment;
pub mod cli;
pub mod error;
pub mod linalg;
pub mod model;
pub mod oracle;
pub mod rational;
pub mod region;

pub use error::{DofError, Result};
pub use rational::Rational;
