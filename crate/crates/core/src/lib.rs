//! Function-specific mixing times for finite reversible Markov chains.
//!
//! The crate computes how quickly the expectation of a particular function
//! `f: [d] -> [0, 1]` equilibrates under a chain, bounds that speed through
//! the part of the spectrum `f` actually sees, and turns the result into
//! Hoeffding-type tail bounds, confidence intervals and sequential tests.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod chain;
pub mod concentration;
pub mod discrepancy;
pub mod error;
pub mod intervals;
pub mod seqtest;
pub mod simulate;
pub mod zoo;

pub use chain::{spectral_decompose, stationary_distribution, validate_chain, SpectralDecomposition, TransitionMatrix};
pub use error::{Error, Result};
