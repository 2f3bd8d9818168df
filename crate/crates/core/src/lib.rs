//! Asynchronous stochastic approximation and Q-learning with finite-sample
//! error bounds under Markovian sampling.

// `!(x > 0.0)` is used on purpose so NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod chain;
pub mod error;
pub mod harness;
pub mod matrix;
pub mod mdp;
pub mod norms;
pub mod qlearning;
pub mod sa;
pub mod seeding;

pub use error::{Error, Result};
pub use matrix::Matrix;
