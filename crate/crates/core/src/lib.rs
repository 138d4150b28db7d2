//! Regime-switching convergence trading.
//!
//! Two co-integrated stocks and a market index, with pricing errors whose
//! mean-reversion speeds and levels are modulated by a finite-state Markov
//! chain. The crate simulates the model, filters the hidden regime from
//! prices, computes log-optimal portfolios under full and partial
//! information and solves for the corresponding value functions.

// `!(v >= 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod exec;
pub mod filter;
pub mod model;
pub mod rng;
pub mod simulate;
pub mod strategy;
pub mod value;

pub use error::{Error, Result};
pub use exec::Execution;
pub use model::{DerivedConstants, GeneratorMatrix, Model, ModelParams, RegimeTable};
