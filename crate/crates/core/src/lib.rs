//! Genetic algorithms with a continually retrained regression surrogate.
//!
//! A run keeps a dataset of every individual whose fitness was computed by the
//! simulator. A weighted linear model fitted to that dataset supplies
//! approximate fitness for the part of the population that is not simulated
//! once a switch condition puts the run into prediction mode.
//!
//! Modules:
//!
//! - [`genome`]: policy vectors, genetic operators, similarity metrics.
//! - [`envs`]: Blackjack and Frozen Lake simulators plus exact evaluators.
//! - [`surrogate`]: population dataset, sample weights, Ridge/Lasso/ELM.
//! - [`strategy`]: switch conditions and sampling strategies.
//! - [`engine`]: the GA loop and its fitness-approximation variants.
//! - [`stats`]: permutation test and replicate summaries.
//! - [`experiment`]: config-driven replicated experiments and result files.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod engine;
pub mod envs;
pub mod error;
pub mod experiment;
pub mod genome;
pub mod rng;
pub mod stats;
pub mod strategy;
pub mod surrogate;

pub use error::{Error, Result};
