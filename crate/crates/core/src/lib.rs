//! Markov chains observed on a coarse grid and their diffusion limits:
//! transition densities, Edgeworth corrections, likelihood-ratio statistics
//! and the Monte Carlo experiments built on them.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod density;
pub mod edgeworth;
pub mod error;
pub mod limits;
pub mod models;
pub mod paths;
pub mod quadrature;
pub mod rng;
pub mod special;

pub use error::{Error, Result};
