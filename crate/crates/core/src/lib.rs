//! Coupled fractional Gauss maps.
//!
//! A lattice of Gauss maps `f(x) = exp(-ν x²) + β` whose sites evolve with
//! power-law memory of all past increments, coupled on a ring, globally, or
//! on a small-world network. The crate provides the memory kernel, the
//! time-stepping engine, observables and fits, and the experiment layer
//! (configuration, scans, synchronization-time ensembles, CSV/PGM output)
//! used by the `fracgauss` command-line tool.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN.

pub mod analysis;
pub mod config;
pub mod engine;
pub mod error;
pub mod experiment;
pub mod export;
pub mod kernel;
pub mod maps;
pub mod topology;

pub use error::{Error, Result};
