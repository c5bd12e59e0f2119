//! Training engine for small feed-forward classifiers whose optimizer
//! embeds simulated annealing inside SGD: each minibatch step draws a
//! learning rate from a discrete candidate set, applies the gradient move,
//! and accepts or rejects the result by the Metropolis criterion under a
//! geometrically cooled temperature.
//!
//! Alongside the annealed optimizer (`sgd-sa`) the crate ships a scheduled
//! SGD baseline, a derivative-free two-sided random-direction annealer
//! (`ssa`), deterministic substream-based randomness so whole runs are
//! bit-reproducible from one seed, IDX/CSV ingestion, and an experiment
//! harness with per-epoch CSV metrics and best-on-validation checkpoints.

pub mod anneal;
pub mod cli;
pub mod data;
pub mod error;
pub mod gradcheck;
pub mod harness;
pub mod matrix;
pub mod nn;
pub mod optim;
pub mod rng;

pub use error::{Error, Result};
