//! Bayesian matrix factorization by Gibbs sampling.
//!
//! A [`Session`] factorizes one matrix, or several matrices sharing a row
//! mode, with a per-mode prior ([`PriorSpec`]) and per-matrix Gaussian noise
//! ([`NoiseSpec`]). Every random draw comes from a counter-based stream keyed
//! by seed, iteration, mode and entity, and every reduction runs in a fixed
//! order, so results do not depend on the thread count.

pub mod bench;
pub mod cli;
pub mod data;
pub mod error;
pub mod factors;
pub mod io;
pub mod linalg;
pub mod noise;
pub mod priors;
pub mod rng;
pub mod sampler;
pub mod synth;

pub use data::{DenseMatrix, MatrixData, MatrixKind, SideInfo, SparseMatrix, TestSet, Triplet};
pub use error::{Error, Result};
pub use factors::FactorMatrix;
pub use noise::{NoiseSpec, NoiseState};
pub use priors::{PriorKind, PriorSpec, PriorState};
pub use sampler::{IterationRecord, PredictionAggregate, Session, SessionConfig, ViewSet};
