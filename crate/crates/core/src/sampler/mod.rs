//! The Gibbs session.

mod aggregate;
mod config;
mod session;

pub use aggregate::PredictionAggregate;
pub use config::{SessionConfig, DEFAULT_SPLIT_THRESHOLD};
pub use session::{IterationRecord, LatentModel, Phase, RunSummary, Session, ViewSet};
