use crate::error::{Error, Result};
use crate::noise::NoiseSpec;
use crate::priors::PriorSpec;

/// Heavy-entity split threshold used when none is configured.
pub const DEFAULT_SPLIT_THRESHOLD: usize = 4096;

/// Everything that defines a run. Mode 0 is the (shared) row mode; mode
/// `v + 1` is the column mode of view `v`.
#[derive(Clone, Debug, PartialEq)]
pub struct SessionConfig {
    pub num_latent: usize,
    pub burnin: u64,
    pub nsamples: u64,
    pub seed: u64,
    /// Worker threads; 0 picks the machine default.
    pub threads: usize,
    /// Entities with more observations than this accumulate in parallel
    /// blocks.
    pub split_threshold: usize,
    pub row_prior: PriorSpec,
    /// One per view.
    pub col_priors: Vec<PriorSpec>,
    /// One per view.
    pub noise: Vec<NoiseSpec>,
    /// Snapshot cadence in iterations; 0 disables checkpoints.
    pub checkpoint_every: u64,
}

impl SessionConfig {
    /// Normal priors on both modes of a single matrix with the given noise.
    pub fn single(num_latent: usize, noise: NoiseSpec) -> Self {
        SessionConfig {
            num_latent,
            burnin: 100,
            nsamples: 200,
            seed: 0,
            threads: 0,
            split_threshold: DEFAULT_SPLIT_THRESHOLD,
            row_prior: PriorSpec::normal(num_latent),
            col_priors: vec![PriorSpec::normal(num_latent)],
            noise: vec![noise],
            checkpoint_every: 0,
        }
    }

    pub fn n_views(&self) -> usize {
        self.col_priors.len()
    }

    pub fn n_modes(&self) -> usize {
        1 + self.n_views()
    }

    pub fn prior(&self, mode: usize) -> &PriorSpec {
        if mode == 0 {
            &self.row_prior
        } else {
            &self.col_priors[mode - 1]
        }
    }

    pub fn total_iterations(&self) -> u64 {
        self.burnin + self.nsamples
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_latent == 0 {
            return Err(Error::Config("num_latent must be at least 1".into()));
        }
        if self.nsamples == 0 {
            return Err(Error::Config("nsamples must be at least 1".into()));
        }
        if self.split_threshold == 0 {
            return Err(Error::Config("split threshold must be at least 1".into()));
        }
        if self.col_priors.is_empty() {
            return Err(Error::Config("at least one view is required".into()));
        }
        if self.noise.len() != self.col_priors.len() {
            return Err(Error::Config(format!(
                "{} noise models for {} views",
                self.noise.len(),
                self.col_priors.len()
            )));
        }
        for n in &self.noise {
            n.validate()?;
        }
        Ok(())
    }
}
