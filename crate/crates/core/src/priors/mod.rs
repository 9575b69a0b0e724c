//! Per-mode priors. Each prior resamples its own hyperparameters from the
//! mode's current factors, then hands the entity loop what it needs to draw
//! each latent vector.

use std::fmt;
use std::sync::Arc;

use crate::data::SideInfo;
use crate::error::{Error, Result};
use crate::factors::FactorMatrix;
use crate::linalg::{chol_spd, CholFactor, PrecisionStats, SpdMatrix};
use crate::rng::{ModeStreams, RngStream};

pub mod macau;
pub mod normal;
pub mod sns;

pub use macau::{link_offset, sample_link_matrix, LinkSolver};
pub use normal::{
    normal_wishart_posterior, sample_hyper_normal, sample_latent_gaussian, ModeHyper, NormalWishartHyper,
    NwPosterior,
};
pub use sns::{sample_latent_sns, sample_sns_hyper, SnsHyper, SnsParams};

const PURPOSE_NORMAL_WISHART: u64 = 0;
const PURPOSE_LINK: u64 = 1;
const PURPOSE_SNS: u64 = 2;

/// Prior configuration for one mode.
#[derive(Clone, Debug, PartialEq)]
pub enum PriorSpec {
    Normal(NormalWishartHyper),
    Macau {
        hyper: NormalWishartHyper,
        side: Arc<SideInfo>,
        beta_precision: f64,
    },
    SpikeAndSlab(SnsHyper),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PriorKind {
    Normal,
    Macau,
    SpikeAndSlab,
}

impl PriorKind {
    pub fn name(self) -> &'static str {
        match self {
            PriorKind::Normal => "normal",
            PriorKind::Macau => "macau",
            PriorKind::SpikeAndSlab => "spikeandslab",
        }
    }
}

impl fmt::Display for PriorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for PriorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "normal" => Ok(PriorKind::Normal),
            "macau" => Ok(PriorKind::Macau),
            "spikeandslab" => Ok(PriorKind::SpikeAndSlab),
            other => Err(Error::Config(format!(
                "unknown prior `{other}`; use normal, macau or spikeandslab"
            ))),
        }
    }
}

impl PriorSpec {
    pub fn normal(k: usize) -> Self {
        PriorSpec::Normal(NormalWishartHyper::defaults(k))
    }

    pub fn macau(k: usize, side: Arc<SideInfo>, beta_precision: f64) -> Self {
        PriorSpec::Macau {
            hyper: NormalWishartHyper::defaults(k),
            side,
            beta_precision,
        }
    }

    pub fn spike_and_slab() -> Self {
        PriorSpec::SpikeAndSlab(SnsHyper::default())
    }

    pub fn kind(&self) -> PriorKind {
        match self {
            PriorSpec::Normal(_) => PriorKind::Normal,
            PriorSpec::Macau { .. } => PriorKind::Macau,
            PriorSpec::SpikeAndSlab(_) => PriorKind::SpikeAndSlab,
        }
    }
}

/// Gaussian-prior state shared by Normal and Macau.
#[derive(Clone, Debug)]
pub struct GaussianState {
    pub nw: NormalWishartHyper,
    pub hyper: ModeHyper,
}

#[derive(Clone, Debug)]
pub struct MacauState {
    pub gaussian: GaussianState,
    pub side: Arc<SideInfo>,
    pub beta_precision: f64,
    /// `D × K`, row-major.
    pub beta: Vec<f64>,
    solver: LinkSolver,
}

#[derive(Clone, Debug)]
pub struct SnsState {
    pub hyper: SnsHyper,
    pub params: SnsParams,
    /// Inclusion indicators, `K` per entity.
    pub z: Vec<u8>,
}

#[derive(Clone, Debug)]
pub enum PriorState {
    Normal(GaussianState),
    Macau(MacauState),
    SpikeAndSlab(SnsState),
}

impl PriorState {
    /// Initial state: one draw from the hyperprior; link matrix at zero;
    /// spike-and-slab indicators all on.
    pub fn init(spec: &PriorSpec, k: usize, n: usize, streams: ModeStreams) -> Result<Self> {
        let empty = FactorMatrix::zeros(k, 0);
        Ok(match spec {
            PriorSpec::Normal(nw) => {
                check_k(nw, k)?;
                let hyper = sample_hyper_normal(&empty, nw, &mut streams.purpose(PURPOSE_NORMAL_WISHART))?;
                PriorState::Normal(GaussianState { nw: nw.clone(), hyper })
            }
            PriorSpec::Macau {
                hyper: nw,
                side,
                beta_precision,
            } => {
                check_k(nw, k)?;
                if side.n_entities() != n {
                    return Err(Error::Data(format!(
                        "side information has {} rows but the mode has {n} entities",
                        side.n_entities()
                    )));
                }
                let hyper = sample_hyper_normal(&empty, nw, &mut streams.purpose(PURPOSE_NORMAL_WISHART))?;
                let solver = LinkSolver::new(side, *beta_precision)?;
                PriorState::Macau(MacauState {
                    gaussian: GaussianState { nw: nw.clone(), hyper },
                    side: side.clone(),
                    beta_precision: *beta_precision,
                    beta: vec![0.0; side.n_features() * k],
                    solver,
                })
            }
            PriorSpec::SpikeAndSlab(hp) => {
                let params = SnsParams::sample_initial(hp, k, &mut streams.purpose(PURPOSE_SNS))?;
                PriorState::SpikeAndSlab(SnsState {
                    hyper: *hp,
                    params,
                    z: vec![1; k * n],
                })
            }
        })
    }

    pub fn kind(&self) -> PriorKind {
        match self {
            PriorState::Normal(_) => PriorKind::Normal,
            PriorState::Macau(_) => PriorKind::Macau,
            PriorState::SpikeAndSlab(_) => PriorKind::SpikeAndSlab,
        }
    }

    pub fn gaussian(&self) -> Option<&GaussianState> {
        match self {
            PriorState::Normal(g) => Some(g),
            PriorState::Macau(m) => Some(&m.gaussian),
            PriorState::SpikeAndSlab(_) => None,
        }
    }

    pub fn gaussian_mut(&mut self) -> Option<&mut GaussianState> {
        match self {
            PriorState::Normal(g) => Some(g),
            PriorState::Macau(m) => Some(&mut m.gaussian),
            PriorState::SpikeAndSlab(_) => None,
        }
    }

    /// Hyperparameter phase for one mode, run serially between entity sweeps.
    pub fn sample_hyper(&mut self, u: &FactorMatrix, streams: ModeStreams) -> Result<()> {
        match self {
            PriorState::Normal(g) => {
                g.hyper = sample_hyper_normal(u, &g.nw, &mut streams.purpose(PURPOSE_NORMAL_WISHART))?;
            }
            PriorState::Macau(m) => {
                let k = u.num_latent();
                let n = u.n_entities();
                // μ and Λ from the residuals u_i − βᵀf_i
                let mut resid = u.clone();
                let mut off = vec![0.0; k];
                for i in 0..n {
                    link_offset(&m.beta, &m.side, i, k, &mut off);
                    for (r, o) in resid.col_mut(i).iter_mut().zip(&off) {
                        *r -= o;
                    }
                }
                m.gaussian.hyper =
                    sample_hyper_normal(&resid, &m.gaussian.nw, &mut streams.purpose(PURPOSE_NORMAL_WISHART))?;
                m.beta = sample_link_matrix(
                    u,
                    &m.gaussian.hyper.mu,
                    &m.gaussian.hyper.lambda,
                    &m.side,
                    m.beta_precision,
                    &m.solver,
                    &mut streams.purpose(PURPOSE_LINK),
                )?;
            }
            PriorState::SpikeAndSlab(st) => {
                st.params = sample_sns_hyper(&st.hyper, u, &st.z, &mut streams.purpose(PURPOSE_SNS))?;
            }
        }
        Ok(())
    }
}

fn check_k(nw: &NormalWishartHyper, k: usize) -> Result<()> {
    if nw.num_latent() != k {
        return Err(Error::Config(format!(
            "prior hyperparameters have dimension {}, expected K={k}",
            nw.num_latent()
        )));
    }
    Ok(())
}

/// Read-only view of a prior used inside the parallel entity sweep.
pub enum EntityPrior<'a> {
    Gaussian {
        lambda: &'a SpdMatrix,
        /// `Λμ`
        lambda_mu: Vec<f64>,
        link: Option<(&'a [f64], &'a SideInfo)>,
        /// `chol(Λ + A)` when every entity shares the same `A`.
        shared: Option<CholFactor>,
    },
    SpikeAndSlab(&'a SnsParams),
}

impl<'a> EntityPrior<'a> {
    /// `shared_a` is the likelihood precision common to all entities, when
    /// the mode only touches fully-known matrices.
    pub fn new(state: &'a PriorState, shared_a: Option<&SpdMatrix>) -> Result<Self> {
        let gaussian = |g: &'a GaussianState, link| -> Result<Self> {
            let shared = match shared_a {
                Some(a) => {
                    let mut post = g.hyper.lambda.clone();
                    post.add_assign(a);
                    Some(chol_spd(&post)?)
                }
                None => None,
            };
            Ok(EntityPrior::Gaussian {
                lambda: &g.hyper.lambda,
                lambda_mu: g.hyper.lambda.mul_vec(&g.hyper.mu),
                link,
                shared,
            })
        };
        match state {
            PriorState::Normal(g) => gaussian(g, None),
            PriorState::Macau(m) => gaussian(&m.gaussian, Some((&m.beta[..], &*m.side))),
            PriorState::SpikeAndSlab(st) => Ok(EntityPrior::SpikeAndSlab(&st.params)),
        }
    }

    /// Resample entity `i` in place. `z` is required for spike-and-slab.
    pub fn sample(
        &self,
        i: usize,
        u: &mut [f64],
        z: Option<&mut [u8]>,
        stats: &PrecisionStats,
        s: &mut RngStream,
    ) -> Result<()> {
        match self {
            EntityPrior::Gaussian {
                lambda,
                lambda_mu,
                link,
                shared,
            } => {
                let k = u.len();
                let mut h = lambda_mu.clone();
                if let Some((beta, side)) = link {
                    let mut off = vec![0.0; k];
                    link_offset(beta, side, i, k, &mut off);
                    for (x, y) in h.iter_mut().zip(lambda.mul_vec(&off)) {
                        *x += y;
                    }
                }
                for (x, y) in h.iter_mut().zip(&stats.b) {
                    *x += y;
                }
                let draw = match shared {
                    Some(f) => crate::linalg::sample_mvn_with_factor(s, f, &h),
                    None => {
                        let mut post = (*lambda).clone();
                        post.add_assign(&stats.a);
                        crate::linalg::sample_mvn_canonical(s, &post, &h)?
                    }
                };
                u.copy_from_slice(&draw);
                Ok(())
            }
            EntityPrior::SpikeAndSlab(params) => {
                let z = z.ok_or_else(|| Error::Data("spike-and-slab update without indicators".into()))?;
                sample_latent_sns(u, z, params, stats, s)
            }
        }
    }
}
