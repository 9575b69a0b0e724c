use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;

use crate::data::{MatrixData, TestSet};
use crate::error::{Error, Result};
use crate::factors::FactorMatrix;
use crate::linalg::{accumulate_precision_split, PrecisionStats, SpdMatrix};
use crate::noise::NoiseState;
use crate::priors::{EntityPrior, PriorState};
use crate::rng::{stream_for, ModeStreams, INIT_ITERATION, PURPOSE_BASE};

use super::aggregate::{rmse_of, PredictionAggregate};
use super::config::SessionConfig;

/// Stream mode ids for per-view noise draws start here.
const NOISE_MODE_BASE: u32 = 1 << 20;

/// Matrices sharing one row mode. A single training matrix is a one-view set.
#[derive(Clone, Debug, PartialEq)]
pub struct ViewSet {
    views: Vec<MatrixData>,
}

impl ViewSet {
    pub fn new(views: Vec<MatrixData>) -> Result<Self> {
        let first = views
            .first()
            .ok_or_else(|| Error::Data("a view set needs at least one matrix".into()))?;
        let rows = first.n_rows();
        if let Some((v, m)) = views.iter().enumerate().find(|(_, m)| m.n_rows() != rows) {
            return Err(Error::Data(format!(
                "view {v} has {} rows, view 0 has {rows}; views must share the row dimension",
                m.n_rows()
            )));
        }
        Ok(ViewSet { views })
    }

    pub fn single(m: MatrixData) -> Self {
        ViewSet { views: vec![m] }
    }

    pub fn views(&self) -> &[MatrixData] {
        &self.views
    }

    pub fn n_rows(&self) -> usize {
        self.views[0].n_rows()
    }

    pub fn len(&self) -> usize {
        self.views.len()
    }

    pub fn is_empty(&self) -> bool {
        self.views.is_empty()
    }
}

struct ViewData {
    by_row: MatrixData,
    by_col: MatrixData,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    Burnin,
    Sample,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::Burnin => "burnin",
            Phase::Sample => "sample",
        }
    }
}

/// Per-iteration progress.
#[derive(Clone, Debug, PartialEq)]
pub struct IterationRecord {
    pub iteration: u64,
    pub phase: Phase,
    /// RMSE of the posterior-mean aggregate (sampling phase only).
    pub rmse_avg: Option<f64>,
    /// RMSE of this iteration's sample alone.
    pub rmse_1sample: Option<f64>,
    /// Noise precision of each view after this iteration.
    pub alphas: Vec<f64>,
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

impl IterationRecord {
    /// `key=value` progress line.
    pub fn progress_line(&self) -> String {
        let alphas: Vec<String> = self.alphas.iter().map(|a| a.to_string()).collect();
        format!(
            "iter={} phase={} rmse_avg={} rmse_1s={} alpha={}",
            self.iteration,
            self.phase.name(),
            opt(self.rmse_avg),
            opt(self.rmse_1sample),
            alphas.join(",")
        )
    }

    pub fn csv_header(n_views: usize) -> String {
        let mut h = "iteration,phase,rmse_avg,rmse_1sample".to_string();
        for v in 0..n_views {
            let _ = write!(h, ",alpha_{v}");
        }
        h
    }

    pub fn csv_row(&self) -> String {
        let mut row = format!(
            "{},{},{},{}",
            self.iteration,
            self.phase.name(),
            opt(self.rmse_avg),
            opt(self.rmse_1sample)
        );
        for a in &self.alphas {
            let _ = write!(row, ",{a}");
        }
        row
    }
}

#[derive(Clone, Debug)]
pub struct RunSummary {
    pub trace: Vec<IterationRecord>,
    pub final_rmse: Option<f64>,
}

/// Factors and prior state of every mode.
#[derive(Clone, Debug)]
pub struct LatentModel {
    pub factors: Vec<FactorMatrix>,
    pub priors: Vec<PriorState>,
}

/// A Gibbs sampling session over a view set.
pub struct Session {
    cfg: SessionConfig,
    views: Vec<ViewData>,
    test: Option<TestSet>,
    test_overlap: usize,
    model: LatentModel,
    noise: Vec<NoiseState>,
    aggregate: Option<PredictionAggregate>,
    trace: Vec<IterationRecord>,
    next_iteration: u64,
    pool: Arc<rayon::ThreadPool>,
}

impl Session {
    /// Validate the inputs and draw the initial state: factor entries
    /// `N(0, 1)/√K`, hyperparameters from their priors, adaptive noise from
    /// its Gamma prior.
    pub fn new(cfg: SessionConfig, data: ViewSet, test: Option<TestSet>) -> Result<Self> {
        cfg.validate()?;
        if data.len() != cfg.n_views() {
            return Err(Error::Config(format!(
                "{} views supplied but {} column priors configured",
                data.len(),
                cfg.n_views()
            )));
        }
        let test_overlap = match &test {
            Some(t) => t.validate_against(&data.views()[0])?,
            None => 0,
        };
        let k = cfg.num_latent;
        let mut sizes = vec![data.n_rows()];
        sizes.extend(data.views().iter().map(|m| m.n_cols()));

        let mut factors = Vec::with_capacity(sizes.len());
        let mut priors = Vec::with_capacity(sizes.len());
        let scale = 1.0 / (k as f64).sqrt();
        for (mode, &n) in sizes.iter().enumerate() {
            let mut f = FactorMatrix::zeros(k, n);
            for i in 0..n {
                let mut s = stream_for(cfg.seed, INIT_ITERATION, mode as u32, i as u64);
                for x in f.col_mut(i) {
                    *x = s.normal() * scale;
                }
            }
            factors.push(f);
            let streams = ModeStreams::new(cfg.seed, INIT_ITERATION, mode as u32);
            priors.push(PriorState::init(cfg.prior(mode), k, n, streams)?);
        }
        let noise = cfg
            .noise
            .iter()
            .enumerate()
            .map(|(v, spec)| {
                let mut s = stream_for(cfg.seed, INIT_ITERATION, NOISE_MODE_BASE + v as u32, PURPOSE_BASE);
                NoiseState::init(*spec, &mut s)
            })
            .collect::<Result<Vec<_>>>()?;

        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build()
            .map_err(|e| Error::Config(format!("cannot build thread pool: {e}")))?;

        let views = data
            .views
            .into_iter()
            .map(|m| ViewData {
                by_col: m.transpose(),
                by_row: m,
            })
            .collect();
        let aggregate = test.as_ref().map(PredictionAggregate::new);
        Ok(Session {
            cfg,
            views,
            test,
            test_overlap,
            model: LatentModel { factors, priors },
            noise,
            aggregate,
            trace: Vec::new(),
            next_iteration: 0,
            pool: Arc::new(pool),
        })
    }

    pub fn config(&self) -> &SessionConfig {
        &self.cfg
    }

    pub fn model(&self) -> &LatentModel {
        &self.model
    }

    pub fn factors(&self, mode: usize) -> &FactorMatrix {
        &self.model.factors[mode]
    }

    /// Replace one mode's factors (shape must match).
    pub fn set_factors(&mut self, mode: usize, f: FactorMatrix) -> Result<()> {
        let cur = &self.model.factors[mode];
        if cur.num_latent() != f.num_latent() || cur.n_entities() != f.n_entities() {
            return Err(Error::Data(format!(
                "mode {mode} factors must be {}x{}",
                cur.num_latent(),
                cur.n_entities()
            )));
        }
        self.model.factors[mode] = f;
        Ok(())
    }

    pub fn n_views(&self) -> usize {
        self.views.len()
    }

    /// Training matrix of view `v`, rows = the shared row mode.
    pub fn view(&self, v: usize) -> &MatrixData {
        &self.views[v].by_row
    }

    pub fn prior(&self, mode: usize) -> &PriorState {
        &self.model.priors[mode]
    }

    pub fn noise(&self) -> &[NoiseState] {
        &self.noise
    }

    pub fn aggregate(&self) -> Option<&PredictionAggregate> {
        self.aggregate.as_ref()
    }

    pub fn test_set(&self) -> Option<&TestSet> {
        self.test.as_ref()
    }

    /// Test cells that also appear in the training data.
    pub fn test_overlap(&self) -> usize {
        self.test_overlap
    }

    pub fn trace(&self) -> &[IterationRecord] {
        &self.trace
    }

    /// Index of the next iteration to run.
    pub fn iteration(&self) -> u64 {
        self.next_iteration
    }

    pub fn is_finished(&self) -> bool {
        self.next_iteration >= self.cfg.total_iterations()
    }

    pub fn n_modes(&self) -> usize {
        self.model.factors.len()
    }

    pub(crate) fn restore(
        &mut self,
        model: LatentModel,
        noise: Vec<NoiseState>,
        aggregate: Option<PredictionAggregate>,
        trace: Vec<IterationRecord>,
        next_iteration: u64,
    ) {
        self.model = model;
        self.noise = noise;
        self.aggregate = aggregate;
        self.trace = trace;
        self.next_iteration = next_iteration;
    }

    /// Prediction from the current sample.
    pub fn predict_current(&self, i: usize, j: usize) -> f64 {
        self.model.factors[0].dot(i, &self.model.factors[1], j)
    }

    /// Run to completion.
    pub fn run(&mut self) -> Result<RunSummary> {
        self.run_with(|_, _| Ok(()))
    }

    /// Run to completion, calling `hook` after every iteration.
    pub fn run_with<F>(&mut self, mut hook: F) -> Result<RunSummary>
    where
        F: FnMut(&Session, &IterationRecord) -> Result<()>,
    {
        while !self.is_finished() {
            let rec = self.step()?;
            hook(self, &rec)?;
        }
        Ok(RunSummary {
            trace: self.trace.clone(),
            final_rmse: self.aggregate.as_ref().and_then(|a| a.rmse().ok()),
        })
    }

    /// One full Gibbs iteration: column modes in view order, then the row
    /// mode, then noise, then predictions.
    pub fn step(&mut self) -> Result<IterationRecord> {
        let pool = self.pool.clone();
        pool.install(|| self.step_inner())
    }

    fn step_inner(&mut self) -> Result<IterationRecord> {
        let t = self.next_iteration;
        for mode in (1..self.n_modes()).chain(std::iter::once(0)) {
            self.update_mode_inner(mode, t)?;
        }

        for v in 0..self.views.len() {
            if self.noise[v].is_adaptive() {
                let sse = self.view_sse(v);
                let n = self.views[v].by_row.n_likelihood_cells();
                let mut s = stream_for(self.cfg.seed, t, NOISE_MODE_BASE + v as u32, PURPOSE_BASE);
                self.noise[v].update_precision(sse, n, &mut s)?;
            }
            let a = self.noise[v].current_precision();
            if !(a > 0.0 && a.is_finite()) {
                return Err(Error::Domain(format!("noise precision of view {v} became {a} at iteration {t}")));
            }
        }

        let phase = if t < self.cfg.burnin { Phase::Burnin } else { Phase::Sample };
        let (mut rmse_avg, mut rmse_1) = (None, None);
        if let Some(test) = &self.test {
            if !test.is_empty() {
                let rows = &self.model.factors[0];
                let cols = &self.model.factors[1];
                let preds: Vec<f64> = test.entries().par_iter().map(|&(i, j, _)| rows.dot(i, cols, j)).collect();
                let truth: Vec<f64> = test.entries().iter().map(|e| e.2).collect();
                rmse_1 = Some(rmse_of(&preds, &truth));
                if phase == Phase::Sample {
                    let agg = self.aggregate.as_mut().expect("aggregate exists with a test set");
                    agg.update(&preds);
                    rmse_avg = Some(agg.rmse()?);
                }
            }
        }
        let rec = IterationRecord {
            iteration: t,
            phase,
            rmse_avg,
            rmse_1sample: rmse_1,
            alphas: self.noise.iter().map(|n| n.current_precision()).collect(),
        };
        self.trace.push(rec.clone());
        self.next_iteration += 1;
        Ok(rec)
    }

    /// Resample the hyperparameters and every entity of one mode, with all
    /// other modes frozen.
    pub fn update_mode(&mut self, mode: usize, iteration: u64) -> Result<()> {
        let pool = self.pool.clone();
        pool.install(|| self.update_mode_inner(mode, iteration))
    }

    fn update_mode_inner(&mut self, mode: usize, iteration: u64) -> Result<()> {
        let k = self.cfg.num_latent;
        let streams = ModeStreams::new(self.cfg.seed, iteration, mode as u32);
        self.model.priors[mode].sample_hyper(&self.model.factors[mode], streams)?;

        let mut u = std::mem::replace(&mut self.model.factors[mode], FactorMatrix::zeros(k, 0));
        let mut z = match &mut self.model.priors[mode] {
            PriorState::SpikeAndSlab(st) => Some(std::mem::take(&mut st.z)),
            _ => None,
        };
        let result = self.sweep_entities(mode, iteration, &mut u, z.as_deref_mut());
        self.model.factors[mode] = u;
        if let (Some(z), PriorState::SpikeAndSlab(st)) = (z, &mut self.model.priors[mode]) {
            st.z = z;
        }
        result?;
        if let Some((entity, _)) = self.model.factors[mode].first_non_finite() {
            return Err(Error::NonFinite { iteration, mode, entity });
        }
        Ok(())
    }

    fn sweep_entities(&self, mode: usize, iteration: u64, u: &mut FactorMatrix, z: Option<&mut [u8]>) -> Result<()> {
        let k = self.cfg.num_latent;
        let threshold = self.cfg.split_threshold;
        // (entity-major matrix, other-mode factors, α) in view order
        let touching: Vec<(&MatrixData, &FactorMatrix, f64)> = if mode == 0 {
            self.views
                .iter()
                .enumerate()
                .map(|(v, vd)| (&vd.by_row, &self.model.factors[v + 1], self.noise[v].current_precision()))
                .collect()
        } else {
            let v = mode - 1;
            vec![(&self.views[v].by_col, &self.model.factors[0], self.noise[v].current_precision())]
        };
        let grams: Vec<Option<SpdMatrix>> = touching
            .iter()
            .map(|(m, other, alpha)| match m {
                MatrixData::Observed(_) => None,
                _ => Some(gram(other, *alpha)),
            })
            .collect();
        let all_known = grams.iter().all(Option::is_some);
        let is_gaussian = self.model.priors[mode].gaussian().is_some();
        let shared_a = if all_known && is_gaussian {
            let mut acc = grams[0].clone().expect("checked");
            for g in &grams[1..] {
                acc.add_assign(g.as_ref().expect("checked"));
            }
            Some(acc)
        } else {
            None
        };
        let need_a = shared_a.is_none();
        let prior = EntityPrior::new(&self.model.priors[mode], shared_a.as_ref())?;
        let streams = ModeStreams::new(self.cfg.seed, iteration, mode as u32);

        let entity_stats = |i: usize| -> PrecisionStats {
            let mut total: Option<PrecisionStats> = None;
            for ((m, other, alpha), g) in touching.iter().zip(&grams) {
                let st = view_stats(m, i, other, *alpha, g.as_ref(), need_a, threshold, k);
                match total.as_mut() {
                    None => total = Some(st),
                    Some(t) => t.add_assign(&st),
                }
            }
            total.expect("at least one view")
        };

        match z {
            Some(z) => u
                .as_mut_slice()
                .par_chunks_mut(k)
                .zip(z.par_chunks_mut(k))
                .enumerate()
                .try_for_each(|(i, (ui, zi))| {
                    let stats = entity_stats(i);
                    prior.sample(i, ui, Some(zi), &stats, &mut streams.entity(i))
                }),
            None => u.as_mut_slice().par_chunks_mut(k).enumerate().try_for_each(|(i, ui)| {
                let stats = entity_stats(i);
                prior.sample(i, ui, None, &stats, &mut streams.entity(i))
            }),
        }
    }

    /// Sum of squared residuals over the likelihood cells of view `v`,
    /// combined over rows in ascending order.
    fn view_sse(&self, v: usize) -> f64 {
        let rows = &self.model.factors[0];
        let cols = &self.model.factors[v + 1];
        let m = &self.views[v].by_row;
        let per_row: Vec<f64> = match m {
            MatrixData::Observed(sp) => (0..sp.n_rows())
                .into_par_iter()
                .map(|i| {
                    let (c, vals) = sp.row(i);
                    c.iter()
                        .zip(vals)
                        .map(|(&j, &r)| {
                            let e = r - rows.dot(i, cols, j);
                            e * e
                        })
                        .sum()
                })
                .collect(),
            MatrixData::FullyKnown(sp) => {
                let g = gram(cols, 1.0);
                (0..sp.n_rows())
                    .into_par_iter()
                    .map(|i| {
                        let ui = rows.col(i);
                        let gu = g.mul_vec(ui);
                        let all_sq: f64 = ui.iter().zip(&gu).map(|(a, b)| a * b).sum();
                        let (c, vals) = sp.row(i);
                        let corr: f64 = c
                            .iter()
                            .zip(vals)
                            .map(|(&j, &r)| {
                                let p = rows.dot(i, cols, j);
                                (r - p) * (r - p) - p * p
                            })
                            .sum();
                        all_sq + corr
                    })
                    .collect()
            }
            MatrixData::Dense(d) => (0..d.n_rows())
                .into_par_iter()
                .map(|i| {
                    d.row(i)
                        .iter()
                        .enumerate()
                        .map(|(j, &r)| {
                            let e = r - rows.dot(i, cols, j);
                            e * e
                        })
                        .sum()
                })
                .collect(),
        };
        per_row.iter().sum::<f64>().max(0.0)
    }
}

/// `α Σ_j v_j v_jᵀ` over every entity of `other`.
fn gram(other: &FactorMatrix, alpha: f64) -> SpdMatrix {
    let k = other.num_latent();
    accumulate_precision_split(k, other.n_entities(), alpha, 1, |j| (other.col(j), 0.0)).a
}

#[allow(clippy::too_many_arguments)]
fn view_stats(
    m: &MatrixData,
    i: usize,
    other: &FactorMatrix,
    alpha: f64,
    gram: Option<&SpdMatrix>,
    need_a: bool,
    threshold: usize,
    k: usize,
) -> PrecisionStats {
    let shift = |pairs: &mut dyn Iterator<Item = (usize, f64)>| -> Vec<f64> {
        let mut b = vec![0.0; k];
        for (j, r) in pairs {
            for (x, v) in b.iter_mut().zip(other.col(j)) {
                *x += r * v;
            }
        }
        b.iter_mut().for_each(|x| *x *= alpha);
        b
    };
    match m {
        MatrixData::Observed(sp) => {
            let (cols, vals) = sp.row(i);
            accumulate_precision_split(k, cols.len(), alpha, threshold, |t| (other.col(cols[t]), vals[t]))
        }
        MatrixData::FullyKnown(sp) => {
            let (cols, vals) = sp.row(i);
            let b = shift(&mut cols.iter().copied().zip(vals.iter().copied()));
            let a = if need_a { gram.expect("gram for known matrix").clone() } else { SpdMatrix::zeros(0) };
            PrecisionStats { a, b }
        }
        MatrixData::Dense(d) => {
            let b = shift(&mut d.row(i).iter().copied().enumerate());
            let a = if need_a { gram.expect("gram for known matrix").clone() } else { SpdMatrix::zeros(0) };
            PrecisionStats { a, b }
        }
    }
}
