//! Timing harness for the hot kernels and for whole Gibbs iterations.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use sha2::{Digest, Sha256};

use crate::data::MatrixData;
use crate::error::{Error, Result};
use crate::linalg::{accumulate_precision_split, chol_spd, SpdMatrix};
use crate::noise::NoiseSpec;
use crate::rng::stream_for;
use crate::sampler::{Session, SessionConfig, ViewSet};
use crate::synth;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kernel {
    Accumulate,
    Cholesky,
    FullIteration,
}

impl Kernel {
    pub fn name(self) -> &'static str {
        match self {
            Kernel::Accumulate => "accumulate",
            Kernel::Cholesky => "cholesky",
            Kernel::FullIteration => "full-iteration",
        }
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Kernel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "accumulate" => Ok(Kernel::Accumulate),
            "cholesky" => Ok(Kernel::Cholesky),
            "full-iteration" => Ok(Kernel::FullIteration),
            other => Err(Error::Config(format!(
                "unknown kernel `{other}`; use accumulate, cholesky or full-iteration"
            ))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct BenchParams {
    pub kernel: Kernel,
    pub num_latent: usize,
    pub reps: usize,
    /// Entries per accumulation (accumulate).
    pub entries: usize,
    /// Split thresholds to sweep (accumulate, full-iteration).
    pub thresholds: Vec<usize>,
    /// Thread counts to sweep (full-iteration); the first is the speedup
    /// baseline.
    pub threads: Vec<usize>,
    pub rows: usize,
    pub cols: usize,
    pub nnz: usize,
    pub seed: u64,
}

impl BenchParams {
    pub fn new(kernel: Kernel) -> Self {
        BenchParams {
            kernel,
            num_latent: 32,
            reps: 10,
            entries: 10_000,
            thresholds: vec![crate::sampler::DEFAULT_SPLIT_THRESHOLD],
            threads: vec![1],
            rows: 2000,
            cols: 2000,
            nnz: 200_000,
            seed: 0,
        }
    }
}

/// One CSV line of a report.
#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub kernel: Kernel,
    pub threads: usize,
    pub threshold: usize,
    pub reps: usize,
    pub min_s: f64,
    pub median_s: f64,
    /// Entity updates (or kernel calls) per second at the median time.
    pub throughput: f64,
    pub speedup: f64,
    /// Digest of the numerical result; equal across rows when the output
    /// does not depend on scheduling.
    pub checksum: String,
}

impl BenchRow {
    pub const CSV_HEADER: &'static str = "kernel,threads,threshold,reps,min_s,median_s,throughput,speedup,checksum";

    pub fn csv(&self) -> String {
        format!(
            "{},{},{},{},{:.6e},{:.6e},{:.6e},{:.3},{}",
            self.kernel,
            self.threads,
            self.threshold,
            self.reps,
            self.min_s,
            self.median_s,
            self.throughput,
            self.speedup,
            self.checksum
        )
    }
}

fn min_median(mut t: Vec<f64>) -> (f64, f64) {
    t.sort_by(f64::total_cmp);
    let n = t.len();
    let med = if n % 2 == 1 { t[n / 2] } else { 0.5 * (t[n / 2 - 1] + t[n / 2]) };
    (t[0], med)
}

fn digest_f64(values: &[f64]) -> String {
    let mut h = Sha256::new();
    values.iter().for_each(|v| h.update(v.to_bits().to_le_bytes()));
    hex::encode(&h.finalize()[..8])
}

fn time_reps<T>(reps: usize, mut f: impl FnMut() -> Result<T>) -> Result<(Vec<f64>, T)> {
    let mut times = Vec::with_capacity(reps);
    let mut last = None;
    for _ in 0..reps.max(1) {
        let t0 = Instant::now();
        let out = f()?;
        times.push(t0.elapsed().as_secs_f64());
        last = Some(out);
    }
    Ok((times, last.expect("at least one repetition")))
}

fn pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot build thread pool: {e}")))
}

pub fn run_bench(p: &BenchParams) -> Result<Vec<BenchRow>> {
    if p.reps == 0 || p.num_latent == 0 {
        return Err(Error::Config("reps and num_latent must be positive".into()));
    }
    match p.kernel {
        Kernel::Accumulate => bench_accumulate(p),
        Kernel::Cholesky => bench_cholesky(p),
        Kernel::FullIteration => bench_full_iteration(p),
    }
}

fn bench_accumulate(p: &BenchParams) -> Result<Vec<BenchRow>> {
    let k = p.num_latent;
    let mut s = stream_for(p.seed, 0, 0, 0);
    let vecs: Vec<f64> = (0..p.entries * k).map(|_| s.normal()).collect();
    let vals: Vec<f64> = (0..p.entries).map(|_| s.normal()).collect();
    let threads = p.threads.first().copied().unwrap_or(1);
    let pool = pool(threads)?;
    let mut rows = Vec::new();
    for &th in &p.thresholds {
        let (times, stats) = pool.install(|| {
            time_reps(p.reps, || {
                Ok(accumulate_precision_split(k, p.entries, 1.0, th.max(1), |t| {
                    (&vecs[t * k..(t + 1) * k], vals[t])
                }))
            })
        })?;
        let (min_s, median_s) = min_median(times);
        let mut all = stats.a.as_slice().to_vec();
        all.extend(&stats.b);
        rows.push(BenchRow {
            kernel: Kernel::Accumulate,
            threads,
            threshold: th,
            reps: p.reps,
            min_s,
            median_s,
            throughput: p.entries as f64 / median_s,
            speedup: 1.0,
            checksum: digest_f64(&all),
        });
    }
    Ok(rows)
}

fn bench_cholesky(p: &BenchParams) -> Result<Vec<BenchRow>> {
    let k = p.num_latent;
    let mut s = stream_for(p.seed, 0, 0, 0);
    let m: Vec<f64> = (0..k * k).map(|_| s.normal()).collect();
    let mut a = SpdMatrix::scaled_identity(k, k as f64);
    for i in 0..k {
        for j in 0..k {
            let dot: f64 = (0..k).map(|t| m[i * k + t] * m[j * k + t]).sum();
            a.set(i, j, a.get(i, j) + dot);
        }
    }
    let (times, f) = time_reps(p.reps, || chol_spd(&a))?;
    let (min_s, median_s) = min_median(times);
    Ok(vec![BenchRow {
        kernel: Kernel::Cholesky,
        threads: 1,
        threshold: 0,
        reps: p.reps,
        min_s,
        median_s,
        throughput: 1.0 / median_s,
        speedup: 1.0,
        checksum: digest_f64(f.as_slice()),
    }])
}

fn bench_full_iteration(p: &BenchParams) -> Result<Vec<BenchRow>> {
    let m = synth::random_sparse(p.rows, p.cols, p.nnz, p.num_latent, p.seed)?;
    let data = ViewSet::single(MatrixData::Observed(m));
    let mut rows: Vec<BenchRow> = Vec::new();
    for &th in &p.thresholds {
        let mut base = None;
        for &threads in &p.threads {
            let mut cfg = SessionConfig::single(p.num_latent, NoiseSpec::Fixed { alpha: 10.0 });
            cfg.burnin = p.reps as u64;
            cfg.nsamples = 1;
            cfg.seed = p.seed;
            cfg.threads = threads;
            cfg.split_threshold = th.max(1);
            let mut session = Session::new(cfg, data.clone(), None)?;
            let (times, _) = time_reps(p.reps, || session.step())?;
            let (min_s, median_s) = min_median(times);
            let mut all = Vec::new();
            for mode in 0..session.n_modes() {
                all.extend_from_slice(session.factors(mode).as_slice());
            }
            let base_t = *base.get_or_insert(median_s);
            rows.push(BenchRow {
                kernel: Kernel::FullIteration,
                threads,
                threshold: th,
                reps: p.reps,
                min_s,
                median_s,
                throughput: (p.rows + p.cols) as f64 / median_s,
                speedup: base_t / median_s,
                checksum: digest_f64(&all),
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_sweep_gives_identical_sums() {
        let mut p = BenchParams::new(Kernel::Accumulate);
        p.num_latent = 8;
        p.entries = 3000;
        p.reps = 2;
        p.thresholds = vec![1, 4096];
        let rows = run_bench(&p).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].checksum, rows[1].checksum);
    }

    #[test]
    fn full_iteration_speedup_is_normalized() {
        let mut p = BenchParams::new(Kernel::FullIteration);
        p.num_latent = 4;
        p.rows = 60;
        p.cols = 50;
        p.nnz = 600;
        p.reps = 2;
        p.threads = vec![1, 2];
        let rows = run_bench(&p).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].speedup, 1.0);
        assert_eq!(rows[0].checksum, rows[1].checksum);
        assert!(rows[0].csv().starts_with("full-iteration,1,4096,2,"));
    }

    #[test]
    fn cholesky_reports_one_row() {
        let mut p = BenchParams::new(Kernel::Cholesky);
        p.num_latent = 16;
        p.reps = 5;
        let rows = run_bench(&p).unwrap();
        assert_eq!(rows.len(), 1);
        assert!(rows[0].min_s <= rows[0].median_s);
        assert!("svd".parse::<Kernel>().is_err());
    }
}
