//! Command-line front end: `train`, `predict` and `bench`.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use crate::bench::{run_bench, BenchParams, BenchRow, Kernel};
use crate::data::SideInfo;
use crate::error::{Error, Result};
use crate::factors::FactorMatrix;
use crate::io::mtx::{format_array, read_market, MarketMatrix};
use crate::io::preset::{PresetInputs, DEFAULT_FIXED_NOISE};
use crate::io::snapshot::format_trace_csv;
use crate::io::{read_matrix_market, read_side_info, read_snapshot, read_test_set, restore_session, write_snapshot};
use crate::io::TrainOptions;
use crate::priors::{PriorKind, PriorSpec};
use crate::sampler::{Phase, RunSummary, Session, SessionConfig, ViewSet, DEFAULT_SPLIT_THRESHOLD};

pub const DEFAULT_NUM_LATENT: usize = 10;
pub const DEFAULT_BURNIN: u64 = 200;
pub const DEFAULT_NSAMPLES: u64 = 800;
pub const DEFAULT_BETA_PRECISION: f64 = 1.0;
pub const SAMPLES_DIR: &str = "samples";

#[derive(Parser, Debug)]
#[command(name = "bayesmf", version, about = "Bayesian matrix factorization by Gibbs sampling")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Fit a model and report test RMSE.
    Train(TrainArgs),
    /// Predict cells from a saved model.
    Predict(PredictArgs),
    /// Time kernels or whole iterations.
    Bench(BenchArgs),
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// `key = value` file; flags given on the command line win.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub options: TrainOptions,
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    /// Snapshot directory written by `train --save-prefix`.
    #[arg(long)]
    pub model: PathBuf,
    /// CSV of 0-based `i,j` pairs.
    #[arg(long)]
    pub queries: PathBuf,
    /// Output CSV (stdout when absent).
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    /// accumulate, cholesky or full-iteration.
    pub kernel: Kernel,
    #[arg(long, default_value_t = 32)]
    pub num_latent: usize,
    #[arg(long, default_value_t = 10)]
    pub reps: usize,
    /// Entries per accumulation (accumulate).
    #[arg(long, default_value_t = 10_000)]
    pub entries: usize,
    /// Comma-separated split thresholds.
    #[arg(long, value_delimiter = ',', default_value = "4096")]
    pub thresholds: Vec<usize>,
    /// Comma-separated thread counts; the first is the speedup baseline.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub threads: Vec<usize>,
    #[arg(long, default_value_t = 2000)]
    pub rows: usize,
    #[arg(long, default_value_t = 2000)]
    pub cols: usize,
    #[arg(long, default_value_t = 200_000)]
    pub nnz: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// A configured session plus what to do with its output.
pub struct TrainPlan {
    pub session: Session,
    pub save_prefix: Option<PathBuf>,
    pub checkpoint_every: u64,
    pub save_samples: bool,
    pub csv_trace: Option<PathBuf>,
}

fn prior_spec(kind: PriorKind, k: usize, side: Option<&Arc<SideInfo>>, lambda_beta: f64, which: &str) -> Result<PriorSpec> {
    match (kind, side) {
        (PriorKind::Normal, None) => Ok(PriorSpec::normal(k)),
        (PriorKind::SpikeAndSlab, None) => Ok(PriorSpec::spike_and_slab()),
        (PriorKind::Macau, Some(s)) => Ok(PriorSpec::macau(k, s.clone(), lambda_beta)),
        (PriorKind::Macau, None) => Err(Error::Config(format!(
            "prior macau on {which} needs features; pass --side-{which} <file>"
        ))),
        (other, Some(_)) => Err(Error::Config(format!(
            "--side-{which} needs the macau prior on {which}, not {other}; set --prior-{which} macau"
        ))),
    }
}

/// Load data and build the session described by `o`, resuming from a
/// snapshot when requested.
pub fn plan_training(o: &TrainOptions) -> Result<TrainPlan> {
    let train_path = o
        .train
        .as_ref()
        .ok_or_else(|| Error::Config("missing --train <matrix.mtx>".into()))?;
    let mut views = vec![read_matrix_market(train_path, o.kind)?];
    for p in &o.view {
        views.push(read_matrix_market(p, o.kind)?);
    }
    let data = ViewSet::new(views)?;
    let test = o.test.as_ref().map(read_test_set).transpose()?;
    let side_rows = o.side_rows.as_ref().map(read_side_info).transpose()?.map(Arc::new);
    let side_cols = o.side_cols.as_ref().map(read_side_info).transpose()?.map(Arc::new);
    if side_cols.is_some() && data.len() > 1 {
        return Err(Error::Config("--side-cols applies to a single matrix; drop it or the --view matrices".into()));
    }

    let (mut row_kind, mut col_kind, mut noise) = match o.preset {
        Some(p) => {
            let d = p.expand(PresetInputs {
                side_rows: side_rows.is_some(),
                side_cols: side_cols.is_some(),
                n_views: data.len(),
            })?;
            (d.row_prior, d.col_prior, d.noise)
        }
        None => {
            let pick = |s: bool| if s { PriorKind::Macau } else { PriorKind::Normal };
            (pick(side_rows.is_some()), pick(side_cols.is_some()), DEFAULT_FIXED_NOISE)
        }
    };
    if let Some(k) = o.prior_rows {
        row_kind = k;
    }
    if let Some(k) = o.prior_cols {
        col_kind = k;
    }
    if let Some(n) = o.noise {
        noise = n;
    }

    let k = o.num_latent.unwrap_or(DEFAULT_NUM_LATENT);
    let lambda_beta = o.beta_precision.unwrap_or(DEFAULT_BETA_PRECISION);
    let row_prior = prior_spec(row_kind, k, side_rows.as_ref(), lambda_beta, "rows")?;
    let col_priors = (0..data.len())
        .map(|_| prior_spec(col_kind, k, side_cols.as_ref(), lambda_beta, "cols"))
        .collect::<Result<Vec<_>>>()?;
    let cfg = SessionConfig {
        num_latent: k,
        burnin: o.burnin.unwrap_or(DEFAULT_BURNIN),
        nsamples: o.nsamples.unwrap_or(DEFAULT_NSAMPLES),
        seed: o.seed.unwrap_or(0),
        threads: o.threads.unwrap_or(0),
        split_threshold: o.split_threshold.unwrap_or(DEFAULT_SPLIT_THRESHOLD),
        row_prior,
        noise: vec![noise; data.len()],
        col_priors,
        checkpoint_every: o.checkpoint_every.unwrap_or(0),
    };
    if cfg.checkpoint_every > 0 && o.save_prefix.is_none() {
        return Err(Error::Config("--checkpoint-every needs --save-prefix <dir>".into()));
    }
    let save_samples = o.save_samples.unwrap_or(false);
    if save_samples && o.save_prefix.is_none() {
        return Err(Error::Config("--save-samples needs --save-prefix <dir>".into()));
    }
    let checkpoint_every = cfg.checkpoint_every;
    let mut session = Session::new(cfg, data, test)?;
    if let Some(dir) = &o.resume {
        let snap = read_snapshot(dir)?;
        restore_session(&mut session, &snap)?;
    }
    Ok(TrainPlan {
        session,
        save_prefix: o.save_prefix.clone(),
        checkpoint_every,
        save_samples,
        csv_trace: o.csv_trace.clone(),
    })
}

fn write_sample(dir: &Path, session: &Session, iteration: u64) -> Result<()> {
    let d = dir.join(SAMPLES_DIR).join(format!("{iteration:08}"));
    fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
    for mode in 0..session.n_modes() {
        let f = session.factors(mode);
        let p = d.join(format!("factors-{mode}.mtx"));
        let (k, n) = (f.num_latent(), f.n_entities());
        let mut values = vec![0.0; k * n];
        for i in 0..n {
            for (r, &x) in f.col(i).iter().enumerate() {
                values[r * n + i] = x;
            }
        }
        fs::write(&p, format_array(k, n, &values)).map_err(|e| Error::io(&p, e))?;
    }
    Ok(())
}

/// Run a planned session to completion, printing one progress line per
/// iteration to `out`.
pub fn run_training(plan: &mut TrainPlan, out: &mut dyn Write) -> Result<RunSummary> {
    let overlap = plan.session.test_overlap();
    if overlap > 0 {
        eprintln!("warning: {overlap} test cells also appear in the training data");
    }
    let stdout_err = |e: std::io::Error| Error::io("<stdout>", e);
    let (prefix, every, samples) = (plan.save_prefix.clone(), plan.checkpoint_every, plan.save_samples);
    let summary = plan.session.run_with(|s, rec| {
        writeln!(out, "{}", rec.progress_line()).map_err(stdout_err)?;
        if let Some(dir) = &prefix {
            if samples && rec.phase == Phase::Sample {
                write_sample(dir, s, rec.iteration)?;
            }
            if every > 0 && (rec.iteration + 1) % every == 0 {
                write_snapshot(s, dir)?;
            }
        }
        Ok(())
    })?;
    if let Some(p) = &plan.csv_trace {
        fs::write(p, format_trace_csv(plan.session.trace(), plan.session.n_views())).map_err(|e| Error::io(p, e))?;
    }
    if let Some(dir) = &plan.save_prefix {
        write_snapshot(&plan.session, dir)?;
    }
    let rmse = summary.final_rmse.map_or_else(|| "NA".to_string(), |r| r.to_string());
    writeln!(out, "done iterations={} rmse={rmse}", plan.session.iteration()).map_err(stdout_err)?;
    Ok(summary)
}

/// Parse `i,j` query lines; a non-numeric first line is taken as a header.
pub fn parse_queries(text: &str, path: &Path) -> Result<Vec<(usize, usize)>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let parsed = line
            .split_once(',')
            .and_then(|(a, b)| Some((a.trim().parse().ok()?, b.trim().parse().ok()?)));
        match parsed {
            Some(q) => out.push(q),
            None if n == 0 => continue,
            None => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: n + 1,
                    msg: format!("expected `i,j`, found `{line}`"),
                    remedy: "list one 0-based row,column pair per line".into(),
                })
            }
        }
    }
    Ok(out)
}

fn read_factor_file(path: &Path) -> Result<FactorMatrix> {
    match read_market(path)? {
        MarketMatrix::Array(d) => {
            let (k, n) = (d.n_rows(), d.n_cols());
            let mut data = vec![0.0; k * n];
            for r in 0..k {
                for i in 0..n {
                    data[i * k + r] = d.get(r, i);
                }
            }
            FactorMatrix::from_vec(k, n, data)
        }
        MarketMatrix::Coordinate { .. } => Err(Error::Snapshot {
            path: path.to_path_buf(),
            msg: "factor files must be arrays".into(),
        }),
    }
}

/// Mean and sample std at each query over the saved posterior samples.
pub fn predict_from_samples(dir: &Path, queries: &[(usize, usize)]) -> Result<Option<Vec<(f64, f64)>>> {
    let sdir = dir.join(SAMPLES_DIR);
    if !sdir.is_dir() {
        return Ok(None);
    }
    let mut entries: Vec<PathBuf> = fs::read_dir(&sdir)
        .map_err(|e| Error::io(&sdir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    entries.sort();
    if entries.is_empty() {
        return Ok(None);
    }
    let mut mean = vec![0.0; queries.len()];
    let mut m2 = vec![0.0; queries.len()];
    for (c, e) in entries.iter().enumerate() {
        let u = read_factor_file(&e.join("factors-0.mtx"))?;
        let v = read_factor_file(&e.join("factors-1.mtx"))?;
        let n = (c + 1) as f64;
        for (q, &(i, j)) in queries.iter().enumerate() {
            if i >= u.n_entities() || j >= v.n_entities() {
                return Err(Error::IndexOutOfRange {
                    index: if i >= u.n_entities() { i } else { j },
                    dim: if i >= u.n_entities() { u.n_entities() } else { v.n_entities() },
                });
            }
            let x = u.dot(i, &v, j);
            let d = x - mean[q];
            mean[q] += d / n;
            m2[q] += d * (x - mean[q]);
        }
    }
    let count = entries.len();
    Ok(Some(
        mean.into_iter()
            .zip(m2)
            .map(|(m, q)| (m, if count > 1 { (q / (count - 1) as f64).sqrt() } else { 0.0 }))
            .collect(),
    ))
}

pub fn run_predict(a: &PredictArgs, out: &mut dyn Write) -> Result<()> {
    let snap = read_snapshot(&a.model)?;
    let text = fs::read_to_string(&a.queries).map_err(|e| Error::io(&a.queries, e))?;
    let queries = parse_queries(&text, &a.queries)?;
    let preds = match predict_from_samples(&a.model, &queries)? {
        Some(p) => p,
        None => queries.iter().map(|&(i, j)| snap.predict(i, j)).collect::<Result<Vec<_>>>()?,
    };
    let mut csv = String::from("i,j,mean,std\n");
    for (&(i, j), (m, s)) in queries.iter().zip(preds) {
        csv.push_str(&format!("{i},{j},{m},{s}\n"));
    }
    match &a.output {
        Some(p) => fs::write(p, csv).map_err(|e| Error::io(p, e)),
        None => out.write_all(csv.as_bytes()).map_err(|e| Error::io("<stdout>", e)),
    }
}

pub fn run_bench_cmd(a: &BenchArgs, out: &mut dyn Write) -> Result<Vec<BenchRow>> {
    let p = BenchParams {
        kernel: a.kernel,
        num_latent: a.num_latent,
        reps: a.reps,
        entries: a.entries,
        thresholds: a.thresholds.clone(),
        threads: a.threads.clone(),
        rows: a.rows,
        cols: a.cols,
        nnz: a.nnz,
        seed: a.seed,
    };
    let rows = run_bench(&p)?;
    let mut text = format!("{}\n", BenchRow::CSV_HEADER);
    for r in &rows {
        text.push_str(&r.csv());
        text.push('\n');
    }
    out.write_all(text.as_bytes()).map_err(|e| Error::io("<stdout>", e))?;
    Ok(rows)
}

/// Merge the config file (if any) under the command-line options.
pub fn resolve_train_options(a: &TrainArgs) -> Result<TrainOptions> {
    match &a.config {
        Some(p) => Ok(TrainOptions::read_config(p)?.overridden_by(a.options.clone())),
        None => Ok(a.options.clone()),
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match cli.command {
        Command::Train(a) => {
            let opts = resolve_train_options(&a)?;
            let mut plan = plan_training(&opts)?;
            run_training(&mut plan, &mut out).map(|_| ())
        }
        Command::Predict(a) => run_predict(&a, &mut out),
        Command::Bench(a) => run_bench_cmd(&a, &mut out).map(|_| ()),
    }
}

/// Parse `args` and run; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
