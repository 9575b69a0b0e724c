//! Training options, shared by command-line flags and `key = value` config
//! files. Every flag `--some-name` has the config key `some_name`.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::Args;

use crate::data::MatrixKind;
use crate::error::{Error, Result};
use crate::noise::NoiseSpec;
use crate::priors::PriorKind;

use super::preset::Preset;

/// Options for `train`. All fields are optional so a config file and the
/// command line can be layered.
#[derive(Args, Clone, Debug, Default, PartialEq)]
pub struct TrainOptions {
    /// Training matrix (Matrix Market).
    #[arg(long)]
    pub train: Option<PathBuf>,
    /// Held-out cells (Matrix Market coordinate).
    #[arg(long)]
    pub test: Option<PathBuf>,
    /// Storage kind of coordinate training files: observed or fully-known.
    #[arg(long)]
    pub kind: Option<MatrixKind>,
    /// bmf, macau or gfa.
    #[arg(long)]
    pub preset: Option<Preset>,
    /// Additional matrix sharing the row mode (repeatable).
    #[arg(long)]
    pub view: Vec<PathBuf>,
    /// normal, macau or spikeandslab.
    #[arg(long)]
    pub prior_rows: Option<PriorKind>,
    /// normal, macau or spikeandslab; applies to every column mode.
    #[arg(long)]
    pub prior_cols: Option<PriorKind>,
    /// Row features (Matrix Market; array or coordinate).
    #[arg(long)]
    pub side_rows: Option<PathBuf>,
    /// Column features (Matrix Market; array or coordinate).
    #[arg(long)]
    pub side_cols: Option<PathBuf>,
    /// Link-matrix precision λβ.
    #[arg(long)]
    pub beta_precision: Option<f64>,
    /// fixed:<alpha> or adaptive:<a0>:<b0>.
    #[arg(long)]
    pub noise: Option<NoiseSpec>,
    #[arg(long)]
    pub num_latent: Option<usize>,
    #[arg(long)]
    pub burnin: Option<u64>,
    #[arg(long)]
    pub nsamples: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Observation count above which an entity is accumulated in parallel.
    #[arg(long)]
    pub split_threshold: Option<usize>,
    /// Directory for the final snapshot and checkpoints.
    #[arg(long)]
    pub save_prefix: Option<PathBuf>,
    /// Write a snapshot every n iterations (0 disables).
    #[arg(long)]
    pub checkpoint_every: Option<u64>,
    /// Keep every post-burn-in sample under <save-prefix>/samples.
    #[arg(long)]
    pub save_samples: Option<bool>,
    /// Per-iteration trace as CSV.
    #[arg(long)]
    pub csv_trace: Option<PathBuf>,
    /// Continue from a snapshot directory.
    #[arg(long)]
    pub resume: Option<PathBuf>,
}

/// Config-file keys, one per field of [`TrainOptions`].
pub const CONFIG_KEYS: &[&str] = &[
    "train",
    "test",
    "kind",
    "preset",
    "view",
    "prior_rows",
    "prior_cols",
    "side_rows",
    "side_cols",
    "beta_precision",
    "noise",
    "num_latent",
    "burnin",
    "nsamples",
    "seed",
    "threads",
    "split_threshold",
    "save_prefix",
    "checkpoint_every",
    "save_samples",
    "csv_trace",
    "resume",
];

fn parse_value<T: FromStr>(path: &Path, line: usize, key: &str, raw: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    raw.parse::<T>().map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: format!("bad value `{raw}` for `{key}`: {e}"),
        remedy: format!("see `--{}` in `train --help`", key.replace('_', "-")),
    })
}

impl TrainOptions {
    /// Parse config text. Relative paths resolve against `base`.
    pub fn parse_config(text: &str, path: &Path, base: &Path) -> Result<Self> {
        let mut o = TrainOptions::default();
        let resolve = |p: &str| {
            let p = PathBuf::from(p);
            if p.is_absolute() {
                p
            } else {
                base.join(p)
            }
        };
        for (n, raw_line) in text.lines().enumerate() {
            let n = n + 1;
            let line = raw_line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                line: n,
                msg: format!("expected `key = value`, found `{line}`"),
                remedy: "write one `key = value` pair per line".into(),
            })?;
            let (key, value) = (key.trim(), value.trim());
            macro_rules! set {
                ($field:ident) => {
                    o.$field = Some(parse_value(path, n, key, value)?)
                };
            }
            match key {
                "train" => o.train = Some(resolve(value)),
                "test" => o.test = Some(resolve(value)),
                "kind" => set!(kind),
                "preset" => set!(preset),
                "view" => o.view.push(resolve(value)),
                "prior_rows" => set!(prior_rows),
                "prior_cols" => set!(prior_cols),
                "side_rows" => o.side_rows = Some(resolve(value)),
                "side_cols" => o.side_cols = Some(resolve(value)),
                "beta_precision" => set!(beta_precision),
                "noise" => set!(noise),
                "num_latent" => set!(num_latent),
                "burnin" => set!(burnin),
                "nsamples" => set!(nsamples),
                "seed" => set!(seed),
                "threads" => set!(threads),
                "split_threshold" => set!(split_threshold),
                "save_prefix" => o.save_prefix = Some(resolve(value)),
                "checkpoint_every" => set!(checkpoint_every),
                "save_samples" => set!(save_samples),
                "csv_trace" => o.csv_trace = Some(resolve(value)),
                "resume" => o.resume = Some(resolve(value)),
                other => {
                    return Err(Error::Parse {
                        path: path.to_path_buf(),
                        line: n,
                        msg: format!("unknown key `{other}`"),
                        remedy: format!("valid keys: {}", CONFIG_KEYS.join(", ")),
                    })
                }
            }
        }
        Ok(o)
    }

    pub fn read_config(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse_config(&text, path, base)
    }

    /// Values set in `over` replace those in `self`.
    pub fn overridden_by(mut self, over: TrainOptions) -> Self {
        macro_rules! take {
            ($($f:ident),*) => {
                $( if over.$f.is_some() { self.$f = over.$f; } )*
            };
        }
        take!(
            train,
            test,
            kind,
            preset,
            prior_rows,
            prior_cols,
            side_rows,
            side_cols,
            beta_precision,
            noise,
            num_latent,
            burnin,
            nsamples,
            seed,
            threads,
            split_threshold,
            save_prefix,
            checkpoint_every,
            save_samples,
            csv_trace,
            resume
        );
        if !over.view.is_empty() {
            self.view = over.view;
        }
        self
    }
}
