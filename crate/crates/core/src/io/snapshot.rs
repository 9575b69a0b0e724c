//! Model snapshots: a directory holding a `key=value` manifest plus one
//! Matrix Market array file per state component. Arrays are written with
//! 17 significant digits, so reading a snapshot restores every value
//! bit-exactly and a resumed run continues the original one exactly.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::data::{MatrixData, SideInfo, TestSet};
use crate::error::{Error, Result};
use crate::factors::FactorMatrix;
use crate::linalg::SpdMatrix;
use crate::noise::NoiseState;
use crate::priors::{PriorKind, PriorSpec, PriorState};
use crate::sampler::{IterationRecord, LatentModel, Phase, PredictionAggregate, Session, SessionConfig};

use super::mtx::{format_array, format_real, read_market, MarketMatrix};

pub const SNAPSHOT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.txt";
pub const TRACE_FILE: &str = "trace.csv";
pub const AGGREGATE_FILE: &str = "aggregate.csv";

fn hash_matrix(h: &mut Sha256, m: &MatrixData) {
    h.update(format!("{} {} {}\n", m.kind().name(), m.n_rows(), m.n_cols()));
    match m {
        MatrixData::Observed(s) | MatrixData::FullyKnown(s) => {
            for (i, j, v) in s.triplets() {
                h.update((i as u64).to_le_bytes());
                h.update((j as u64).to_le_bytes());
                h.update(v.to_bits().to_le_bytes());
            }
        }
        MatrixData::Dense(d) => d.values().iter().for_each(|v| h.update(v.to_bits().to_le_bytes())),
    }
}

fn hash_side(h: &mut Sha256, side: &SideInfo) {
    h.update(format!("side {} {}\n", side.n_entities(), side.n_features()));
    for i in 0..side.n_entities() {
        side.for_each_in_row(i, |c, v| {
            h.update((c as u64).to_le_bytes());
            h.update(v.to_bits().to_le_bytes());
        });
        h.update(b";");
    }
}

fn describe_prior(h: &mut Sha256, p: &PriorSpec) {
    let nw_text = |nw: &crate::priors::NormalWishartHyper| {
        format!(
            "mu0={:?} beta0={} w0={:?} nu0={}",
            nw.mu0,
            nw.beta0,
            nw.w0.as_slice(),
            nw.nu0
        )
    };
    match p {
        PriorSpec::Normal(nw) => h.update(format!("normal {}\n", nw_text(nw))),
        PriorSpec::Macau {
            hyper,
            side,
            beta_precision,
        } => {
            h.update(format!("macau {} lambda_beta={beta_precision}\n", nw_text(hyper)));
            hash_side(h, side);
        }
        PriorSpec::SpikeAndSlab(s) => h.update(format!("spikeandslab a={} b={} c={} d={}\n", s.a, s.b, s.c, s.d)),
    }
}

/// SHA-256 over everything that shapes the sampled chain: K, burn-in, seed,
/// priors, noise, training data and test cells. The sample count, thread
/// count, split threshold and output settings are excluded, so a resumed
/// run may use different values for them.
pub fn config_digest(cfg: &SessionConfig, views: &[&MatrixData], test: Option<&TestSet>) -> String {
    let mut h = Sha256::new();
    h.update(format!(
        "version={SNAPSHOT_VERSION}\nnum_latent={}\nburnin={}\nseed={}\n",
        cfg.num_latent, cfg.burnin, cfg.seed
    ));
    for mode in 0..cfg.n_modes() {
        describe_prior(&mut h, cfg.prior(mode));
    }
    for n in &cfg.noise {
        h.update(format!("noise={n}\n"));
    }
    for v in views {
        hash_matrix(&mut h, v);
    }
    if let Some(t) = test {
        h.update(format!("test {}\n", t.len()));
        for &(i, j, v) in t.entries() {
            h.update((i as u64).to_le_bytes());
            h.update((j as u64).to_le_bytes());
            h.update(v.to_bits().to_le_bytes());
        }
    }
    hex::encode(h.finalize())
}

pub fn session_digest(s: &Session) -> String {
    let views: Vec<&MatrixData> = (0..s.n_views()).map(|v| s.view(v)).collect();
    config_digest(s.config(), &views, s.test_set())
}

fn opt_real(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".into(), |x| x.to_string())
}

pub fn format_trace_csv(records: &[IterationRecord], n_views: usize) -> String {
    let mut out = IterationRecord::csv_header(n_views);
    out.push('\n');
    for r in records {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    out
}

pub fn parse_trace_csv(text: &str, path: &Path) -> Result<Vec<IterationRecord>> {
    let bad = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
        remedy: "regenerate the trace from the run".into(),
    };
    let mut lines = text.lines().enumerate();
    let header = lines.next().map(|(_, l)| l).unwrap_or("");
    let n_alpha = header.split(',').count().saturating_sub(4);
    let mut out = Vec::new();
    for (n, line) in lines {
        let n = n + 1;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 4 + n_alpha {
            return Err(bad(n, format!("expected {} fields, found {}", 4 + n_alpha, f.len())));
        }
        let real = |t: &str| -> Result<Option<f64>> {
            if t == "NA" {
                Ok(None)
            } else {
                t.parse().map(Some).map_err(|_| bad(n, format!("`{t}` is not a number")))
            }
        };
        let phase = match f[1] {
            "burnin" => Phase::Burnin,
            "sample" => Phase::Sample,
            other => return Err(bad(n, format!("unknown phase `{other}`"))),
        };
        let alphas = f[4..]
            .iter()
            .map(|t| real(t)?.ok_or_else(|| bad(n, "missing alpha".into())))
            .collect::<Result<Vec<_>>>()?;
        out.push(IterationRecord {
            iteration: f[0].parse().map_err(|_| bad(n, format!("bad iteration `{}`", f[0])))?,
            phase,
            rmse_avg: real(f[2])?,
            rmse_1sample: real(f[3])?,
            alphas,
        });
    }
    Ok(out)
}

fn put(dir: &Path, name: &str, text: &str) -> Result<()> {
    let p = dir.join(name);
    fs::write(&p, text).map_err(|e| Error::io(p, e))
}

/// `K × N` array with column `i` holding entity `i`.
fn factor_values(f: &FactorMatrix) -> Vec<f64> {
    let (k, n) = (f.num_latent(), f.n_entities());
    let mut v = vec![0.0; k * n];
    for i in 0..n {
        for (r, &x) in f.col(i).iter().enumerate() {
            v[r * n + i] = x;
        }
    }
    v
}

/// Write the full sampler state of `session` into `dir` (created if
/// missing). The manifest is written last.
pub fn write_snapshot(session: &Session, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let k = session.config().num_latent;
    let model = session.model();
    for (m, f) in model.factors.iter().enumerate() {
        put(dir, &format!("factors-{m}.mtx"), &format_array(k, f.n_entities(), &factor_values(f)))?;
    }
    for (m, p) in model.priors.iter().enumerate() {
        if let Some(g) = p.gaussian() {
            put(dir, &format!("hyper-mu-{m}.mtx"), &format_array(k, 1, &g.hyper.mu))?;
            put(dir, &format!("hyper-lambda-{m}.mtx"), &format_array(k, k, g.hyper.lambda.as_slice()))?;
        }
        match p {
            PriorState::Macau(st) => {
                let d = st.side.n_features();
                put(dir, &format!("link-{m}.mtx"), &format_array(d, k, &st.beta))?;
            }
            PriorState::SpikeAndSlab(st) => {
                put(dir, &format!("sns-pi-{m}.mtx"), &format_array(k, 1, &st.params.pi))?;
                put(dir, &format!("sns-alpha-{m}.mtx"), &format_array(k, 1, &st.params.alpha_slab))?;
                let n = st.z.len() / k;
                let zf = FactorMatrix::from_vec(k, n, st.z.iter().map(|&z| z as f64).collect())?;
                put(dir, &format!("sns-z-{m}.mtx"), &format_array(k, n, &factor_values(&zf)))?;
            }
            PriorState::Normal(_) => {}
        }
    }
    let alphas: Vec<f64> = session.noise().iter().map(|n| n.current_precision()).collect();
    put(dir, "noise.mtx", &format_array(alphas.len(), 1, &alphas))?;
    put(dir, TRACE_FILE, &format_trace_csv(session.trace(), session.n_views()))?;

    let mut rmse = None;
    let mut samples = 0;
    if let Some(agg) = session.aggregate() {
        let mut out = String::from("row,col,truth,mean,m2\n");
        let m2 = agg.m2();
        for (p, &(i, j)) in agg.cells().iter().enumerate() {
            let _ = writeln!(
                out,
                "{i},{j},{},{},{}",
                format_real(agg.truth()[p]),
                format_real(agg.means()[p]),
                format_real(m2[p])
            );
        }
        put(dir, AGGREGATE_FILE, &out)?;
        rmse = agg.rmse().ok();
        samples = agg.count();
    }

    let cfg = session.config();
    let mut man = String::new();
    let _ = writeln!(man, "format_version={SNAPSHOT_VERSION}");
    let _ = writeln!(man, "iteration={}", session.iteration());
    let _ = writeln!(man, "seed={}", cfg.seed);
    let _ = writeln!(man, "num_latent={k}");
    let _ = writeln!(man, "burnin={}", cfg.burnin);
    let _ = writeln!(man, "nsamples={}", cfg.nsamples);
    let _ = writeln!(man, "n_views={}", session.n_views());
    let _ = writeln!(man, "samples_collected={samples}");
    let _ = writeln!(man, "rmse={}", opt_real(rmse));
    for (m, p) in model.priors.iter().enumerate() {
        let _ = writeln!(man, "prior_{m}={}", p.kind());
        let _ = writeln!(man, "entities_{m}={}", model.factors[m].n_entities());
    }
    let _ = writeln!(man, "config_digest={}", session_digest(session));
    put(dir, MANIFEST_FILE, &man)
}

/// Per-mode prior state as stored on disk.
#[derive(Clone, Debug, PartialEq)]
pub enum PriorParts {
    Gaussian {
        mu: Vec<f64>,
        lambda: SpdMatrix,
        beta: Option<Vec<f64>>,
    },
    SpikeAndSlab {
        pi: Vec<f64>,
        alpha_slab: Vec<f64>,
        z: Vec<u8>,
    },
}

/// Saved test-cell aggregate.
#[derive(Clone, Debug, PartialEq)]
pub struct AggregateParts {
    pub cells: Vec<(usize, usize)>,
    pub truth: Vec<f64>,
    pub mean: Vec<f64>,
    pub m2: Vec<f64>,
}

impl AggregateParts {
    pub fn test_set(&self) -> TestSet {
        TestSet::new(self.cells.iter().zip(&self.truth).map(|(&(i, j), &t)| (i, j, t)).collect())
    }
}

#[derive(Clone, Debug)]
pub struct Snapshot {
    pub dir: PathBuf,
    pub manifest: BTreeMap<String, String>,
    pub iteration: u64,
    pub seed: u64,
    pub num_latent: usize,
    pub samples_collected: u64,
    pub config_digest: String,
    pub factors: Vec<FactorMatrix>,
    pub priors: Vec<PriorParts>,
    pub alphas: Vec<f64>,
    pub aggregate: Option<AggregateParts>,
    pub trace: Vec<IterationRecord>,
}

impl Snapshot {
    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Snapshot {
            path: self.dir.clone(),
            msg: msg.into(),
        }
    }

    /// Posterior mean and std at `(i, j)`: from the test-cell aggregate when
    /// the cell was held out, otherwise the final sample with std 0.
    pub fn predict(&self, i: usize, j: usize) -> Result<(f64, f64)> {
        if let Some(agg) = &self.aggregate {
            if let Some(p) = agg.cells.iter().position(|&c| c == (i, j)) {
                let std = if self.samples_collected > 1 {
                    (agg.m2[p] / (self.samples_collected - 1) as f64).sqrt()
                } else {
                    0.0
                };
                return Ok((agg.mean[p], std));
            }
        }
        let (rows, cols) = (&self.factors[0], &self.factors[1]);
        if i >= rows.n_entities() || j >= cols.n_entities() {
            return Err(Error::IndexOutOfRange {
                index: if i >= rows.n_entities() { i } else { j },
                dim: if i >= rows.n_entities() { rows.n_entities() } else { cols.n_entities() },
            });
        }
        Ok((rows.dot(i, cols, j), 0.0))
    }
}

fn missing(dir: &Path, name: &str) -> Error {
    Error::Snapshot {
        path: dir.to_path_buf(),
        msg: format!("missing component file {name}"),
    }
}

fn read_array(dir: &Path, name: &str, rows: usize, cols: usize) -> Result<Vec<f64>> {
    let p = dir.join(name);
    if !p.exists() {
        return Err(missing(dir, name));
    }
    match read_market(&p)? {
        MarketMatrix::Array(d) if d.n_rows() == rows && d.n_cols() == cols => Ok(d.values().to_vec()),
        MarketMatrix::Array(d) => Err(Error::Snapshot {
            path: p,
            msg: format!("expected {rows}x{cols}, found {}x{}", d.n_rows(), d.n_cols()),
        }),
        MarketMatrix::Coordinate { .. } => Err(Error::Snapshot {
            path: p,
            msg: "expected an array file".into(),
        }),
    }
}

fn array_dims(dir: &Path, name: &str) -> Result<(usize, usize)> {
    let p = dir.join(name);
    if !p.exists() {
        return Err(missing(dir, name));
    }
    match read_market(&p)? {
        MarketMatrix::Array(d) => Ok((d.n_rows(), d.n_cols())),
        MarketMatrix::Coordinate { .. } => Err(Error::Snapshot {
            path: p,
            msg: "expected an array file".into(),
        }),
    }
}

fn entity_major(k: usize, n: usize, values: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; k * n];
    for r in 0..k {
        for i in 0..n {
            out[i * k + r] = values[r * n + i];
        }
    }
    out
}

fn parse_aggregate(dir: &Path) -> Result<Option<AggregateParts>> {
    let p = dir.join(AGGREGATE_FILE);
    if !p.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
    let mut parts = AggregateParts {
        cells: Vec::new(),
        truth: Vec::new(),
        mean: Vec::new(),
        m2: Vec::new(),
    };
    for (n, line) in text.lines().enumerate().skip(1) {
        let bad = || Error::Parse {
            path: p.clone(),
            line: n + 1,
            msg: format!("malformed aggregate row `{line}`"),
            remedy: "regenerate the snapshot".into(),
        };
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 5 {
            return Err(bad());
        }
        parts.cells.push((f[0].parse().map_err(|_| bad())?, f[1].parse().map_err(|_| bad())?));
        parts.truth.push(f[2].parse().map_err(|_| bad())?);
        parts.mean.push(f[3].parse().map_err(|_| bad())?);
        parts.m2.push(f[4].parse().map_err(|_| bad())?);
    }
    Ok(Some(parts))
}

/// Load a snapshot directory.
pub fn read_snapshot(dir: impl AsRef<Path>) -> Result<Snapshot> {
    let dir = dir.as_ref();
    let mpath = dir.join(MANIFEST_FILE);
    if !mpath.exists() {
        return Err(missing(dir, MANIFEST_FILE));
    }
    let text = fs::read_to_string(&mpath).map_err(|e| Error::io(&mpath, e))?;
    let mut manifest = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
            path: mpath.clone(),
            line: n + 1,
            msg: format!("expected key=value, found `{line}`"),
            remedy: "restore the manifest from the original snapshot".into(),
        })?;
        manifest.insert(k.trim().to_string(), v.trim().to_string());
    }
    let get = |key: &str| -> Result<&String> {
        manifest.get(key).ok_or_else(|| Error::Snapshot {
            path: mpath.clone(),
            msg: format!("manifest lacks `{key}`"),
        })
    };
    fn num<T: std::str::FromStr>(mpath: &Path, key: &str, v: &str) -> Result<T> {
        v.parse().map_err(|_| Error::Snapshot {
            path: mpath.to_path_buf(),
            msg: format!("bad manifest value `{v}` for `{key}`"),
        })
    }
    let version: u32 = num(&mpath, "format_version", get("format_version")?)?;
    if version != SNAPSHOT_VERSION {
        return Err(Error::Snapshot {
            path: mpath,
            msg: format!("format version {version} is not supported (expected {SNAPSHOT_VERSION})"),
        });
    }
    let k: usize = num(&mpath, "num_latent", get("num_latent")?)?;
    let n_views: usize = num(&mpath, "n_views", get("n_views")?)?;

    let mut factors = Vec::new();
    let mut priors = Vec::new();
    for m in 0..=n_views {
        let n: usize = num(&mpath, "entities", get(&format!("entities_{m}"))?)?;
        let vals = read_array(dir, &format!("factors-{m}.mtx"), k, n)?;
        factors.push(FactorMatrix::from_vec(k, n, entity_major(k, n, &vals))?);
        let kind: PriorKind = get(&format!("prior_{m}"))?.parse()?;
        priors.push(match kind {
            PriorKind::Normal | PriorKind::Macau => {
                let mu = read_array(dir, &format!("hyper-mu-{m}.mtx"), k, 1)?;
                let lambda = SpdMatrix::from_row_major(k, read_array(dir, &format!("hyper-lambda-{m}.mtx"), k, k)?)?;
                let beta = if kind == PriorKind::Macau {
                    let name = format!("link-{m}.mtx");
                    let (d, kk) = array_dims(dir, &name)?;
                    Some(read_array(dir, &name, d, kk)?)
                } else {
                    None
                };
                PriorParts::Gaussian { mu, lambda, beta }
            }
            PriorKind::SpikeAndSlab => {
                let z = read_array(dir, &format!("sns-z-{m}.mtx"), k, n)?;
                PriorParts::SpikeAndSlab {
                    pi: read_array(dir, &format!("sns-pi-{m}.mtx"), k, 1)?,
                    alpha_slab: read_array(dir, &format!("sns-alpha-{m}.mtx"), k, 1)?,
                    z: entity_major(k, n, &z).into_iter().map(|x| (x != 0.0) as u8).collect(),
                }
            }
        });
    }
    let alphas = read_array(dir, "noise.mtx", n_views, 1)?;
    let tpath = dir.join(TRACE_FILE);
    if !tpath.exists() {
        return Err(missing(dir, TRACE_FILE));
    }
    let trace = parse_trace_csv(&fs::read_to_string(&tpath).map_err(|e| Error::io(&tpath, e))?, &tpath)?;

    Ok(Snapshot {
        dir: dir.to_path_buf(),
        iteration: num(&mpath, "iteration", get("iteration")?)?,
        seed: num(&mpath, "seed", get("seed")?)?,
        num_latent: k,
        samples_collected: num(&mpath, "samples_collected", get("samples_collected")?)?,
        config_digest: get("config_digest")?.clone(),
        factors,
        priors,
        alphas,
        aggregate: parse_aggregate(dir)?,
        trace,
        manifest,
    })
}

/// Load `snap` into a session built from the same configuration and data.
/// Refuses when the configuration digest differs.
pub fn restore_session(session: &mut Session, snap: &Snapshot) -> Result<()> {
    let digest = session_digest(session);
    if digest != snap.config_digest {
        return Err(snap.err(format!(
            "configuration digest mismatch (snapshot {}, current {digest}); resume with the original data and settings",
            snap.config_digest
        )));
    }
    if snap.factors.len() != session.n_modes() {
        return Err(snap.err("mode count differs from the session"));
    }
    let mut model: LatentModel = session.model().clone();
    for (m, (f, parts)) in snap.factors.iter().zip(&snap.priors).enumerate() {
        let cur = &model.factors[m];
        if (f.num_latent(), f.n_entities()) != (cur.num_latent(), cur.n_entities()) {
            return Err(snap.err(format!("factor shape of mode {m} differs from the session")));
        }
        model.factors[m] = f.clone();
        match (&mut model.priors[m], parts) {
            (PriorState::Normal(g), PriorParts::Gaussian { mu, lambda, beta: None }) => {
                g.hyper.mu = mu.clone();
                g.hyper.lambda = lambda.clone();
            }
            (PriorState::Macau(st), PriorParts::Gaussian { mu, lambda, beta: Some(b) }) => {
                if b.len() != st.beta.len() {
                    return Err(snap.err(format!("link matrix of mode {m} has the wrong size")));
                }
                st.gaussian.hyper.mu = mu.clone();
                st.gaussian.hyper.lambda = lambda.clone();
                st.beta = b.clone();
            }
            (PriorState::SpikeAndSlab(st), PriorParts::SpikeAndSlab { pi, alpha_slab, z }) => {
                st.params.pi = pi.clone();
                st.params.alpha_slab = alpha_slab.clone();
                st.z = z.clone();
            }
            _ => return Err(snap.err(format!("prior of mode {m} differs from the session"))),
        }
    }
    let noise: Vec<NoiseState> = session
        .noise()
        .iter()
        .zip(&snap.alphas)
        .map(|(n, &a)| NoiseState::with_alpha(n.spec(), a))
        .collect();
    let aggregate = match (session.test_set(), &snap.aggregate) {
        (Some(test), Some(parts)) => {
            let agg = PredictionAggregate::from_parts(test, parts.mean.clone(), parts.m2.clone(), snap.samples_collected)?;
            if agg.cells() != parts.cells.as_slice() {
                return Err(snap.err("aggregate cells differ from the test set"));
            }
            Some(agg)
        }
        (None, None) => None,
        _ => return Err(snap.err("test set presence differs from the snapshot")),
    };
    session.restore(model, noise, aggregate, snap.trace.clone(), snap.iteration);
    Ok(())
}
