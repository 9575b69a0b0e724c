//! Acceptance checks, one line per criterion. Run with
//! `cargo test --release --test acceptance`.

mod common;

use std::fs;
use std::path::Path;
use std::time::Instant;

use bayesmf::bench::{run_bench, BenchParams, Kernel};
use bayesmf::cli::{plan_training, run_training};
use bayesmf::factors::FactorMatrix;
use bayesmf::io::mtx::{read_market, write_array, write_coordinate, MarketMatrix};
use bayesmf::io::{read_snapshot, restore_session, write_snapshot, Preset, TrainOptions};
use bayesmf::linalg::{accumulate_precision, SpdMatrix};
use bayesmf::priors::normal::{gaussian_posterior, normal_wishart_posterior, sample_latent_gaussian, NormalWishartHyper};
use bayesmf::priors::PriorState;
use bayesmf::rng::stream_for;
use bayesmf::sampler::Phase;
use bayesmf::synth::{abs_correlations, best_permutation, low_rank, multi_view, LowRankSpec, MultiViewSpec};
use bayesmf::{DenseMatrix, NoiseSpec, NoiseState, PriorSpec, SideInfo, Session, SessionConfig, ViewSet};
use common::{reference_data, reference_options, tree, write_files};

enum Status {
    Pass,
    Fail,
    Unverified,
}

struct Outcome {
    status: Status,
    detail: String,
}

fn judge(ok: bool, detail: String) -> Outcome {
    Outcome {
        status: if ok { Status::Pass } else { Status::Fail },
        detail,
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn rel_err(a: f64, b: f64, scale: f64) -> f64 {
    (a - b).abs() / scale.max(f64::MIN_POSITIVE)
}

fn recovery() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut rmses = Vec::new();
    let mut worst_time = 0.0f64;
    for seed in 1..=3 {
        let files = write_files(&dir.path().join(seed.to_string()), &reference_data(seed));
        let t0 = Instant::now();
        let mut plan = plan_training(&reference_options(&files, seed)).unwrap();
        let summary = run_training(&mut plan, &mut Vec::new()).unwrap();
        worst_time = worst_time.max(t0.elapsed().as_secs_f64());
        rmses.push(summary.final_rmse.unwrap());
    }
    let ok = rmses.iter().all(|&r| r <= 0.15) && worst_time < 30.0;
    judge(ok, format!("test rmse {rmses:.4?} (<= 0.15), slowest run {worst_time:.2}s (< 30s, 1 thread)"))
}

fn conjugacy() -> Outcome {
    // 1-D latent: prior N(m, 1/λ), observations r = u·v + N(0, 1/α).
    let (m, lam, alpha) = (0.3, 2.0, 4.0);
    let v = [0.5, -1.2, 0.8];
    let r = [1.0, 0.2, -0.4];
    let prec: f64 = lam + alpha * v.iter().map(|x| x * x).sum::<f64>();
    let mean: f64 = (lam * m + alpha * v.iter().zip(&r).map(|(a, b)| a * b).sum::<f64>()) / prec;
    let stats = accumulate_precision(1, v.iter().zip(&r).map(|(x, y)| (std::slice::from_ref(x), *y)), alpha);
    let lambda = SpdMatrix::scaled_identity(1, lam);
    let (post, h) = gaussian_posterior(&[m], &lambda, &stats);
    let param_err = rel_err(post.get(0, 0), prec, prec).max(rel_err(h[0] / post.get(0, 0), mean, mean.abs()));
    let n = 100_000;
    let draws: Vec<f64> = (0..n)
        .map(|t| sample_latent_gaussian(&[m], &lambda, &stats, &mut stream_for(1, t, 0, 0)).unwrap()[0])
        .collect();
    let dmean = draws.iter().sum::<f64>() / n as f64;
    let dvar = draws.iter().map(|x| (x - dmean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let z_mean = (dmean - mean) / (1.0 / prec / n as f64).sqrt();
    let z_var = (dvar * prec - 1.0) / (2.0 / n as f64).sqrt();
    let latent_ok = param_err <= 1e-12 && z_mean.abs() < 3.0 && z_var.abs() < 3.0;

    // Normal-Wishart: raw-moment form of the update against the library's
    // centred form. W0 has a hand-computed inverse.
    let k = 3;
    let w0 = SpdMatrix::from_row_major(k, vec![2.0, 1.0, 0.0, 1.0, 2.0, 1.0, 0.0, 1.0, 2.0]).unwrap();
    let w0_inv = [0.75, -0.5, 0.25, -0.5, 1.0, -0.5, 0.25, -0.5, 0.75];
    let (mu0, beta0, nu0) = (vec![0.5, -1.0, 0.25], 2.5, 5.0);
    let hp = NormalWishartHyper::new(mu0.clone(), beta0, w0, nu0).unwrap();
    let nent = 50;
    let mut s = stream_for(2, 0, 0, 0);
    let u = FactorMatrix::from_vec(k, nent, (0..k * nent).map(|t| s.normal() * 1.5 + (t % k) as f64).collect()).unwrap();
    let post = normal_wishart_posterior(&u, &hp);
    let nf = nent as f64;
    let beta_n = beta0 + nf;
    let sum: Vec<f64> = (0..k).map(|a| (0..nent).map(|i| u.col(i)[a]).sum()).collect();
    let mu_n: Vec<f64> = (0..k).map(|a| (beta0 * mu0[a] + sum[a]) / beta_n).collect();
    let mut nw_err = rel_err(post.beta, beta_n, beta_n).max(rel_err(post.nu, nu0 + nf, nu0 + nf));
    for a in 0..k {
        nw_err = nw_err.max(rel_err(post.mu[a], mu_n[a], mu_n[a].abs()));
        for b in 0..k {
            let raw: f64 = (0..nent).map(|i| u.col(i)[a] * u.col(i)[b]).sum();
            let w = w0_inv[a * k + b] + raw + beta0 * mu0[a] * mu0[b] - beta_n * mu_n[a] * mu_n[b];
            nw_err = nw_err.max(rel_err(post.w_inv.get(a, b), w, w.abs().max(1.0)));
        }
    }
    let nw_ok = nw_err <= 1e-12;

    // Adaptive noise: Gamma(a0 + N/2, b0 + SSE/2).
    let (a0, b0, sse, cells) = (1.0, 1.0, 12.5, 40);
    let shape = a0 + cells as f64 / 2.0;
    let rate = b0 + sse / 2.0;
    let spec = NoiseSpec::Adaptive { a0, b0 };
    let draws: Vec<f64> = (0..n)
        .map(|t| {
            let mut st = NoiseState::with_alpha(spec, 1.0);
            st.update_precision(sse, cells, &mut stream_for(3, t, 0, 0)).unwrap()
        })
        .collect();
    let gmean = draws.iter().sum::<f64>() / n as f64;
    let se = shape.sqrt() / rate / (n as f64).sqrt();
    let z_gamma = (gmean - shape / rate) / se;
    let gamma_ok = z_gamma.abs() < 3.0;

    judge(
        latent_ok && nw_ok && gamma_ok,
        format!(
            "1-D latent params rel err {param_err:.1e}, draws z(mean) {z_mean:.2} z(var) {z_var:.2}; \
             normal-wishart rel err {nw_err:.1e} (<= 1e-12); noise gamma mean z {z_gamma:.2} (|z| < 3)"
        ),
    )
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let files = write_files(dir.path(), &reference_data(1));
    let mut outputs = Vec::new();
    for threads in [1, 2, 8] {
        for threshold in [1, 4096] {
            let tag = format!("t{threads}-h{threshold}");
            let o = TrainOptions {
                threads: Some(threads),
                split_threshold: Some(threshold),
                csv_trace: Some(dir.path().join(format!("{tag}.csv"))),
                save_prefix: Some(dir.path().join(&tag)),
                ..reference_options(&files, 1)
            };
            let mut plan = plan_training(&o).unwrap();
            run_training(&mut plan, &mut Vec::new()).unwrap();
            let csv = fs::read(dir.path().join(format!("{tag}.csv"))).unwrap();
            let snap = tree(&dir.path().join(&tag));
            outputs.push((tag, csv, snap));
        }
    }
    let (_, csv0, snap0) = &outputs[0];
    let differing: Vec<&str> = outputs
        .iter()
        .filter(|(_, c, s)| c != csv0 || s != snap0)
        .map(|(t, _, _)| t.as_str())
        .collect();
    judge(
        differing.is_empty(),
        format!(
            "{} runs (threads 1,2,8 x threshold 1,4096), {} snapshot files each; differing: {differing:?}",
            outputs.len(),
            snap0.len()
        ),
    )
}

fn cold_rmse(session: &Session, cells: &[bayesmf::Triplet]) -> f64 {
    let agg = session.aggregate().unwrap();
    let sse: f64 = cells
        .iter()
        .map(|&(i, j, t)| {
            let (m, _) = agg.predict(i, j).unwrap();
            (m - t) * (m - t)
        })
        .sum();
    (sse / cells.len() as f64).sqrt()
}

fn cold_start() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut reductions = Vec::new();
    for seed in 1..=5 {
        let mut spec = LowRankSpec::new(200, 150, 4);
        spec.n_test = 2000;
        spec.cold_rows = 30;
        spec.seed = seed;
        let data = low_rank(&spec).unwrap();
        let d = dir.path().join(seed.to_string());
        let files = write_files(&d, &data);
        let side = d.join("side.mtx");
        let SideInfo::Dense(f) = data.row_side_info(0.01, seed).unwrap() else { unreachable!() };
        write_array(&side, f.n_rows(), f.n_cols(), f.values()).unwrap();
        let cells = data.cold_test_cells();

        let mut bmf = plan_training(&reference_options(&files, seed)).unwrap();
        bmf.session.run().unwrap();
        let macau = TrainOptions {
            preset: Some(Preset::Macau),
            side_rows: Some(side),
            ..reference_options(&files, seed)
        };
        let mut macau = plan_training(&macau).unwrap();
        macau.session.run().unwrap();
        let (b, m) = (cold_rmse(&bmf.session, &cells), cold_rmse(&macau.session, &cells));
        reductions.push(1.0 - m / b);
    }
    let med = median(reductions.clone());
    judge(
        med >= 0.25,
        format!("cold-start rmse reduction per seed {reductions:.3?}, median {med:.3} (>= 0.25)"),
    )
}

/// Mean inclusion of (view, true component) pairs over post-burn-in
/// samples, after matching estimated to true components.
fn gfa_run(seed: u64, spike_check: &mut dyn FnMut(&Session)) -> (Vec<Vec<f64>>, Vec<usize>, MultiViewSpec) {
    let mut spec = MultiViewSpec::shared_and_specific(100, 100);
    spec.noise_std = 1.0;
    spec.seed = seed;
    let data = multi_view(&spec).unwrap();
    let k = spec.num_latent;
    let cfg = SessionConfig {
        burnin: 200,
        nsamples: 300,
        seed,
        col_priors: vec![PriorSpec::spike_and_slab(); 2],
        noise: vec![NoiseSpec::Adaptive { a0: 1.0, b0: 1.0 }; 2],
        ..SessionConfig::single(k, NoiseSpec::Fixed { alpha: 1.0 })
    };
    let mut session = Session::new(cfg, ViewSet::new(data.views.clone()).unwrap(), None).unwrap();
    let mut inclusion = vec![vec![0.0; k]; 2];
    let mut corr = vec![vec![0.0; k]; k];
    let mut samples = 0.0;
    session
        .run_with(|s, rec| {
            spike_check(s);
            if rec.phase != Phase::Sample {
                return Ok(());
            }
            samples += 1.0;
            for (v, inc) in inclusion.iter_mut().enumerate() {
                let PriorState::SpikeAndSlab(st) = s.prior(v + 1) else { unreachable!() };
                let n = st.z.len() / k;
                for (c, x) in inc.iter_mut().enumerate() {
                    *x += (0..n).filter(|&j| st.z[j * k + c] == 1).count() as f64 / n as f64;
                }
            }
            for (acc, row) in corr.iter_mut().zip(abs_correlations(s.factors(0), &data.u)) {
                acc.iter_mut().zip(row).for_each(|(a, r)| *a += r);
            }
            Ok(())
        })
        .unwrap();
    spike_check(&session);
    inclusion.iter_mut().flatten().for_each(|x| *x /= samples);
    (inclusion, best_permutation(&corr), spec)
}

fn gfa_structure() -> Outcome {
    let mut active_means = Vec::new();
    let mut inactive_means = Vec::new();
    for seed in 1..=5 {
        let (inclusion, perm, spec) = gfa_run(seed, &mut |_| {});
        let (mut act, mut inact) = (Vec::new(), Vec::new());
        for (v, inc) in inclusion.iter().enumerate() {
            for (c, &t) in perm.iter().enumerate() {
                if spec.active[v][t] {
                    act.push(inc[c]);
                } else {
                    inact.push(inc[c]);
                }
            }
        }
        active_means.push(act.iter().sum::<f64>() / act.len() as f64);
        inactive_means.push(inact.iter().sum::<f64>() / inact.len() as f64);
    }
    let (a, i) = (median(active_means.clone()), median(inactive_means.clone()));
    judge(
        a > 0.8 && i < 0.2,
        format!("inclusion active {active_means:.3?} median {a:.3} (> 0.8); inactive {inactive_means:.3?} median {i:.3} (< 0.2)"),
    )
}

fn spike_violations(s: &Session) -> (usize, usize) {
    let mut zeros = 0;
    let mut bad = 0;
    for mode in 0..s.n_modes() {
        if let PriorState::SpikeAndSlab(st) = s.prior(mode) {
            for (z, u) in st.z.iter().zip(s.factors(mode).as_slice()) {
                if *z == 0 {
                    zeros += 1;
                    if u.to_bits() != 0 {
                        bad += 1;
                    }
                }
            }
        }
    }
    (zeros, bad)
}

fn spike_exactness() -> Outcome {
    let mut zeros = 0;
    let mut bad = 0;
    gfa_run(1, &mut |s| {
        let (z, b) = spike_violations(s);
        zeros += z;
        bad += b;
    });
    // the same check on what a snapshot stores
    let dir = tempfile::tempdir().unwrap();
    let mut spec = MultiViewSpec::shared_and_specific(60, 50);
    spec.noise_std = 1.0;
    let data = multi_view(&spec).unwrap();
    let cfg = SessionConfig {
        burnin: 20,
        nsamples: 20,
        col_priors: vec![PriorSpec::spike_and_slab(); 2],
        row_prior: PriorSpec::spike_and_slab(),
        noise: vec![NoiseSpec::Adaptive { a0: 1.0, b0: 1.0 }; 2],
        ..SessionConfig::single(6, NoiseSpec::Fixed { alpha: 1.0 })
    };
    let mut s = Session::new(cfg, ViewSet::new(data.views).unwrap(), None).unwrap();
    s.run_with(|s, _| {
        let (z, b) = spike_violations(s);
        zeros += z;
        bad += b;
        Ok(())
    })
    .unwrap();
    write_snapshot(&s, dir.path()).unwrap();
    let snap = read_snapshot(dir.path()).unwrap();
    let mut stored_bad = 0;
    for (f, p) in snap.factors.iter().zip(&snap.priors) {
        if let bayesmf::io::snapshot::PriorParts::SpikeAndSlab { z, .. } = p {
            stored_bad += z.iter().zip(f.as_slice()).filter(|(z, u)| **z == 0 && u.to_bits() != 0).count();
        }
    }
    judge(
        bad == 0 && stored_bad == 0 && zeros > 0,
        format!("{zeros} switched-off entries checked every iteration, {bad} non-zero; {stored_bad} in the saved snapshot"),
    )
}

fn scaling() -> Outcome {
    let mut p = BenchParams::new(Kernel::FullIteration);
    p.rows = 20_000;
    p.cols = 20_000;
    p.nnz = 2_000_000;
    p.num_latent = 32;
    p.reps = 3;
    p.threads = vec![1, 2, 8];
    let rows = run_bench(&p).unwrap();
    let identical = rows.iter().all(|r| r.checksum == rows[0].checksum);
    let speedup = rows.last().unwrap().speedup;
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    let detail = format!(
        "median iteration {:.2}s at 1 thread, speedup at 8 threads {speedup:.2}x (>= 3x), outputs identical: {identical}, {cores} cores",
        rows[0].median_s
    );
    if cores < 8 {
        return Outcome {
            status: if identical { Status::Unverified } else { Status::Fail },
            detail: format!("{detail}; speedup needs an 8-core machine"),
        };
    }
    judge(identical && speedup >= 3.0, detail)
}

fn fuzz_matrix_market(dir: &Path) -> (usize, usize) {
    let mut failures = 0;
    let mut s = stream_for(8, 0, 0, 0);
    let value = |s: &mut bayesmf::rng::RngStream| -> f64 {
        match s.next_u64() % 5 {
            0 => s.normal(),
            1 => s.normal() * 10f64.powi((s.next_u64() % 600) as i32 - 300),
            2 => f64::from_bits(s.next_u64() % (1 << 52)),
            3 => (s.next_u64() % 1000) as f64 - 500.0,
            _ => -s.uniform(),
        }
    };
    for t in 0..100 {
        let rows = 1 + (s.next_u64() % 40) as usize;
        let cols = 1 + (s.next_u64() % 40) as usize;
        let path = dir.join(format!("m{t}.mtx"));
        let ok = if t % 2 == 0 {
            let cells: Vec<usize> = (0..rows * cols).filter(|_| s.next_u64() % 3 == 0).collect();
            let entries: Vec<_> = cells.iter().map(|&c| (c / cols, c % cols, value(&mut s))).collect();
            write_coordinate(&path, rows, cols, &entries).unwrap();
            match read_market(&path).unwrap() {
                MarketMatrix::Coordinate { n_rows, n_cols, entries: back } => {
                    n_rows == rows
                        && n_cols == cols
                        && back.len() == entries.len()
                        && back.iter().zip(&entries).all(|(a, b)| a.0 == b.0 && a.1 == b.1 && a.2.to_bits() == b.2.to_bits())
                }
                MarketMatrix::Array(_) => false,
            }
        } else {
            let values: Vec<f64> = (0..rows * cols).map(|_| value(&mut s)).collect();
            write_array(&path, rows, cols, &values).unwrap();
            match read_market(&path).unwrap() {
                MarketMatrix::Array(m) => {
                    m == DenseMatrix::new(rows, cols, values.clone()).unwrap()
                        && m.values().iter().zip(&values).all(|(a, b)| a.to_bits() == b.to_bits())
                }
                MarketMatrix::Coordinate { .. } => false,
            }
        };
        if !ok {
            failures += 1;
        }
    }
    (100, failures)
}

fn round_trip() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let data = reference_data(2);
    let mut cfg = SessionConfig::single(4, NoiseSpec::Adaptive { a0: 1.0, b0: 1.0 });
    cfg.burnin = 100;
    cfg.nsamples = 200;
    cfg.seed = 2;
    let views = ViewSet::single(data.train.clone());

    let mut full = Session::new(cfg.clone(), views.clone(), Some(data.test.clone())).unwrap();
    full.run().unwrap();
    let mut first = Session::new(cfg.clone(), views.clone(), Some(data.test.clone())).unwrap();
    for _ in 0..150 {
        first.step().unwrap();
    }
    write_snapshot(&first, dir.path().join("snap")).unwrap();
    let snap = read_snapshot(dir.path().join("snap")).unwrap();
    let mut resumed = Session::new(cfg, views, Some(data.test)).unwrap();
    restore_session(&mut resumed, &snap).unwrap();
    resumed.run().unwrap();
    let rows = |s: &Session| s.trace().iter().map(|r| r.csv_row()).collect::<Vec<_>>();
    let trace_same = rows(&full) == rows(&resumed);
    let means_same = full.aggregate().unwrap().means().iter().map(|x| x.to_bits()).eq(resumed
        .aggregate()
        .unwrap()
        .means()
        .iter()
        .map(|x| x.to_bits()));

    let (n, failures) = fuzz_matrix_market(dir.path());
    judge(
        trace_same && means_same && failures == 0,
        format!(
            "resume at 150/300: trace identical {trace_same}, predictions identical {means_same}; \
             {n} fuzzed matrices, {failures} round-trip failures"
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("synthetic recovery", recovery),
        ("conjugacy oracles", conjugacy),
        ("determinism", determinism),
        ("side-information cold start", cold_start),
        ("multi-view structure", gfa_structure),
        ("spike exactness", spike_exactness),
        ("parallel scaling", scaling),
        ("round-trip and resume", round_trip),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (n, (name, check)) in criteria.iter().enumerate() {
        let id = (n + 1).to_string();
        if !filter.is_empty() && !filter.iter().any(|f| *f == id || name.contains(f.as_str())) {
            continue;
        }
        let t0 = Instant::now();
        let out = check();
        let tag = match out.status {
            Status::Pass => "PASS",
            Status::Fail => {
                failed += 1;
                "FAIL"
            }
            Status::Unverified => "UNVERIFIED",
        };
        println!("criterion {id} [{tag}] {name}: {} ({:.1}s)", out.detail, t0.elapsed().as_secs_f64());
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
