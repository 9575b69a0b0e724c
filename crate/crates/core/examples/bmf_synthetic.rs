//! Recover a rank-4 matrix from 20% of its cells.
//!
//! ```text
//! cargo run --release --example bmf_synthetic -- [seed]
//! ```

use std::time::Instant;

use bayesmf::synth::{low_rank, LowRankSpec};
use bayesmf::{NoiseSpec, Session, SessionConfig, ViewSet};

fn main() -> bayesmf::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);

    let mut spec = LowRankSpec::new(200, 150, 4);
    spec.n_test = 2000;
    spec.seed = seed;
    let data = low_rank(&spec)?;

    let mut cfg = SessionConfig::single(4, NoiseSpec::Fixed { alpha: 100.0 });
    cfg.burnin = 100;
    cfg.nsamples = 200;
    cfg.seed = seed;
    cfg.threads = 1;

    let t0 = Instant::now();
    let mut session = Session::new(cfg, ViewSet::single(data.train), Some(data.test))?;
    let summary = session.run_with(|_, rec| {
        if rec.iteration % 50 == 0 {
            println!("{}", rec.progress_line());
        }
        Ok(())
    })?;
    println!(
        "test rmse {:.4} after {} iterations in {:.2}s (noise floor 0.1)",
        summary.final_rmse.unwrap_or(f64::NAN),
        summary.trace.len(),
        t0.elapsed().as_secs_f64()
    );

    let agg = session.aggregate().expect("test set given");
    let (i, j) = agg.cells()[0];
    let (mean, std) = agg.predict(i, j)?;
    println!("cell ({i}, {j}): {mean:.3} ± {std:.3}, truth {:.3}", agg.truth()[0]);
    Ok(())
}
