//! Stop a run half way, save it, and continue from disk. The continued run
//! reproduces the uninterrupted one exactly.
//!
//! ```text
//! cargo run --release --example snapshot_resume
//! ```

use bayesmf::io::{read_snapshot, restore_session, write_snapshot};
use bayesmf::synth::{low_rank, LowRankSpec};
use bayesmf::{NoiseSpec, Session, SessionConfig, ViewSet};

fn main() -> bayesmf::Result<()> {
    let mut spec = LowRankSpec::new(120, 90, 3);
    spec.n_test = 500;
    let data = low_rank(&spec)?;
    let views = ViewSet::single(data.train);

    let mut cfg = SessionConfig::single(3, NoiseSpec::Adaptive { a0: 1.0, b0: 1.0 });
    cfg.burnin = 40;
    cfg.nsamples = 60;
    cfg.seed = 11;

    let mut full = Session::new(cfg.clone(), views.clone(), Some(data.test.clone()))?;
    full.run()?;

    let dir = std::env::temp_dir().join(format!("bayesmf-resume-{}", std::process::id()));
    let mut first = Session::new(cfg.clone(), views.clone(), Some(data.test.clone()))?;
    for _ in 0..70 {
        first.step()?;
    }
    write_snapshot(&first, &dir)?;
    drop(first);

    let snap = read_snapshot(&dir)?;
    println!("snapshot at iteration {} with {} samples collected", snap.iteration, snap.samples_collected);
    let mut resumed = Session::new(cfg, views, Some(data.test))?;
    restore_session(&mut resumed, &snap)?;
    resumed.run()?;

    let same = full
        .trace()
        .iter()
        .zip(resumed.trace())
        .all(|(a, b)| a.csv_row() == b.csv_row());
    println!("traces identical: {same} ({} iterations)", resumed.trace().len());
    println!(
        "final rmse {} vs {}",
        full.aggregate().unwrap().rmse()?,
        resumed.aggregate().unwrap().rmse()?
    );
    std::fs::remove_dir_all(&dir).ok();
    Ok(())
}
