//! Rows with no ratings at all: the Normal prior can only predict the
//! global mean for them, while row features let the link matrix place them.
//!
//! ```text
//! cargo run --release --example macau_cold_start -- [seed]
//! ```

use std::sync::Arc;

use bayesmf::synth::{low_rank, LowRankData, LowRankSpec};
use bayesmf::{NoiseSpec, PriorSpec, Session, SessionConfig, ViewSet};

fn cold_rmse(session: &Session, data: &LowRankData) -> bayesmf::Result<f64> {
    let agg = session.aggregate().expect("test set given");
    let cells = data.cold_test_cells();
    let mut sse = 0.0;
    for &(i, j, truth) in &cells {
        let (mean, _) = agg.predict(i, j)?;
        sse += (mean - truth) * (mean - truth);
    }
    Ok((sse / cells.len() as f64).sqrt())
}

fn main() -> bayesmf::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let mut spec = LowRankSpec::new(200, 150, 4);
    spec.n_test = 2000;
    spec.cold_rows = 30;
    spec.seed = seed;
    let data = low_rank(&spec)?;
    let features = Arc::new(data.row_side_info(0.01, seed)?);

    let mut cfg = SessionConfig::single(4, NoiseSpec::Fixed { alpha: 100.0 });
    cfg.burnin = 100;
    cfg.nsamples = 200;
    cfg.seed = seed;

    let mut bmf = Session::new(cfg.clone(), ViewSet::single(data.train.clone()), Some(data.test.clone()))?;
    bmf.run()?;

    cfg.row_prior = PriorSpec::macau(4, features, 1.0);
    let mut macau = Session::new(cfg, ViewSet::single(data.train.clone()), Some(data.test.clone()))?;
    macau.run()?;

    let (b, m) = (cold_rmse(&bmf, &data)?, cold_rmse(&macau, &data)?);
    println!("cold-start rmse: normal prior {b:.4}, with row features {m:.4}");
    println!("reduction {:.1}%", 100.0 * (1.0 - m / b));
    Ok(())
}
