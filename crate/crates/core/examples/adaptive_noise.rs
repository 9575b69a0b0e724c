//! Learn the noise precision instead of fixing it. The data carry noise with
//! standard deviation 0.3, so α should settle near 1/0.09 ≈ 11.
//!
//! ```text
//! cargo run --release --example adaptive_noise
//! ```

use bayesmf::synth::{low_rank, LowRankSpec};
use bayesmf::{NoiseSpec, Session, SessionConfig, ViewSet};

fn main() -> bayesmf::Result<()> {
    let mut spec = LowRankSpec::new(300, 200, 5);
    spec.noise_std = 0.3;
    spec.observed_fraction = 0.3;
    spec.n_test = 1000;
    let data = low_rank(&spec)?;

    let mut cfg = SessionConfig::single(5, NoiseSpec::Adaptive { a0: 1.0, b0: 1.0 });
    cfg.burnin = 100;
    cfg.nsamples = 200;
    let mut session = Session::new(cfg, ViewSet::single(data.train), Some(data.test))?;
    let summary = session.run_with(|_, rec| {
        if rec.iteration % 25 == 0 {
            println!("iteration {:>3}  alpha {:.3}", rec.iteration, rec.alphas[0]);
        }
        Ok(())
    })?;
    let tail: Vec<f64> = summary.trace[100..].iter().map(|r| r.alphas[0]).collect();
    let mean = tail.iter().sum::<f64>() / tail.len() as f64;
    println!("posterior mean alpha {mean:.2} (noise std {:.3})", 1.0 / mean.sqrt());
    println!("test rmse {:.4}", summary.final_rmse.unwrap_or(f64::NAN));
    Ok(())
}
