//! Two views sharing their rows. Components 0–1 load on both views, 2–3 only
//! on the first, 4–5 only on the second. Spike-and-slab priors on the view
//! columns should switch each component off where it does not load.
//!
//! Components are only identified up to order and sign, so each estimated
//! component is matched to the true one it correlates with best. With very
//! little noise the chain tends to stay in a rotated solution; the noise
//! level here keeps it mixing.
//!
//! ```text
//! cargo run --release --example gfa_views -- [seed]
//! ```

use bayesmf::priors::PriorState;
use bayesmf::sampler::Phase;
use bayesmf::synth::{abs_correlations, best_permutation, multi_view, MultiViewSpec};
use bayesmf::{NoiseSpec, PriorSpec, Session, SessionConfig, ViewSet};

fn main() -> bayesmf::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let mut spec = MultiViewSpec::shared_and_specific(100, 100);
    spec.noise_std = 1.0;
    spec.seed = seed;
    let data = multi_view(&spec)?;
    let k = spec.num_latent;

    let cfg = SessionConfig {
        num_latent: k,
        burnin: 200,
        nsamples: 300,
        seed,
        threads: 0,
        split_threshold: bayesmf::sampler::DEFAULT_SPLIT_THRESHOLD,
        row_prior: PriorSpec::normal(k),
        col_priors: vec![PriorSpec::spike_and_slab(), PriorSpec::spike_and_slab()],
        noise: vec![NoiseSpec::Adaptive { a0: 1.0, b0: 1.0 }; 2],
        checkpoint_every: 0,
    };
    let mut session = Session::new(cfg, ViewSet::new(data.views.clone())?, None)?;

    // inclusion[v][c]: running sum over samples of the fraction of view-v
    // columns that include component c
    let mut inclusion = vec![vec![0.0; k]; 2];
    let mut corr = vec![vec![0.0; k]; k];
    let mut samples = 0.0;
    session.run_with(|s, rec| {
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
    })?;

    let perm = best_permutation(&corr);
    println!("component  truth  |corr|  view0  view1");
    for (c, &t) in perm.iter().enumerate() {
        println!(
            "{c:>9}  {t:>5}  {:>6.3}  {:>5.2}  {:>5.2}",
            corr[c][t] / samples,
            inclusion[0][c] / samples,
            inclusion[1][c] / samples
        );
    }
    Ok(())
}
