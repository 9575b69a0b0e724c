//! Spike-and-slab prior: each latent component of each entity is either
//! exactly zero or drawn from a zero-mean Gaussian slab.

use crate::error::Result;
use crate::factors::FactorMatrix;
use crate::linalg::PrecisionStats;
use crate::rng::RngStream;

const LOG_ODDS_CLAMP: f64 = 700.0;

/// Beta(a, b) on inclusion probabilities and Gamma(c, d) on slab precisions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SnsHyper {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Default for SnsHyper {
    fn default() -> Self {
        SnsHyper {
            a: 1.0,
            b: 1.0,
            c: 1.0,
            d: 1.0,
        }
    }
}

/// Per-component parameters of one mode.
#[derive(Clone, Debug, PartialEq)]
pub struct SnsParams {
    pub pi: Vec<f64>,
    pub alpha_slab: Vec<f64>,
}

impl SnsParams {
    pub fn sample_initial(hp: &SnsHyper, k: usize, s: &mut RngStream) -> Result<Self> {
        let mut pi = Vec::with_capacity(k);
        let mut alpha_slab = Vec::with_capacity(k);
        for _ in 0..k {
            pi.push(s.beta(hp.a, hp.b)?);
            alpha_slab.push(s.gamma(hp.c, hp.d)?);
        }
        Ok(SnsParams { pi, alpha_slab })
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Log-odds of inclusion for one component given its conditional slab
/// posterior `N(μ̃, λ̃⁻¹)`, clamped to ±700.
pub fn inclusion_log_odds(pi: f64, alpha_slab: f64, post_precision: f64, post_mean: f64) -> f64 {
    let prior = pi.ln() - (1.0 - pi).ln();
    let lo = prior + 0.5 * (alpha_slab / post_precision).ln() + 0.5 * post_precision * post_mean * post_mean;
    if lo.is_nan() {
        // only reachable for π ∈ {0, 1} combined with an infinite likelihood term
        return if pi <= 0.0 { -LOG_ODDS_CLAMP } else { LOG_ODDS_CLAMP };
    }
    lo.clamp(-LOG_ODDS_CLAMP, LOG_ODDS_CLAMP)
}

/// Component-wise sweep (ascending `k`) for one entity. `stats` carries the
/// likelihood terms `A = αΣvvᵀ`, `b = αΣrv`, from which the partial residual
/// of component `k` follows as `b_k − Σ_{l≠k} A_kl u_l`.
pub fn sample_latent_sns(
    u: &mut [f64],
    z: &mut [u8],
    params: &SnsParams,
    stats: &PrecisionStats,
    s: &mut RngStream,
) -> Result<()> {
    let k = u.len();
    for c in 0..k {
        let arow = stats.a.row(c);
        let mut cross = 0.0;
        for (l, (&al, &ul)) in arow.iter().zip(u.iter()).enumerate() {
            if l != c {
                cross += al * ul;
            }
        }
        let prec = params.alpha_slab[c] + arow[c];
        let mean = (stats.b[c] - cross) / prec;
        let lo = inclusion_log_odds(params.pi[c], params.alpha_slab[c], prec, mean);
        if s.bernoulli(sigmoid(lo))? {
            z[c] = 1;
            u[c] = mean + s.normal() / prec.sqrt();
        } else {
            z[c] = 0;
            u[c] = 0.0;
        }
    }
    Ok(())
}

/// Conjugate updates: `π_k ~ Beta(a + n_k, b + N − n_k)` and
/// `αslab_k ~ Gamma(c + n_k/2, d + Σ z u²/2)` with `n_k = Σ_i z_ik`.
pub fn sample_sns_hyper(
    hp: &SnsHyper,
    u: &FactorMatrix,
    z: &[u8],
    s: &mut RngStream,
) -> Result<SnsParams> {
    let k = u.num_latent();
    let n = u.n_entities();
    let mut count = vec![0.0; k];
    let mut sumsq = vec![0.0; k];
    for i in 0..n {
        let ui = u.col(i);
        for c in 0..k {
            if z[i * k + c] != 0 {
                count[c] += 1.0;
                sumsq[c] += ui[c] * ui[c];
            }
        }
    }
    let mut pi = Vec::with_capacity(k);
    let mut alpha_slab = Vec::with_capacity(k);
    for c in 0..k {
        pi.push(s.beta(hp.a + count[c], hp.b + n as f64 - count[c])?);
        alpha_slab.push(s.gamma(hp.c + 0.5 * count[c], hp.d + 0.5 * sumsq[c])?);
    }
    Ok(SnsParams { pi, alpha_slab })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::accumulate_precision;
    use crate::rng::stream_for;

    #[test]
    fn zero_inclusion_forces_spike() {
        let params = SnsParams {
            pi: vec![0.0, 0.0],
            alpha_slab: vec![1.0, 1.0],
        };
        let v = [1.0, 1.0];
        let stats = accumulate_precision(2, [(&v[..], 50.0)], 10.0);
        let mut s = stream_for(41, 0, 0, 0);
        for _ in 0..1000 {
            let mut u = [0.3, -0.2];
            let mut z = [1u8, 1];
            sample_latent_sns(&mut u, &mut z, &params, &stats, &mut s).unwrap();
            assert_eq!(z, [0, 0]);
            assert_eq!(u[0].to_bits(), 0f64.to_bits());
            assert_eq!(u[1].to_bits(), 0f64.to_bits());
        }
    }

    #[test]
    fn no_observations_follows_prior_inclusion() {
        let params = SnsParams {
            pi: vec![0.3],
            alpha_slab: vec![2.0],
        };
        assert!((inclusion_log_odds(0.3, 2.0, 2.0, 0.0) - (0.3f64 / 0.7).ln()).abs() < 1e-14);
        let stats = PrecisionStats::zeros(1);
        let mut s = stream_for(42, 0, 0, 0);
        let n = 100_000;
        let mut on = 0;
        for _ in 0..n {
            let mut u = [0.0];
            let mut z = [0u8];
            sample_latent_sns(&mut u, &mut z, &params, &stats, &mut s).unwrap();
            on += z[0] as usize;
            assert!(z[0] == 1 || u[0] == 0.0);
        }
        let freq = on as f64 / n as f64;
        assert!((freq - 0.3).abs() < 5.0 * (0.21f64 / n as f64).sqrt());
    }

    // K=1, one observation: enumerate z ∈ {0,1} with the slab integrated by
    // quadrature on a fine grid.
    #[test]
    fn inclusion_matches_enumeration() {
        let (pi, alpha_slab, alpha, v, r) = (0.4, 1.5, 4.0, 0.8, 1.1);
        let norm_pdf = |x: f64, m: f64, prec: f64| (prec / (2.0 * std::f64::consts::PI)).sqrt() * (-0.5 * prec * (x - m).powi(2)).exp();
        let lik = |u: f64| norm_pdf(r, u * v, alpha);
        let mut slab_mass = 0.0;
        let h = 1e-4;
        let mut x = -15.0;
        while x <= 15.0 {
            slab_mass += norm_pdf(x, 0.0, alpha_slab) * lik(x) * h;
            x += h;
        }
        let w1 = pi * slab_mass;
        let w0 = (1.0 - pi) * lik(0.0);
        let p_oracle = w1 / (w0 + w1);

        let vv = [v];
        let stats = accumulate_precision(1, [(&vv[..], r)], alpha);
        let prec = alpha_slab + stats.a.get(0, 0);
        let mean = stats.b[0] / prec;
        let p = sigmoid(inclusion_log_odds(pi, alpha_slab, prec, mean));
        assert!((p - p_oracle).abs() < 1e-8, "{p} vs {p_oracle}");

        let params = SnsParams {
            pi: vec![pi],
            alpha_slab: vec![alpha_slab],
        };
        let mut s = stream_for(43, 0, 0, 0);
        let n = 100_000;
        let mut on = 0usize;
        for _ in 0..n {
            let mut u = [0.0];
            let mut z = [0u8];
            sample_latent_sns(&mut u, &mut z, &params, &stats, &mut s).unwrap();
            on += z[0] as usize;
        }
        let freq = on as f64 / n as f64;
        assert!((freq - p_oracle).abs() < 5.0 * (p_oracle * (1.0 - p_oracle) / n as f64).sqrt());
    }

    #[test]
    fn hyper_with_empty_slab() {
        let hp = SnsHyper { a: 2.0, b: 3.0, c: 1.5, d: 0.5 };
        let n = 20;
        let u = FactorMatrix::zeros(1, n);
        let z = vec![0u8; n];
        let got = sample_sns_hyper(&hp, &u, &z, &mut stream_for(44, 0, 0, 0)).unwrap();
        let mut s = stream_for(44, 0, 0, 0);
        assert_eq!(got.pi[0], s.beta(2.0, 3.0 + n as f64).unwrap());
        assert_eq!(got.alpha_slab[0], s.gamma(1.5, 0.5).unwrap());

        // all included, all zero: Gamma(c + N/2, d)
        let z = vec![1u8; n];
        let got = sample_sns_hyper(&hp, &u, &z, &mut stream_for(45, 0, 0, 0)).unwrap();
        let mut s = stream_for(45, 0, 0, 0);
        let _ = s.beta(2.0 + n as f64, 3.0).unwrap();
        assert_eq!(got.alpha_slab[0], s.gamma(1.5 + 0.5 * n as f64, 0.5).unwrap());
    }

    #[test]
    fn inclusion_posterior_mean() {
        let hp = SnsHyper::default();
        let n = 10;
        let u = FactorMatrix::from_vec(1, n, vec![1.0; n]).unwrap();
        let z: Vec<u8> = (0..n).map(|i| (i < 7) as u8).collect();
        let reps = 10_000;
        let mut s = stream_for(46, 0, 0, 0);
        let mean = (0..reps)
            .map(|_| sample_sns_hyper(&hp, &u, &z, &mut s).unwrap().pi[0])
            .sum::<f64>()
            / reps as f64;
        let (a, b) = (1.0f64 + 7.0, 1.0f64 + 3.0);
        let var = a * b / ((a + b).powi(2) * (a + b + 1.0));
        assert!((mean - a / (a + b)).abs() < 5.0 * (var / reps as f64).sqrt());
    }
}
