//! Normal-Wishart hyperprior over a mode's mean and precision, and the
//! Gaussian per-entity conditional shared by the Normal and Macau priors.

use crate::error::{Error, Result};
use crate::factors::FactorMatrix;
use crate::linalg::{self, chol_spd, CholFactor, PrecisionStats, SpdMatrix};
use crate::rng::RngStream;

/// Hyperprior `(μ0, β0, W0, ν0)`.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalWishartHyper {
    pub mu0: Vec<f64>,
    pub beta0: f64,
    pub w0: SpdMatrix,
    pub nu0: f64,
    w0_inv: SpdMatrix,
}

impl NormalWishartHyper {
    pub fn new(mu0: Vec<f64>, beta0: f64, w0: SpdMatrix, nu0: f64) -> Result<Self> {
        let k = w0.dim();
        if mu0.len() != k {
            return Err(Error::Config(format!("mu0 has length {}, expected {k}", mu0.len())));
        }
        if !(beta0 > 0.0) {
            return Err(Error::Config(format!("beta0 must be positive, got {beta0}")));
        }
        if !(nu0 >= k as f64) {
            return Err(Error::Config(format!("nu0 must be at least K={k}, got {nu0}")));
        }
        // the hyperprior is constant, so its inverse scale is formed once
        let f = chol_spd(&w0)?;
        let mut inv = SpdMatrix::zeros(k);
        let mut e = vec![0.0; k];
        for j in 0..k {
            e.iter_mut().for_each(|x| *x = 0.0);
            e[j] = 1.0;
            let col = f.solve(&e);
            for i in 0..k {
                inv.set(i, j, col[i]);
            }
        }
        for i in 0..k {
            for j in 0..i {
                let avg = 0.5 * (inv.get(i, j) + inv.get(j, i));
                inv.set(i, j, avg);
            }
        }
        inv.mirror_lower();
        Ok(NormalWishartHyper {
            mu0,
            beta0,
            w0,
            nu0,
            w0_inv: inv,
        })
    }

    /// `μ0 = 0, β0 = 2, W0 = I, ν0 = K`.
    pub fn defaults(k: usize) -> Self {
        Self::new(vec![0.0; k], 2.0, SpdMatrix::identity(k), k as f64).expect("valid defaults")
    }

    pub fn num_latent(&self) -> usize {
        self.mu0.len()
    }

    pub fn w0_inv(&self) -> &SpdMatrix {
        &self.w0_inv
    }
}

/// Current `(μ, Λ)` of one mode.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeHyper {
    pub mu: Vec<f64>,
    pub lambda: SpdMatrix,
}

/// Posterior parameters of the Normal-Wishart given `N` entity vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct NwPosterior {
    pub beta: f64,
    pub nu: f64,
    pub mu: Vec<f64>,
    pub w_inv: SpdMatrix,
}

/// `β* = β0+N`, `ν* = ν0+N`, `μ* = (β0μ0 + Nū)/(β0+N)`,
/// `W*⁻¹ = W0⁻¹ + S + β0N/(β0+N)·(ū−μ0)(ū−μ0)ᵀ`.
pub fn normal_wishart_posterior(u: &FactorMatrix, hp: &NormalWishartHyper) -> NwPosterior {
    let k = hp.num_latent();
    let n = u.n_entities();
    if n == 0 {
        return NwPosterior {
            beta: hp.beta0,
            nu: hp.nu0,
            mu: hp.mu0.clone(),
            w_inv: hp.w0_inv.clone(),
        };
    }
    let nf = n as f64;
    let mut mean = vec![0.0; k];
    for i in 0..n {
        for (m, x) in mean.iter_mut().zip(u.col(i)) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= nf);

    let mut scatter = vec![0.0; k * k];
    let mut d = vec![0.0; k];
    for i in 0..n {
        for ((dx, x), m) in d.iter_mut().zip(u.col(i)).zip(&mean) {
            *dx = x - m;
        }
        for a in 0..k {
            let row = &mut scatter[a * k..a * k + a + 1];
            for (s, db) in row.iter_mut().zip(&d[..=a]) {
                *s += d[a] * db;
            }
        }
    }

    let beta = hp.beta0 + nf;
    let shrink = hp.beta0 * nf / beta;
    let mut w_inv = hp.w0_inv.clone();
    for a in 0..k {
        let da = mean[a] - hp.mu0[a];
        for b in 0..=a {
            let db = mean[b] - hp.mu0[b];
            w_inv.set(a, b, w_inv.get(a, b) + scatter[a * k + b] + shrink * da * db);
        }
    }
    w_inv.mirror_lower();
    let mu = hp
        .mu0
        .iter()
        .zip(&mean)
        .map(|(m0, m)| (hp.beta0 * m0 + nf * m) / beta)
        .collect();
    NwPosterior {
        beta,
        nu: hp.nu0 + nf,
        mu,
        w_inv,
    }
}

/// Draw `Λ ~ Wishart(W*, ν*)` then `μ | Λ ~ N(μ*, (β*Λ)⁻¹)`.
pub fn sample_hyper_normal(u: &FactorMatrix, hp: &NormalWishartHyper, s: &mut RngStream) -> Result<ModeHyper> {
    let post = normal_wishart_posterior(u, hp);
    sample_from_posterior(&post, s)
}

pub fn sample_from_posterior(post: &NwPosterior, s: &mut RngStream) -> Result<ModeHyper> {
    let w_inv_factor = chol_spd(&post.w_inv)?;
    let lambda = linalg::sample_wishart_inv_scale(s, &w_inv_factor, post.nu)?;
    let l = chol_spd(&lambda)?;
    let scale = 1.0 / post.beta.sqrt();
    let mut z: Vec<f64> = (0..post.mu.len()).map(|_| s.normal() * scale).collect();
    l.solve_upper_in_place(&mut z);
    let mu = post.mu.iter().zip(&z).map(|(m, e)| m + e).collect();
    Ok(ModeHyper { mu, lambda })
}

/// Draw an entity vector from `N(Λ*⁻¹h, Λ*⁻¹)` with `Λ* = Λ + A` and
/// `h = Λ·m + b`.
pub fn sample_latent_gaussian(
    prior_mean: &[f64],
    lambda: &SpdMatrix,
    stats: &PrecisionStats,
    s: &mut RngStream,
) -> Result<Vec<f64>> {
    let (post, h) = gaussian_posterior(prior_mean, lambda, stats);
    linalg::sample_mvn_canonical(s, &post, &h)
}

/// `(Λ + A, Λm + b)`.
pub fn gaussian_posterior(prior_mean: &[f64], lambda: &SpdMatrix, stats: &PrecisionStats) -> (SpdMatrix, Vec<f64>) {
    let mut post = lambda.clone();
    post.add_assign(&stats.a);
    let mut h = lambda.mul_vec(prior_mean);
    for (x, y) in h.iter_mut().zip(&stats.b) {
        *x += y;
    }
    (post, h)
}

/// Same draw when `Λ*` has been factored once for many entities;
/// `lambda_m` is `Λ·m` precomputed.
pub fn sample_latent_shared(factor: &CholFactor, lambda_m: &[f64], b: &[f64], s: &mut RngStream) -> Vec<f64> {
    let h: Vec<f64> = lambda_m.iter().zip(b).map(|(x, y)| x + y).collect();
    linalg::sample_mvn_with_factor(s, factor, &h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::accumulate_precision;
    use crate::rng::stream_for;

    fn random_factors(s: &mut RngStream, k: usize, n: usize) -> FactorMatrix {
        FactorMatrix::from_vec(k, n, (0..k * n).map(|_| s.normal() + 0.3).collect()).unwrap()
    }

    #[test]
    fn empty_data_gives_prior() {
        let hp = NormalWishartHyper::defaults(3);
        let post = normal_wishart_posterior(&FactorMatrix::zeros(3, 0), &hp);
        assert_eq!(post.beta, hp.beta0);
        assert_eq!(post.nu, hp.nu0);
        assert_eq!(post.mu, hp.mu0);
        assert_eq!(&post.w_inv, hp.w0_inv());
        assert_eq!(hp.w0_inv(), &SpdMatrix::identity(3));
    }

    #[test]
    fn single_column_at_prior_mean() {
        let mu0 = vec![0.5, -1.0];
        let hp = NormalWishartHyper::new(mu0.clone(), 1.0, SpdMatrix::identity(2), 2.0).unwrap();
        let u = FactorMatrix::from_vec(2, 1, mu0.clone()).unwrap();
        let post = normal_wishart_posterior(&u, &hp);
        assert_eq!(post.mu, mu0);
        // S = 0 and ū = μ0, so W*⁻¹ = W0⁻¹
        assert_eq!(post.w_inv, SpdMatrix::identity(2));
    }

    // Independent route: W*⁻¹ = W0⁻¹ + Σuuᵀ + β0μ0μ0ᵀ − β*μ*μ*ᵀ.
    #[test]
    fn posterior_matches_uncentered_route() {
        let mut s = stream_for(21, 0, 0, 0);
        for (k, n) in [(1, 5), (3, 40), (6, 200)] {
            let u = random_factors(&mut s, k, n);
            let mu0: Vec<f64> = (0..k).map(|i| 0.1 * i as f64).collect();
            let mut w0 = SpdMatrix::identity(k);
            w0.scale(0.5);
            let hp = NormalWishartHyper::new(mu0.clone(), 1.5, w0, k as f64 + 1.0).unwrap();
            let post = normal_wishart_posterior(&u, &hp);

            let nf = n as f64;
            let beta = 1.5 + nf;
            let mut sum = vec![0.0; k];
            let mut outer = vec![0.0; k * k];
            for i in 0..n {
                let c = u.col(i);
                for a in 0..k {
                    sum[a] += c[a];
                    for b in 0..k {
                        outer[a * k + b] += c[a] * c[b];
                    }
                }
            }
            let mu: Vec<f64> = (0..k).map(|a| (1.5 * mu0[a] + sum[a]) / beta).collect();
            assert_eq!(post.beta, beta);
            assert_eq!(post.nu, k as f64 + 1.0 + nf);
            for a in 0..k {
                assert!((post.mu[a] - mu[a]).abs() <= 1e-12 * mu[a].abs().max(1.0));
                for b in 0..k {
                    let want = if a == b { 2.0 } else { 0.0 } + outer[a * k + b] + 1.5 * mu0[a] * mu0[b]
                        - beta * mu[a] * mu[b];
                    let got = post.w_inv.get(a, b);
                    assert!((got - want).abs() <= 1e-12 * want.abs().max(1.0), "{got} vs {want}");
                }
            }
        }
    }

    #[test]
    fn hyper_concentrates_on_generating_truth() {
        // μ† = (1, -2), Λ† = [[2, .5], [.5, 1]]
        let mu_t = [1.0, -2.0];
        let lam_t = SpdMatrix::from_row_major(2, vec![2.0, 0.5, 0.5, 1.0]).unwrap();
        let f = chol_spd(&lam_t).unwrap();
        let mut s = stream_for(22, 0, 0, 0);
        let n = 10_000;
        let mut data = Vec::with_capacity(2 * n);
        for _ in 0..n {
            let mut z = vec![s.normal(), s.normal()];
            f.solve_upper_in_place(&mut z);
            data.push(mu_t[0] + z[0]);
            data.push(mu_t[1] + z[1]);
        }
        let u = FactorMatrix::from_vec(2, n, data).unwrap();
        let hp = NormalWishartHyper::defaults(2);
        let h = sample_hyper_normal(&u, &hp, &mut s).unwrap();
        for a in 0..2 {
            assert!((h.mu[a] - mu_t[a]).abs() < 0.05 * mu_t[a].abs());
            for b in 0..2 {
                let t = lam_t.get(a, b);
                // 5% of the matrix scale; off-diagonals are small in absolute terms
                assert!((h.lambda.get(a, b) - t).abs() < 0.05 * lam_t.max_abs(), "{a}{b}");
            }
        }
    }

    #[test]
    fn cold_entity_draws_from_prior() {
        let lam = SpdMatrix::from_row_major(1, vec![4.0]).unwrap();
        let stats = PrecisionStats::zeros(1);
        let mut s = stream_for(23, 0, 0, 0);
        let n = 100_000;
        let xs: Vec<f64> = (0..n)
            .map(|_| sample_latent_gaussian(&[3.0], &lam, &stats, &mut s).unwrap()[0])
            .collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((mean - 3.0).abs() < 5.0 * (0.25f64 / n as f64).sqrt());
        assert!((var - 0.25).abs() < 0.01);
    }

    // K=1, Λ=1, m=0, α=1, one rating 2 against v=1: N(1, 1/2), checked
    // against a brute-force grid posterior.
    #[test]
    fn scalar_conjugate_against_grid() {
        let (mut z, mut m1, mut m2) = (0.0f64, 0.0f64, 0.0f64);
        let step = 1e-3;
        let mut x = -10.0f64;
        while x <= 10.0 {
            let w = (-0.5 * x * x - 0.5 * (2.0 - x) * (2.0 - x)).exp();
            z += w;
            m1 += w * x;
            m2 += w * x * x;
            x += step;
        }
        let grid_mean = m1 / z;
        let grid_var = m2 / z - grid_mean * grid_mean;
        assert!((grid_mean - 1.0).abs() < 1e-6 && (grid_var - 0.5).abs() < 1e-6);

        let v = [1.0];
        let stats = accumulate_precision(1, [(&v[..], 2.0)], 1.0);
        let lam = SpdMatrix::identity(1);
        let mut s = stream_for(24, 0, 0, 0);
        let n = 100_000;
        let xs: Vec<f64> = (0..n)
            .map(|_| sample_latent_gaussian(&[0.0], &lam, &stats, &mut s).unwrap()[0])
            .collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((mean - grid_mean).abs() < 3.0 * (grid_var / n as f64).sqrt());
        assert!((var - grid_var).abs() < 3.0 * grid_var * (2.0 / n as f64).sqrt());
    }

    #[test]
    fn noise_free_limit_is_ridge_solution() {
        let mut s = stream_for(25, 0, 0, 0);
        let k = 4;
        let vs: Vec<f64> = (0..10 * k).map(|_| s.normal()).collect();
        let rs: Vec<f64> = (0..10).map(|_| s.normal()).collect();
        let stats = accumulate_precision(k, (0..10).map(|t| (&vs[t * k..(t + 1) * k], rs[t])), 3.0);
        let lam = SpdMatrix::scaled_identity(k, 2.0);
        let m = vec![0.5; k];
        let (post, h) = gaussian_posterior(&m, &lam, &stats);
        let x = linalg::canonical_mean(&chol_spd(&post).unwrap(), &h);

        // oracle: Gaussian elimination with partial pivoting on the full system
        let mut aug: Vec<Vec<f64>> = (0..k)
            .map(|i| {
                let mut row: Vec<f64> = (0..k)
                    .map(|j| {
                        lam.get(i, j) + 3.0 * (0..10).map(|t| vs[t * k + i] * vs[t * k + j]).sum::<f64>()
                    })
                    .collect();
                row.push(2.0 * m[i] + 3.0 * (0..10).map(|t| rs[t] * vs[t * k + i]).sum::<f64>());
                row
            })
            .collect();
        for c in 0..k {
            let p = (c..k).max_by(|&a, &b| aug[a][c].abs().total_cmp(&aug[b][c].abs())).unwrap();
            aug.swap(c, p);
            for r in c + 1..k {
                let f = aug[r][c] / aug[c][c];
                for cc in c..=k {
                    aug[r][cc] -= f * aug[c][cc];
                }
            }
        }
        let mut sol = vec![0.0; k];
        for r in (0..k).rev() {
            let s: f64 = (r + 1..k).map(|c| aug[r][c] * sol[c]).sum();
            sol[r] = (aug[r][k] - s) / aug[r][r];
        }
        for (a, b) in x.iter().zip(&sol) {
            assert!((a - b).abs() < 1e-10);
        }
    }
}
