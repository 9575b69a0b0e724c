//! Side-information link matrix: entity prior means become `μ + βᵀf_i`.

use crate::data::SideInfo;
use crate::error::{Error, Result};
use crate::factors::FactorMatrix;
use crate::linalg::{chol_spd, CholFactor, SpdMatrix};
use crate::rng::RngStream;

/// Feature count above which a sparse `F` is solved with conjugate gradients
/// instead of forming `FᵀF`.
pub const DIRECT_SOLVE_MAX_FEATURES: usize = 4096;
pub const CG_TOLERANCE: f64 = 1e-8;
pub const CG_MAX_ITER: usize = 1000;

/// Solver for systems in `M = FᵀF + λβ·I`. `F` and `λβ` are fixed for a
/// session, so the direct variant factors `M` once.
#[derive(Clone, Debug)]
pub enum LinkSolver {
    Direct(CholFactor),
    ConjugateGradient { beta_precision: f64 },
}

impl LinkSolver {
    pub fn new(side: &SideInfo, beta_precision: f64) -> Result<Self> {
        if !(beta_precision > 0.0) {
            return Err(Error::Config(format!(
                "beta precision must be positive, got {beta_precision}"
            )));
        }
        let d = side.n_features();
        if matches!(side, SideInfo::Sparse(_)) && d > DIRECT_SOLVE_MAX_FEATURES {
            return Ok(LinkSolver::ConjugateGradient { beta_precision });
        }
        let mut gram = vec![0.0; d * d];
        let mut nz: Vec<(usize, f64)> = Vec::new();
        for i in 0..side.n_entities() {
            nz.clear();
            side.for_each_in_row(i, |c, v| {
                if v != 0.0 {
                    nz.push((c, v))
                }
            });
            for &(a, va) in &nz {
                for &(b, vb) in &nz {
                    if b <= a {
                        gram[a * d + b] += va * vb;
                    }
                }
            }
        }
        let mut m = SpdMatrix::from_row_major(d, gram)?;
        m.mirror_lower();
        m.add_diag(beta_precision);
        Ok(LinkSolver::Direct(chol_spd(&m)?))
    }

    /// Solve `M x = rhs` in place.
    pub fn solve_in_place(&self, side: &SideInfo, rhs: &mut [f64]) -> Result<()> {
        match self {
            LinkSolver::Direct(f) => {
                f.solve_lower_in_place(rhs);
                f.solve_upper_in_place(rhs);
                Ok(())
            }
            LinkSolver::ConjugateGradient { beta_precision } => {
                let x = conjugate_gradient(side, *beta_precision, rhs)?;
                rhs.copy_from_slice(&x);
                Ok(())
            }
        }
    }
}

/// `y = (FᵀF + λI) x`
fn gram_matvec(side: &SideInfo, lambda: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi = lambda * xi;
    }
    for i in 0..side.n_entities() {
        let mut fx = 0.0;
        side.for_each_in_row(i, |c, v| fx += v * x[c]);
        if fx != 0.0 {
            side.add_row_to(i, fx, y);
        }
    }
}

fn conjugate_gradient(side: &SideInfo, lambda: f64, b: &[f64]) -> Result<Vec<f64>> {
    let d = b.len();
    let dot = |p: &[f64], q: &[f64]| p.iter().zip(q).map(|(a, b)| a * b).sum::<f64>();
    let b_norm = dot(b, b).sqrt();
    let mut x = vec![0.0; d];
    if b_norm == 0.0 {
        return Ok(x);
    }
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut ap = vec![0.0; d];
    let mut rr = dot(&r, &r);
    for _ in 0..CG_MAX_ITER {
        if rr.sqrt() <= CG_TOLERANCE * b_norm {
            return Ok(x);
        }
        gram_matvec(side, lambda, &p, &mut ap);
        let step = rr / dot(&p, &ap);
        for t in 0..d {
            x[t] += step * p[t];
            r[t] -= step * ap[t];
        }
        let rr_next = dot(&r, &r);
        let ratio = rr_next / rr;
        for t in 0..d {
            p[t] = r[t] + ratio * p[t];
        }
        rr = rr_next;
    }
    if rr.sqrt() <= CG_TOLERANCE * b_norm {
        Ok(x)
    } else {
        Err(Error::Domain(format!(
            "conjugate gradients did not reach tolerance {CG_TOLERANCE} in {CG_MAX_ITER} iterations"
        )))
    }
}

/// Draw `β` (`D × K`, row-major) from its matrix-normal conditional:
/// `β = M⁻¹(FᵀU′ + FᵀE₁L⁻ᵀ + √λβ·E₂L⁻ᵀ)` where `U′` has rows `u_i − μ`,
/// `L = chol(Λ)` and `E₁`, `E₂` are standard normal.
pub fn sample_link_matrix(
    u: &FactorMatrix,
    mu: &[f64],
    lambda: &SpdMatrix,
    side: &SideInfo,
    beta_precision: f64,
    solver: &LinkSolver,
    s: &mut RngStream,
) -> Result<Vec<f64>> {
    let k = u.num_latent();
    let n = u.n_entities();
    let d = side.n_features();
    if side.n_entities() != n {
        return Err(Error::Data(format!(
            "side information has {} rows but the mode has {n} entities",
            side.n_entities()
        )));
    }
    let l = chol_spd(lambda)?;
    // rhs stored K × D so each latent component is a contiguous system
    let mut rhs = vec![0.0; k * d];
    let mut w = vec![0.0; k];
    for i in 0..n {
        w.iter_mut().for_each(|x| *x = s.normal());
        l.solve_lower_in_place(&mut w);
        for ((wc, x), m) in w.iter_mut().zip(u.col(i)).zip(mu) {
            *wc += x - m;
        }
        side.for_each_in_row(i, |c, f| {
            for a in 0..k {
                rhs[a * d + c] += f * w[a];
            }
        });
    }
    let root = beta_precision.sqrt();
    for c in 0..d {
        w.iter_mut().for_each(|x| *x = s.normal());
        l.solve_lower_in_place(&mut w);
        for a in 0..k {
            rhs[a * d + c] += root * w[a];
        }
    }
    for a in 0..k {
        solver.solve_in_place(side, &mut rhs[a * d..(a + 1) * d])?;
    }
    let mut beta = vec![0.0; d * k];
    for c in 0..d {
        for a in 0..k {
            beta[c * k + a] = rhs[a * d + c];
        }
    }
    Ok(beta)
}

/// `βᵀf_i` for entity `i`, `β` being `D × K` row-major.
pub fn link_offset(beta: &[f64], side: &SideInfo, i: usize, k: usize, out: &mut [f64]) {
    out.iter_mut().for_each(|x| *x = 0.0);
    side.for_each_in_row(i, |c, f| {
        for (o, b) in out.iter_mut().zip(&beta[c * k..(c + 1) * k]) {
            *o += f * b;
        }
    });
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{DenseMatrix, SparseMatrix};
    use crate::rng::stream_for;

    fn dense_side(s: &mut RngStream, n: usize, d: usize) -> SideInfo {
        SideInfo::Dense(DenseMatrix::new(n, d, (0..n * d).map(|_| s.normal()).collect()).unwrap())
    }

    #[test]
    fn zero_features_give_zero_mean() {
        let (n, d, k) = (30, 3, 2);
        let side = SideInfo::Dense(DenseMatrix::zeros(n, d));
        let solver = LinkSolver::new(&side, 1.0).unwrap();
        let mut s = stream_for(31, 0, 0, 0);
        let u = FactorMatrix::from_vec(k, n, (0..k * n).map(|_| s.normal()).collect()).unwrap();
        let lam = SpdMatrix::identity(k);
        let mut acc = vec![0.0; d * k];
        let reps = 10_000;
        for _ in 0..reps {
            let b = sample_link_matrix(&u, &[0.0; 2], &lam, &side, 1.0, &solver, &mut s).unwrap();
            acc.iter_mut().zip(&b).for_each(|(a, x)| *a += x);
        }
        // per-entry variance is 1/λβ · Λ⁻¹ = 1
        for a in acc {
            assert!((a / reps as f64).abs() < 5.0 / (reps as f64).sqrt());
        }
    }

    #[test]
    fn heavy_regularization_shrinks_to_zero() {
        let mut s = stream_for(32, 0, 0, 0);
        let (n, d, k) = (50, 4, 3);
        let side = dense_side(&mut s, n, d);
        let lambda_beta = 1e8;
        let solver = LinkSolver::new(&side, lambda_beta).unwrap();
        let u = FactorMatrix::from_vec(k, n, (0..k * n).map(|_| s.normal()).collect()).unwrap();
        let b = sample_link_matrix(&u, &[0.0; 3], &SpdMatrix::identity(k), &side, lambda_beta, &solver, &mut s).unwrap();
        assert!(b.iter().all(|x| x.abs() < 1e-2));
    }

    #[test]
    fn noiseless_recovery() {
        let mut s = stream_for(33, 0, 0, 0);
        let (n, d, k) = (2000, 3, 2);
        let side = dense_side(&mut s, n, d);
        let beta_true = [1.0, -2.0, 0.5, 3.0, -1.5, 2.5];
        let mut data = vec![0.0; k * n];
        for i in 0..n {
            link_offset(&beta_true, &side, i, k, &mut data[i * k..(i + 1) * k]);
        }
        let u = FactorMatrix::from_vec(k, n, data).unwrap();
        let lam = SpdMatrix::scaled_identity(k, 1e4);
        let solver = LinkSolver::new(&side, 1e-3).unwrap();
        let b = sample_link_matrix(&u, &[0.0; 2], &lam, &side, 1e-3, &solver, &mut s).unwrap();
        for (got, want) in b.iter().zip(&beta_true) {
            assert!((got - want).abs() < 0.05 * want.abs(), "{got} vs {want}");
        }
    }

    #[test]
    fn cg_agrees_with_direct() {
        let mut s = stream_for(34, 0, 0, 0);
        let (n, d) = (80, 12);
        let mut trips = Vec::new();
        for i in 0..n {
            for c in 0..d {
                if s.uniform() < 0.3 {
                    trips.push((i, c, 1.0));
                }
            }
        }
        let side = SideInfo::Sparse(SparseMatrix::from_triplets(n, d, trips).unwrap());
        let direct = LinkSolver::new(&side, 0.5).unwrap();
        let cg = LinkSolver::ConjugateGradient { beta_precision: 0.5 };
        let rhs: Vec<f64> = (0..d).map(|_| s.normal()).collect();
        let mut x1 = rhs.clone();
        let mut x2 = rhs.clone();
        direct.solve_in_place(&side, &mut x1).unwrap();
        cg.solve_in_place(&side, &mut x2).unwrap();
        for (a, b) in x1.iter().zip(&x2) {
            assert!((a - b).abs() < 1e-6);
        }
    }
}
