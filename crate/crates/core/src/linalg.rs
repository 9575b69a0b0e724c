//! Dense K×K kernels used by every latent update.
//!
//! Matrices are stored row-major in flat `Vec<f64>`s. Nothing here forms an
//! explicit inverse: posterior draws use one Cholesky factorization plus two
//! triangular solves.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Entries per accumulation block. Accumulation always proceeds block by
/// block and combines block partials in ascending order, so splitting a
/// heavy entity across threads only changes scheduling, never the bits.
pub const ACC_BLOCK: usize = 128;

const JITTER_REL: f64 = 1e-10;
const JITTER_RETRIES: usize = 3;

/// Symmetric positive-definite matrix, stored in full.
#[derive(Clone, Debug, PartialEq)]
pub struct SpdMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SpdMatrix {
    pub fn zeros(n: usize) -> Self {
        SpdMatrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::scaled_identity(n, 1.0)
    }

    pub fn scaled_identity(n: usize, s: f64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = s;
        }
        m
    }

    /// Build from row-major data. The caller is responsible for symmetry.
    pub fn from_row_major(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::Data(format!(
                "expected {} values for a {n}x{n} matrix, got {}",
                n * n,
                data.len()
            )));
        }
        Ok(SpdMatrix { n, data })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn add_diag(&mut self, v: f64) {
        for i in 0..self.n {
            self.data[i * self.n + i] += v;
        }
    }

    pub fn add_assign(&mut self, other: &SpdMatrix) {
        debug_assert_eq!(self.n, other.n);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn scale(&mut self, s: f64) {
        for a in &mut self.data {
            *a *= s;
        }
    }

    /// y = A x
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Copy the lower triangle onto the upper one.
    pub fn mirror_lower(&mut self) {
        let n = self.n;
        for i in 0..n {
            for j in 0..i {
                self.data[j * n + i] = self.data[i * n + j];
            }
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Lower-triangular Cholesky factor `L` with `L Lᵀ = A`.
#[derive(Clone, Debug)]
pub struct CholFactor {
    n: usize,
    data: Vec<f64>,
}

impl CholFactor {
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Solve `L y = b` in place.
    pub fn solve_lower_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let row = &self.data[i * n..i * n + i];
            let s: f64 = row.iter().zip(&b[..i]).map(|(l, y)| l * y).sum();
            b[i] = (b[i] - s) / self.data[i * n + i];
        }
    }

    /// Solve `Lᵀ x = y` in place.
    pub fn solve_upper_in_place(&self, y: &mut [f64]) {
        let n = self.n;
        for i in (0..n).rev() {
            let xi = y[i] / self.data[i * n + i];
            y[i] = xi;
            let row = &self.data[i * n..i * n + i];
            for (yp, l) in y[..i].iter_mut().zip(row) {
                *yp -= l * xi;
            }
        }
    }

    /// Solve `A x = b` for the factored `A`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_lower_in_place(&mut x);
        self.solve_upper_in_place(&mut x);
        x
    }

    /// `L Lᵀ`, for checks.
    pub fn reconstruct(&self) -> SpdMatrix {
        let n = self.n;
        let mut out = SpdMatrix::zeros(n);
        for i in 0..n {
            for j in 0..=i {
                let s: f64 = (0..=j).map(|p| self.get(i, p) * self.get(j, p)).sum();
                out.set(i, j, s);
                out.set(j, i, s);
            }
        }
        out
    }

    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.n).map(|i| self.get(i, i).ln()).sum::<f64>()
    }
}

fn try_cholesky(a: &[f64], n: usize, jitter: f64) -> std::result::Result<Vec<f64>, usize> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let dot: f64 = l[i * n..i * n + j]
                .iter()
                .zip(&l[j * n..j * n + j])
                .map(|(x, y)| x * y)
                .sum();
            let mut s = a[i * n + j] - dot;
            if i == j {
                s += jitter;
                if !(s > 0.0) || !s.is_finite() {
                    return Err(i);
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    Ok(l)
}

/// Cholesky factorization with the diagonal jitter fallback: on breakdown,
/// add `1e-10·trace/n` to the diagonal and retry, escalating tenfold, at most
/// three times.
pub fn chol_spd(a: &SpdMatrix) -> Result<CholFactor> {
    let n = a.n;
    let mut failed_at = match try_cholesky(&a.data, n, 0.0) {
        Ok(data) => return Ok(CholFactor { n, data }),
        Err(p) => p,
    };
    let base = JITTER_REL * a.trace().abs().max(f64::MIN_POSITIVE) / n.max(1) as f64;
    let mut jitter = base;
    for _ in 0..JITTER_RETRIES {
        match try_cholesky(&a.data, n, jitter) {
            Ok(data) => return Ok(CholFactor { n, data }),
            Err(p) => failed_at = p,
        }
        jitter *= 10.0;
    }
    Err(Error::NotPositiveDefinite { pivot: failed_at })
}

/// Mean of the canonical-form Gaussian, `Λ⁻¹h`: the draw with the noise term
/// suppressed.
pub fn canonical_mean(factor: &CholFactor, h: &[f64]) -> Vec<f64> {
    factor.solve(h)
}

/// Draw from `N(Λ⁻¹h, Λ⁻¹)` given `L = chol(Λ)`:
/// `x = L⁻ᵀ(L⁻¹h + z)` with `z` standard normal.
pub fn sample_mvn_with_factor(s: &mut RngStream, factor: &CholFactor, h: &[f64]) -> Vec<f64> {
    let mut x = h.to_vec();
    factor.solve_lower_in_place(&mut x);
    for v in &mut x {
        *v += s.normal();
    }
    factor.solve_upper_in_place(&mut x);
    x
}

/// Draw from `N(Λ⁻¹h, Λ⁻¹)`.
pub fn sample_mvn_canonical(s: &mut RngStream, precision: &SpdMatrix, h: &[f64]) -> Result<Vec<f64>> {
    if h.len() != precision.dim() {
        return Err(Error::Data(format!(
            "shift vector has length {}, precision is {}x{}",
            h.len(),
            precision.dim(),
            precision.dim()
        )));
    }
    let factor = chol_spd(precision)?;
    Ok(sample_mvn_with_factor(s, &factor, h))
}

fn bartlett(s: &mut RngStream, n: usize, dof: f64) -> Result<Vec<f64>> {
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        a[i * n + i] = s.chi_square(dof - i as f64)?.sqrt();
        for j in 0..i {
            a[i * n + j] = s.normal();
        }
    }
    Ok(a)
}

/// `X Xᵀ` for a square row-major `X`, lower triangle computed then mirrored.
fn outer_self(x: &[f64], n: usize) -> SpdMatrix {
    let mut out = SpdMatrix::zeros(n);
    for i in 0..n {
        for j in 0..=i {
            let v: f64 = x[i * n..(i + 1) * n]
                .iter()
                .zip(&x[j * n..(j + 1) * n])
                .map(|(p, q)| p * q)
                .sum();
            out.set(i, j, v);
        }
    }
    out.mirror_lower();
    out
}

fn check_dof(n: usize, dof: f64) -> Result<()> {
    if !(dof >= n as f64) || !dof.is_finite() {
        return Err(Error::Domain(format!(
            "Wishart degrees of freedom {dof} must be at least the dimension {n}"
        )));
    }
    Ok(())
}

/// Wishart draw with scale `W` and `dof` degrees of freedom (Bartlett
/// construction), so that `E[X] = dof·W`.
pub fn sample_wishart(s: &mut RngStream, scale: &SpdMatrix, dof: f64) -> Result<SpdMatrix> {
    let n = scale.dim();
    check_dof(n, dof)?;
    let l = chol_spd(scale)?;
    let a = bartlett(s, n, dof)?;
    // X = L A, both lower triangular
    let mut x = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            x[i * n + j] = (j..=i).map(|p| l.get(i, p) * a[p * n + j]).sum();
        }
    }
    Ok(outer_self(&x, n))
}

/// Wishart draw when only the inverse scale `W⁻¹` is at hand, given its
/// factor `L` (`L Lᵀ = W⁻¹`). Uses `L⁻ᵀ` as the square root of `W`.
pub fn sample_wishart_inv_scale(s: &mut RngStream, inv_scale: &CholFactor, dof: f64) -> Result<SpdMatrix> {
    let n = inv_scale.dim();
    check_dof(n, dof)?;
    let a = bartlett(s, n, dof)?;
    // columns of X solve Lᵀ x_j = a_j
    let mut x = vec![0.0; n * n];
    let mut col = vec![0.0; n];
    for j in 0..n {
        for i in 0..n {
            col[i] = a[i * n + j];
        }
        inv_scale.solve_upper_in_place(&mut col);
        for i in 0..n {
            x[i * n + j] = col[i];
        }
    }
    Ok(outer_self(&x, n))
}

/// Sufficient statistics of one entity's likelihood:
/// `A = α Σ v vᵀ`, `b = α Σ r v`.
#[derive(Clone, Debug, PartialEq)]
pub struct PrecisionStats {
    pub a: SpdMatrix,
    pub b: Vec<f64>,
}

impl PrecisionStats {
    pub fn zeros(k: usize) -> Self {
        PrecisionStats {
            a: SpdMatrix::zeros(k),
            b: vec![0.0; k],
        }
    }

    pub fn add_assign(&mut self, other: &PrecisionStats) {
        self.a.add_assign(&other.a);
        for (x, y) in self.b.iter_mut().zip(&other.b) {
            *x += y;
        }
    }
}

/// Raw block partial: lower triangle of `Σ v vᵀ` plus `Σ r v`.
#[derive(Clone)]
struct Partial {
    k: usize,
    aa: Vec<f64>,
    b: Vec<f64>,
}

impl Partial {
    fn new(k: usize) -> Self {
        Partial {
            k,
            aa: vec![0.0; k * k],
            b: vec![0.0; k],
        }
    }

    #[inline]
    fn push(&mut self, v: &[f64], r: f64) {
        let k = self.k;
        for i in 0..k {
            let vi = v[i];
            let row = &mut self.aa[i * k..i * k + i + 1];
            for (a, vj) in row.iter_mut().zip(&v[..=i]) {
                *a += vi * vj;
            }
            self.b[i] += r * vi;
        }
    }

    fn combine(&mut self, other: &Partial) {
        let k = self.k;
        for i in 0..k {
            for j in 0..=i {
                self.aa[i * k + j] += other.aa[i * k + j];
            }
        }
        for (x, y) in self.b.iter_mut().zip(&other.b) {
            *x += y;
        }
    }

    fn finish(self, alpha: f64) -> PrecisionStats {
        let k = self.k;
        let mut a = SpdMatrix::zeros(k);
        for i in 0..k {
            for j in 0..=i {
                a.set(i, j, alpha * self.aa[i * k + j]);
            }
        }
        a.mirror_lower();
        PrecisionStats {
            a,
            b: self.b.into_iter().map(|x| alpha * x).collect(),
        }
    }
}

/// Accumulate `(A, b)` over `(v, r)` pairs in iteration order.
pub fn accumulate_precision<'a, I>(k: usize, entries: I, alpha: f64) -> PrecisionStats
where
    I: IntoIterator<Item = (&'a [f64], f64)>,
{
    let mut total = Partial::new(k);
    let mut block = Partial::new(k);
    let mut in_block = 0;
    for (v, r) in entries {
        debug_assert_eq!(v.len(), k);
        block.push(v, r);
        in_block += 1;
        if in_block == ACC_BLOCK {
            total.combine(&block);
            block = Partial::new(k);
            in_block = 0;
        }
    }
    if in_block > 0 {
        total.combine(&block);
    }
    total.finish(alpha)
}

/// Indexed accumulation over `count` entries. When `count` exceeds
/// `split_threshold` the blocks are computed as parallel tasks; the result is
/// bit-identical to [`accumulate_precision`] over the same sequence.
pub fn accumulate_precision_split<'a, F>(
    k: usize,
    count: usize,
    alpha: f64,
    split_threshold: usize,
    entry: F,
) -> PrecisionStats
where
    F: Fn(usize) -> (&'a [f64], f64) + Sync,
{
    if count <= split_threshold || count <= ACC_BLOCK {
        return accumulate_precision(k, (0..count).map(&entry), alpha);
    }
    let n_blocks = count.div_ceil(ACC_BLOCK);
    let partials: Vec<Partial> = (0..n_blocks)
        .into_par_iter()
        .map(|blk| {
            let mut p = Partial::new(k);
            let end = ((blk + 1) * ACC_BLOCK).min(count);
            for t in blk * ACC_BLOCK..end {
                let (v, r) = entry(t);
                p.push(v, r);
            }
            p
        })
        .collect();
    let mut total = Partial::new(k);
    for p in &partials {
        total.combine(p);
    }
    total.finish(alpha)
}
