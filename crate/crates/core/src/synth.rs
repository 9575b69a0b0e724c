//! Synthetic low-rank data with known factors, for examples, benchmarks and
//! recovery tests.

use crate::data::{DenseMatrix, MatrixData, SideInfo, SparseMatrix, TestSet, Triplet};
use crate::error::{Error, Result};
use crate::factors::FactorMatrix;
use crate::rng::RngStream;

const SYNTH_MODE: u32 = 0xDA7A;

fn stream(seed: u64, purpose: u64) -> RngStream {
    RngStream::new(seed, 0, SYNTH_MODE, purpose)
}

/// Uniform index in `0..n`.
fn below(s: &mut RngStream, n: usize) -> usize {
    ((s.uniform() * n as f64) as usize).min(n - 1)
}

fn shuffle<T>(s: &mut RngStream, v: &mut [T]) {
    for i in (1..v.len()).rev() {
        v.swap(i, below(s, i + 1));
    }
}

/// Factor matrix with `N(0, scale²)` entries.
pub fn gaussian_factors(k: usize, n: usize, scale: f64, s: &mut RngStream) -> FactorMatrix {
    let mut f = FactorMatrix::zeros(k, n);
    f.as_mut_slice().iter_mut().for_each(|x| *x = s.normal() * scale);
    f
}

/// Low-rank matrix `R = UᵀV + noise`, partly observed.
#[derive(Clone, Debug)]
pub struct LowRankSpec {
    pub rows: usize,
    pub cols: usize,
    pub num_latent: usize,
    /// Fraction of the cells of warm rows used for training.
    pub observed_fraction: f64,
    pub noise_std: f64,
    /// Held-out cells drawn from the unobserved cells of warm rows.
    pub n_test: usize,
    /// Rows with no training cells at all.
    pub cold_rows: usize,
    /// Fraction of each cold row's cells added to the test set.
    pub cold_test_fraction: f64,
    pub seed: u64,
}

impl LowRankSpec {
    pub fn new(rows: usize, cols: usize, num_latent: usize) -> Self {
        LowRankSpec {
            rows,
            cols,
            num_latent,
            observed_fraction: 0.2,
            noise_std: 0.1,
            n_test: 0,
            cold_rows: 0,
            cold_test_fraction: 0.2,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct LowRankData {
    pub train: MatrixData,
    pub test: TestSet,
    /// True row factors, `N(0, 1/K)` entries.
    pub u: FactorMatrix,
    pub v: FactorMatrix,
    /// Indices of the rows without training data, ascending.
    pub cold_rows: Vec<usize>,
}

impl LowRankData {
    /// Row features `U†ᵀ + N(0, σ²)`: one row of K features per entity.
    pub fn row_side_info(&self, noise_std: f64, seed: u64) -> Result<SideInfo> {
        let mut s = stream(seed, 7);
        let (k, n) = (self.u.num_latent(), self.u.n_entities());
        let values = (0..n)
            .flat_map(|i| self.u.col(i).to_vec())
            .map(|x| x + noise_std * s.normal())
            .collect::<Vec<_>>();
        debug_assert_eq!(values.len(), k * n);
        Ok(SideInfo::Dense(DenseMatrix::new(n, k, values)?))
    }

    /// Test cells lying in cold rows.
    pub fn cold_test_cells(&self) -> Vec<Triplet> {
        self.test
            .entries()
            .iter()
            .copied()
            .filter(|e| self.cold_rows.binary_search(&e.0).is_ok())
            .collect()
    }
}

pub fn low_rank(spec: &LowRankSpec) -> Result<LowRankData> {
    if spec.rows == 0 || spec.cols == 0 || spec.num_latent == 0 {
        return Err(Error::Data("synthetic dimensions must be positive".into()));
    }
    if spec.cold_rows > spec.rows {
        return Err(Error::Data("more cold rows than rows".into()));
    }
    let k = spec.num_latent;
    let scale = 1.0 / (k as f64).sqrt();
    let u = gaussian_factors(k, spec.rows, scale, &mut stream(spec.seed, 1));
    let v = gaussian_factors(k, spec.cols, scale, &mut stream(spec.seed, 2));

    let mut rows: Vec<usize> = (0..spec.rows).collect();
    shuffle(&mut stream(spec.seed, 3), &mut rows);
    let mut cold_rows = rows[..spec.cold_rows].to_vec();
    cold_rows.sort_unstable();

    let mut noise = stream(spec.seed, 4);
    let mut cell = |i: usize, j: usize| (i, j, u.dot(i, &v, j) + spec.noise_std * noise.normal());

    let mut warm_cells: Vec<(usize, usize)> = (0..spec.rows)
        .filter(|i| cold_rows.binary_search(i).is_err())
        .flat_map(|i| (0..spec.cols).map(move |j| (i, j)))
        .collect();
    shuffle(&mut stream(spec.seed, 5), &mut warm_cells);
    let n_train = (spec.observed_fraction * warm_cells.len() as f64).round() as usize;
    if n_train + spec.n_test > warm_cells.len() {
        return Err(Error::Data(format!(
            "{n_train} training plus {} test cells exceed the {} warm cells",
            spec.n_test,
            warm_cells.len()
        )));
    }
    let train: Vec<Triplet> = warm_cells[..n_train].iter().map(|&(i, j)| cell(i, j)).collect();
    let mut test: Vec<Triplet> = warm_cells[n_train..n_train + spec.n_test]
        .iter()
        .map(|&(i, j)| cell(i, j))
        .collect();

    let mut cold_cells: Vec<(usize, usize)> =
        cold_rows.iter().flat_map(|&i| (0..spec.cols).map(move |j| (i, j))).collect();
    shuffle(&mut stream(spec.seed, 6), &mut cold_cells);
    let n_cold = (spec.cold_test_fraction * cold_cells.len() as f64).round() as usize;
    test.extend(cold_cells[..n_cold].iter().map(|&(i, j)| cell(i, j)));

    Ok(LowRankData {
        train: MatrixData::Observed(SparseMatrix::from_triplets(spec.rows, spec.cols, train)?),
        test: TestSet::new(test),
        u,
        v,
        cold_rows,
    })
}

/// Two or more dense views sharing row factors, each loading on a subset
/// of the components.
#[derive(Clone, Debug)]
pub struct MultiViewSpec {
    pub rows: usize,
    pub cols_per_view: usize,
    pub num_latent: usize,
    /// `active[v][k]`: whether component `k` loads on view `v`.
    pub active: Vec<Vec<bool>>,
    pub noise_std: f64,
    pub seed: u64,
}

impl MultiViewSpec {
    /// K=6: components 0–1 shared, 2–3 only in view 0, 4–5 only in view 1.
    pub fn shared_and_specific(rows: usize, cols_per_view: usize) -> Self {
        MultiViewSpec {
            rows,
            cols_per_view,
            num_latent: 6,
            active: vec![
                vec![true, true, true, true, false, false],
                vec![true, true, false, false, true, true],
            ],
            noise_std: 0.1,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct MultiViewData {
    pub views: Vec<MatrixData>,
    /// `N(0, 1)` entries.
    pub u: FactorMatrix,
    /// Column factors per view; inactive components are exactly zero.
    pub v: Vec<FactorMatrix>,
}

pub fn multi_view(spec: &MultiViewSpec) -> Result<MultiViewData> {
    let k = spec.num_latent;
    if spec.active.iter().any(|a| a.len() != k) {
        return Err(Error::Data("every activity pattern needs K entries".into()));
    }
    let u = gaussian_factors(k, spec.rows, 1.0, &mut stream(spec.seed, 11));
    let mut views = Vec::new();
    let mut vs = Vec::new();
    for (vi, act) in spec.active.iter().enumerate() {
        let mut v = gaussian_factors(k, spec.cols_per_view, 1.0, &mut stream(spec.seed, 12 + vi as u64));
        for j in 0..spec.cols_per_view {
            for (x, &on) in v.col_mut(j).iter_mut().zip(act) {
                if !on {
                    *x = 0.0;
                }
            }
        }
        let mut noise = stream(spec.seed, 100 + vi as u64);
        let values = (0..spec.rows)
            .flat_map(|i| (0..spec.cols_per_view).map(move |j| (i, j)))
            .map(|(i, j)| u.dot(i, &v, j) + spec.noise_std * noise.normal())
            .collect();
        views.push(MatrixData::Dense(DenseMatrix::new(spec.rows, spec.cols_per_view, values)?));
        vs.push(v);
    }
    Ok(MultiViewData { views, u, v: vs })
}

/// Sparse matrix with `nnz` distinct uniformly placed cells of a rank-K
/// product, for timing runs.
pub fn random_sparse(rows: usize, cols: usize, nnz: usize, num_latent: usize, seed: u64) -> Result<SparseMatrix> {
    if nnz > rows * cols {
        return Err(Error::Data(format!("{nnz} cells do not fit in {rows}x{cols}")));
    }
    let scale = 1.0 / (num_latent as f64).sqrt();
    let u = gaussian_factors(num_latent, rows, scale, &mut stream(seed, 21));
    let v = gaussian_factors(num_latent, cols, scale, &mut stream(seed, 22));
    let mut s = stream(seed, 23);
    let mut cells: Vec<u64> = Vec::with_capacity(nnz + nnz / 8);
    while cells.len() < nnz {
        let missing = nnz - cells.len();
        cells.extend((0..missing + missing / 8 + 1).map(|_| (below(&mut s, rows) * cols + below(&mut s, cols)) as u64));
        cells.sort_unstable();
        cells.dedup();
    }
    // drop a uniform subset of the surplus
    shuffle(&mut s, &mut cells);
    cells.truncate(nnz);
    let mut noise = stream(seed, 24);
    let entries = cells
        .into_iter()
        .map(|c| {
            let (i, j) = (c as usize / cols, c as usize % cols);
            (i, j, u.dot(i, &v, j) + 0.1 * noise.normal())
        })
        .collect();
    SparseMatrix::from_triplets(rows, cols, entries)
}

/// `|corr|` between every component of `est` (rows) and of `truth`
/// (columns), computed over entities.
pub fn abs_correlations(est: &FactorMatrix, truth: &FactorMatrix) -> Vec<Vec<f64>> {
    let n = est.n_entities();
    let series = |f: &FactorMatrix, c: usize| -> Vec<f64> {
        let xs: Vec<f64> = (0..n).map(|i| f.col(i)[c]).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        xs.into_iter().map(|x| x - mean).collect()
    };
    let corr = |a: &[f64], b: &[f64]| {
        let ab: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        let aa: f64 = a.iter().map(|x| x * x).sum();
        let bb: f64 = b.iter().map(|x| x * x).sum();
        if aa == 0.0 || bb == 0.0 {
            0.0
        } else {
            (ab / (aa * bb).sqrt()).abs()
        }
    };
    let truth_s: Vec<Vec<f64>> = (0..truth.num_latent()).map(|c| series(truth, c)).collect();
    (0..est.num_latent())
        .map(|c| {
            let e = series(est, c);
            truth_s.iter().map(|t| corr(&e, t)).collect()
        })
        .collect()
}

/// Assignment `perm[est] = truth` maximizing the summed score, by
/// exhaustive search (intended for K ≤ 8).
pub fn best_permutation(score: &[Vec<f64>]) -> Vec<usize> {
    fn go(score: &[Vec<f64>], row: usize, used: &mut Vec<bool>, cur: &mut Vec<usize>, best: &mut (f64, Vec<usize>), acc: f64) {
        if row == score.len() {
            if acc > best.0 {
                *best = (acc, cur.clone());
            }
            return;
        }
        for t in 0..used.len() {
            if !used[t] {
                used[t] = true;
                cur.push(t);
                go(score, row + 1, used, cur, best, acc + score[row][t]);
                cur.pop();
                used[t] = false;
            }
        }
    }
    let k = score.len();
    let mut best = (f64::NEG_INFINITY, (0..k).collect());
    go(score, 0, &mut vec![false; k], &mut Vec::new(), &mut best, 0.0);
    best.1
}
