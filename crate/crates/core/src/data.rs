//! Matrix containers: sparse coordinate data finalized into compressed row and
//! column layouts, dense row-major matrices, test sets and side information.

use crate::error::{Error, Result};

/// One observed cell.
pub type Triplet = (usize, usize, f64);

/// Finalized sparse matrix with a compressed per-row layout and a parallel
/// compressed per-column view, both built once at construction.
///
/// Whether absent cells are unknown or known zeros is decided by the
/// [`MatrixData`] variant wrapping it.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    row_col: Vec<usize>,
    row_val: Vec<f64>,
    col_ptr: Vec<usize>,
    col_row: Vec<usize>,
    col_val: Vec<f64>,
}

impl SparseMatrix {
    /// Finalize a triplet list. Duplicate coordinates are an error.
    pub fn from_triplets(n_rows: usize, n_cols: usize, mut entries: Vec<Triplet>) -> Result<Self> {
        for &(i, j, v) in &entries {
            if i >= n_rows {
                return Err(Error::IndexOutOfRange { index: i, dim: n_rows });
            }
            if j >= n_cols {
                return Err(Error::IndexOutOfRange { index: j, dim: n_cols });
            }
            if !v.is_finite() {
                return Err(Error::Data(format!("non-finite value at ({i}, {j})")));
            }
        }
        entries.sort_by_key(|&(i, j, _)| (i, j));
        if let Some(w) = entries.windows(2).find(|w| w[0].0 == w[1].0 && w[0].1 == w[1].1) {
            return Err(Error::DuplicateEntry {
                row: w[0].0,
                col: w[0].1,
            });
        }

        let nnz = entries.len();
        let mut row_ptr = vec![0usize; n_rows + 1];
        let mut col_ptr = vec![0usize; n_cols + 1];
        for &(i, j, _) in &entries {
            row_ptr[i + 1] += 1;
            col_ptr[j + 1] += 1;
        }
        for i in 0..n_rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        for j in 0..n_cols {
            col_ptr[j + 1] += col_ptr[j];
        }
        let row_col = entries.iter().map(|e| e.1).collect();
        let row_val = entries.iter().map(|e| e.2).collect();

        // entries are row-major sorted, so filling columns in this order
        // leaves each column's rows ascending
        let mut next = col_ptr.clone();
        let mut col_row = vec![0usize; nnz];
        let mut col_val = vec![0f64; nnz];
        for &(i, j, v) in &entries {
            let p = next[j];
            col_row[p] = i;
            col_val[p] = v;
            next[j] += 1;
        }

        Ok(SparseMatrix {
            n_rows,
            n_cols,
            row_ptr,
            row_col,
            row_val,
            col_ptr,
            col_row,
            col_val,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.row_val.len()
    }

    /// Stored entries of row `i`, ascending by column.
    pub fn observed_in_row(&self, i: usize) -> Result<impl Iterator<Item = (usize, f64)> + '_> {
        if i >= self.n_rows {
            return Err(Error::IndexOutOfRange {
                index: i,
                dim: self.n_rows,
            });
        }
        let (cols, vals) = self.row(i);
        Ok(cols.iter().copied().zip(vals.iter().copied()))
    }

    /// Column indices and values of row `i` (unchecked beyond slice bounds).
    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.row_col[r.clone()], &self.row_val[r])
    }

    /// Row indices and values of column `j`, ascending by row.
    #[inline]
    pub fn col(&self, j: usize) -> (&[usize], &[f64]) {
        let r = self.col_ptr[j]..self.col_ptr[j + 1];
        (&self.col_row[r.clone()], &self.col_val[r])
    }

    pub fn row_count(&self, i: usize) -> usize {
        self.row_ptr[i + 1] - self.row_ptr[i]
    }

    /// Logical transpose; swaps the two compressed layouts without copying
    /// entries around.
    pub fn transpose_view(&self) -> SparseMatrix {
        SparseMatrix {
            n_rows: self.n_cols,
            n_cols: self.n_rows,
            row_ptr: self.col_ptr.clone(),
            row_col: self.col_row.clone(),
            row_val: self.col_val.clone(),
            col_ptr: self.row_ptr.clone(),
            col_row: self.row_col.clone(),
            col_val: self.row_val.clone(),
        }
    }

    /// All entries in row-major order.
    pub fn triplets(&self) -> impl Iterator<Item = Triplet> + '_ {
        (0..self.n_rows).flat_map(move |i| {
            let (c, v) = self.row(i);
            c.iter().zip(v).map(move |(&j, &x)| (i, j, x))
        })
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).ok().map(|p| vals[p])
    }
}

/// Dense row-major matrix with finite values.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    n_rows: usize,
    n_cols: usize,
    values: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(n_rows: usize, n_cols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n_rows * n_cols {
            return Err(Error::Data(format!(
                "dense {n_rows}x{n_cols} matrix needs {} values, got {}",
                n_rows * n_cols,
                values.len()
            )));
        }
        if let Some(p) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!(
                "non-finite value at ({}, {})",
                p / n_cols.max(1),
                p % n_cols.max(1)
            )));
        }
        Ok(DenseMatrix {
            n_rows,
            n_cols,
            values,
        })
    }

    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        DenseMatrix {
            n_rows,
            n_cols,
            values: vec![0.0; n_rows * n_cols],
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n_cols + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut out = vec![0.0; self.values.len()];
        for i in 0..self.n_rows {
            for j in 0..self.n_cols {
                out[j * self.n_rows + i] = self.values[i * self.n_cols + j];
            }
        }
        DenseMatrix {
            n_rows: self.n_cols,
            n_cols: self.n_rows,
            values: out,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MatrixKind {
    /// Sparse, absent cells unknown.
    Observed,
    /// Sparse, absent cells are known zeros.
    FullyKnown,
    Dense,
}

impl MatrixKind {
    pub fn name(self) -> &'static str {
        match self {
            MatrixKind::Observed => "observed",
            MatrixKind::FullyKnown => "fully-known",
            MatrixKind::Dense => "dense",
        }
    }
}

impl std::str::FromStr for MatrixKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "observed" => Ok(MatrixKind::Observed),
            "fully-known" => Ok(MatrixKind::FullyKnown),
            "dense" => Ok(MatrixKind::Dense),
            other => Err(Error::Config(format!(
                "unknown matrix kind `{other}`; use observed, fully-known or dense"
            ))),
        }
    }
}

/// A training matrix of one of the three supported kinds.
#[derive(Clone, Debug, PartialEq)]
pub enum MatrixData {
    Observed(SparseMatrix),
    FullyKnown(SparseMatrix),
    Dense(DenseMatrix),
}

impl MatrixData {
    pub fn kind(&self) -> MatrixKind {
        match self {
            MatrixData::Observed(_) => MatrixKind::Observed,
            MatrixData::FullyKnown(_) => MatrixKind::FullyKnown,
            MatrixData::Dense(_) => MatrixKind::Dense,
        }
    }

    pub fn n_rows(&self) -> usize {
        match self {
            MatrixData::Observed(m) | MatrixData::FullyKnown(m) => m.n_rows(),
            MatrixData::Dense(m) => m.n_rows(),
        }
    }

    pub fn n_cols(&self) -> usize {
        match self {
            MatrixData::Observed(m) | MatrixData::FullyKnown(m) => m.n_cols(),
            MatrixData::Dense(m) => m.n_cols(),
        }
    }

    /// Number of cells taking part in the likelihood.
    pub fn n_likelihood_cells(&self) -> usize {
        match self {
            MatrixData::Observed(m) => m.nnz(),
            _ => self.n_rows() * self.n_cols(),
        }
    }

    pub fn transpose(&self) -> MatrixData {
        match self {
            MatrixData::Observed(m) => MatrixData::Observed(m.transpose_view()),
            MatrixData::FullyKnown(m) => MatrixData::FullyKnown(m.transpose_view()),
            MatrixData::Dense(m) => MatrixData::Dense(m.transpose()),
        }
    }

    /// Whether `(i, j)` is a training cell.
    pub fn contains(&self, i: usize, j: usize) -> bool {
        match self {
            MatrixData::Observed(m) => i < m.n_rows() && j < m.n_cols() && m.get(i, j).is_some(),
            _ => i < self.n_rows() && j < self.n_cols(),
        }
    }
}

/// Held-out cells with their true values.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct TestSet {
    entries: Vec<Triplet>,
}

impl TestSet {
    pub fn new(entries: Vec<Triplet>) -> Self {
        TestSet { entries }
    }

    pub fn entries(&self) -> &[Triplet] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Check bounds against the training matrix; returns how many test
    /// cells also appear in the training data (a warning, not an error).
    pub fn validate_against(&self, train: &MatrixData) -> Result<usize> {
        let mut overlap = 0;
        for &(i, j, v) in &self.entries {
            if i >= train.n_rows() {
                return Err(Error::IndexOutOfRange {
                    index: i,
                    dim: train.n_rows(),
                });
            }
            if j >= train.n_cols() {
                return Err(Error::IndexOutOfRange {
                    index: j,
                    dim: train.n_cols(),
                });
            }
            if !v.is_finite() {
                return Err(Error::Data(format!("non-finite test value at ({i}, {j})")));
            }
            if train.contains(i, j) {
                overlap += 1;
            }
        }
        Ok(overlap)
    }
}

/// Per-entity feature matrix (entities × features).
#[derive(Clone, Debug, PartialEq)]
pub enum SideInfo {
    Dense(DenseMatrix),
    Sparse(SparseMatrix),
}

impl SideInfo {
    pub fn n_entities(&self) -> usize {
        match self {
            SideInfo::Dense(m) => m.n_rows(),
            SideInfo::Sparse(m) => m.n_rows(),
        }
    }

    pub fn n_features(&self) -> usize {
        match self {
            SideInfo::Dense(m) => m.n_cols(),
            SideInfo::Sparse(m) => m.n_cols(),
        }
    }

    /// `out += scale · f_i` where `f_i` is the feature row of entity `i`.
    pub fn add_row_to(&self, i: usize, scale: f64, out: &mut [f64]) {
        match self {
            SideInfo::Dense(m) => {
                for (o, f) in out.iter_mut().zip(m.row(i)) {
                    *o += scale * f;
                }
            }
            SideInfo::Sparse(m) => {
                let (cols, vals) = m.row(i);
                for (&c, &f) in cols.iter().zip(vals) {
                    out[c] += scale * f;
                }
            }
        }
    }

    /// Visit the non-zero (or all, when dense) features of entity `i`.
    pub fn for_each_in_row(&self, i: usize, mut f: impl FnMut(usize, f64)) {
        match self {
            SideInfo::Dense(m) => m.row(i).iter().enumerate().for_each(|(c, &v)| f(c, v)),
            SideInfo::Sparse(m) => {
                let (cols, vals) = m.row(i);
                cols.iter().zip(vals).for_each(|(&c, &v)| f(c, v));
            }
        }
    }
}
