//! Matrix Market text files: `coordinate` for sparse data, `array`
//! (column-major) for dense data. Reals are written with 17 significant
//! digits so a write/read cycle is bit-exact.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::data::{DenseMatrix, MatrixData, MatrixKind, SideInfo, SparseMatrix, TestSet, Triplet};
use crate::error::{Error, Result};

/// Parsed file contents before a matrix kind is chosen.
#[derive(Clone, Debug, PartialEq)]
pub enum MarketMatrix {
    Coordinate {
        n_rows: usize,
        n_cols: usize,
        entries: Vec<Triplet>,
    },
    Array(DenseMatrix),
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Layout {
    Coordinate,
    Array,
}

/// Render a real so that parsing it back yields the same bits.
pub fn format_real(x: f64) -> String {
    format!("{x:.16e}")
}

struct Cursor<'a> {
    path: &'a Path,
    lines: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Cursor<'a> {
    /// Next non-blank, non-comment line with its 1-based number.
    fn next_data(&mut self) -> Option<(usize, &'a str)> {
        for (n, line) in self.lines.by_ref() {
            let t = line.trim();
            if t.is_empty() || t.starts_with('%') {
                continue;
            }
            return Some((n + 1, t));
        }
        None
    }

    fn err(&self, line: usize, msg: impl Into<String>, remedy: &str) -> Error {
        Error::Parse {
            path: self.path.to_path_buf(),
            line,
            msg: msg.into(),
            remedy: remedy.into(),
        }
    }
}

fn parse_header(cur: &mut Cursor<'_>) -> Result<Layout> {
    let first = cur.lines.next();
    let (n, line) = match first {
        Some((n, l)) => (n + 1, l),
        None => return Err(cur.err(1, "empty file", "write a `%%MatrixMarket matrix ...` header")),
    };
    let words: Vec<String> = line.split_whitespace().map(str::to_ascii_lowercase).collect();
    let remedy = "use `%%MatrixMarket matrix coordinate real general` or `%%MatrixMarket matrix array real general`";
    if words.len() != 5 || words[0] != "%%matrixmarket" || words[1] != "matrix" {
        return Err(cur.err(n, format!("malformed header `{line}`"), remedy));
    }
    let layout = match words[2].as_str() {
        "coordinate" => Layout::Coordinate,
        "array" => Layout::Array,
        other => return Err(cur.err(n, format!("unsupported format `{other}`"), remedy)),
    };
    if words[3] != "real" && words[3] != "integer" && words[3] != "double" {
        return Err(cur.err(n, format!("unsupported field `{}`", words[3]), remedy));
    }
    if words[4] != "general" {
        return Err(cur.err(n, format!("unsupported symmetry `{}`", words[4]), "expand the matrix to `general` storage"));
    }
    Ok(layout)
}

fn parse_fields<'a>(cur: &Cursor<'_>, n: usize, line: &'a str, expect: usize, what: &str) -> Result<Vec<&'a str>> {
    let f: Vec<&str> = line.split_whitespace().collect();
    if f.len() != expect {
        return Err(cur.err(
            n,
            format!("expected {expect} fields ({what}), found {}", f.len()),
            "fix the line to match the header's layout",
        ));
    }
    Ok(f)
}

fn parse_count(cur: &Cursor<'_>, n: usize, tok: &str) -> Result<usize> {
    tok.parse()
        .map_err(|_| cur.err(n, format!("`{tok}` is not a non-negative integer"), "use plain decimal integers"))
}

fn parse_value(cur: &Cursor<'_>, n: usize, tok: &str) -> Result<f64> {
    match tok.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        Ok(_) => Err(cur.err(n, format!("non-finite value `{tok}`"), "replace NaN/Inf with a finite number")),
        Err(_) => Err(cur.err(n, format!("`{tok}` is not a real number"), "use decimal or exponent notation")),
    }
}

fn parse_index(cur: &Cursor<'_>, n: usize, tok: &str, dim: usize, axis: &str) -> Result<usize> {
    let i = parse_count(cur, n, tok)?;
    if i == 0 || i > dim {
        return Err(cur.err(
            n,
            format!("{axis} index {i} outside 1..={dim}"),
            "indices are 1-based and must not exceed the size line",
        ));
    }
    Ok(i - 1)
}

/// Parse Matrix Market text. `path` is only used in diagnostics.
pub fn parse_matrix_market(text: &str, path: &Path) -> Result<MarketMatrix> {
    let mut cur = Cursor {
        path,
        lines: text.lines().enumerate(),
    };
    let layout = parse_header(&mut cur)?;
    let (n, size_line) = cur
        .next_data()
        .ok_or_else(|| cur.err(text.lines().count().max(1), "missing size line", "add `rows cols [entries]` after the header"))?;

    match layout {
        Layout::Coordinate => {
            let f = parse_fields(&cur, n, size_line, 3, "rows cols entries")?;
            let (rows, cols, nnz) = (parse_count(&cur, n, f[0])?, parse_count(&cur, n, f[1])?, parse_count(&cur, n, f[2])?);
            let mut entries = Vec::with_capacity(nnz);
            let mut seen: HashMap<(usize, usize), usize> = HashMap::with_capacity(nnz);
            while let Some((n, line)) = cur.next_data() {
                if entries.len() == nnz {
                    return Err(cur.err(n, format!("more than the declared {nnz} entries"), "fix the entry count on the size line"));
                }
                let f = parse_fields(&cur, n, line, 3, "row col value")?;
                let i = parse_index(&cur, n, f[0], rows, "row")?;
                let j = parse_index(&cur, n, f[1], cols, "column")?;
                let v = parse_value(&cur, n, f[2])?;
                if let Some(prev) = seen.insert((i, j), n) {
                    return Err(cur.err(
                        n,
                        format!("duplicate entry ({}, {}) first seen on line {prev}", i + 1, j + 1),
                        "remove or merge the repeated coordinate",
                    ));
                }
                entries.push((i, j, v));
            }
            if entries.len() != nnz {
                return Err(cur.err(
                    text.lines().count(),
                    format!("declared {nnz} entries, found {}", entries.len()),
                    "fix the entry count on the size line",
                ));
            }
            Ok(MarketMatrix::Coordinate {
                n_rows: rows,
                n_cols: cols,
                entries,
            })
        }
        Layout::Array => {
            let f = parse_fields(&cur, n, size_line, 2, "rows cols")?;
            let (rows, cols) = (parse_count(&cur, n, f[0])?, parse_count(&cur, n, f[1])?);
            let total = rows * cols;
            let mut col_major = Vec::with_capacity(total);
            while let Some((n, line)) = cur.next_data() {
                for tok in line.split_whitespace() {
                    if col_major.len() == total {
                        return Err(cur.err(n, format!("more than the declared {total} values"), "fix the size line"));
                    }
                    col_major.push(parse_value(&cur, n, tok)?);
                }
            }
            if col_major.len() != total {
                return Err(cur.err(
                    text.lines().count(),
                    format!("declared {total} values, found {}", col_major.len()),
                    "fix the size line or add the missing values",
                ));
            }
            let mut row_major = vec![0.0; total];
            for (p, v) in col_major.into_iter().enumerate() {
                row_major[(p % rows) * cols + p / rows] = v;
            }
            Ok(MarketMatrix::Array(DenseMatrix::new(rows, cols, row_major)?))
        }
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn read_market(path: impl AsRef<Path>) -> Result<MarketMatrix> {
    let path = path.as_ref();
    parse_matrix_market(&read_text(path)?, path)
}

/// Read a training matrix. Coordinate files become `kind` (observed when
/// `None`); array files are always dense.
pub fn read_matrix_market(path: impl AsRef<Path>, kind: Option<MatrixKind>) -> Result<MatrixData> {
    let path = path.as_ref();
    let layout_err = |msg: &str, remedy: &str| Error::Parse {
        path: path.to_path_buf(),
        line: 1,
        msg: msg.into(),
        remedy: remedy.into(),
    };
    match (read_market(path)?, kind) {
        (MarketMatrix::Coordinate { n_rows, n_cols, entries }, None | Some(MatrixKind::Observed)) => {
            Ok(MatrixData::Observed(SparseMatrix::from_triplets(n_rows, n_cols, entries)?))
        }
        (MarketMatrix::Coordinate { n_rows, n_cols, entries }, Some(MatrixKind::FullyKnown)) => {
            Ok(MatrixData::FullyKnown(SparseMatrix::from_triplets(n_rows, n_cols, entries)?))
        }
        (MarketMatrix::Coordinate { .. }, Some(MatrixKind::Dense)) => Err(layout_err(
            "dense kind requested for a coordinate file",
            "write the matrix in `array` format or use kind fully-known",
        )),
        (MarketMatrix::Array(d), None | Some(MatrixKind::Dense)) => Ok(MatrixData::Dense(d)),
        (MarketMatrix::Array(_), Some(k)) => Err(layout_err(
            &format!("{} kind requested for an array file", k.name()),
            "write the matrix in `coordinate` format or use kind dense",
        )),
    }
}

/// Read entity features: array files become dense side information,
/// coordinate files sparse.
pub fn read_side_info(path: impl AsRef<Path>) -> Result<SideInfo> {
    Ok(match read_market(path)? {
        MarketMatrix::Coordinate { n_rows, n_cols, entries } => {
            SideInfo::Sparse(SparseMatrix::from_triplets(n_rows, n_cols, entries)?)
        }
        MarketMatrix::Array(d) => SideInfo::Dense(d),
    })
}

/// Read held-out cells from a coordinate file.
pub fn read_test_set(path: impl AsRef<Path>) -> Result<TestSet> {
    let path = path.as_ref();
    match read_market(path)? {
        MarketMatrix::Coordinate { entries, .. } => Ok(TestSet::new(entries)),
        MarketMatrix::Array(_) => Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            msg: "test cells must be a coordinate file".into(),
            remedy: "list the held-out cells as `row col value` entries".into(),
        }),
    }
}

pub fn format_coordinate(n_rows: usize, n_cols: usize, entries: &[Triplet]) -> String {
    let mut out = String::with_capacity(32 * (entries.len() + 2));
    out.push_str("%%MatrixMarket matrix coordinate real general\n");
    let _ = writeln!(out, "{n_rows} {n_cols} {}", entries.len());
    for &(i, j, v) in entries {
        let _ = writeln!(out, "{} {} {}", i + 1, j + 1, format_real(v));
    }
    out
}

/// `values` is row-major `n_rows × n_cols`; output is column-major.
pub fn format_array(n_rows: usize, n_cols: usize, values: &[f64]) -> String {
    assert_eq!(values.len(), n_rows * n_cols, "array shape mismatch");
    let mut out = String::with_capacity(26 * (values.len() + 2));
    out.push_str("%%MatrixMarket matrix array real general\n");
    let _ = writeln!(out, "{n_rows} {n_cols}");
    for j in 0..n_cols {
        for i in 0..n_rows {
            out.push_str(&format_real(values[i * n_cols + j]));
            out.push('\n');
        }
    }
    out
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_coordinate(path: impl AsRef<Path>, n_rows: usize, n_cols: usize, entries: &[Triplet]) -> Result<()> {
    write_text(path.as_ref(), &format_coordinate(n_rows, n_cols, entries))
}

pub fn write_array(path: impl AsRef<Path>, n_rows: usize, n_cols: usize, values: &[f64]) -> Result<()> {
    write_text(path.as_ref(), &format_array(n_rows, n_cols, values))
}

/// Write any training matrix in the layout its kind reads back from.
pub fn write_matrix_market(path: impl AsRef<Path>, m: &MatrixData) -> Result<()> {
    match m {
        MatrixData::Observed(s) | MatrixData::FullyKnown(s) => {
            let entries: Vec<Triplet> = s.triplets().collect();
            write_coordinate(path, s.n_rows(), s.n_cols(), &entries)
        }
        MatrixData::Dense(d) => write_array(path, d.n_rows(), d.n_cols(), d.values()),
    }
}
