//! Sparse matrix storage: coordinate (COO), compressed sparse row (CSR) and
//! the tiled CSR5 layout, plus per-row structural statistics.
//!
//! Column indices are `u32`, row offsets are `usize` (64-bit on every
//! supported host) and values are `f64`.

mod csr5;

pub use csr5::{Csr5Matrix, Csr5Tile, TileWalk, DEFAULT_OMEGA, DEFAULT_SIGMA};

use crate::error::{Error, Result};

/// A triplet-list matrix. Entries may be in any order and may repeat until
/// [`CooMatrix::normalize`] is called.
#[derive(Debug, Clone, PartialEq)]
pub struct CooMatrix {
    n_rows: usize,
    n_cols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl CooMatrix {
    pub fn new(n_rows: usize, n_cols: usize) -> Self {
        CooMatrix {
            n_rows,
            n_cols,
            entries: Vec::new(),
        }
    }

    /// Builds a matrix from triplets, rejecting out-of-range indices.
    pub fn from_entries(
        n_rows: usize,
        n_cols: usize,
        entries: Vec<(usize, usize, f64)>,
    ) -> Result<Self> {
        for &(row, col, _) in &entries {
            check_index(row, col, n_rows, n_cols)?;
        }
        Ok(CooMatrix {
            n_rows,
            n_cols,
            entries,
        })
    }

    pub fn push(&mut self, row: usize, col: usize, value: f64) -> Result<()> {
        check_index(row, col, self.n_rows, self.n_cols)?;
        self.entries.push((row, col, value));
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    /// Number of stored triplets (duplicates counted separately).
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Sorts into row-major order and sums duplicate coordinates.
    pub fn normalize(&mut self) {
        self.entries.sort_by_key(|e| (e.0, e.1));
        let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(self.entries.len());
        for &(r, c, v) in &self.entries {
            match merged.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 += v,
                _ => merged.push((r, c, v)),
            }
        }
        self.entries = merged;
    }

    pub fn normalized(mut self) -> Self {
        self.normalize();
        self
    }

    pub fn to_csr(&self) -> CsrMatrix {
        coo_to_csr(self)
    }
}

fn check_index(row: usize, col: usize, n_rows: usize, n_cols: usize) -> Result<()> {
    if row >= n_rows || col >= n_cols || col > u32::MAX as usize {
        return Err(Error::IndexOutOfRange {
            row,
            col,
            n_rows,
            n_cols,
        });
    }
    Ok(())
}

/// Compressed sparse row storage.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<u32>,
    values: Vec<f64>,
}

/// Converts COO to CSR. Entries come out row-major with ascending columns;
/// duplicate coordinates are summed.
pub fn coo_to_csr(m: &CooMatrix) -> CsrMatrix {
    let mut sorted: Vec<(usize, usize, f64)> = m.entries.clone();
    sorted.sort_by_key(|e| (e.0, e.1));

    let mut row_ptr = vec![0usize; m.n_rows + 1];
    let mut col_idx = Vec::with_capacity(sorted.len());
    let mut values: Vec<f64> = Vec::with_capacity(sorted.len());
    let mut last: Option<(usize, usize)> = None;
    for (r, c, v) in sorted {
        if last == Some((r, c)) {
            *values.last_mut().expect("duplicate follows an entry") += v;
            continue;
        }
        last = Some((r, c));
        row_ptr[r + 1] += 1;
        col_idx.push(c as u32);
        values.push(v);
    }
    for r in 0..m.n_rows {
        row_ptr[r + 1] += row_ptr[r];
    }
    CsrMatrix {
        n_rows: m.n_rows,
        n_cols: m.n_cols,
        row_ptr,
        col_idx,
        values,
    }
}

impl CsrMatrix {
    /// Assembles a CSR matrix from raw arrays after checking every structural
    /// invariant.
    pub fn from_parts(
        n_rows: usize,
        n_cols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<u32>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if row_ptr.len() != n_rows + 1 {
            return Err(Error::InvalidCsr(format!(
                "row_ptr has length {}, expected {}",
                row_ptr.len(),
                n_rows + 1
            )));
        }
        if row_ptr[0] != 0 {
            return Err(Error::InvalidCsr("row_ptr[0] must be 0".into()));
        }
        if col_idx.len() != values.len() {
            return Err(Error::InvalidCsr(format!(
                "{} column indices but {} values",
                col_idx.len(),
                values.len()
            )));
        }
        if row_ptr[n_rows] != col_idx.len() {
            return Err(Error::InvalidCsr(format!(
                "row_ptr[n_rows] = {} but nnz = {}",
                row_ptr[n_rows],
                col_idx.len()
            )));
        }
        for r in 0..n_rows {
            if row_ptr[r] > row_ptr[r + 1] {
                return Err(Error::InvalidCsr(format!("row_ptr decreases at row {r}")));
            }
            let cols = &col_idx[row_ptr[r]..row_ptr[r + 1]];
            if cols.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidCsr(format!(
                    "columns of row {r} are not strictly increasing"
                )));
            }
            if let Some(&c) = cols.last() {
                if c as usize >= n_cols {
                    return Err(Error::IndexOutOfRange {
                        row: r,
                        col: c as usize,
                        n_rows,
                        n_cols,
                    });
                }
            }
        }
        Ok(CsrMatrix {
            n_rows,
            n_cols,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn identity(n: usize) -> Self {
        CsrMatrix {
            n_rows: n,
            n_cols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n as u32).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[u32] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row_nnz(&self, row: usize) -> usize {
        self.row_ptr[row + 1] - self.row_ptr[row]
    }

    /// Column indices and values of one row.
    pub fn row(&self, row: usize) -> (&[u32], &[f64]) {
        let span = self.row_ptr[row]..self.row_ptr[row + 1];
        (&self.col_idx[span.clone()], &self.values[span])
    }

    /// Row-major triplets; the inverse of [`coo_to_csr`] on normalized input.
    pub fn to_coo(&self) -> CooMatrix {
        let mut entries = Vec::with_capacity(self.nnz());
        for r in 0..self.n_rows {
            let (cols, vals) = self.row(r);
            entries.extend(cols.iter().zip(vals).map(|(&c, &v)| (r, c as usize, v)));
        }
        CooMatrix {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            entries,
        }
    }

    /// New matrix whose row `i` is row `order[i]` of `self`.
    ///
    /// `order` must be a permutation of `0..n_rows`.
    pub fn permute_rows(&self, order: &[usize]) -> CsrMatrix {
        assert_eq!(order.len(), self.n_rows, "permutation length");
        let mut row_ptr = Vec::with_capacity(self.n_rows + 1);
        let mut col_idx = Vec::with_capacity(self.nnz());
        let mut values = Vec::with_capacity(self.nnz());
        row_ptr.push(0);
        for &src in order {
            let (cols, vals) = self.row(src);
            col_idx.extend_from_slice(cols);
            values.extend_from_slice(vals);
            row_ptr.push(col_idx.len());
        }
        CsrMatrix {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn to_csr5(&self, omega: usize, sigma: usize) -> Result<Csr5Matrix> {
        Csr5Matrix::build(self, omega, sigma)
    }
}

/// The 4x4, 8-nonzero matrix used throughout the documentation and tests.
///
/// ```text
/// [0 5 2 0]
/// [6 0 8 3]
/// [0 0 4 0]
/// [0 7 1 0]
/// ```
pub fn example_matrix() -> CsrMatrix {
    let entries = vec![
        (0, 1, 5.0),
        (0, 2, 2.0),
        (1, 0, 6.0),
        (1, 2, 8.0),
        (1, 3, 3.0),
        (2, 2, 4.0),
        (3, 1, 7.0),
        (3, 2, 1.0),
    ];
    CooMatrix::from_entries(4, 4, entries)
        .expect("fixture indices are in range")
        .to_csr()
}

/// Per-row nonzero statistics.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MatrixStats {
    pub n_rows: usize,
    pub nnz: usize,
    pub nnz_max: usize,
    pub nnz_avg: f64,
    /// Population variance of the per-row nonzero counts.
    pub nnz_var: f64,
}

pub fn matrix_stats(m: &CsrMatrix) -> Result<MatrixStats> {
    if m.n_rows == 0 {
        return Err(Error::EmptyMatrix);
    }
    let n = m.n_rows as f64;
    let nnz = m.nnz();
    let avg = nnz as f64 / n;
    let mut max = 0;
    let mut ss = 0.0;
    for r in 0..m.n_rows {
        let k = m.row_nnz(r);
        max = max.max(k);
        let d = k as f64 - avg;
        ss += d * d;
    }
    Ok(MatrixStats {
        n_rows: m.n_rows,
        nnz,
        nnz_max: max,
        nnz_avg: avg,
        nnz_var: ss / n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example_matrix_csr_arrays() {
        let m = example_matrix();
        assert_eq!(m.row_ptr(), &[0, 2, 5, 6, 8]);
        assert_eq!(m.col_idx(), &[1, 2, 0, 2, 3, 2, 1, 2]);
        assert_eq!(m.values(), &[5.0, 2.0, 6.0, 8.0, 3.0, 4.0, 7.0, 1.0]);
    }

    #[test]
    fn empty_coo_gives_zero_row_ptr() {
        let m = CooMatrix::new(3, 3).to_csr();
        assert_eq!(m.row_ptr(), &[0, 0, 0, 0]);
        assert_eq!(m.nnz(), 0);
    }

    #[test]
    fn duplicates_are_summed() {
        let coo = CooMatrix::from_entries(1, 1, vec![(0, 0, 1.0), (0, 0, 2.0)]).unwrap();
        let m = coo.to_csr();
        assert_eq!(m.nnz(), 1);
        assert_eq!(m.values(), &[3.0]);
    }

    #[test]
    fn out_of_range_entry_is_rejected() {
        let err = CooMatrix::from_entries(2, 2, vec![(0, 2, 1.0)]).unwrap_err();
        assert!(matches!(err, Error::IndexOutOfRange { col: 2, .. }));
        let mut coo = CooMatrix::new(2, 2);
        assert!(coo.push(2, 0, 1.0).is_err());
    }

    #[test]
    fn from_parts_validates() {
        assert!(CsrMatrix::from_parts(2, 2, vec![0, 1, 1], vec![0], vec![1.0]).is_ok());
        assert!(CsrMatrix::from_parts(2, 2, vec![0, 1], vec![0], vec![1.0]).is_err());
        assert!(CsrMatrix::from_parts(1, 2, vec![0, 2], vec![1, 0], vec![1.0, 1.0]).is_err());
        assert!(CsrMatrix::from_parts(1, 2, vec![0, 1], vec![2], vec![1.0]).is_err());
        assert!(CsrMatrix::from_parts(2, 2, vec![0, 2, 1], vec![0, 1], vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn stats_of_example() {
        // per-row counts (2, 3, 1, 2): mean 2, squared deviations 0+1+1+0
        let s = matrix_stats(&example_matrix()).unwrap();
        assert_eq!(s.n_rows, 4);
        assert_eq!(s.nnz_max, 3);
        assert_eq!(s.nnz_avg, 2.0);
        assert_eq!(s.nnz_var, 0.5);
    }

    #[test]
    fn stats_of_uniform_rows() {
        let s = matrix_stats(&CsrMatrix::identity(4)).unwrap();
        assert_eq!((s.nnz_max, s.nnz_avg, s.nnz_var), (1, 1.0, 0.0));

        let row = CooMatrix::from_entries(1, 5, (0..5).map(|c| (0, c, 1.0)).collect())
            .unwrap()
            .to_csr();
        let s = matrix_stats(&row).unwrap();
        assert_eq!((s.nnz_max, s.nnz_avg, s.nnz_var), (5, 5.0, 0.0));
    }

    #[test]
    fn stats_reject_zero_rows() {
        let m = CooMatrix::new(0, 3).to_csr();
        assert!(matches!(matrix_stats(&m), Err(Error::EmptyMatrix)));
    }

    #[test]
    fn permute_rows_moves_whole_rows() {
        let m = example_matrix();
        let p = m.permute_rows(&[2, 0, 3, 1]);
        assert_eq!(p.row(0), m.row(2));
        assert_eq!(p.row(3), m.row(1));
        assert_eq!(p.nnz(), m.nnz());
    }
}
