//! Synthetic matrix generators and the locality-aware row reordering.
//!
//! Every generator draws a row's contents from a ChaCha stream keyed by
//! `(seed, row)`, so output is identical across platforms and independent
//! of generation order.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{CooMatrix, CsrMatrix};
use crate::sim::Topology;

fn row_rng(seed: u64, row: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(row as u64);
    rng
}

/// `k` distinct sorted columns from `lo..lo + width`, with values in [0.5, 1.5).
fn fill_row(
    coo: &mut CooMatrix,
    row: usize,
    lo: usize,
    width: usize,
    k: usize,
    rng: &mut ChaCha8Rng,
) -> Result<()> {
    let mut cols = index::sample(rng, width, k).into_vec();
    cols.sort_unstable();
    for c in cols {
        let v = 0.5 + rng.random::<f64>();
        coo.push(row, lo + c, v)?;
    }
    Ok(())
}

/// Interleaved-group pattern with poor reuse of `x`: row `r` belongs to group
/// `r mod n_groups` and draws its columns from that group's column window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocalityPattern {
    pub n_groups: usize,
    pub rows_per_group: usize,
    pub cols: usize,
    pub nnz_per_row: usize,
    pub seed: u64,
}

impl LocalityPattern {
    pub fn n_rows(&self) -> usize {
        self.n_groups * self.rows_per_group
    }

    pub fn window(&self) -> usize {
        self.cols / self.n_groups
    }
}

pub fn gen_poor_locality(p: &LocalityPattern) -> Result<CooMatrix> {
    if p.n_groups == 0 || p.rows_per_group == 0 || p.nnz_per_row == 0 {
        return Err(Error::InvalidParameter(
            "groups, rows per group and nnz per row must be positive".into(),
        ));
    }
    if p.cols < p.n_groups {
        return Err(Error::InvalidParameter(format!(
            "{} columns cannot host {} groups",
            p.cols, p.n_groups
        )));
    }
    let width = p.window();
    if width < p.nnz_per_row {
        return Err(Error::InvalidParameter(format!(
            "column window of {width} is narrower than {} nonzeros per row",
            p.nnz_per_row
        )));
    }
    let n_rows = p.n_rows();
    let mut coo = CooMatrix::new(n_rows, p.cols);
    for r in 0..n_rows {
        let g = r % p.n_groups;
        let mut rng = row_rng(p.seed, r);
        fill_row(&mut coo, r, g * width, width, p.nnz_per_row, &mut rng)?;
    }
    Ok(coo)
}

/// Square matrix with a contiguous band of heavy rows centred in the second
/// quarter of the row range, so a 4-way static row split hands almost all
/// nonzeros to the second thread.
pub fn gen_clustered(
    n_rows: usize,
    hot_rows: usize,
    nnz_hot: usize,
    nnz_cold: usize,
    seed: u64,
) -> Result<CooMatrix> {
    if hot_rows > n_rows {
        return Err(Error::InvalidParameter(format!(
            "{hot_rows} hot rows exceed {n_rows} rows"
        )));
    }
    let widest = if hot_rows > 0 {
        nnz_hot.max(nnz_cold)
    } else {
        nnz_cold
    };
    if widest > n_rows {
        return Err(Error::InvalidParameter(format!(
            "{widest} nonzeros per row exceed the {n_rows} available columns"
        )));
    }
    let centre = 3 * n_rows / 8;
    let start = centre.saturating_sub(hot_rows / 2).min(n_rows - hot_rows);
    let hot = start..start + hot_rows;

    let mut coo = CooMatrix::new(n_rows, n_rows);
    for r in 0..n_rows {
        let k = if hot.contains(&r) { nnz_hot } else { nnz_cold };
        let mut rng = row_rng(seed, r);
        fill_row(&mut coo, r, 0, n_rows, k, &mut rng)?;
    }
    Ok(coo)
}

/// Square random matrix whose row `r` draws `nnz_per_row` columns from a
/// window of `2 * half_band + 1` columns around the diagonal (shifted inward
/// at the edges).
pub fn gen_banded(n: usize, half_band: usize, nnz_per_row: usize, seed: u64) -> Result<CooMatrix> {
    let width = 2 * half_band + 1;
    if width > n {
        return Err(Error::InvalidParameter(format!(
            "band of {width} columns does not fit {n} columns"
        )));
    }
    if nnz_per_row > width {
        return Err(Error::InvalidParameter(format!(
            "band of {width} columns is narrower than {nnz_per_row} nonzeros per row"
        )));
    }
    let mut coo = CooMatrix::new(n, n);
    for r in 0..n {
        let lo = r.saturating_sub(half_band).min(n - width);
        let mut rng = row_rng(seed, r);
        fill_row(&mut coo, r, lo, width, nnz_per_row, &mut rng)?;
    }
    Ok(coo)
}

/// A row reordering: new row `i` is old row `perm[i]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowPermutation {
    perm: Vec<usize>,
    inverse: Vec<usize>,
}

impl RowPermutation {
    pub fn identity(n: usize) -> Self {
        RowPermutation {
            perm: (0..n).collect(),
            inverse: (0..n).collect(),
        }
    }

    pub fn from_order(perm: Vec<usize>) -> Result<Self> {
        let mut inverse = vec![usize::MAX; perm.len()];
        for (i, &p) in perm.iter().enumerate() {
            if p >= perm.len() || inverse[p] != usize::MAX {
                return Err(Error::InvalidParameter("not a permutation".into()));
            }
            inverse[p] = i;
        }
        Ok(RowPermutation { perm, inverse })
    }

    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    pub fn inverse(&self) -> &[usize] {
        &self.inverse
    }

    pub fn is_identity(&self) -> bool {
        self.perm.iter().enumerate().all(|(i, &p)| i == p)
    }
}

/// Groups rows by the column bucket their first nonzero falls in.
///
/// Signature of a row is `min_col / window`; rows are stably sorted by it and
/// empty rows sink to the bottom.
pub fn locality_reorder(m: &CsrMatrix, window: usize) -> Result<(CsrMatrix, RowPermutation)> {
    if window == 0 {
        return Err(Error::InvalidParameter(
            "reorder window must be positive".into(),
        ));
    }
    let signature = |r: usize| -> usize {
        match m.row(r).0.first() {
            Some(&c) => c as usize / window,
            None => usize::MAX,
        }
    };
    let mut order: Vec<usize> = (0..m.n_rows()).collect();
    order.sort_by_key(|&r| signature(r));
    let perm = RowPermutation::from_order(order)?;
    Ok((m.permute_rows(perm.perm()), perm))
}

/// A quarter of the L2 capacity, counted in `f64` elements of `x`.
pub fn default_reorder_window(topology: &Topology) -> usize {
    (topology.l2.capacity / 8 / 4).max(1)
}
