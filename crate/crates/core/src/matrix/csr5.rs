use serde::Serialize;

use super::CsrMatrix;
use crate::error::{Error, Result};

/// Lanes per tile: four `f64` per 256-bit vector.
pub const DEFAULT_OMEGA: usize = 4;
pub const DEFAULT_SIGMA: usize = 16;

/// Tiled CSR storage.
///
/// Nonzeros are taken in CSR order in blocks of `omega * sigma`. Each block
/// fills a `sigma`-row by `omega`-column grid in row-major order and is
/// stored lane by lane, i.e. grid element `(r, c)` lands at stored position
/// `c * sigma + r`. Entries past the last full block form a scalar tail kept
/// in CSR order.
///
/// Per tile the descriptor holds:
/// - `bit_flag`: set on the entry that starts a row inside the tile (row
///   starts are taken in CSR order, written at the entry's stored position);
///   the first bit of every tile is always set.
/// - `y_off[j]`: set bits in lanes `0..j`, minus one unless lane `j` starts
///   with a set bit.
/// - `seg_off`: kept as zeros and never read.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Csr5Matrix {
    n_rows: usize,
    n_cols: usize,
    omega: usize,
    sigma: usize,
    row_ptr: Vec<usize>,
    tile_ptr: Vec<usize>,
    bit_flag: Vec<bool>,
    y_off: Vec<u32>,
    seg_off: Vec<u32>,
    col_idx: Vec<u32>,
    values: Vec<f64>,
    tail_row: Vec<usize>,
    tail_col: Vec<u32>,
    tail_val: Vec<f64>,
}

/// Borrowed view of one tile.
#[derive(Debug, Clone, Copy)]
pub struct Csr5Tile<'a> {
    pub first_row: usize,
    pub bit_flag: &'a [bool],
    pub y_off: &'a [u32],
    pub seg_off: &'a [u32],
    pub col_idx: &'a [u32],
    pub values: &'a [f64],
}

impl Csr5Matrix {
    pub fn build(m: &CsrMatrix, omega: usize, sigma: usize) -> Result<Self> {
        if omega == 0 || sigma == 0 {
            return Err(Error::InvalidParameter(format!(
                "tile dimensions must be positive (omega={omega}, sigma={sigma})"
            )));
        }
        let tile_len = omega * sigma;
        let nnz = m.nnz();
        let n_tiles = nnz / tile_len;
        let tiled = n_tiles * tile_len;

        let mut row_of = Vec::with_capacity(nnz);
        for r in 0..m.n_rows() {
            row_of.extend(std::iter::repeat_n(r, m.row_nnz(r)));
        }

        let mut tile_ptr = Vec::with_capacity(n_tiles + 1);
        let mut bit_flag = vec![false; tiled];
        let mut y_off = vec![0u32; n_tiles * omega];
        let mut col_idx = vec![0u32; tiled];
        let mut values = vec![0.0; tiled];

        for t in 0..n_tiles {
            let base = t * tile_len;
            tile_ptr.push(row_of[base]);
            for i in 0..tile_len {
                let pos = base + stored_position(i, omega, sigma);
                let k = base + i;
                col_idx[pos] = m.col_idx()[k];
                values[pos] = m.values()[k];
                bit_flag[pos] = i == 0 || row_of[k] != row_of[k - 1];
            }
            let flags = &bit_flag[base..base + tile_len];
            let mut set_before = 0u32;
            for lane in 0..omega {
                let lane_bits = &flags[lane * sigma..(lane + 1) * sigma];
                let adjust = if lane_bits[0] { 0 } else { 1 };
                // the first lane always starts with a set bit
                y_off[t * omega + lane] = set_before - adjust;
                set_before += lane_bits.iter().filter(|&&b| b).count() as u32;
            }
        }
        tile_ptr.push(m.n_rows());

        Ok(Csr5Matrix {
            n_rows: m.n_rows(),
            n_cols: m.n_cols(),
            omega,
            sigma,
            row_ptr: m.row_ptr().to_vec(),
            tile_ptr,
            bit_flag,
            y_off,
            seg_off: vec![0; n_tiles * omega],
            col_idx,
            values,
            tail_row: row_of[tiled..].to_vec(),
            tail_col: m.col_idx()[tiled..].to_vec(),
            tail_val: m.values()[tiled..].to_vec(),
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len() + self.tail_col.len()
    }

    pub fn omega(&self) -> usize {
        self.omega
    }

    pub fn sigma(&self) -> usize {
        self.sigma
    }

    pub fn tile_len(&self) -> usize {
        self.omega * self.sigma
    }

    pub fn n_tiles(&self) -> usize {
        self.tile_ptr.len() - 1
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn tile_ptr(&self) -> &[usize] {
        &self.tile_ptr
    }

    pub fn bit_flag(&self) -> &[bool] {
        &self.bit_flag
    }

    pub fn y_off(&self) -> &[u32] {
        &self.y_off
    }

    pub fn seg_off(&self) -> &[u32] {
        &self.seg_off
    }

    /// Column indices of the tiled part, in stored (lane-major) order.
    pub fn col_idx(&self) -> &[u32] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn tail_len(&self) -> usize {
        self.tail_col.len()
    }

    pub fn tail_row(&self) -> &[usize] {
        &self.tail_row
    }

    pub fn tail_col(&self) -> &[u32] {
        &self.tail_col
    }

    pub fn tail_val(&self) -> &[f64] {
        &self.tail_val
    }

    pub fn tile(&self, t: usize) -> Csr5Tile<'_> {
        let len = self.tile_len();
        let span = t * len..(t + 1) * len;
        let lanes = t * self.omega..(t + 1) * self.omega;
        Csr5Tile {
            first_row: self.tile_ptr[t],
            bit_flag: &self.bit_flag[span.clone()],
            y_off: &self.y_off[lanes.clone()],
            seg_off: &self.seg_off[lanes],
            col_idx: &self.col_idx[span.clone()],
            values: &self.values[span],
        }
    }

    /// Walks tile `t` in CSR order, yielding `(row, stored_index, starts_segment)`
    /// where `stored_index` indexes [`Self::col_idx`] / [`Self::values`].
    pub fn walk_tile(&self, t: usize) -> TileWalk<'_> {
        TileWalk {
            m: self,
            tile: t,
            i: 0,
            row: self.tile_ptr[t],
        }
    }

    /// Recovers all `(row, col, value)` triplets in CSR order.
    pub fn entries(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(self.nnz());
        for t in 0..self.n_tiles() {
            for (row, pos, _) in self.walk_tile(t) {
                out.push((row, self.col_idx[pos] as usize, self.values[pos]));
            }
        }
        for k in 0..self.tail_len() {
            out.push((
                self.tail_row[k],
                self.tail_col[k] as usize,
                self.tail_val[k],
            ));
        }
        out
    }
}

#[inline]
fn stored_position(csr_order: usize, omega: usize, sigma: usize) -> usize {
    let grid_row = csr_order / omega;
    let grid_col = csr_order % omega;
    grid_col * sigma + grid_row
}

/// Iterator over one tile's entries in CSR order; see [`Csr5Matrix::walk_tile`].
pub struct TileWalk<'a> {
    m: &'a Csr5Matrix,
    tile: usize,
    i: usize,
    row: usize,
}

impl Iterator for TileWalk<'_> {
    type Item = (usize, usize, bool);

    fn next(&mut self) -> Option<Self::Item> {
        let len = self.m.tile_len();
        if self.i == len {
            return None;
        }
        let base = self.tile * len;
        let pos = base + stored_position(self.i, self.m.omega, self.m.sigma);
        let starts = self.m.bit_flag[pos];
        if starts && self.i > 0 {
            // skip over rows that hold no nonzeros
            let k = base + self.i;
            self.row += 1;
            while self.m.row_ptr[self.row + 1] <= k {
                self.row += 1;
            }
        }
        self.i += 1;
        Some((self.row, pos, starts))
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let rest = self.m.tile_len() - self.i;
        (rest, Some(rest))
    }
}
