//! Logical memory traces of the SpMV kernels.
//!
//! Arrays are laid out back to back, each starting on a line boundary, in
//! the order `row_ptr`, `col_idx`, `values`, `x`, `y`, then the CSR5
//! descriptor arrays. Element sizes: row offsets 8B, column indices 4B,
//! values/x/y 8B, tile pointers and lane offsets 4B, flag words 8B.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::exec::{Operand, PartitionPlan, ThreadRange};
use crate::matrix::{Csr5Matrix, CsrMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Access {
    pub addr: u64,
    pub write: bool,
}

impl Access {
    fn read(addr: u64) -> Self {
        Access { addr, write: false }
    }

    fn write(addr: u64) -> Self {
        Access { addr, write: true }
    }
}

/// Which array an address belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    RowPtr,
    ColIdx,
    Values,
    X,
    Y,
    Descriptor,
}

/// Base addresses of every array for one matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub row_ptr: u64,
    pub col_idx: u64,
    pub values: u64,
    pub x: u64,
    pub y: u64,
    pub tile_ptr: u64,
    pub bit_flag: u64,
    pub y_off: u64,
    pub tail_row: u64,
    pub tail_col: u64,
    pub tail_val: u64,
    pub end: u64,
}

fn align(addr: u64, line: u64) -> u64 {
    addr.div_ceil(line) * line
}

pub(crate) fn flag_words(m: &Csr5Matrix) -> u64 {
    (m.tile_len() as u64).div_ceil(64)
}

impl Layout {
    pub fn new(op: Operand<'_>, line_size: usize) -> Self {
        let line = line_size as u64;
        let n_rows = op.n_rows() as u64;
        let n_cols = op.n_cols() as u64;
        let (tiled, n_tiles, words, omega, tail) = match op {
            Operand::Csr(m) => (m.nnz() as u64, 0, 0, 0, 0),
            Operand::Csr5(m) => (
                m.col_idx().len() as u64,
                m.n_tiles() as u64,
                flag_words(m),
                m.omega() as u64,
                m.tail_len() as u64,
            ),
        };
        let mut next = 0u64;
        let mut place = |bytes: u64| {
            let base = next;
            next = align(base + bytes, line);
            base
        };
        let row_ptr = place(8 * (n_rows + 1));
        let col_idx = place(4 * tiled);
        let values = place(8 * tiled);
        let x = place(8 * n_cols);
        let y = place(8 * n_rows);
        let tile_ptr = place(4 * (n_tiles + 1));
        let bit_flag = place(8 * words * n_tiles);
        let y_off = place(4 * omega * n_tiles);
        let tail_row = place(8 * tail);
        let tail_col = place(4 * tail);
        let tail_val = place(8 * tail);
        let end = next;
        Layout {
            row_ptr,
            col_idx,
            values,
            x,
            y,
            tile_ptr,
            bit_flag,
            y_off,
            tail_row,
            tail_col,
            tail_val,
            end,
        }
    }

    pub fn region(&self, addr: u64) -> Region {
        if addr < self.col_idx {
            Region::RowPtr
        } else if addr < self.values {
            Region::ColIdx
        } else if addr < self.x {
            Region::Values
        } else if addr < self.y {
            Region::X
        } else if addr < self.tile_ptr {
            Region::Y
        } else {
            Region::Descriptor
        }
    }
}

/// Feeds one thread's accesses, in kernel order, to `sink`.
pub fn visit_thread_trace(
    op: Operand<'_>,
    part: &ThreadRange,
    layout: &Layout,
    sink: &mut impl FnMut(Access),
) {
    match op {
        Operand::Csr(m) => visit_csr(m, part, layout, sink),
        Operand::Csr5(m) => visit_csr5(m, part, layout, sink),
    }
}

fn visit_csr(m: &CsrMatrix, part: &ThreadRange, l: &Layout, sink: &mut impl FnMut(Access)) {
    let ptr = m.row_ptr();
    let cols = m.col_idx();
    for r in part.start..part.end {
        sink(Access::read(l.row_ptr + 8 * r as u64));
        sink(Access::read(l.row_ptr + 8 * (r as u64 + 1)));
        let span = ptr[r]..ptr[r + 1];
        for (k, &c) in span.clone().zip(&cols[span]) {
            sink(Access::read(l.col_idx + 4 * k as u64));
            sink(Access::read(l.values + 8 * k as u64));
            sink(Access::read(l.x + 8 * c as u64));
        }
        sink(Access::write(l.y + 8 * r as u64));
    }
}

fn visit_csr5(m: &Csr5Matrix, part: &ThreadRange, l: &Layout, sink: &mut impl FnMut(Access)) {
    let cols = m.col_idx();
    let words = flag_words(m);
    let omega = m.omega() as u64;
    for t in part.start..part.end {
        let tu = t as u64;
        sink(Access::read(l.tile_ptr + 4 * tu));
        for w in 0..words {
            sink(Access::read(l.bit_flag + 8 * (tu * words + w)));
        }
        for lane in 0..omega {
            sink(Access::read(l.y_off + 4 * (tu * omega + lane)));
        }
        let mut row = m.tile_ptr()[t];
        for (i, (r, pos, starts)) in m.walk_tile(t).enumerate() {
            if starts && i > 0 {
                sink(Access::write(l.y + 8 * row as u64));
                sink(Access::read(l.row_ptr + 8 * (r as u64 + 1)));
            }
            row = r;
            sink(Access::read(l.col_idx + 4 * pos as u64));
            sink(Access::read(l.values + 8 * pos as u64));
            sink(Access::read(l.x + 8 * cols[pos] as u64));
        }
        if m.tile_len() > 0 {
            sink(Access::write(l.y + 8 * row as u64));
        }
    }
    if part.tail {
        for k in 0..m.tail_len() {
            let ku = k as u64;
            sink(Access::read(l.tail_row + 8 * ku));
            sink(Access::read(l.tail_col + 4 * ku));
            sink(Access::read(l.tail_val + 8 * ku));
            sink(Access::read(l.x + 8 * m.tail_col()[k] as u64));
            sink(Access::write(l.y + 8 * m.tail_row()[k] as u64));
        }
    }
}

/// Materializes every thread's trace.
pub fn trace_spmv(
    op: Operand<'_>,
    plan: &PartitionPlan,
    line_size: usize,
) -> Result<Vec<Vec<Access>>> {
    plan.validate(op)?;
    let layout = Layout::new(op, line_size);
    Ok(plan
        .parts
        .iter()
        .map(|part| {
            let mut trace = Vec::new();
            visit_thread_trace(op, part, &layout, &mut |a| trace.push(a));
            trace
        })
        .collect())
}
