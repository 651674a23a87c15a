use serde::{Deserialize, Serialize};

use super::Operand;
use crate::error::{Error, Result};
use crate::matrix::{Csr5Matrix, CsrMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PartitionScheme {
    /// Contiguous chunks of `ceil(n_rows / T)` rows (static scheduling).
    RowsStatic,
    /// Contiguous row ranges minimizing the largest per-thread nonzero count.
    NnzBalanced,
    /// Contiguous chunks of `ceil(n_tiles / T)` CSR5 tiles; the tail goes to
    /// the last thread.
    Csr5Tiles,
}

impl std::fmt::Display for PartitionScheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PartitionScheme::RowsStatic => "rows-static",
            PartitionScheme::NnzBalanced => "nnz-balanced",
            PartitionScheme::Csr5Tiles => "csr5-tiles",
        })
    }
}

impl std::str::FromStr for PartitionScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rows-static" => Ok(PartitionScheme::RowsStatic),
            "nnz-balanced" => Ok(PartitionScheme::NnzBalanced),
            "csr5-tiles" => Ok(PartitionScheme::Csr5Tiles),
            other => Err(Error::InvalidParameter(format!(
                "unknown partition scheme `{other}`"
            ))),
        }
    }
}

/// One thread's share. `start..end` counts rows for the row schemes and tiles
/// for [`PartitionScheme::Csr5Tiles`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThreadRange {
    pub start: usize,
    pub end: usize,
    pub nnz: usize,
    /// Whether this thread also processes the CSR5 scalar tail.
    #[serde(default)]
    pub tail: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionPlan {
    pub scheme: PartitionScheme,
    pub n_threads: usize,
    pub total_nnz: usize,
    pub parts: Vec<ThreadRange>,
}

impl PartitionPlan {
    pub fn rows_static(m: &CsrMatrix, n_threads: usize) -> Result<Self> {
        check_threads(n_threads)?;
        let n = m.n_rows();
        let chunk = n.div_ceil(n_threads);
        let parts = (0..n_threads)
            .map(|t| {
                let start = (t * chunk).min(n);
                let end = ((t + 1) * chunk).min(n);
                row_range(m, start, end)
            })
            .collect();
        Ok(Self::assemble(PartitionScheme::RowsStatic, m.nnz(), parts))
    }

    pub fn nnz_balanced(m: &CsrMatrix, n_threads: usize) -> Result<Self> {
        check_threads(n_threads)?;
        let ptr = m.row_ptr();
        let max_row = (0..m.n_rows()).map(|r| m.row_nnz(r)).max().unwrap_or(0);

        // smallest load bound a greedy split into n_threads ranges can meet
        let (mut lo, mut hi) = (max_row, m.nnz());
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            if greedy_cuts(ptr, mid).len() <= n_threads {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        let cuts = greedy_cuts(ptr, lo);
        let mut parts: Vec<ThreadRange> = cuts
            .iter()
            .map(|&(start, end)| row_range(m, start, end))
            .collect();
        while parts.len() < n_threads {
            let n = m.n_rows();
            parts.push(row_range(m, n, n));
        }
        Ok(Self::assemble(PartitionScheme::NnzBalanced, m.nnz(), parts))
    }

    pub fn csr5_tiles(m: &Csr5Matrix, n_threads: usize) -> Result<Self> {
        check_threads(n_threads)?;
        let n_tiles = m.n_tiles();
        let chunk = n_tiles.div_ceil(n_threads);
        let parts = (0..n_threads)
            .map(|t| {
                let start = (t * chunk).min(n_tiles);
                let end = ((t + 1) * chunk).min(n_tiles);
                let tail = t + 1 == n_threads;
                let nnz = (end - start) * m.tile_len() + if tail { m.tail_len() } else { 0 };
                ThreadRange {
                    start,
                    end,
                    nnz,
                    tail,
                }
            })
            .collect();
        Ok(Self::assemble(PartitionScheme::Csr5Tiles, m.nnz(), parts))
    }

    fn assemble(scheme: PartitionScheme, total_nnz: usize, parts: Vec<ThreadRange>) -> Self {
        PartitionPlan {
            scheme,
            n_threads: parts.len(),
            total_nnz,
            parts,
        }
    }

    /// Per-thread fraction of all nonzeros.
    pub fn shares(&self) -> Vec<f64> {
        self.parts
            .iter()
            .map(|p| p.nnz as f64 / self.total_nnz as f64)
            .collect()
    }

    /// Maximum share of nonzeros held by one thread (`job_var`).
    pub fn max_share(&self) -> Result<f64> {
        if self.total_nnz == 0 {
            return Err(Error::NoNonzeros);
        }
        let max = self.parts.iter().map(|p| p.nnz).max().unwrap_or(0);
        Ok(max as f64 / self.total_nnz as f64)
    }

    /// Checks that the plan fits `op`: contiguous, covering, nnz-consistent.
    pub fn validate(&self, op: Operand<'_>) -> Result<()> {
        let units = match (self.scheme, op) {
            (PartitionScheme::Csr5Tiles, Operand::Csr5(m)) => m.n_tiles(),
            (PartitionScheme::RowsStatic | PartitionScheme::NnzBalanced, Operand::Csr(m)) => {
                m.n_rows()
            }
            _ => {
                return Err(Error::InvalidParameter(format!(
                    "{} plan does not apply to {} storage",
                    self.scheme,
                    op.format()
                )))
            }
        };
        let mut next = 0;
        for p in &self.parts {
            if p.start != next || p.end < p.start {
                return Err(Error::InvalidParameter(
                    "plan ranges are not contiguous".into(),
                ));
            }
            next = p.end;
        }
        if next != units || self.total_nnz != op.nnz() {
            return Err(Error::InvalidParameter(
                "plan does not cover the matrix".into(),
            ));
        }
        if self.parts.iter().map(|p| p.nnz).sum::<usize>() != self.total_nnz {
            return Err(Error::InvalidParameter(
                "plan nonzero counts do not add up".into(),
            ));
        }
        Ok(())
    }
}

fn check_threads(n_threads: usize) -> Result<()> {
    if n_threads == 0 {
        return Err(Error::InvalidParameter(
            "thread count must be at least 1".into(),
        ));
    }
    Ok(())
}

fn row_range(m: &CsrMatrix, start: usize, end: usize) -> ThreadRange {
    ThreadRange {
        start,
        end,
        nnz: m.row_ptr()[end] - m.row_ptr()[start],
        tail: false,
    }
}

/// Greedy maximal row ranges whose nonzero counts stay within `bound`.
fn greedy_cuts(ptr: &[usize], bound: usize) -> Vec<(usize, usize)> {
    let n = ptr.len() - 1;
    let mut cuts = Vec::new();
    let mut start = 0;
    while start < n {
        let limit = ptr[start] + bound;
        // last row end `e` with ptr[e] <= limit, taking at least one row
        let e = ptr.partition_point(|&p| p <= limit) - 1;
        let end = e.max(start + 1).min(n);
        cuts.push((start, end));
        start = end;
    }
    cuts
}

/// Builds the plan for `scheme` on `op`.
pub fn partition(
    op: Operand<'_>,
    scheme: PartitionScheme,
    n_threads: usize,
) -> Result<PartitionPlan> {
    match (scheme, op) {
        (PartitionScheme::RowsStatic, Operand::Csr(m)) => PartitionPlan::rows_static(m, n_threads),
        (PartitionScheme::NnzBalanced, Operand::Csr(m)) => {
            PartitionPlan::nnz_balanced(m, n_threads)
        }
        (PartitionScheme::Csr5Tiles, Operand::Csr5(m)) => PartitionPlan::csr5_tiles(m, n_threads),
        (scheme, op) => Err(Error::InvalidParameter(format!(
            "{scheme} partitioning does not apply to {} storage",
            op.format()
        ))),
    }
}
