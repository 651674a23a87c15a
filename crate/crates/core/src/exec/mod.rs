//! SpMV kernels, work partitioning, thread placement and the timing harness.

mod bench;
mod kernel;
mod partition;
mod placement;

pub use bench::{
    confidence_interval, run_benchmark, should_stop, BenchSpec, ConfidenceInterval, RepTimer,
    RunRecord, ScriptedTimer, TimingConfig, WallTimer,
};
pub use kernel::{spmv, spmv_csr, spmv_csr5, spmv_parallel};
pub use partition::{partition, PartitionPlan, PartitionScheme, ThreadRange};
pub use placement::{pin_current_thread, Placement};

use serde::{Deserialize, Serialize};

use crate::matrix::{Csr5Matrix, CsrMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csr,
    Csr5,
}

impl std::fmt::Display for Format {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Format::Csr => "csr",
            Format::Csr5 => "csr5",
        })
    }
}

impl std::str::FromStr for Format {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csr" => Ok(Format::Csr),
            "csr5" => Ok(Format::Csr5),
            other => Err(crate::Error::InvalidParameter(format!(
                "unknown format `{other}`"
            ))),
        }
    }
}

/// A matrix in one of the two executable storage formats.
#[derive(Debug, Clone, Copy)]
pub enum Operand<'a> {
    Csr(&'a CsrMatrix),
    Csr5(&'a Csr5Matrix),
}

impl Operand<'_> {
    pub fn format(&self) -> Format {
        match self {
            Operand::Csr(_) => Format::Csr,
            Operand::Csr5(_) => Format::Csr5,
        }
    }

    pub fn n_rows(&self) -> usize {
        match self {
            Operand::Csr(m) => m.n_rows(),
            Operand::Csr5(m) => m.n_rows(),
        }
    }

    pub fn n_cols(&self) -> usize {
        match self {
            Operand::Csr(m) => m.n_cols(),
            Operand::Csr5(m) => m.n_cols(),
        }
    }

    pub fn nnz(&self) -> usize {
        match self {
            Operand::Csr(m) => m.nnz(),
            Operand::Csr5(m) => m.nnz(),
        }
    }

    /// The partition scheme each format runs with by default.
    pub fn default_scheme(&self) -> PartitionScheme {
        match self {
            Operand::Csr(_) => PartitionScheme::RowsStatic,
            Operand::Csr5(_) => PartitionScheme::Csr5Tiles,
        }
    }
}

impl<'a> From<&'a CsrMatrix> for Operand<'a> {
    fn from(m: &'a CsrMatrix) -> Self {
        Operand::Csr(m)
    }
}

impl<'a> From<&'a Csr5Matrix> for Operand<'a> {
    fn from(m: &'a Csr5Matrix) -> Self {
        Operand::Csr5(m)
    }
}
