//! Sparse matrix-vector multiplication scalability laboratory.
//!
//! - [`matrix`]: COO, CSR and CSR5 storage with per-row statistics.
//! - [`io`]: Matrix Market files and dataset manifests.
//! - [`synth`]: synthetic generators and locality-aware row reordering.
//! - [`exec`]: sequential and threaded kernels, partitioning, placement and
//!   the timing harness.
//! - [`sim`]: a trace-driven private-L1, shared-L2 cache simulator.
//! - [`features`]: feature vectors relating a run to its speedup.
//! - [`model`]: regression trees and forests over those features.
//! - [`advisor`]: rules mapping features to optimizations.
//!
//! ```
//! use spmvlab::exec::spmv_csr;
//! use spmvlab::matrix::example_matrix;
//!
//! let a = example_matrix();
//! let y = spmv_csr(&a, &[1.0; 4]).unwrap();
//! assert_eq!(y, vec![7.0, 17.0, 4.0, 8.0]);
//! ```

pub mod advisor;
pub mod error;
pub mod exec;
pub mod features;
pub mod io;
pub mod matrix;
pub mod model;
pub mod sim;
pub mod synth;

pub use error::{Error, Result};
