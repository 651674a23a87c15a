use super::{Operand, PartitionPlan, PartitionScheme, ThreadRange};
use crate::error::{Error, Result};
use crate::matrix::{Csr5Matrix, CsrMatrix};

fn check_len(expected: usize, x: &[f64]) -> Result<()> {
    if x.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            actual: x.len(),
        });
    }
    Ok(())
}

/// `y = A x` over CSR, one row at a time.
pub fn spmv_csr(m: &CsrMatrix, x: &[f64]) -> Result<Vec<f64>> {
    check_len(m.n_cols(), x)?;
    let mut y = vec![0.0; m.n_rows()];
    csr_rows(m, x, 0, &mut y);
    Ok(y)
}

/// Computes rows `first..first + y.len()` into `y`.
pub(crate) fn csr_rows(m: &CsrMatrix, x: &[f64], first: usize, y: &mut [f64]) {
    let ptr = m.row_ptr();
    let cols = m.col_idx();
    let vals = m.values();
    for (i, out) in y.iter_mut().enumerate() {
        let r = first + i;
        let mut sum = 0.0;
        for k in ptr[r]..ptr[r + 1] {
            sum += vals[k] * x[cols[k] as usize];
        }
        *out = sum;
    }
}

/// `y = A x` over CSR5: segmented sums per tile, then the scalar tail.
pub fn spmv_csr5(m: &Csr5Matrix, x: &[f64]) -> Result<Vec<f64>> {
    check_len(m.n_cols(), x)?;
    let mut y = vec![0.0; m.n_rows()];
    let all = ThreadRange {
        start: 0,
        end: m.n_tiles(),
        nnz: m.nnz(),
        tail: true,
    };
    csr5_range(m, x, &all, 0, &mut y);
    Ok(y)
}

/// Accumulates the contribution of one tile range into `acc`, whose slot 0
/// stands for row `row_base`.
fn csr5_range(m: &Csr5Matrix, x: &[f64], part: &ThreadRange, row_base: usize, acc: &mut [f64]) {
    let cols = m.col_idx();
    let vals = m.values();
    for t in part.start..part.end {
        let mut walk = m.walk_tile(t);
        let mut row = m.tile_ptr()[t];
        let mut sum = 0.0;
        if let Some((r, pos, _)) = walk.next() {
            row = r;
            sum = vals[pos] * x[cols[pos] as usize];
        }
        for (r, pos, starts) in walk {
            if starts {
                acc[row - row_base] += sum;
                sum = 0.0;
                row = r;
            }
            sum += vals[pos] * x[cols[pos] as usize];
        }
        if m.tile_len() > 0 {
            acc[row - row_base] += sum;
        }
    }
    if part.tail {
        for k in 0..m.tail_len() {
            acc[m.tail_row()[k] - row_base] += m.tail_val()[k] * x[m.tail_col()[k] as usize];
        }
    }
}

/// Inclusive row span touched by a CSR5 tile range.
fn csr5_row_span(m: &Csr5Matrix, part: &ThreadRange) -> Option<(usize, usize)> {
    let mut span: Option<(usize, usize)> = None;
    let mut widen = |lo: usize, hi: usize| {
        span = Some(match span {
            None => (lo, hi),
            Some((a, b)) => (a.min(lo), b.max(hi)),
        });
    };
    if part.end > part.start {
        let last = m
            .walk_tile(part.end - 1)
            .last()
            .map_or(m.tile_ptr()[part.end - 1], |(r, _, _)| r);
        widen(m.tile_ptr()[part.start], last);
    }
    if part.tail && m.tail_len() > 0 {
        widen(m.tail_row()[0], m.tail_row()[m.tail_len() - 1]);
    }
    span
}

/// Runs one thread's share of the plan. For row schemes `out` is the
/// thread's own slice of `y`; for CSR5 it is a scratch buffer covering the
/// returned first row onward.
pub(crate) fn run_part(
    op: Operand<'_>,
    x: &[f64],
    part: &ThreadRange,
    out: &mut Vec<f64>,
) -> usize {
    match op {
        Operand::Csr(m) => {
            out.resize(part.end - part.start, 0.0);
            csr_rows(m, x, part.start, out);
            part.start
        }
        Operand::Csr5(m) => match csr5_row_span(m, part) {
            Some((lo, hi)) => {
                out.clear();
                out.resize(hi - lo + 1, 0.0);
                csr5_range(m, x, part, lo, out);
                lo
            }
            None => {
                out.clear();
                0
            }
        },
    }
}

/// Sequential SpMV for either format.
pub fn spmv(op: Operand<'_>, x: &[f64]) -> Result<Vec<f64>> {
    match op {
        Operand::Csr(m) => spmv_csr(m, x),
        Operand::Csr5(m) => spmv_csr5(m, x),
    }
}

/// Fork-join SpMV following `plan`: one scoped thread per part.
///
/// Row plans write disjoint slices of `y` directly, so the result is bitwise
/// identical to [`spmv_csr`]. CSR5 parts accumulate into private buffers that
/// are summed into `y` after the join, since rows may straddle parts.
pub fn spmv_parallel(op: Operand<'_>, x: &[f64], plan: &PartitionPlan) -> Result<Vec<f64>> {
    check_len(op.n_cols(), x)?;
    plan.validate(op)?;
    let mut y = vec![0.0; op.n_rows()];
    match plan.scheme {
        PartitionScheme::RowsStatic | PartitionScheme::NnzBalanced => {
            let Operand::Csr(m) = op else {
                unreachable!("validated")
            };
            std::thread::scope(|s| {
                let mut rest = y.as_mut_slice();
                for part in &plan.parts {
                    let (mine, tail) = rest.split_at_mut(part.end - part.start);
                    rest = tail;
                    s.spawn(move || csr_rows(m, x, part.start, mine));
                }
            });
        }
        PartitionScheme::Csr5Tiles => {
            let partials: Vec<(usize, Vec<f64>)> = std::thread::scope(|s| {
                let handles: Vec<_> = plan
                    .parts
                    .iter()
                    .map(|part| {
                        s.spawn(move || {
                            let mut buf = Vec::new();
                            let lo = run_part(op, x, part, &mut buf);
                            (lo, buf)
                        })
                    })
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("SpMV worker panicked"))
                    .collect()
            });
            for (lo, buf) in partials {
                for (i, v) in buf.into_iter().enumerate() {
                    y[lo + i] += v;
                }
            }
        }
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{example_matrix, CooMatrix};

    #[test]
    fn example_times_ones() {
        let m = example_matrix();
        assert_eq!(spmv_csr(&m, &[1.0; 4]).unwrap(), vec![7.0, 17.0, 4.0, 8.0]);
        let m5 = m.to_csr5(2, 2).unwrap();
        let y = spmv_csr5(&m5, &[1.0; 4]).unwrap();
        for (a, b) in y.iter().zip([7.0, 17.0, 4.0, 8.0]) {
            assert!((a - b).abs() <= 1e-10 * b);
        }
    }

    #[test]
    fn identity_returns_x() {
        let x = [0.5, -2.0, 3.25];
        let m = CsrMatrix::identity(3);
        assert_eq!(spmv_csr(&m, &x).unwrap(), x.to_vec());
        assert_eq!(
            spmv_csr5(&m.to_csr5(1, 2).unwrap(), &x).unwrap(),
            x.to_vec()
        );
    }

    #[test]
    fn empty_rows_give_zero() {
        let m = CooMatrix::from_entries(3, 2, vec![(1, 0, 2.0)])
            .unwrap()
            .to_csr();
        assert_eq!(spmv_csr(&m, &[1.0, 1.0]).unwrap(), vec![0.0, 2.0, 0.0]);
    }

    #[test]
    fn zero_x_gives_exact_zero() {
        let m5 = example_matrix().to_csr5(2, 2).unwrap();
        assert_eq!(spmv_csr5(&m5, &[0.0; 4]).unwrap(), vec![0.0; 4]);
    }

    #[test]
    fn dimension_mismatch() {
        let m = example_matrix();
        assert!(matches!(
            spmv_csr(&m, &[1.0; 3]),
            Err(Error::DimensionMismatch {
                expected: 4,
                actual: 3
            })
        ));
        assert!(spmv_csr5(&m.to_csr5(2, 2).unwrap(), &[1.0; 5]).is_err());
    }

    #[test]
    fn parallel_matches_sequential() {
        let m = example_matrix();
        let x = [1.5, -1.0, 0.25, 2.0];
        let seq = spmv_csr(&m, &x).unwrap();
        for t in 1..=6 {
            let plan = PartitionPlan::rows_static(&m, t).unwrap();
            assert_eq!(spmv_parallel(Operand::Csr(&m), &x, &plan).unwrap(), seq);
            let plan = PartitionPlan::nnz_balanced(&m, t).unwrap();
            assert_eq!(spmv_parallel(Operand::Csr(&m), &x, &plan).unwrap(), seq);
            let m5 = m.to_csr5(1, 2).unwrap();
            let plan = PartitionPlan::csr5_tiles(&m5, t).unwrap();
            let par = spmv_parallel(Operand::Csr5(&m5), &x, &plan).unwrap();
            for (a, b) in par.iter().zip(&seq) {
                assert!((a - b).abs() <= 1e-10 * (1.0 + b.abs()));
            }
        }
    }
}
