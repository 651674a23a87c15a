//! Trace-driven simulation of a core-group memory hierarchy.
//!
//! Each thread's accesses pass through its core's private L1. The L1 misses
//! of all threads placed in one core-group then share that group's L2,
//! interleaved round-robin in fixed quanta. Results are deterministic.

mod cache;
mod topology;
mod trace;

pub use cache::{Cache, Outcome};
pub use topology::{CacheConfig, Latencies, Topology};
pub use trace::{trace_spmv, visit_thread_trace, Access, Layout, Region};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{partition, Operand, PartitionPlan, Placement};

/// Counters for one thread.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ThreadCounters {
    pub thread: usize,
    pub core: usize,
    pub group: usize,
    pub l1_dca: u64,
    pub l1_dcm: u64,
    pub l2_dca: u64,
    pub l2_dcm: u64,
    pub l1_writebacks: u64,
    pub l2_writebacks: u64,
    pub modeled_cost: f64,
}

impl ThreadCounters {
    pub fn l1_dcmr(&self) -> Option<f64> {
        ratio(self.l1_dcm, self.l1_dca)
    }

    pub fn l2_dcmr(&self) -> Option<f64> {
        ratio(self.l2_dcm, self.l2_dca)
    }
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Totals {
    pub l1_dca: u64,
    pub l1_dcm: u64,
    pub l2_dca: u64,
    pub l2_dcm: u64,
    pub modeled_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub threads: Vec<ThreadCounters>,
    pub totals: Totals,
    /// Thread with the largest modeled cost (lowest id on ties).
    pub slowest_thread: usize,
}

impl SimResult {
    pub fn slowest(&self) -> &ThreadCounters {
        &self.threads[self.slowest_thread]
    }

    pub fn max_cost(&self) -> f64 {
        self.slowest().modeled_cost
    }
}

/// An L1 miss forwarded to the shared level.
#[derive(Debug, Clone, Copy)]
struct L2Request {
    line: u64,
    write: bool,
}

struct ThreadState {
    counters: ThreadCounters,
    l2_stream: Vec<L2Request>,
}

fn run_l1(
    thread: usize,
    core: usize,
    topo: &Topology,
    feed: impl FnOnce(&mut dyn FnMut(Access)),
) -> ThreadState {
    let line_size = topo.line_size as u64;
    let mut l1 = Cache::new(topo.l1.n_sets(topo.line_size), topo.l1.associativity);
    let mut counters = ThreadCounters {
        thread,
        core,
        group: core / topo.group_size,
        ..Default::default()
    };
    let mut l2_stream = Vec::new();
    feed(&mut |a: Access| {
        let line = a.addr / line_size;
        counters.l1_dca += 1;
        let out = l1.access(line, a.write);
        if out.writeback {
            counters.l1_writebacks += 1;
        }
        if !out.hit {
            counters.l1_dcm += 1;
            l2_stream.push(L2Request {
                line,
                write: a.write,
            });
        }
    });
    ThreadState {
        counters,
        l2_stream,
    }
}

fn run_shared_l2(states: &mut [ThreadState], topo: &Topology) {
    let mut groups: Vec<usize> = states.iter().map(|s| s.counters.group).collect();
    groups.sort_unstable();
    groups.dedup();
    for group in groups {
        let members: Vec<usize> = (0..states.len())
            .filter(|&i| states[i].counters.group == group)
            .collect();
        let mut l2 = Cache::new(topo.l2.n_sets(topo.line_size), topo.l2.associativity);
        let mut cursor = vec![0usize; members.len()];
        loop {
            let mut progressed = false;
            for (slot, &i) in members.iter().enumerate() {
                let state = &mut states[i];
                let start = cursor[slot];
                let end = (start + topo.quantum).min(state.l2_stream.len());
                for req in &state.l2_stream[start..end] {
                    state.counters.l2_dca += 1;
                    let out = l2.access(req.line, req.write);
                    if !out.hit {
                        state.counters.l2_dcm += 1;
                    }
                    if out.writeback {
                        state.counters.l2_writebacks += 1;
                    }
                }
                progressed |= end > start;
                cursor[slot] = end;
            }
            if !progressed {
                break;
            }
        }
    }
}

fn finish(states: Vec<ThreadState>, topo: &Topology) -> SimResult {
    let lat = topo.latencies;
    let mut threads: Vec<ThreadCounters> = states.into_iter().map(|s| s.counters).collect();
    let mut totals = Totals::default();
    for c in &mut threads {
        let l1_hits = (c.l1_dca - c.l1_dcm) as f64;
        let l2_hits = (c.l2_dca - c.l2_dcm) as f64;
        c.modeled_cost = lat.l1_hit * l1_hits + lat.l2_hit * l2_hits + lat.memory * c.l2_dcm as f64;
        totals.l1_dca += c.l1_dca;
        totals.l1_dcm += c.l1_dcm;
        totals.l2_dca += c.l2_dca;
        totals.l2_dcm += c.l2_dcm;
        totals.modeled_cost += c.modeled_cost;
    }
    let mut slowest = 0;
    for (i, c) in threads.iter().enumerate() {
        if c.modeled_cost > threads[slowest].modeled_cost {
            slowest = i;
        }
    }
    SimResult {
        threads,
        totals,
        slowest_thread: slowest,
    }
}

fn resolve_cores(n_threads: usize, topo: &Topology, placement: &Placement) -> Result<Vec<usize>> {
    topo.validate()?;
    placement.core_ids(n_threads, topo.cores, topo.group_size)
}

/// Simulates pre-recorded per-thread traces.
pub fn simulate(
    traces: &[Vec<Access>],
    topo: &Topology,
    placement: &Placement,
) -> Result<SimResult> {
    let cores = resolve_cores(traces.len(), topo, placement)?;
    let mut states: Vec<ThreadState> = traces
        .iter()
        .zip(&cores)
        .enumerate()
        .map(|(t, (trace, &core))| {
            run_l1(t, core, topo, |sink| trace.iter().for_each(|&a| sink(a)))
        })
        .collect();
    run_shared_l2(&mut states, topo);
    Ok(finish(states, topo))
}

/// Simulates SpMV on `op` under `plan`, generating traces on the fly.
pub fn simulate_spmv(
    op: Operand<'_>,
    plan: &PartitionPlan,
    topo: &Topology,
    placement: &Placement,
) -> Result<SimResult> {
    plan.validate(op)?;
    let cores = resolve_cores(plan.n_threads, topo, placement)?;
    let layout = Layout::new(op, topo.line_size);
    let mut states: Vec<ThreadState> = plan
        .parts
        .iter()
        .zip(&cores)
        .enumerate()
        .map(|(t, (part, &core))| {
            run_l1(t, core, topo, |sink| {
                visit_thread_trace(op, part, &layout, &mut |a| sink(a))
            })
        })
        .collect();
    run_shared_l2(&mut states, topo);
    Ok(finish(states, topo))
}

/// The same placement restricted to a single thread.
pub fn single_thread(placement: &Placement) -> Placement {
    match placement {
        Placement::Explicit(ids) => Placement::Explicit(ids.iter().take(1).copied().collect()),
        other => other.clone(),
    }
}

/// Simulated 1-thread and `n_threads` runs with the format's default scheme.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRun {
    pub plan: PartitionPlan,
    pub single: SimResult,
    pub parallel: SimResult,
}

impl ScalingRun {
    pub fn new(
        op: Operand<'_>,
        topo: &Topology,
        placement: &Placement,
        n_threads: usize,
    ) -> Result<Self> {
        let scheme = op.default_scheme();
        let single_plan = partition(op, scheme, 1)?;
        let single = simulate_spmv(op, &single_plan, topo, &single_thread(placement))?;
        let plan = partition(op, scheme, n_threads)?;
        let parallel = simulate_spmv(op, &plan, topo, placement)?;
        Ok(ScalingRun {
            plan,
            single,
            parallel,
        })
    }

    pub fn modeled_speedup(&self) -> f64 {
        self.single.max_cost() / self.parallel.max_cost()
    }
}

/// 1-thread modeled cost over the largest per-thread cost at `n_threads`.
pub fn modeled_speedup(
    op: Operand<'_>,
    topo: &Topology,
    placement: &Placement,
    n_threads: usize,
) -> Result<f64> {
    if n_threads == 0 {
        return Err(Error::InvalidParameter(
            "thread count must be at least 1".into(),
        ));
    }
    Ok(ScalingRun::new(op, topo, placement, n_threads)?.modeled_speedup())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{example_matrix, CsrMatrix};

    fn reads(addrs: impl IntoIterator<Item = u64>) -> Vec<Access> {
        addrs
            .into_iter()
            .map(|addr| Access { addr, write: false })
            .collect()
    }

    #[test]
    fn repeated_word_fetched_once() {
        let trace = reads(std::iter::repeat_n(4096, 100));
        let r = simulate(&[trace], &Topology::ft2000plus(), &Placement::Compact).unwrap();
        let c = r.threads[0];
        assert_eq!((c.l1_dca, c.l1_dcm, c.l2_dca, c.l2_dcm), (100, 1, 1, 1));
        assert_eq!(c.modeled_cost, 99.0 + 100.0);
    }

    #[test]
    fn streaming_8k_misses_every_line() {
        let trace = reads((0..1024).map(|i| i * 8));
        let r = simulate(&[trace], &Topology::ft2000plus(), &Placement::Compact).unwrap();
        assert_eq!(r.threads[0].l1_dcm, 128);
    }

    #[test]
    fn l1_counters_ignore_placement() {
        let m = example_matrix();
        let plan = PartitionPlan::rows_static(&m, 4).unwrap();
        let topo = Topology::desk();
        let a = simulate_spmv(Operand::Csr(&m), &plan, &topo, &Placement::Compact).unwrap();
        let b = simulate_spmv(Operand::Csr(&m), &plan, &topo, &Placement::Scatter).unwrap();
        for (x, y) in a.threads.iter().zip(&b.threads) {
            assert_eq!((x.l1_dca, x.l1_dcm), (y.l1_dca, y.l1_dcm));
            assert_eq!(x.l2_dca, x.l1_dcm);
        }
    }

    #[test]
    fn group_size_one_compact_equals_scatter() {
        let m = crate::synth::gen_banded(600, 40, 8, 2).unwrap().to_csr();
        let plan = PartitionPlan::rows_static(&m, 4).unwrap();
        let topo = Topology {
            group_size: 1,
            ..Topology::desk()
        };
        let a = simulate_spmv(Operand::Csr(&m), &plan, &topo, &Placement::Compact).unwrap();
        let b = simulate_spmv(Operand::Csr(&m), &plan, &topo, &Placement::Scatter).unwrap();
        let strip = |r: SimResult| -> Vec<(u64, u64, u64, u64)> {
            r.threads
                .iter()
                .map(|c| (c.l1_dca, c.l1_dcm, c.l2_dca, c.l2_dcm))
                .collect()
        };
        assert_eq!(strip(a), strip(b));
    }

    #[test]
    fn infeasible_placement_is_an_error() {
        let traces = vec![Vec::new(); 5];
        let topo = Topology {
            cores: 16,
            ..Topology::desk()
        };
        assert!(simulate(&traces, &topo, &Placement::Scatter).is_err());
    }

    #[test]
    fn single_thread_speedup_is_one() {
        let m = example_matrix();
        let s =
            modeled_speedup(Operand::Csr(&m), &Topology::desk(), &Placement::Compact, 1).unwrap();
        assert_eq!(s, 1.0);
    }

    #[test]
    fn trace_and_streaming_paths_agree() {
        let m = CsrMatrix::identity(300);
        let plan = PartitionPlan::rows_static(&m, 3).unwrap();
        let topo = Topology::desk();
        let traces = trace_spmv(Operand::Csr(&m), &plan, topo.line_size).unwrap();
        let a = simulate(&traces, &topo, &Placement::Compact).unwrap();
        let b = simulate_spmv(Operand::Csr(&m), &plan, &topo, &Placement::Compact).unwrap();
        assert_eq!(a, b);
    }
}
