use proptest::prelude::*;

use spmvlab::exec::{Operand, PartitionPlan, Placement};
use spmvlab::sim::{simulate, simulate_spmv, Access, Cache, Topology};
use spmvlab::synth::gen_banded;

proptest! {
    #[test]
    fn most_recent_lines_stay_resident(lines in prop::collection::vec(0u64..32, 1..300), ways in 1usize..6) {
        let mut cache = Cache::new(1, ways);
        for &l in &lines {
            cache.access(l, false);
        }
        let mut recent: Vec<u64> = Vec::new();
        for &l in lines.iter().rev() {
            if !recent.contains(&l) {
                recent.push(l);
            }
        }
        for (age, l) in recent.iter().enumerate() {
            prop_assert_eq!(cache.contains(*l), age < ways);
        }
    }

    #[test]
    fn counters_are_consistent(addrs in prop::collection::vec((0u64..1 << 16, any::<bool>()), 1..2000), threads in 1usize..5) {
        let trace: Vec<Access> = addrs.iter().map(|&(addr, write)| Access { addr, write }).collect();
        let traces: Vec<Vec<Access>> = (0..threads).map(|_| trace.clone()).collect();
        let sim = simulate(&traces, &Topology::desk(), &Placement::Compact).unwrap();
        for t in &sim.threads {
            prop_assert_eq!(t.l1_dca, trace.len() as u64);
            prop_assert_eq!(t.l2_dca, t.l1_dcm);
            prop_assert!(t.l2_dcm <= t.l2_dca);
        }
        prop_assert!(sim.threads.iter().all(|t| t.modeled_cost <= sim.max_cost()));
    }
}

#[test]
fn slowest_thread_carries_the_heavy_rows() {
    let m = spmvlab::synth::gen_clustered(2000, 50, 200, 1, 1)
        .unwrap()
        .to_csr();
    let plan = PartitionPlan::rows_static(&m, 4).unwrap();
    let sim = simulate_spmv(
        Operand::Csr(&m),
        &plan,
        &Topology::desk(),
        &Placement::Compact,
    )
    .unwrap();
    let heavy = (0..4).max_by_key(|&t| plan.parts[t].nnz).unwrap();
    assert_eq!(heavy, 1);
    assert_eq!(sim.slowest_thread, heavy);
}

#[test]
fn scatter_spreads_threads_over_groups() {
    let m = gen_banded(1024, 64, 8, 2).unwrap().to_csr();
    let plan = PartitionPlan::rows_static(&m, 4).unwrap();
    let topo = Topology::ft2000plus();
    let compact = simulate_spmv(Operand::Csr(&m), &plan, &topo, &Placement::Compact).unwrap();
    let scatter = simulate_spmv(Operand::Csr(&m), &plan, &topo, &Placement::Scatter).unwrap();
    assert!(compact.threads.iter().all(|t| t.group == 0));
    let groups: Vec<usize> = scatter.threads.iter().map(|t| t.group).collect();
    assert_eq!(groups, vec![0, 1, 2, 3]);
}

#[test]
fn topology_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("desk.toml");
    let topo = Topology::desk();
    std::fs::write(&path, topo.to_config_string()).unwrap();
    assert_eq!(Topology::load(&path).unwrap(), topo);
}
