use hdacs_core::analytics::{self, AnalyticParams};
use hdacs_core::deployment::{deploy_network, ClusterTree, DeployConfig, Placement};
use hdacs_core::field::{sample_field, FieldConfig, SignalVector};
use hdacs_core::protocols::{self, AggregationTrace, ProtocolKind, RunOptions, Thresholds};
use proptest::prelude::*;

fn exact_tree(n: usize, levels: u32, seed: u64) -> ClusterTree {
    let cfg = DeployConfig::new(n.pow(levels), n, seed).with_placement(Placement::Stratified);
    deploy_network(&cfg).unwrap()
}

fn flat(tree: &ClusterTree) -> SignalVector {
    sample_field(&FieldConfig::flat(3.0), &tree.nodes).unwrap()
}

fn run_all(tree: &ClusterTree, options: &RunOptions, seed: u64) -> Vec<AggregationTrace> {
    let field = flat(tree);
    let th = Thresholds::new(1, 4, tree.node_count()).unwrap();
    ProtocolKind::ALL
        .iter()
        .map(|&k| protocols::run_protocol(k, tree, &field, &th, options, seed).unwrap())
        .collect()
}

fn totals(traces: &[AggregationTrace]) -> (usize, usize, usize) {
    let get = |k| {
        traces
            .iter()
            .find(|t| t.protocol == k)
            .unwrap()
            .total_units()
    };
    (
        get(ProtocolKind::Hdacs),
        get(ProtocolKind::Hcs),
        get(ProtocolKind::Ncs),
    )
}

fn natural_levels(nodes: usize, n: usize) -> u32 {
    let mut t = 0;
    while n.pow(t + 1) <= nodes {
        t += 1;
    }
    t
}

#[test]
fn exact_power_trees_order_the_methods() {
    for (n, levels) in [
        (4, 1),
        (4, 2),
        (4, 3),
        (4, 4),
        (4, 5),
        (16, 1),
        (16, 2),
        (16, 3),
    ] {
        let tree = exact_tree(n, levels, 11);
        let (hdacs, hcs, ncs) = totals(&run_all(&tree, &RunOptions::default(), 3));
        assert!(
            hdacs <= hcs && hcs <= ncs,
            "n={n} T={levels}: {hdacs} {hcs} {ncs}"
        );
        if levels >= 3 {
            assert!(
                hdacs < hcs && hcs < ncs,
                "n={n} T={levels}: {hdacs} {hcs} {ncs}"
            );
        }
        let p = AnalyticParams::new(tree.node_count(), n, levels);
        let (lower, _) = analytics::measurement_bounds(&p);
        assert!(
            (hdacs as f64 - lower).abs() < 1e-9,
            "n={n} T={levels}: {hdacs} vs {lower}"
        );
        let (m_ncs, m_hcs) = analytics::baseline_measurements(&p);
        assert!((ncs as f64 - m_ncs).abs() < 1e-9);
        assert!((hcs as f64 - m_hcs).abs() < 1e-9);
    }
}

#[test]
fn exact_power_compression_ratios() {
    for n in [4usize, 16] {
        let levels = if n == 4 { 5 } else { 3 };
        let tree = exact_tree(n, levels, 2);
        let traces = run_all(&tree, &RunOptions::default(), 1);
        for t in &traces {
            let gammas = protocols::compression_ratios(t);
            match t.protocol {
                ProtocolKind::Ncs => assert!(gammas.iter().all(|&g| g == 1.0), "{gammas:?}"),
                ProtocolKind::Hdacs => {
                    for (idx, &g) in gammas.iter().enumerate() {
                        let i = idx + 1;
                        assert!(g > 0.0 && g <= 1.0);
                        if i >= 2 {
                            let expected = (1.0 + 1.0 / (i - 1) as f64) / n as f64;
                            assert!((g - expected).abs() <= 1e-12, "n={n} level {i}: {g}");
                            if n == 4 {
                                assert!(g <= 0.5);
                            } else {
                                assert!(g < 0.5);
                            }
                        }
                    }
                }
                ProtocolKind::Hcs => {}
            }
        }
    }
}

#[test]
fn frame_counts_follow_the_frame_size() {
    // level-2 clusters of a 4^4 tree hold 16 sensors: 4 units against M = 8
    let tree = exact_tree(4, 4, 8);
    let traces = run_all(&tree, &RunOptions::default(), 8);
    for t in &traces {
        let expected = match t.protocol {
            ProtocolKind::Hdacs => 1,
            _ => 2,
        };
        for tx in t.transmissions.iter().filter(|tx| tx.level == 3) {
            assert_eq!(tx.frames, expected, "{}", t.protocol);
        }
        for tx in &t.transmissions {
            assert_eq!(tx.frames, tx.units.div_ceil(4));
        }
    }
}

#[test]
fn strict_hybrid_never_exceeds_raw_or_threshold() {
    let tree = deploy_network(&DeployConfig::new(500, 4, 4)).unwrap();
    let field = flat(&tree);
    let th = Thresholds::new(1, 4, tree.node_count()).unwrap();
    let strict = RunOptions {
        strict_hcs: true,
        ..RunOptions::default()
    };
    let loose = protocols::run_hcs(&tree, &field, &th, &RunOptions::default(), 1).unwrap();
    let tight = protocols::run_hcs(&tree, &field, &th, &strict, 1).unwrap();
    assert!(tight.total_units() <= loose.total_units());
    for tx in tight.transmissions.iter().filter(|tx| tx.level >= 2) {
        let child_level = tx.level - 1;
        let child = tree
            .level(child_level)
            .iter()
            .find(|c| c.head == tx.sender && tree.parent_index(c.index) == tx.cluster)
            .unwrap();
        assert_eq!(tx.units, child.sensor_count.min(th.global()));
    }
}

#[test]
fn sizes_that_do_not_match_the_tree_are_rejected() {
    let tree = exact_tree(4, 2, 1);
    let th = Thresholds::new(1, 4, tree.node_count()).unwrap();
    let short = SignalVector::new(vec![1.0; 3]).unwrap();
    for k in ProtocolKind::ALL {
        assert!(protocols::run_protocol(k, &tree, &short, &th, &RunOptions::default(), 1).is_err());
    }
}

#[test]
fn thread_count_does_not_change_the_trace() {
    let tree = deploy_network(&DeployConfig::new(600, 4, 21)).unwrap();
    let field = sample_field(
        &FieldConfig {
            noise_halfwidth: 0.2,
            seed: 21,
            ..FieldConfig::flat(2.0)
        },
        &tree.nodes,
    )
    .unwrap();
    let th = Thresholds::new(2, 4, tree.node_count()).unwrap();
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| {
                protocols::run_hdacs(&tree, &field, &th, &RunOptions::default(), 5).unwrap()
            })
    };
    let single = run(1);
    for threads in [2, 4, 8] {
        assert_eq!(run(threads), single);
    }
}

fn check_invariants(tree: &ClusterTree, traces: &[AggregationTrace]) -> Result<(), TestCaseError> {
    let field = flat(tree);
    let th = Thresholds::new(1, 4, tree.node_count()).unwrap();
    let hdacs = &traces[0];
    let hcs = traces
        .iter()
        .find(|t| t.protocol == ProtocolKind::Hcs)
        .unwrap();
    prop_assert_eq!(hdacs.protocol, ProtocolKind::Hdacs);

    // conservation: one recovered value per node, flat fields come back exactly
    for t in traces {
        prop_assert_eq!(t.recovered.len(), tree.node_count());
        prop_assert!(t.flagged_clusters().is_empty());
    }
    for (a, b) in hdacs.recovered.values().iter().zip(field.values()) {
        prop_assert!((a - b).abs() <= 1e-6);
    }

    // leaves behave identically under HDACS and HCS
    for (a, b) in hdacs.nodes.iter().zip(&hcs.nodes) {
        if a.role == 0 {
            prop_assert_eq!(a.units, b.units);
            prop_assert_eq!(a.units, 1);
        }
    }

    // never inflate: a head forwards at most the raw samples it holds
    for tx in hdacs.transmissions.iter().filter(|tx| tx.level >= 2) {
        let child = tree
            .level(tx.level - 1)
            .iter()
            .find(|c| c.head == tx.sender && tree.parent_index(c.index) == tx.cluster)
            .expect("sender heads a child cluster");
        prop_assert!(tx.units <= child.sensor_count);
        prop_assert_eq!(tx.units, th.hdacs_payload(child.sensor_count));
    }
    for g in protocols::compression_ratios(hdacs) {
        prop_assert!(g > 0.0 && g <= 1.0);
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn uniform_deployments_stay_inside_the_bounds(nodes in 300usize..800, seed in any::<u64>(), wide in any::<bool>()) {
        let n = if wide { 16 } else { 4 };
        let tree = deploy_network(&DeployConfig::new(nodes, n, seed)).unwrap();
        prop_assert_eq!(tree.level_count(), natural_levels(nodes, n));
        let traces = run_all(&tree, &RunOptions::default(), seed);
        let (hdacs, hcs, ncs) = totals(&traces);
        let th = Thresholds::new(1, 4, nodes).unwrap();
        let slack = analytics::hdacs_ceiling_slack(&tree, &th);
        let (lo, hi) = analytics::measurement_bounds(&AnalyticParams::for_tree(&tree, 1));
        prop_assert!(hdacs as f64 >= lo - 1e-9, "{} < {}", hdacs, lo);
        prop_assert!(hdacs as f64 <= hi + slack, "{} > {} + {}", hdacs, hi, slack);
        prop_assert!(hdacs < hcs && hcs < ncs, "{} {} {}", hdacs, hcs, ncs);
        prop_assert_eq!(ncs, nodes * th.global());
        check_invariants(&tree, &traces)?;
    }

    #[test]
    fn exact_power_trees_hit_the_lower_bound(levels in 2u32..=4, seed in any::<u64>()) {
        let tree = exact_tree(4, levels, seed);
        let traces = run_all(&tree, &RunOptions::default(), seed);
        let th = Thresholds::new(1, 4, tree.node_count()).unwrap();
        prop_assert_eq!(analytics::hdacs_ceiling_slack(&tree, &th), 0.0);
        let (lo, _) = analytics::measurement_bounds(&AnalyticParams::for_tree(&tree, 1));
        prop_assert_eq!(traces[0].total_units() as f64, lo);
        check_invariants(&tree, &traces)?;
    }
}
