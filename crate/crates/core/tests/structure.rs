mod common;

use std::collections::BTreeSet;

use common::*;
use multivariance_core::simulate::{generate, Scenario, ScenarioKind};
use multivariance_core::structure::{
    detect, to_dot, Decision, DependencyGraph, DetectionOptions, Mode, NodeKind,
};
use multivariance_core::{Dataset, Psi, RngState};
use proptest::prelude::*;

fn scenario(text: &str) -> Scenario {
    Scenario::new(text.parse::<ScenarioKind>().unwrap())
}

fn conservative(mode: Mode) -> DetectionOptions {
    DetectionOptions::new(mode, Decision::Conservative { alpha: 0.05 })
}

/// Structural invariants every detected graph satisfies.
fn check_graph(g: &DependencyGraph, data: &Dataset) {
    let vars: Vec<_> = g.nodes.iter().filter(|n| n.kind == NodeKind::Variable).collect();
    assert_eq!(vars.len(), data.variables());
    for (i, v) in vars.iter().enumerate() {
        assert_eq!(v.members, [i]);
        assert_eq!(v.label, data.names()[i]);
    }
    for d in g.dependency_nodes() {
        let targets = g.targets(d.id);
        let distinct: BTreeSet<_> = targets.iter().collect();
        assert_eq!(targets.len(), d.order.unwrap());
        assert_eq!(distinct.len(), targets.len());
        let mut covered = Vec::new();
        for &t in &targets {
            let node = &g.nodes[t];
            assert!(matches!(node.kind, NodeKind::Variable | NodeKind::Cluster));
            covered.extend(node.members.iter().copied());
        }
        covered.sort_unstable();
        assert_eq!(covered, d.members);
    }
    let clusters = &g.metadata.clusters;
    let mut seen = BTreeSet::new();
    for c in clusters {
        for v in c {
            assert!(seen.insert(*v), "variable {v} in two clusters");
        }
    }
    for (i, n) in g.nodes.iter().enumerate() {
        assert_eq!(n.id, i);
    }
}

#[test]
fn deterministic() {
    let data = generate(&scenario("independent:2:coins:2"), 60, &mut RngState::new(1)).unwrap();
    for mode in [Mode::Full, Mode::Clustered] {
        let opts = DetectionOptions::new(mode, Decision::Resampling { alpha: 0.05, replicates: 50 });
        let a = detect(&data, &[Psi::default()], &opts, &mut RngState::new(9)).unwrap();
        let b = detect(&data, &[Psi::default()], &opts, &mut RngState::new(9)).unwrap();
        assert_eq!(a, b);
        check_graph(&a, &data);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn full_mode_never_nests(seed in any::<u64>(), samples in 20usize..80, copies in 1usize..3, extra in 0usize..3) {
        let mut rng = RngState::new(seed);
        let coins = generate(&scenario(&format!("independent:{copies}:coins:2")), samples, &mut rng).unwrap();
        let noise = mixed_dataset(&mut rng, samples, &vec![1; extra + 1]);
        let mut values = Vec::new();
        for s in 0..samples {
            values.extend_from_slice(coins.row(s));
            values.extend_from_slice(noise.row(s));
        }
        let cols = coins.columns() + noise.columns();
        let data = Dataset::univariate(values, cols).unwrap();
        let g = detect(&data, &[Psi::default()], &conservative(Mode::Full), &mut rng).unwrap();
        check_graph(&g, &data);
        let deps: Vec<_> = g.dependency_nodes().collect();
        for a in &deps {
            for b in &deps {
                if a.id != b.id {
                    prop_assert!(!a.members.iter().all(|m| b.members.contains(m)), "{:?} inside {:?}", a.members, b.members);
                }
            }
        }
        let clustered = detect(&data, &[Psi::default()], &conservative(Mode::Clustered), &mut rng).unwrap();
        check_graph(&clustered, &data);
        let all: BTreeSet<usize> = clustered.metadata.clusters.iter().flatten().copied().collect();
        prop_assert_eq!(all.len(), data.variables());
    }
}

fn modal<F: Fn(u64) -> bool>(runs: u64, f: F) -> u64 {
    (0..runs).filter(|&s| f(s)).count() as u64
}

#[test]
fn parity_triple_with_independent_variables() {
    let hits = modal(20, |seed| {
        let mut rng = RngState::new(300 + seed);
        let mut values = Vec::new();
        let coins = generate(&scenario("coins:2"), 100, &mut rng).unwrap();
        for s in 0..100 {
            values.extend_from_slice(coins.row(s));
            values.extend((0..7).map(|_| rng.standard_normal()));
        }
        let data = Dataset::univariate(values, 10).unwrap();
        let g = detect(&data, &[Psi::default()], &conservative(Mode::Clustered), &mut rng).unwrap();
        check_graph(&g, &data);
        let deps: Vec<_> = g.dependency_nodes().collect();
        deps.len() == 1 && deps[0].members == [0, 1, 2] && g.metadata.clusters.len() == 8
    });
    assert!(hits >= 15, "{hits}/20");
}

#[test]
fn star_structure() {
    let hits = modal(20, |seed| {
        let mut rng = RngState::new(400 + seed);
        let data = generate(&scenario("copies:3:coins:2"), 100, &mut rng).unwrap();
        let g = detect(&data, &[Psi::default()], &conservative(Mode::Clustered), &mut rng).unwrap();
        check_graph(&g, &data);
        let pairs: Vec<_> = g.dependency_nodes().filter(|d| d.order == Some(2)).collect();
        let tops: Vec<_> = g.dependency_nodes().filter(|d| d.order == Some(3)).collect();
        // Copies of the same coin variable are pairwise linked, then the three
        // copy clusters form one 3-dependence.
        let pairs_ok = pairs.len() == 9 && pairs.iter().all(|d| d.members[0] % 3 == d.members[1] % 3);
        let top_ok = tops.len() == 1
            && tops[0].members == (0..9).collect::<Vec<_>>()
            && g.targets(tops[0].id).iter().all(|&t| g.nodes[t].kind == NodeKind::Cluster);
        pairs_ok && top_ok && g.metadata.clusters.len() == 1
    });
    assert!(hits >= 15, "{hits}/20");
}

#[test]
fn independent_data_gives_empty_graph() {
    let hits = modal(20, |seed| {
        let mut rng = RngState::new(500 + seed);
        let data = normal_dataset(&mut rng, 80, &[1, 2, 1, 1]);
        let g = detect(&data, &[Psi::default()], &conservative(Mode::Clustered), &mut rng).unwrap();
        check_graph(&g, &data);
        g.dependency_nodes().count() == 0 && g.metadata.clusters.iter().all(|c| c.len() == 1)
    });
    assert!(hits >= 15, "{hits}/20");
}

#[test]
fn dot_counts() {
    let data = normal_dataset(&mut RngState::new(1), 30, &[1, 1, 1, 1]);
    let opts = DetectionOptions::new(Mode::Full, Decision::Consistent { beta: 0.5, c: 1e6 });
    let g = detect(&data, &[Psi::default()], &opts, &mut RngState::new(1)).unwrap();
    let dot = to_dot(&g);
    assert_eq!(dot.matches("shape=circle").count(), 4);
    assert_eq!(dot.matches(" -- ").count(), 0);
    assert!(g.metadata.type_i_bound.unwrap() < 1e-12);
}
