mod common;

use common::*;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;
use stocknet::metrics::{assortativity, compute_stats, degree_partition, rich_club_curve, DegreeMode};
use stocknet::network::{Edge, NetworkMeta, StockNetwork};

fn sorted(mut v: Vec<usize>) -> Vec<usize> {
    v.sort_unstable();
    v
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn stats_match_adjacency_matrix(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.random_range(2..=100);
        let p = r.random_range(0.005..0.3);
        let net = random_digraph(&mut r, n, p);
        prop_assume!(net.edge_count() > 0);
        let d = Dense::of(&net);
        let s = compute_stats(&net).unwrap();
        prop_assert_eq!(s.edge_count, d.edges());
        prop_assert!((s.density - d.density()).abs() < 1e-12);
        let (outs, ins) = (net.out_degrees(), net.in_degrees());
        let (os, is) = (net.out_strengths(), net.in_strengths());
        for v in 0..n {
            prop_assert_eq!(outs[v], d.out_degree(v));
            prop_assert_eq!(ins[v], d.in_degree(v));
            prop_assert_eq!(os[v], d.out_strength(v));
            prop_assert_eq!(is[v], d.in_strength(v));
        }
        let (scc, wcc) = (d.scc_sizes(), d.wcc_sizes());
        prop_assert_eq!(s.n_scc, scc.len());
        prop_assert_eq!(s.n_wcc, wcc.len());
        prop_assert_eq!(s.max_scc_size, *scc.iter().max().unwrap());
        prop_assert_eq!(s.max_wcc_size, *wcc.iter().max().unwrap());
        for (got, out) in [(&s.out_assort, true), (&s.in_assort, false)] {
            match (got.value(), d.assortativity(out)) {
                (Some(a), Some(b)) => prop_assert!((a - b).abs() < 1e-9, "{} vs {}", a, b),
                (None, None) => {}
                (a, b) => prop_assert!(false, "defined mismatch {:?} {:?}", a, b),
            }
        }
    }

    #[test]
    fn assortativity_ignores_labels(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.random_range(5..=60);
        let net = random_digraph(&mut r, n, 0.1);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut r);
        let nodes = (0..n).map(|i| format!("W{:03}", perm[i])).collect();
        let relabelled = StockNetwork::new(nodes, net.edges().to_vec(), NetworkMeta::default()).unwrap();
        for mode in [DegreeMode::Out, DegreeMode::In] {
            let (a, b) = (assortativity(&net, mode).value(), assortativity(&relabelled, mode).value());
            match (a, b) {
                (Some(a), Some(b)) => prop_assert!((a - b).abs() < 1e-12),
                (a, b) => prop_assert_eq!(a, b),
            }
        }
    }

    #[test]
    fn partition_covers_every_node(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.random_range(5..=100);
        let net = random_digraph(&mut r, n, 0.05);
        prop_assume!(net.edge_count() > 0);
        let part = degree_partition(&net).unwrap();
        prop_assert_eq!(part.group_sizes().iter().sum::<usize>(), net.node_count());
    }

    #[test]
    fn rich_club_matches_brute_force(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.random_range(3..=60);
        let net = random_digraph(&mut r, n, 0.15);
        let d = Dense::of(&net);
        let rs: Vec<usize> = (1..=n.min(20)).collect();
        for p in rich_club_curve(&net, &rs).unwrap() {
            let top = d.top_by_out_degree(net.nodes(), p.r);
            let e = d.edges_within(&top);
            prop_assert_eq!(p.e, e);
            match p.density_rr.value() {
                Some(v) => {
                    prop_assert!((0.0..=1.0).contains(&v));
                    prop_assert!((v - e as f64 / (p.r * (p.r - 1)) as f64).abs() < 1e-12);
                }
                None => prop_assert!(p.r < 2),
            }
        }
    }
}

#[test]
fn components_on_known_shapes() {
    // two 3-cycles joined one way, plus an isolated pair
    let e = |s: u32, t: u32| Edge { source: s, target: t, weight: stocknet::money::Cents(1) };
    let edges = vec![e(0, 1), e(1, 2), e(2, 0), e(3, 4), e(4, 5), e(5, 3), e(2, 3), e(6, 7)];
    let nodes = (0..8).map(|i| format!("K{i}")).collect();
    let net = StockNetwork::new(nodes, edges, NetworkMeta::default()).unwrap();
    let s = compute_stats(&net).unwrap();
    let d = Dense::of(&net);
    assert_eq!(sorted(d.scc_sizes()), vec![1, 1, 3, 3]);
    assert_eq!((s.n_scc, s.max_scc_size, s.n_wcc, s.max_wcc_size), (4, 3, 2, 6));
}
