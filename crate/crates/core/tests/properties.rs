use std::collections::BTreeMap;

use contagion_core::graph::{build_graph, Digraph, DiffusionGraph};
use contagion_core::ingest::{parse_events, split_periods, split_train_test, write_events, Delimiter, PeriodMode};
use contagion_core::predict::{pair_similarity, predict_is, SimilarityKind};
use contagion_core::sim::substream;
use contagion_core::solver::{solve, SolverConfig};
use contagion_core::stats::{correlation, rewire, CorrMethod};
use contagion_core::superspread::{precision_at, SeedRanking};
use contagion_core::{CascadeStore, NodeIdx};
use proptest::prelude::*;

fn rows() -> impl Strategy<Value = Vec<(u8, u8, Option<u8>, i64)>> {
    prop::collection::vec((0u8..5, 0u8..6, prop::option::of(0u8..6), 0i64..40), 1..60)
}

fn store_from(rows: &[(u8, u8, Option<u8>, i64)]) -> CascadeStore {
    let mut text = String::from("cascade_id,user_id,parent_user_id,timestamp\n");
    for (c, u, p, t) in rows {
        let p = p.map(|p| format!("u{p}")).unwrap_or_default();
        text.push_str(&format!("c{c},u{u},{p},{t}\n"));
    }
    parse_events(text.as_bytes(), Delimiter::Comma).unwrap().0
}

fn event_multiset(stores: &[CascadeStore]) -> BTreeMap<(String, String, Option<String>, i64), usize> {
    let mut m = BTreeMap::new();
    for s in stores {
        for r in s.records() {
            *m.entry((r.cascade_id, r.user_id, r.parent_user_id, r.timestamp)).or_insert(0) += 1;
        }
    }
    m
}

fn weighted_graph() -> impl Strategy<Value = DiffusionGraph> {
    (3usize..12)
        .prop_flat_map(|n| {
            let pairs = prop::collection::btree_set((0..n as NodeIdx, 0..n as NodeIdx), 1..n * 3);
            (Just(n), pairs, prop::collection::vec(0.01f64..1.0, n * 3))
        })
        .prop_map(|(n, pairs, w)| {
            let edges: Vec<_> = pairs
                .into_iter()
                .filter(|(a, b)| a != b)
                .zip(w)
                .map(|((a, b), w)| (a, b, w))
                .collect();
            DiffusionGraph::from_weighted_edges(n, &edges).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn csv_round_trip(rows in rows()) {
        let store = store_from(&rows);
        prop_assume!(!store.is_empty());
        let mut buf = Vec::new();
        write_events(&store, &mut buf, Delimiter::Comma).unwrap();
        let (again, report) = parse_events(buf.as_slice(), Delimiter::Comma).unwrap();
        prop_assert_eq!(report.rows_kept, store.n_events());
        prop_assert_eq!(again, store);
    }

    #[test]
    fn period_split_keeps_every_event(rows in rows(), n in 2usize..5, equal_count in any::<bool>()) {
        let store = store_from(&rows);
        let distinct: std::collections::BTreeSet<i64> = store.records().map(|r| r.timestamp).collect();
        prop_assume!(distinct.len() >= n);
        let mode = if equal_count { PeriodMode::EqualCount } else { PeriodMode::EqualDuration };
        let parts = split_periods(&store, n, mode).unwrap();
        prop_assert_eq!(parts.len(), n);
        prop_assert_eq!(event_multiset(&parts), event_multiset(std::slice::from_ref(&store)));
    }

    #[test]
    fn train_test_partitions_cascades(rows in rows(), frac in 0.05f64..0.95) {
        let store = store_from(&rows);
        prop_assume!(store.n_cascades() >= 2);
        let (train, test) = split_train_test(&store, frac).unwrap();
        prop_assert_eq!(train.n_cascades() + test.n_cascades(), store.n_cascades());
        prop_assert_eq!(event_multiset(&[train, test]), event_multiset(std::slice::from_ref(&store)));
    }

    #[test]
    fn built_rates_are_probabilities(rows in rows()) {
        let store = store_from(&rows);
        let g = build_graph(&store).unwrap();
        prop_assert!(g.omega().iter().all(|w| (0.0..=1.0).contains(w)));
        let f: f64 = g.f_hat().iter().sum();
        let gs: f64 = g.g_hat().iter().sum();
        prop_assert!((f - gs).abs() <= 1e-12 * f.max(1.0));
    }

    #[test]
    fn rate_sums_agree(g in weighted_graph()) {
        let f: f64 = g.f_hat().iter().sum();
        let gs: f64 = g.g_hat().iter().sum();
        let total: f64 = g.omega().iter().sum();
        prop_assert!((f - total).abs() <= 1e-12 * total.max(1.0));
        prop_assert!((gs - total).abs() <= 1e-12 * total.max(1.0));
    }

    #[test]
    fn scores_scale_with_initial_value(g in weighted_graph(), c in 0.1f64..20.0) {
        let cfg = SolverConfig { tolerance: 1e-13, max_iter: 200_000, ..Default::default() };
        let a = solve(&g, &cfg).unwrap();
        let b = solve(&g, &SolverConfig { initial: c, ..cfg }).unwrap();
        prop_assume!(a.converged && b.converged);
        let pa = predict_is(&g, &a).unwrap();
        let pb = predict_is(&g, &b).unwrap();
        for (x, y) in pa.scores.iter().zip(&pb.scores) {
            prop_assert!((x - y).abs() <= 1e-9 * x.abs().max(1e-12), "{} vs {}", x, y);
        }
    }

    #[test]
    fn similarity_is_symmetric_on_undirected_graphs(
        pairs in prop::collection::btree_set((0u32..8, 0u32..8), 1..20),
        kind in prop::sample::select(SimilarityKind::ALL.to_vec()),
    ) {
        let mut edges = Vec::new();
        for (a, b) in pairs.into_iter().filter(|(a, b)| a != b) {
            edges.push((a, b));
            edges.push((b, a));
        }
        let g = Digraph::from_edges(8, &edges).unwrap();
        let deg = |z: NodeIdx| g.in_degree(z) + g.out_degree(z);
        for i in 0..8 {
            for j in 0..8 {
                let ij = pair_similarity(kind, g.in_neighbors(i), g.in_neighbors(j), deg);
                let ji = pair_similarity(kind, g.in_neighbors(j), g.in_neighbors(i), deg);
                prop_assert!((ij - ji).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn spearman_ignores_monotone_transforms(xy in prop::collection::vec((0.01f64..10.0, 0.01f64..10.0), 3..40)) {
        let (x, y): (Vec<f64>, Vec<f64>) = xy.into_iter().unzip();
        let base = correlation(&x, &y, CorrMethod::Spearman, false).unwrap();
        let tx: Vec<f64> = x.iter().map(|v| v.ln() * 3.0 + 1.0).collect();
        let ty: Vec<f64> = y.iter().map(|v| v.powi(3)).collect();
        let moved = correlation(&tx, &ty, CorrMethod::Spearman, false).unwrap();
        prop_assert!((base.value - moved.value).abs() < 1e-9);
        // All-positive data: the nonzero filter is a no-op.
        let filtered = correlation(&x, &y, CorrMethod::Pearson, true).unwrap();
        let plain = correlation(&x, &y, CorrMethod::Pearson, false).unwrap();
        prop_assert_eq!(filtered, plain);
    }

    #[test]
    fn precision_ignores_monotone_transforms(
        scores in prop::collection::vec(0.0f64..5.0, 5..60),
        sizes in prop::collection::vec(1.0f64..50.0, 5..60),
        fraction in 0.05f64..1.0,
    ) {
        let sizes: BTreeMap<NodeIdx, f64> = sizes.into_iter().enumerate().map(|(i, s)| (i as NodeIdx, s)).collect();
        let a = SeedRanking::from_scores("m", scores.clone());
        let b = SeedRanking::from_scores("m", scores.iter().map(|s| (2.0 * s).exp()).collect());
        prop_assert_eq!(precision_at(&a, &sizes, fraction).unwrap(), precision_at(&b, &sizes, fraction).unwrap());
    }

    #[test]
    fn rewiring_keeps_degree_sequences(seed in any::<u64>(), n in 6usize..30) {
        let g = Digraph::erdos_renyi(n, 3.0, &mut substream(seed, 1)).unwrap();
        prop_assume!(g.n_edges() >= 4);
        if let Ok(h) = rewire(&g, 10 * g.n_edges(), &mut substream(seed, 2)) {
            prop_assert_eq!(h.in_degrees(), g.in_degrees());
            prop_assert_eq!(h.out_degrees(), g.out_degrees());
        }
    }
}
