use contagion_core::graph::{build_graph, Digraph};
use contagion_core::sim::{draw_ground_truth, generate_corpus};
use contagion_core::SimConfig;

/// On an out-tree every receiver has a single possible parent, so each share by
/// `i` is exactly one Bernoulli(I_i * S_j) trial for `j` and the estimated rate
/// is a binomial proportion around the true probability.
#[test]
fn tree_rates_match_true_probabilities() {
    let n = 31;
    let edges: Vec<(u32, u32)> = (1..n as u32).map(|c| ((c - 1) / 2, c)).collect();
    let topo = Digraph::from_edges(n, &edges).unwrap();
    let truth = draw_ground_truth(n, 11).unwrap();
    let cfg = SimConfig { cascades_per_seed: 3000, rng_seed: 11, ..Default::default() };
    let g = build_graph(&generate_corpus(&topo, &truth, &cfg).unwrap()).unwrap();
    for (e, (i, j)) in g.topology().edges().enumerate() {
        let p = truth.probability(i, j);
        let trials = g.items_shared()[i as usize] as f64;
        let sigma = (p * (1.0 - p) / trials).sqrt();
        let w = g.omega()[e];
        assert!((w - p).abs() <= 5.0 * sigma + 1e-3, "edge {i}->{j}: omega {w} vs p {p} ({trials} trials)");
    }
}
