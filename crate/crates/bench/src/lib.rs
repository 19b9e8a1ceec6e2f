//! Shared fixtures for the criterion benches.

use contagion_core::sim::{self, draw_ground_truth, generate_corpus, substream, GroundTruth};
use contagion_core::{CascadeStore, Digraph, SimConfig};

pub struct Fixture {
    pub topology: Digraph,
    pub truth: GroundTruth,
    pub store: CascadeStore,
}

/// Random digraph with mean out-degree 10 and its cascade corpus.
pub fn fixture(n: usize, cascades_per_seed: usize, seed: u64) -> Fixture {
    let topology = Digraph::erdos_renyi(n, 10.0, &mut substream(seed, sim::TOPOLOGY_STREAM)).expect("feasible degree");
    let truth = draw_ground_truth(n, seed).expect("n > 0");
    let cfg = SimConfig { cascades_per_seed, rng_seed: seed, ..Default::default() };
    let store = generate_corpus(&topology, &truth, &cfg).expect("non-empty corpus");
    Fixture { topology, truth, store }
}
