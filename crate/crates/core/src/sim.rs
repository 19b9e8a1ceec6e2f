//! Ground truth and synthetic cascades under the influence/susceptibility
//! diffusion model, where `i` passes an item to out-neighbour `j` with
//! probability `I_i * S_j`.
//!
//! Cascades follow independent-cascade semantics: the seed is active at step
//! 0, and every node makes exactly one attempt per not-yet-active
//! out-neighbour in the step after its own activation.

use std::sync::Arc;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Digraph;
use crate::ingest::{Cascade, CascadeStore, Event, NodeTable};
use crate::NodeIdx;

/// Random stream for one (seed, stream) pair. ChaCha is counter based, so
/// distinct streams are independent and generation order does not matter.
pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Streams at the top of the range are reserved; corpus generation uses one
/// stream per seed node from 0 upward.
pub const TOPOLOGY_STREAM: u64 = u64::MAX;
pub const TRUTH_STREAM: u64 = u64::MAX - 1;
pub const REMOVAL_STREAM: u64 = u64::MAX - 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub influence: Vec<f64>,
    pub susceptibility: Vec<f64>,
    pub rng_seed: u64,
}

impl GroundTruth {
    pub fn n_nodes(&self) -> usize {
        self.influence.len()
    }

    pub fn probability(&self, i: NodeIdx, j: NodeIdx) -> f64 {
        self.influence[i as usize] * self.susceptibility[j as usize]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimConfig {
    pub cascades_per_seed: usize,
    pub rng_seed: u64,
    /// Safety cap on steps per cascade.
    pub max_steps: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig { cascades_per_seed: 100, rng_seed: 0, max_steps: usize::MAX }
    }
}

/// I.i.d. uniform `[0, 1)` influence and susceptibility.
pub fn draw_ground_truth(n: usize, rng_seed: u64) -> Result<GroundTruth> {
    if n == 0 {
        return Err(Error::invalid("ground truth needs at least one node"));
    }
    let mut rng = substream(rng_seed, TRUTH_STREAM);
    let influence = (0..n).map(|_| rng.gen::<f64>()).collect();
    let susceptibility = (0..n).map(|_| rng.gen::<f64>()).collect();
    Ok(GroundTruth { influence, susceptibility, rng_seed })
}

/// One simulated reshare: who, from whom, at which step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Activation {
    pub node: NodeIdx,
    pub parent: Option<NodeIdx>,
    pub step: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimulatedCascade {
    pub activations: Vec<Activation>,
    /// True if `max_steps` cut the process short.
    pub truncated: bool,
}

/// Reusable per-thread buffers for [`simulate_cascade_with`].
pub struct Scratch {
    active: Vec<bool>,
}

impl Scratch {
    pub fn new(n: usize) -> Self {
        Scratch { active: vec![false; n] }
    }
}

/// Runs one cascade from `seed_node`. The seed is the first activation.
pub fn simulate_cascade<R: Rng + ?Sized>(
    topology: &Digraph,
    truth: &GroundTruth,
    seed_node: NodeIdx,
    rng: &mut R,
    max_steps: usize,
) -> Result<SimulatedCascade> {
    let mut scratch = Scratch::new(topology.n_nodes());
    simulate_cascade_with(topology, truth, seed_node, rng, max_steps, &mut scratch)
}

pub fn simulate_cascade_with<R: Rng + ?Sized>(
    topology: &Digraph,
    truth: &GroundTruth,
    seed_node: NodeIdx,
    rng: &mut R,
    max_steps: usize,
    scratch: &mut Scratch,
) -> Result<SimulatedCascade> {
    let n = topology.n_nodes();
    if seed_node as usize >= n {
        return Err(Error::invalid(format!("seed node {seed_node} out of range")));
    }
    if truth.n_nodes() != n {
        return Err(Error::invalid("ground truth size differs from topology"));
    }
    let active = &mut scratch.active;
    let mut activations = vec![Activation { node: seed_node, parent: None, step: 0 }];
    active[seed_node as usize] = true;
    let mut frontier_start = 0;
    let mut step = 0u32;
    let mut truncated = false;

    while frontier_start < activations.len() {
        if step as usize >= max_steps {
            truncated = true;
            break;
        }
        let frontier_end = activations.len();
        step += 1;
        for k in frontier_start..frontier_end {
            let i = activations[k].node;
            let influence = truth.influence[i as usize];
            for &j in topology.out_neighbors(i) {
                if active[j as usize] {
                    continue;
                }
                if rng.gen::<f64>() < influence * truth.susceptibility[j as usize] {
                    active[j as usize] = true;
                    activations.push(Activation { node: j, parent: Some(i), step });
                }
            }
        }
        frontier_start = frontier_end;
    }
    for a in &activations {
        active[a.node as usize] = false;
    }
    Ok(SimulatedCascade { activations, truncated })
}

/// Zero-padded decimal ids, so lexicographic order equals index order.
pub fn node_ids(n: usize) -> Vec<String> {
    let width = n.saturating_sub(1).to_string().len();
    (0..n).map(|i| format!("{i:0width$}")).collect()
}

/// Cascades per seed node, `cfg.cascades_per_seed` each, as a store whose node
/// ids come from [`node_ids`].
///
/// Cascade ids are `s<seed>-r<replicate>`. Timestamps are the activation step
/// offset by `replicate * stride` with `stride = 10 * (n + 1)`, so every
/// replicate round occupies its own time band and steps along a parent chain
/// strictly increase.
pub fn generate_corpus(topology: &Digraph, truth: &GroundTruth, cfg: &SimConfig) -> Result<CascadeStore> {
    if cfg.cascades_per_seed == 0 {
        return Err(Error::invalid("cascades_per_seed must be >= 1"));
    }
    let n = topology.n_nodes();
    if truth.n_nodes() != n {
        return Err(Error::invalid("ground truth size differs from topology"));
    }
    let stride = 10 * (n as i64 + 1);
    let seed_width = n.saturating_sub(1).to_string().len();
    let rep_width = (cfg.cascades_per_seed - 1).to_string().len();

    let per_seed: Vec<Result<(Vec<Cascade>, usize)>> = (0..n as NodeIdx)
        .into_par_iter()
        .map_init(
            || Scratch::new(n),
            |scratch, seed| {
                let mut rng = substream(cfg.rng_seed, seed as u64);
                let mut out = Vec::with_capacity(cfg.cascades_per_seed);
                let mut truncated = 0;
                for rep in 0..cfg.cascades_per_seed {
                    let sim = simulate_cascade_with(topology, truth, seed, &mut rng, cfg.max_steps, scratch)?;
                    truncated += sim.truncated as usize;
                    let base = rep as i64 * stride;
                    let events = sim
                        .activations
                        .iter()
                        .map(|a| {
                            let t = base + a.step as i64;
                            match a.parent {
                                None => Event::root(a.node, t),
                                Some(p) => Event::reshare(a.node, p, t),
                            }
                        })
                        .collect();
                    out.push(Cascade { id: format!("s{seed:0seed_width$}-r{rep:0rep_width$}"), events });
                }
                Ok((out, truncated))
            },
        )
        .collect();

    let mut cascades = Vec::with_capacity(n * cfg.cascades_per_seed);
    let mut truncated = 0;
    for r in per_seed {
        let (cs, t) = r?;
        truncated += t;
        cascades.extend(cs);
    }
    if truncated > 0 {
        log::warn!("{truncated} cascades hit the step cap");
    }
    let nodes = Arc::new(NodeTable::from_sorted(node_ids(n))?);
    CascadeStore::from_parts(nodes, cascades)
}

/// Removes `floor(fraction * R)` of the store's `R` reshare events, chosen
/// uniformly without replacement. Roots are never removed; descendants of a
/// removed event keep their recorded parent.
pub fn remove_events(store: &CascadeStore, fraction: f64, rng_seed: u64) -> Result<CascadeStore> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::invalid(format!("removal fraction must lie in [0, 1), got {fraction}")));
    }
    let reshares: Vec<(usize, usize)> = store
        .cascades()
        .iter()
        .enumerate()
        .flat_map(|(c, cas)| {
            cas.events
                .iter()
                .enumerate()
                .filter(|(_, e)| !e.is_root())
                .map(move |(k, _)| (c, k))
        })
        .collect();
    let n_remove = (fraction * reshares.len() as f64).floor() as usize;
    let mut removed: Vec<Vec<bool>> = store.cascades().iter().map(|c| vec![false; c.events.len()]).collect();
    let mut rng = substream(rng_seed, REMOVAL_STREAM);
    for idx in sample(&mut rng, reshares.len(), n_remove) {
        let (c, k) = reshares[idx];
        removed[c][k] = true;
    }
    let cascades = store
        .cascades()
        .iter()
        .zip(removed)
        .map(|(c, gone)| Cascade {
            id: c.id.clone(),
            events: c.events.iter().zip(gone).filter(|(_, g)| !g).map(|(e, _)| *e).collect(),
        })
        .collect();
    Ok(store.with_cascades(cascades))
}
