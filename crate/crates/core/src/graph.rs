//! Directed diffusion network with empirical contagion rates.
//!
//! An edge `i -> j` means `j` reshared from `i` at least once. Its weight
//! `omega` is the fraction of cascades shared by `i` in which `j` reshared
//! with `i` as the explicit parent, no earlier than `i`'s own share.

use std::collections::HashMap;
use std::io::Write;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};
use crate::ingest::{Cascade, CascadeStore, NodeTable};
use crate::NodeIdx;

/// Which neighbourhood of a node to look at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Nodes with an edge into this node.
    In,
    /// Nodes this node has an edge to.
    Out,
}

impl std::str::FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "in" => Ok(Direction::In),
            "out" => Ok(Direction::Out),
            _ => Err(Error::Unknown { kind: "direction", name: s.to_owned() }),
        }
    }
}

/// Unweighted digraph in compressed sparse row form, both directions.
///
/// Edges are numbered in `(src, dst)` order, so the out-adjacency of `i` is
/// the edge-id range `out_offsets[i]..out_offsets[i + 1]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Digraph {
    n: usize,
    out_offsets: Vec<usize>,
    out_targets: Vec<NodeIdx>,
    in_offsets: Vec<usize>,
    in_sources: Vec<NodeIdx>,
    /// Edge id of each in-adjacency slot.
    in_edges: Vec<usize>,
}

impl Digraph {
    /// Builds from an edge list; duplicate edges collapse. Self-loops and
    /// out-of-range endpoints are rejected.
    pub fn from_edges(n: usize, edges: &[(NodeIdx, NodeIdx)]) -> Result<Self> {
        let mut sorted = edges.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        Self::from_sorted_unique(n, sorted)
    }

    fn from_sorted_unique(n: usize, edges: Vec<(NodeIdx, NodeIdx)>) -> Result<Self> {
        for &(s, d) in &edges {
            if s as usize >= n || d as usize >= n {
                return Err(Error::invalid(format!("edge ({s}, {d}) out of range for {n} nodes")));
            }
            if s == d {
                return Err(Error::invalid(format!("self-loop on node {s}")));
            }
        }
        let m = edges.len();
        let mut out_offsets = vec![0usize; n + 1];
        let mut in_offsets = vec![0usize; n + 1];
        for &(s, d) in &edges {
            out_offsets[s as usize + 1] += 1;
            in_offsets[d as usize + 1] += 1;
        }
        for i in 0..n {
            out_offsets[i + 1] += out_offsets[i];
            in_offsets[i + 1] += in_offsets[i];
        }
        let out_targets: Vec<NodeIdx> = edges.iter().map(|&(_, d)| d).collect();
        let mut in_sources = vec![0; m];
        let mut in_edges = vec![0; m];
        let mut cursor = in_offsets.clone();
        for (e, &(s, d)) in edges.iter().enumerate() {
            let slot = cursor[d as usize];
            in_sources[slot] = s;
            in_edges[slot] = e;
            cursor[d as usize] += 1;
        }
        Ok(Digraph { n, out_offsets, out_targets, in_offsets, in_sources, in_edges })
    }

    /// Directed G(n, p) with `p = mean_out_degree / (n - 1)`, no self-loops.
    pub fn erdos_renyi<R: Rng + ?Sized>(n: usize, mean_out_degree: f64, rng: &mut R) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid("random graph needs at least 2 nodes"));
        }
        let p = mean_out_degree / (n - 1) as f64;
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::invalid(format!("mean out-degree {mean_out_degree} infeasible for {n} nodes")));
        }
        let mut edges = Vec::new();
        for s in 0..n as NodeIdx {
            for d in 0..n as NodeIdx {
                if s != d && rng.gen::<f64>() < p {
                    edges.push((s, d));
                }
            }
        }
        Self::from_sorted_unique(n, edges)
    }

    #[inline]
    pub fn n_nodes(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn n_edges(&self) -> usize {
        self.out_targets.len()
    }

    #[inline]
    pub fn out_neighbors(&self, i: NodeIdx) -> &[NodeIdx] {
        let i = i as usize;
        &self.out_targets[self.out_offsets[i]..self.out_offsets[i + 1]]
    }

    #[inline]
    pub fn out_edge_ids(&self, i: NodeIdx) -> std::ops::Range<usize> {
        let i = i as usize;
        self.out_offsets[i]..self.out_offsets[i + 1]
    }

    #[inline]
    pub fn in_neighbors(&self, j: NodeIdx) -> &[NodeIdx] {
        let j = j as usize;
        &self.in_sources[self.in_offsets[j]..self.in_offsets[j + 1]]
    }

    /// Edge ids of `j`'s in-edges, aligned with [`Digraph::in_neighbors`].
    #[inline]
    pub fn in_edge_ids(&self, j: NodeIdx) -> &[usize] {
        let j = j as usize;
        &self.in_edges[self.in_offsets[j]..self.in_offsets[j + 1]]
    }

    pub fn neighbors(&self, x: NodeIdx, dir: Direction) -> &[NodeIdx] {
        match dir {
            Direction::In => self.in_neighbors(x),
            Direction::Out => self.out_neighbors(x),
        }
    }

    #[inline]
    pub fn out_degree(&self, i: NodeIdx) -> usize {
        let i = i as usize;
        self.out_offsets[i + 1] - self.out_offsets[i]
    }

    #[inline]
    pub fn in_degree(&self, j: NodeIdx) -> usize {
        let j = j as usize;
        self.in_offsets[j + 1] - self.in_offsets[j]
    }

    pub fn out_degrees(&self) -> Vec<usize> {
        (0..self.n as NodeIdx).map(|i| self.out_degree(i)).collect()
    }

    pub fn in_degrees(&self) -> Vec<usize> {
        (0..self.n as NodeIdx).map(|j| self.in_degree(j)).collect()
    }

    /// Edge id of `i -> j`, if present.
    pub fn edge_id(&self, i: NodeIdx, j: NodeIdx) -> Option<usize> {
        let range = self.out_edge_ids(i);
        let start = range.start;
        self.out_targets[range].binary_search(&j).ok().map(|k| start + k)
    }

    /// All edges in id order.
    pub fn edges(&self) -> impl Iterator<Item = (NodeIdx, NodeIdx)> + '_ {
        (0..self.n as NodeIdx).flat_map(move |i| self.out_neighbors(i).iter().map(move |&j| (i, j)))
    }
}

/// Diffusion network: topology plus per-edge contagion rates and per-node
/// aggregates.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionGraph {
    topology: Digraph,
    omega: Vec<f64>,
    /// Reshare rows behind each edge, counting repeats within a cascade.
    raw_count: Vec<u32>,
    items_shared: Vec<u32>,
    f_hat: Vec<f64>,
    g_hat: Vec<f64>,
}

impl DiffusionGraph {
    /// Wraps explicit weights. Used for hand-built fixtures and null models;
    /// `raw_count` defaults to 1 and `items_shared` to 0.
    pub fn from_weighted_edges(n: usize, edges: &[(NodeIdx, NodeIdx, f64)]) -> Result<Self> {
        let mut sorted = edges.to_vec();
        sorted.sort_by_key(|e| (e.0, e.1));
        if sorted.windows(2).any(|w| (w[0].0, w[0].1) == (w[1].0, w[1].1)) {
            return Err(Error::invalid("duplicate weighted edge"));
        }
        let topology = Digraph::from_sorted_unique(n, sorted.iter().map(|&(s, d, _)| (s, d)).collect())?;
        let omega: Vec<f64> = sorted.iter().map(|e| e.2).collect();
        let m = omega.len();
        Self::assemble(topology, omega, vec![1; m], vec![0; n])
    }

    fn assemble(topology: Digraph, omega: Vec<f64>, raw_count: Vec<u32>, items_shared: Vec<u32>) -> Result<Self> {
        if let Some(w) = omega.iter().find(|w| !(0.0..=1.0).contains(*w)) {
            return Err(Error::invalid(format!("edge weight {w} outside [0, 1]")));
        }
        let n = topology.n_nodes();
        let mut f_hat = vec![0.0; n];
        let mut g_hat = vec![0.0; n];
        for (e, (i, j)) in topology.edges().enumerate() {
            f_hat[i as usize] += omega[e];
            g_hat[j as usize] += omega[e];
        }
        Ok(DiffusionGraph { topology, omega, raw_count, items_shared, f_hat, g_hat })
    }

    /// Same topology and counts, new weights. Aggregates are recomputed.
    pub fn with_weights(&self, omega: Vec<f64>) -> Result<Self> {
        if omega.len() != self.n_edges() {
            return Err(Error::invalid("weight vector length differs from edge count"));
        }
        Self::assemble(self.topology.clone(), omega, self.raw_count.clone(), self.items_shared.clone())
    }

    /// Same weights on a different topology with one weight per edge, e.g. a
    /// rewired null model.
    pub fn with_topology(&self, topology: Digraph, omega: Vec<f64>) -> Result<Self> {
        let m = topology.n_edges();
        if omega.len() != m {
            return Err(Error::invalid("weight vector length differs from edge count"));
        }
        Self::assemble(topology, omega, vec![1; m], self.items_shared.clone())
    }

    pub fn topology(&self) -> &Digraph {
        &self.topology
    }

    pub fn n_nodes(&self) -> usize {
        self.topology.n_nodes()
    }

    pub fn n_edges(&self) -> usize {
        self.topology.n_edges()
    }

    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    pub fn raw_counts(&self) -> &[u32] {
        &self.raw_count
    }

    pub fn items_shared(&self) -> &[u32] {
        &self.items_shared
    }

    pub fn f_hat(&self) -> &[f64] {
        &self.f_hat
    }

    pub fn g_hat(&self) -> &[f64] {
        &self.g_hat
    }

    /// Weight of `i -> j`, zero when absent.
    pub fn weight(&self, i: NodeIdx, j: NodeIdx) -> f64 {
        self.topology.edge_id(i, j).map_or(0.0, |e| self.omega[e])
    }

    /// Outgoing contagion rate: sum of `omega` over `i`'s out-edges.
    pub fn out_rate(&self, i: NodeIdx) -> f64 {
        self.f_hat[i as usize]
    }

    /// Incoming contagion rate: sum of `omega` over `j`'s in-edges.
    pub fn in_rate(&self, j: NodeIdx) -> f64 {
        self.g_hat[j as usize]
    }

    /// Keeps edges backed by at least `min_reshares` reshare rows. The node set
    /// is preserved and rates are recomputed over the kept edges.
    pub fn filter_edges_min_count(&self, min_reshares: u32) -> Result<Self> {
        if min_reshares < 1 {
            return Err(Error::invalid("min_reshares must be >= 1"));
        }
        let keep: Vec<usize> = (0..self.n_edges())
            .filter(|&e| self.raw_count[e] >= min_reshares)
            .collect();
        let all: Vec<(NodeIdx, NodeIdx)> = self.topology.edges().collect();
        let topology = Digraph::from_sorted_unique(self.n_nodes(), keep.iter().map(|&e| all[e]).collect())?;
        Self::assemble(
            topology,
            keep.iter().map(|&e| self.omega[e]).collect(),
            keep.iter().map(|&e| self.raw_count[e]).collect(),
            self.items_shared.clone(),
        )
    }

    /// Writes `src,dst,omega,raw_count` rows with node ids from `nodes`.
    pub fn write_edges<W: Write>(&self, nodes: &NodeTable, sink: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(["src", "dst", "omega", "raw_count"])?;
        for (e, (i, j)) in self.topology.edges().enumerate() {
            w.write_record([
                nodes.id(i),
                nodes.id(j),
                &self.omega[e].to_string(),
                &self.raw_count[e].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes `node_id,k_in,k_out,f_hat,g_hat,items_shared` rows.
    pub fn write_nodes<W: Write>(&self, nodes: &NodeTable, sink: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(["node_id", "k_in", "k_out", "f_hat", "g_hat", "items_shared"])?;
        for i in 0..self.n_nodes() as NodeIdx {
            let u = i as usize;
            w.write_record([
                nodes.id(i),
                &self.topology.in_degree(i).to_string(),
                &self.topology.out_degree(i).to_string(),
                &self.f_hat[u].to_string(),
                &self.g_hat[u].to_string(),
                &self.items_shared[u].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Default, Clone, Copy)]
struct PairTally {
    cascades: u32,
    rows: u32,
    last_cascade: u32,
}

/// Builds the diffusion network from a cascade store.
///
/// A node shares a cascade when it appears in it as sharer or as parent. The
/// numerator of `omega_ij` counts distinct cascades with a time-consistent
/// `i -> j` reshare row; repeats within one cascade count once there but every
/// row counts toward `raw_count`.
pub fn build_graph(store: &CascadeStore) -> Result<DiffusionGraph> {
    build_graph_with(store, RateDenominator::SharedCascades)
}

/// Which cascades count toward the denominator of `omega_ij`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RateDenominator {
    /// Every cascade `i` shared.
    #[default]
    SharedCascades,
    /// Only cascades `i` shared before `j` first appeared in them, so `j` could
    /// still be reached from `i`. The numerator is restricted the same way.
    /// When most cascades cover a large part of the network this removes the
    /// downward bias on receivers that are usually reached early by others.
    AtRisk,
}

impl FromStr for RateDenominator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "shared-cascades" => Ok(RateDenominator::SharedCascades),
            "at-risk" => Ok(RateDenominator::AtRisk),
            _ => Err(Error::Unknown { kind: "rate denominator", name: s.to_owned() }),
        }
    }
}

pub fn build_graph_with(store: &CascadeStore, denominator: RateDenominator) -> Result<DiffusionGraph> {
    if store.is_empty() {
        return Err(Error::Empty("cannot build a graph from an empty store".into()));
    }
    let n = store.n_nodes();
    let mut items_shared = vec![0u32; n];
    let mut last_seen = vec![u32::MAX; n];
    let mut pairs: HashMap<(NodeIdx, NodeIdx), PairTally> = HashMap::new();

    for (ci, cascade) in store.cascades().iter().enumerate() {
        let ci = ci as u32;
        let mut mark = |u: NodeIdx| {
            if last_seen[u as usize] != ci {
                last_seen[u as usize] = ci;
                items_shared[u as usize] += 1;
            }
        };
        for e in &cascade.events {
            mark(e.user);
            if let Some(p) = e.parent() {
                mark(p);
            }
        }
        let needs_time_check = cascade_may_skew(cascade);
        let first = needs_time_check.then(|| cascade.first_share_times());
        for e in &cascade.events {
            let Some(p) = e.parent() else { continue };
            if let Some(first) = &first {
                if !Cascade::is_time_consistent(e, first) {
                    continue;
                }
            }
            let tally = pairs.entry((p, e.user)).or_insert(PairTally {
                cascades: 0,
                rows: 0,
                last_cascade: u32::MAX,
            });
            tally.rows += 1;
            if tally.last_cascade != ci {
                tally.last_cascade = ci;
                tally.cascades += 1;
            }
        }
    }

    let mut edges: Vec<((NodeIdx, NodeIdx), PairTally)> = pairs.into_iter().collect();
    edges.sort_unstable_by_key(|(k, _)| *k);
    let omega = edges
        .iter()
        .map(|((i, _), t)| t.cascades as f64 / items_shared[*i as usize] as f64)
        .collect();
    let raw_count = edges.iter().map(|(_, t)| t.rows).collect();
    let topology = Digraph::from_sorted_unique(n, edges.into_iter().map(|(k, _)| k).collect())?;
    let omega = match denominator {
        RateDenominator::SharedCascades => omega,
        RateDenominator::AtRisk => at_risk_rates(store, &topology),
    };
    DiffusionGraph::assemble(topology, omega, raw_count, items_shared)
}

fn at_risk_rates(store: &CascadeStore, topology: &Digraph) -> Vec<f64> {
    let m = topology.n_edges();
    let mut num = vec![0u32; m];
    let mut den = vec![0u32; m];
    let mut counted = vec![u32::MAX; m];
    let mut first = vec![i64::MAX; topology.n_nodes()];
    let mut present: Vec<NodeIdx> = Vec::new();
    for (ci, cascade) in store.cascades().iter().enumerate() {
        let ci = ci as u32;
        for e in &cascade.events {
            for x in std::iter::once(e.user).chain(e.parent()) {
                let t = &mut first[x as usize];
                if *t == i64::MAX {
                    present.push(x);
                }
                *t = (*t).min(e.timestamp);
            }
        }
        let at_risk = |i: NodeIdx, j: NodeIdx| first[j as usize] > first[i as usize];
        for &i in &present {
            for (e, &j) in topology.out_edge_ids(i).zip(topology.out_neighbors(i)) {
                if at_risk(i, j) {
                    den[e] += 1;
                }
            }
        }
        for ev in &cascade.events {
            let Some(p) = ev.parent() else { continue };
            if first[p as usize] > ev.timestamp {
                continue;
            }
            if let Some(e) = topology.edge_id(p, ev.user) {
                if at_risk(p, ev.user) && counted[e] != ci {
                    counted[e] = ci;
                    num[e] += 1;
                }
            }
        }
        for x in present.drain(..) {
            first[x as usize] = i64::MAX;
        }
    }
    num.iter()
        .zip(&den)
        .map(|(&a, &b)| if b == 0 { 0.0 } else { a as f64 / b as f64 })
        .collect()
}

/// Events are sorted by time; a reshare can only precede its parent's share
/// when the parent's first event comes later in the list. Cheap pre-check so
/// the per-cascade map is built only when needed.
fn cascade_may_skew(cascade: &Cascade) -> bool {
    let mut seen = std::collections::HashSet::with_capacity(cascade.events.len());
    for e in &cascade.events {
        if let Some(p) = e.parent() {
            if !seen.contains(&p) {
                return true;
            }
        }
        seen.insert(e.user);
    }
    false
}
