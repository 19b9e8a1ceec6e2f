//! Node-level correlations, neighbour averages, null-model significance tests
//! and stylized-fact summaries.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Digraph, DiffusionGraph, Direction};
use crate::sim::substream;
use crate::solver::{solve, ScoreVector, SolverConfig};
use crate::NodeIdx;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorrMethod {
    Pearson,
    Spearman,
}

impl FromStr for CorrMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pearson" => Ok(CorrMethod::Pearson),
            "spearman" => Ok(CorrMethod::Spearman),
            _ => Err(Error::Unknown { kind: "correlation method", name: s.to_owned() }),
        }
    }
}

impl fmt::Display for CorrMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CorrMethod::Pearson => "pearson",
            CorrMethod::Spearman => "spearman",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub value: f64,
    pub n: usize,
    /// One side had zero variance; `value` is reported as 0.
    pub degenerate: bool,
}

fn pearson_raw(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Ranks starting at 1; tied values share their average rank.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && x[idx[end]] == x[idx[start]] {
            end += 1;
        }
        let rank = (start + end + 1) as f64 / 2.0;
        for &k in &idx[start..end] {
            ranks[k] = rank;
        }
        start = end;
    }
    ranks
}

/// Correlation of aligned vectors. With `nonzero_only`, pairs where either
/// entry is zero are dropped first. Fewer than 3 remaining pairs is an error.
pub fn correlation(x: &[f64], y: &[f64], method: CorrMethod, nonzero_only: bool) -> Result<Correlation> {
    if x.len() != y.len() {
        return Err(Error::invalid(format!("length mismatch: {} vs {}", x.len(), y.len())));
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = x
        .iter()
        .zip(y)
        .filter(|(a, b)| !nonzero_only || (**a != 0.0 && **b != 0.0))
        .map(|(a, b)| (*a, *b))
        .unzip();
    let n = xs.len();
    if n < 3 {
        return Err(Error::TooFewSamples { needed: 3, got: n });
    }
    let value = match method {
        CorrMethod::Pearson => pearson_raw(&xs, &ys),
        CorrMethod::Spearman => pearson_raw(&average_ranks(&xs), &average_ranks(&ys)),
    };
    Ok(match value {
        Some(value) => Correlation { value, n, degenerate: false },
        None => Correlation { value: 0.0, n, degenerate: true },
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeighborAverage {
    pub values: Vec<f64>,
    /// False where the node has no neighbour in the chosen direction; the
    /// value there is 0.
    pub has_neighbors: Vec<bool>,
}

/// Mean of `prop` over each node's in- or out-neighbours.
pub fn neighbor_average(g: &Digraph, prop: &[f64], dir: Direction) -> Result<NeighborAverage> {
    if prop.len() != g.n_nodes() {
        return Err(Error::invalid("property length differs from node count"));
    }
    let mut values = vec![0.0; g.n_nodes()];
    let mut has_neighbors = vec![false; g.n_nodes()];
    for x in 0..g.n_nodes() {
        let nb = g.neighbors(x as NodeIdx, dir);
        if !nb.is_empty() {
            values[x] = nb.iter().map(|&z| prop[z as usize]).sum::<f64>() / nb.len() as f64;
            has_neighbors[x] = true;
        }
    }
    Ok(NeighborAverage { values, has_neighbors })
}

/// Per-node quantity entering a correlation statistic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NodeProperty {
    InDegree,
    OutDegree,
    Influence,
    Susceptibility,
    /// Mean influence over a node's in- or out-neighbours.
    NeighborInfluence(Direction),
    /// Mean susceptibility over a node's in- or out-neighbours.
    NeighborSusceptibility(Direction),
}

impl NodeProperty {
    pub fn values(&self, g: &Digraph, scores: &ScoreVector) -> Result<Vec<f64>> {
        Ok(match *self {
            NodeProperty::InDegree => g.in_degrees().into_iter().map(|k| k as f64).collect(),
            NodeProperty::OutDegree => g.out_degrees().into_iter().map(|k| k as f64).collect(),
            NodeProperty::Influence => scores.influence.clone(),
            NodeProperty::Susceptibility => scores.susceptibility.clone(),
            NodeProperty::NeighborInfluence(d) => neighbor_average(g, &scores.influence, d)?.values,
            NodeProperty::NeighborSusceptibility(d) => neighbor_average(g, &scores.susceptibility, d)?.values,
        })
    }
}

impl fmt::Display for NodeProperty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let dir = |d: &Direction| match d {
            Direction::In => "in",
            Direction::Out => "out",
        };
        match self {
            NodeProperty::InDegree => f.write_str("k_in"),
            NodeProperty::OutDegree => f.write_str("k_out"),
            NodeProperty::Influence => f.write_str("I"),
            NodeProperty::Susceptibility => f.write_str("S"),
            NodeProperty::NeighborInfluence(d) => write!(f, "I_nn_{}", dir(d)),
            NodeProperty::NeighborSusceptibility(d) => write!(f, "S_nn_{}", dir(d)),
        }
    }
}

impl FromStr for NodeProperty {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "k_in" => NodeProperty::InDegree,
            "k_out" => NodeProperty::OutDegree,
            "I" => NodeProperty::Influence,
            "S" => NodeProperty::Susceptibility,
            "I_nn_in" => NodeProperty::NeighborInfluence(Direction::In),
            "I_nn_out" => NodeProperty::NeighborInfluence(Direction::Out),
            "S_nn_in" => NodeProperty::NeighborSusceptibility(Direction::In),
            "S_nn_out" => NodeProperty::NeighborSusceptibility(Direction::Out),
            _ => return Err(Error::Unknown { kind: "node property", name: s.to_owned() }),
        })
    }
}

/// A named correlation between two node properties over nonzero pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Statistic {
    pub x: NodeProperty,
    pub y: NodeProperty,
    pub method: CorrMethod,
}

impl Statistic {
    pub fn new(x: NodeProperty, y: NodeProperty, method: CorrMethod) -> Self {
        Statistic { x, y, method }
    }

    pub fn evaluate(&self, g: &Digraph, scores: &ScoreVector) -> Result<Correlation> {
        correlation(&self.x.values(g, scores)?, &self.y.values(g, scores)?, self.method, true)
    }

    /// Pairwise node-level correlations among degree, influence and
    /// susceptibility.
    pub fn node_level() -> Vec<Statistic> {
        use NodeProperty::*;
        let props = [InDegree, OutDegree, Influence, Susceptibility];
        let mut out = Vec::new();
        for a in 0..props.len() {
            for b in a + 1..props.len() {
                out.push(Statistic::new(props[a], props[b], CorrMethod::Spearman));
            }
        }
        out
    }

    /// Correlations between a node's property and its neighbours' average.
    pub fn assortativity() -> Vec<Statistic> {
        use NodeProperty::*;
        vec![
            Statistic::new(InDegree, NeighborInfluence(Direction::In), CorrMethod::Spearman),
            Statistic::new(OutDegree, NeighborSusceptibility(Direction::Out), CorrMethod::Spearman),
            Statistic::new(Influence, NeighborSusceptibility(Direction::Out), CorrMethod::Spearman),
            Statistic::new(Susceptibility, NeighborInfluence(Direction::In), CorrMethod::Spearman),
        ]
    }
}

impl fmt::Display for Statistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({},{})", self.method, self.x, self.y)
    }
}

impl FromStr for Statistic {
    type Err = Error;

    /// Parses `method(x,y)`, e.g. `spearman(k_out,I)`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Unknown { kind: "statistic", name: s.to_owned() };
        let (method, rest) = s.split_once('(').ok_or_else(bad)?;
        let inner = rest.strip_suffix(')').ok_or_else(bad)?;
        let (x, y) = inner.split_once(',').ok_or_else(bad)?;
        Ok(Statistic { x: x.trim().parse()?, y: y.trim().parse()?, method: method.trim().parse()? })
    }
}

/// Empirical p-values of a statistic against null realizations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullTest {
    pub statistic: String,
    pub original: f64,
    /// Statistic on each usable realization, in realization order.
    pub realizations: Vec<f64>,
    /// Fraction of realizations with value >= original.
    pub p_greater: f64,
    /// Fraction of realizations with value <= original.
    pub p_less: f64,
    pub n_requested: usize,
    /// Realizations where the statistic was undefined.
    pub n_dropped: usize,
    pub rng_seed: u64,
}

impl NullTest {
    fn from_values(stat: &Statistic, original: f64, values: Vec<Option<f64>>, rng_seed: u64) -> Result<Self> {
        let n_requested = values.len();
        let realizations: Vec<f64> = values.into_iter().flatten().collect();
        let n_dropped = n_requested - realizations.len();
        if realizations.is_empty() {
            return Err(Error::Empty(format!("{stat} undefined on every null realization")));
        }
        let k = realizations.len() as f64;
        // Ties count as exceeding in both directions.
        let p_greater = realizations.iter().filter(|&&v| v >= original).count() as f64 / k;
        let p_less = realizations.iter().filter(|&&v| v <= original).count() as f64 / k;
        Ok(NullTest {
            statistic: stat.to_string(),
            original,
            realizations,
            p_greater,
            p_less,
            n_requested,
            n_dropped,
            rng_seed,
        })
    }

    /// Significant at `level` in either direction.
    pub fn significant(&self, level: f64) -> bool {
        self.p_greater < level || self.p_less < level
    }
}

fn defined(c: Result<Correlation>) -> Option<f64> {
    c.ok().filter(|c| !c.degenerate).map(|c| c.value)
}

/// Null model with fixed topology and edge weights redrawn uniformly from
/// `[0, 1]`; scores are re-solved on each realization.
pub fn null_pvalue_weights(
    g: &DiffusionGraph,
    stat: &Statistic,
    n_real: usize,
    rng_seed: u64,
    solver: &SolverConfig,
) -> Result<NullTest> {
    if n_real < 2 {
        return Err(Error::invalid("at least 2 null realizations required"));
    }
    let scores = solve(g, solver)?;
    let original = stat.evaluate(g.topology(), &scores)?;
    if original.degenerate {
        return Err(Error::invalid(format!("{stat} is degenerate on the original graph")));
    }
    let values: Vec<Option<f64>> = (0..n_real)
        .into_par_iter()
        .map(|r| {
            let mut rng = substream(rng_seed, r as u64);
            let omega: Vec<f64> = (0..g.n_edges()).map(|_| rng.gen::<f64>()).collect();
            let randomized = g.with_weights(omega).ok()?;
            let s = solve(&randomized, solver).ok()?;
            defined(stat.evaluate(randomized.topology(), &s))
        })
        .collect();
    NullTest::from_values(stat, original.value, values, rng_seed)
}

/// Degree-preserving randomization by double edge swaps: `(a->b, c->d)`
/// becomes `(a->d, c->b)`, rejecting swaps that would create a self-loop or
/// a duplicate edge. Runs until `swaps` swaps are accepted or the attempt
/// budget (`100 * swaps`) is spent.
pub fn rewire<R: Rng + ?Sized>(g: &Digraph, swaps: usize, rng: &mut R) -> Result<Digraph> {
    let m = g.n_edges();
    if m < 2 {
        return Err(Error::NoValidSwaps);
    }
    let mut edges: Vec<(NodeIdx, NodeIdx)> = g.edges().collect();
    let mut present: HashSet<(NodeIdx, NodeIdx)> = edges.iter().copied().collect();
    let max_attempts = swaps.saturating_mul(100).max(1000);
    let mut accepted = 0;
    let mut attempts = 0;
    while accepted < swaps && attempts < max_attempts {
        attempts += 1;
        let e1 = rng.gen_range(0..m);
        let e2 = rng.gen_range(0..m);
        let ((a, b), (c, d)) = (edges[e1], edges[e2]);
        if e1 == e2 || a == d || c == b || b == d || a == c {
            continue;
        }
        if present.contains(&(a, d)) || present.contains(&(c, b)) {
            continue;
        }
        present.remove(&(a, b));
        present.remove(&(c, d));
        present.insert((a, d));
        present.insert((c, b));
        edges[e1] = (a, d);
        edges[e2] = (c, b);
        accepted += 1;
    }
    if accepted == 0 && swaps > 0 {
        return Err(Error::NoValidSwaps);
    }
    if accepted < swaps {
        log::warn!("rewiring accepted {accepted} of {swaps} swaps");
    }
    Digraph::from_edges(g.n_nodes(), &edges)
}

/// Null model with node scores held fixed and the topology rewired by a
/// directed configuration model, `10 * |E|` accepted swaps per realization.
/// Every realization is checked to preserve both degree sequences.
pub fn null_pvalue_rewire(
    g: &Digraph,
    scores: &ScoreVector,
    stat: &Statistic,
    n_real: usize,
    rng_seed: u64,
) -> Result<NullTest> {
    if n_real < 2 {
        return Err(Error::invalid("at least 2 null realizations required"));
    }
    let original = stat.evaluate(g, scores)?;
    if original.degenerate {
        return Err(Error::invalid(format!("{stat} is degenerate on the original graph")));
    }
    let (k_in, k_out) = (g.in_degrees(), g.out_degrees());
    let swaps = 10 * g.n_edges();
    let rewired: Vec<Result<Option<f64>>> = (0..n_real)
        .into_par_iter()
        .map(|r| {
            let mut rng = substream(rng_seed, r as u64);
            let h = rewire(g, swaps, &mut rng)?;
            assert_eq!(h.in_degrees(), k_in, "rewiring changed in-degrees");
            assert_eq!(h.out_degrees(), k_out, "rewiring changed out-degrees");
            Ok(defined(stat.evaluate(&h, scores)))
        })
        .collect();
    let values = rewired.into_iter().collect::<Result<Vec<_>>>()?;
    NullTest::from_values(stat, original.value, values, rng_seed)
}

/// Two-sample Kolmogorov-Smirnov statistic `sup |F_a - F_b|`.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

/// One row of an [`EvalReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatEntry {
    pub name: String,
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_value: Option<f64>,
    pub n: usize,
}

/// Named statistics of one experiment.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EvalReport {
    pub experiment: String,
    pub entries: Vec<StatEntry>,
    pub metadata: BTreeMap<String, String>,
}

impl EvalReport {
    pub fn new(experiment: impl Into<String>) -> Self {
        EvalReport { experiment: experiment.into(), ..Default::default() }
    }

    pub fn push(&mut self, name: impl Into<String>, value: f64, n: usize) -> &mut Self {
        self.entries.push(StatEntry { name: name.into(), value, p_value: None, n });
        self
    }

    pub fn push_with_p(&mut self, name: impl Into<String>, value: f64, p: f64, n: usize) -> &mut Self {
        debug_assert!((0.0..=1.0).contains(&p));
        self.entries.push(StatEntry { name: name.into(), value, p_value: Some(p), n });
        self
    }

    pub fn meta(&mut self, key: impl Into<String>, value: impl ToString) -> &mut Self {
        self.metadata.insert(key.into(), value.to_string());
        self
    }

    pub fn get(&self, name: &str) -> Option<&StatEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    /// Flat `experiment,name,value,p_value,n` rows.
    pub fn write_csv<W: std::io::Write>(&self, sink: W, with_header: bool) -> Result<()> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(sink);
        if with_header {
            w.write_record(["experiment", "name", "value", "p_value", "n"])?;
        }
        for e in &self.entries {
            w.write_record([
                self.experiment.as_str(),
                &e.name,
                &e.value.to_string(),
                &e.p_value.map(|p| p.to_string()).unwrap_or_default(),
                &e.n.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Indices of the top `ceil(q * len)` entries of `idx` by `score`, ties by
/// index ascending.
fn top_share(idx: &[usize], score: &[f64], q: f64) -> Vec<usize> {
    let mut sorted = idx.to_vec();
    sorted.sort_by(|&a, &b| score[b].total_cmp(&score[a]).then(a.cmp(&b)));
    sorted.truncate((q * idx.len() as f64 - 1e-9).ceil() as usize);
    sorted
}

/// Summary statistics for the four stylized facts about influence and
/// susceptibility, over nodes scored on both sides. `quantile` is the share
/// counted as "high" (0.2 for quintiles).
///
/// - `joint_top_fraction`: share of nodes in the top quantile of both scores;
///   `r_I_S`: their Pearson correlation.
/// - `ks_S_nn_out_top_vs_bottom`: KS distance between the out-neighbour mean
///   susceptibility of top- and bottom-quantile influencers.
/// - `count_high_I`, `count_high_S`: nodes above the top-quantile cutoff of the
///   pooled score distribution.
/// - `neighbor_I_ratio`: mean influence of top influencers' out-neighbours over
///   the mean influence of all scored nodes.
pub fn stylized_facts(scores: &ScoreVector, g: &Digraph, quantile: f64) -> Result<EvalReport> {
    if !(quantile > 0.0 && quantile < 1.0) {
        return Err(Error::invalid(format!("quantile must lie in (0, 1), got {quantile}")));
    }
    let (inf, sus) = (&scores.influence, &scores.susceptibility);
    let scored: Vec<usize> = (0..scores.n_nodes()).filter(|&i| inf[i] > 0.0 && sus[i] > 0.0).collect();
    let n = scored.len();
    if n < 10 {
        return Err(Error::TooFewSamples { needed: 10, got: n });
    }
    let mut report = EvalReport::new("stylized_facts");
    report.meta("quantile", quantile);

    // (i) few nodes are both highly influential and highly susceptible.
    let top_i = top_share(&scored, inf, quantile);
    let top_s: HashSet<usize> = top_share(&scored, sus, quantile).into_iter().collect();
    let joint = top_i.iter().filter(|i| top_s.contains(i)).count();
    report.push("joint_top_fraction", joint as f64 / n as f64, n);
    let xi: Vec<f64> = scored.iter().map(|&i| inf[i]).collect();
    let xs: Vec<f64> = scored.iter().map(|&i| sus[i]).collect();
    let r = correlation(&xi, &xs, CorrMethod::Pearson, false)?;
    report.push("r_I_S", r.value, r.n);

    // (ii) peers' susceptibility barely depends on one's own influence.
    let nn = neighbor_average(g, sus, Direction::Out)?;
    let neg: Vec<f64> = inf.iter().map(|x| -x).collect();
    let bottom_i = top_share(&scored, &neg, quantile);
    let peer = |set: &[usize]| -> Vec<f64> {
        set.iter().filter(|&&i| nn.has_neighbors[i]).map(|&i| nn.values[i]).collect()
    };
    let (peer_top, peer_bottom) = (peer(&top_i), peer(&bottom_i));
    report.push(
        "ks_S_nn_out_top_vs_bottom",
        ks_statistic(&peer_top, &peer_bottom),
        peer_top.len() + peer_bottom.len(),
    );

    // (iii) more highly influential than highly susceptible individuals.
    let mut pooled: Vec<f64> = xi.iter().chain(&xs).copied().collect();
    pooled.sort_by(|a, b| b.total_cmp(a));
    let cut_rank = ((quantile * pooled.len() as f64 - 1e-9).ceil() as usize).clamp(1, pooled.len());
    let threshold = pooled[cut_rank - 1];
    report.push("count_high_I", xi.iter().filter(|&&x| x >= threshold).count() as f64, n);
    report.push("count_high_S", xs.iter().filter(|&&x| x >= threshold).count() as f64, n);
    report.meta("pooled_threshold", threshold);

    // (iv) influentials cluster.
    let neighbor_inf: Vec<f64> = top_i
        .iter()
        .flat_map(|&i| g.out_neighbors(i as NodeIdx).iter().map(|&j| inf[j as usize]))
        .collect();
    let overall = xi.iter().sum::<f64>() / n as f64;
    let ratio = if neighbor_inf.is_empty() {
        0.0
    } else {
        neighbor_inf.iter().sum::<f64>() / neighbor_inf.len() as f64 / overall
    };
    report.push("neighbor_I_ratio", ratio, neighbor_inf.len());
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::seq::SliceRandom;

    fn shuffled(values: &[f64], rng_seed: u64) -> Vec<f64> {
        let mut v = values.to_vec();
        v.shuffle(&mut substream(rng_seed, 0));
        v
    }

    #[test]
    fn linear_pair() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        let c = correlation(&x, &y, CorrMethod::Pearson, false).unwrap();
        assert!((c.value - 1.0).abs() < 1e-12);
        assert_eq!(c.n, 4);
    }

    #[test]
    fn nonzero_filter() {
        let c = correlation(&[1.0, 2.0, 3.0, 0.0], &[2.0, 4.0, 6.0, 5.0], CorrMethod::Pearson, true).unwrap();
        assert_eq!(c.n, 3);
        assert!((c.value - 1.0).abs() < 1e-12);
        let unfiltered = correlation(&[1.0, 2.0, 3.0, 0.0], &[2.0, 4.0, 6.0, 5.0], CorrMethod::Pearson, false).unwrap();
        assert!(unfiltered.value < 0.9);
    }

    #[test]
    fn monotone_nonlinear_pair() {
        let x: Vec<f64> = (1..=10).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|v| v.powi(4)).collect();
        assert!((correlation(&x, &y, CorrMethod::Spearman, false).unwrap().value - 1.0).abs() < 1e-12);
        assert!(correlation(&x, &y, CorrMethod::Pearson, false).unwrap().value < 0.99);
    }

    #[test]
    fn too_few_and_degenerate() {
        assert!(matches!(
            correlation(&[1.0, 0.0, 2.0], &[1.0, 1.0, 2.0], CorrMethod::Pearson, true),
            Err(Error::TooFewSamples { .. })
        ));
        let c = correlation(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0], CorrMethod::Pearson, false).unwrap();
        assert!(c.degenerate);
        assert_eq!(c.value, 0.0);
    }

    #[test]
    fn spearman_ties_use_average_ranks() {
        assert_eq!(average_ranks(&[10.0, 20.0, 10.0, 30.0]), [1.5, 3.0, 1.5, 4.0]);
    }

    #[test]
    fn neighbor_means() {
        let g = Digraph::from_edges(4, &[(0, 1), (0, 2), (3, 0)]).unwrap();
        let prop = [0.9, 0.2, 0.4, 0.7];
        let out = neighbor_average(&g, &prop, Direction::Out).unwrap();
        assert!((out.values[0] - 0.3).abs() < 1e-15);
        assert!(!out.has_neighbors[1]);
        assert_eq!(out.values[1], 0.0);
        let inn = neighbor_average(&g, &prop, Direction::In).unwrap();
        assert!(!inn.has_neighbors[3]);
        assert_eq!(inn.values[0], 0.7);
        let uniform = neighbor_average(&g, &[0.5; 4], Direction::Out).unwrap();
        assert!(uniform.values.iter().zip(&uniform.has_neighbors).all(|(v, h)| !h || *v == 0.5));
    }

    #[test]
    fn statistic_names_round_trip() {
        for s in Statistic::node_level().into_iter().chain(Statistic::assortativity()) {
            assert_eq!(s.to_string().parse::<Statistic>().unwrap(), s);
        }
        assert!("kendall(I,S)".parse::<Statistic>().is_err());
        assert!("spearman(I,Q)".parse::<Statistic>().is_err());
    }

    #[test]
    fn ks_of_identical_and_disjoint_samples() {
        assert_eq!(ks_statistic(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]), 0.0);
        assert_eq!(ks_statistic(&[1.0, 2.0], &[3.0, 4.0]), 1.0);
        assert!((ks_statistic(&[1.0, 2.0, 3.0, 4.0], &[3.0, 4.0, 5.0, 6.0]) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn null_test_tie_convention() {
        let stat = Statistic::new(NodeProperty::Influence, NodeProperty::Susceptibility, CorrMethod::Pearson);
        let t = NullTest::from_values(&stat, 0.5, vec![Some(0.5); 20], 0).unwrap();
        assert_eq!((t.p_greater, t.p_less), (1.0, 1.0));
        let t = NullTest::from_values(&stat, 0.5, (0..20).map(|k| Some(k as f64 / 100.0)).collect(), 0).unwrap();
        assert_eq!(t.p_greater, 0.0);
        assert_eq!(t.p_less, 1.0);
        assert!(t.significant(0.05));
        let t = NullTest::from_values(&stat, 0.5, vec![None, Some(0.1), Some(0.9)], 0).unwrap();
        assert_eq!((t.n_dropped, t.realizations.len()), (1, 2));
        assert!(NullTest::from_values(&stat, 0.5, vec![None, None], 0).is_err());
    }

    #[test]
    fn rewire_preserves_degrees() {
        let mut rng = substream(3, 0);
        let g = Digraph::erdos_renyi(40, 4.0, &mut rng).unwrap();
        let h = rewire(&g, 10 * g.n_edges(), &mut rng).unwrap();
        assert_eq!(h.in_degrees(), g.in_degrees());
        assert_eq!(h.out_degrees(), g.out_degrees());
        assert_eq!(h.n_edges(), g.n_edges());
        assert_ne!(h, g);
    }

    #[test]
    fn rewire_rejects_tiny_graphs() {
        let g = Digraph::from_edges(2, &[(0, 1)]).unwrap();
        assert!(matches!(rewire(&g, 10, &mut substream(0, 0)), Err(Error::NoValidSwaps)));
        // Two edges sharing a target admit no valid swap.
        let g = Digraph::from_edges(3, &[(0, 2), (1, 2)]).unwrap();
        assert!(matches!(rewire(&g, 10, &mut substream(0, 0)), Err(Error::NoValidSwaps)));
    }

    fn scores_from(inf: Vec<f64>, sus: Vec<f64>) -> ScoreVector {
        let n = inf.len();
        ScoreVector {
            influence: inf,
            susceptibility: sus,
            influence_excluded: vec![false; n],
            susceptibility_excluded: vec![false; n],
            iterations: 0,
            final_residual: 0.0,
            converged: true,
            oscillating: false,
            warnings: vec![],
        }
    }

    #[test]
    fn stylized_symmetric_and_uniform_cases() {
        let mut rng = substream(5, 0);
        let g = Digraph::erdos_renyi(50, 5.0, &mut rng).unwrap();
        let vals: Vec<f64> = (0..50).map(|_| rng.gen::<f64>() + 0.01).collect();
        let s = scores_from(vals.clone(), shuffled(&vals, 1));
        let r = stylized_facts(&s, &g, 0.2).unwrap();
        assert_eq!(r.get("count_high_I").unwrap().value, r.get("count_high_S").unwrap().value);

        let uniform = scores_from(vec![0.3; 50], vec![0.6; 50]);
        let r = stylized_facts(&uniform, &g, 0.2).unwrap();
        assert!((r.get("neighbor_I_ratio").unwrap().value - 1.0).abs() < 1e-12);

        let few = scores_from(vec![0.3; 9], vec![0.6; 9]);
        assert!(stylized_facts(&few, &Digraph::from_edges(9, &[]).unwrap(), 0.2).is_err());
    }

    #[test]
    fn anti_correlated_scores_rarely_share_the_top() {
        // Gaussian pair with correlation -0.5, mapped to positive scores.
        let mut rng = substream(9, 0);
        let n = 5000;
        let g = Digraph::erdos_renyi(n, 3.0, &mut rng).unwrap();
        let (mut inf, mut sus) = (Vec::with_capacity(n), Vec::with_capacity(n));
        let rho: f64 = -0.5;
        for _ in 0..n {
            let (u1, u2): (f64, f64) = (rng.gen::<f64>().max(1e-300), rng.gen());
            let r = (-2.0 * u1.ln()).sqrt();
            let (z1, z2) = (r * (std::f64::consts::TAU * u2).cos(), r * (std::f64::consts::TAU * u2).sin());
            inf.push((z1).exp());
            sus.push((rho * z1 + (1.0 - rho * rho).sqrt() * z2).exp());
        }
        let r = stylized_facts(&scores_from(inf, sus), &g, 0.2).unwrap();
        assert!(r.get("joint_top_fraction").unwrap().value <= 0.04);
        assert!(r.get("r_I_S").unwrap().value < -0.2);
    }

    #[test]
    fn report_csv_layout() {
        let mut r = EvalReport::new("demo");
        r.push("a", 1.5, 10).push_with_p("b", -0.25, 0.05, 7);
        let mut buf = Vec::new();
        r.write_csv(&mut buf, true).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "experiment,name,value,p_value,n\ndemo,a,1.5,,10\ndemo,b,-0.25,0.05,7\n"
        );
    }
}
