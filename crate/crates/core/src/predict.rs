//! Out-of-sample contagion-rate predictors and their evaluation.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Digraph, DiffusionGraph, Direction};
use crate::solver::ScoreVector;
use crate::stats::{correlation, CorrMethod, EvalReport};
use crate::NodeIdx;

/// Predicted score for each edge of a training graph, in edge-id order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeScoreMap {
    pub provenance: String,
    pub pairs: Vec<(NodeIdx, NodeIdx)>,
    pub scores: Vec<f64>,
}

impl EdgeScoreMap {
    fn over_edges(provenance: String, g: &Digraph, mut score: impl FnMut(NodeIdx, NodeIdx) -> f64) -> Self {
        let pairs: Vec<_> = g.edges().collect();
        let scores = pairs.iter().map(|&(i, j)| score(i, j)).collect();
        EdgeScoreMap { provenance, pairs, scores }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn get(&self, i: NodeIdx, j: NodeIdx) -> Option<f64> {
        self.pairs.binary_search(&(i, j)).ok().map(|k| self.scores[k])
    }

    pub fn write_csv<W: std::io::Write>(&self, ids: &[String], sink: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(["src", "dst", "predictor", "score"])?;
        for (&(i, j), s) in self.pairs.iter().zip(&self.scores) {
            w.write_record([&ids[i as usize], &ids[j as usize], &self.provenance, &s.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `omega_hat_ij = I_i * S_j` on every training edge.
pub fn predict_is(g_train: &DiffusionGraph, scores: &ScoreVector) -> Result<EdgeScoreMap> {
    check_aligned(g_train, scores)?;
    Ok(EdgeScoreMap::over_edges("IS".into(), g_train.topology(), |i, j| {
        scores.influence[i as usize] * scores.susceptibility[j as usize]
    }))
}

fn check_aligned(g: &DiffusionGraph, scores: &ScoreVector) -> Result<()> {
    if scores.n_nodes() != g.n_nodes() {
        return Err(Error::invalid(format!(
            "scores cover {} nodes, graph has {}",
            scores.n_nodes(),
            g.n_nodes()
        )));
    }
    Ok(())
}

/// Baselines built from one node property, normalized by its maximum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SingleProperty {
    /// `I_i / max I`
    Influence,
    /// `S_j / max S`
    Susceptibility,
    /// `k_out_i / max k_out`
    OutDegree,
    /// `k_in_j / max k_in`
    InDegree,
}

impl SingleProperty {
    pub const ALL: [SingleProperty; 4] =
        [SingleProperty::Influence, SingleProperty::Susceptibility, SingleProperty::OutDegree, SingleProperty::InDegree];

    pub fn name(self) -> &'static str {
        match self {
            SingleProperty::Influence => "influence",
            SingleProperty::Susceptibility => "susceptibility",
            SingleProperty::OutDegree => "outdegree",
            SingleProperty::InDegree => "indegree",
        }
    }
}

impl FromStr for SingleProperty {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SingleProperty::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Unknown { kind: "single-property predictor", name: s.to_owned() })
    }
}

pub fn predict_single(kind: SingleProperty, g_train: &DiffusionGraph, scores: &ScoreVector) -> Result<EdgeScoreMap> {
    check_aligned(g_train, scores)?;
    let topo = g_train.topology();
    let (values, by_source): (Vec<f64>, bool) = match kind {
        SingleProperty::Influence => (scores.influence.clone(), true),
        SingleProperty::Susceptibility => (scores.susceptibility.clone(), false),
        SingleProperty::OutDegree => (topo.out_degrees().into_iter().map(|k| k as f64).collect(), true),
        SingleProperty::InDegree => (topo.in_degrees().into_iter().map(|k| k as f64).collect(), false),
    };
    let max = values.iter().copied().fold(0.0f64, f64::max);
    if !(max > 0.0) {
        return Err(Error::invalid(format!("{} is zero on every node", kind.name())));
    }
    Ok(EdgeScoreMap::over_edges(kind.name().into(), topo, |i, j| {
        values[if by_source { i } else { j } as usize] / max
    }))
}

/// Neighbourhood-overlap link-prediction indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SimilarityKind {
    CommonNeighbors,
    Jaccard,
    Sorensen,
    AdamicAdar,
    ResourceAllocation,
}

impl SimilarityKind {
    pub const ALL: [SimilarityKind; 5] = [
        SimilarityKind::CommonNeighbors,
        SimilarityKind::Jaccard,
        SimilarityKind::Sorensen,
        SimilarityKind::AdamicAdar,
        SimilarityKind::ResourceAllocation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SimilarityKind::CommonNeighbors => "CN",
            SimilarityKind::Jaccard => "Jaccard",
            SimilarityKind::Sorensen => "Sorensen",
            SimilarityKind::AdamicAdar => "AA",
            SimilarityKind::ResourceAllocation => "RA",
        }
    }
}

impl fmt::Display for SimilarityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SimilarityKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SimilarityKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Unknown { kind: "similarity index", name: s.to_owned() })
    }
}

/// Similarity of the endpoint neighbourhoods of `(i, j)`. `deg` is the total
/// degree used by the AA and RA weights.
pub fn pair_similarity(kind: SimilarityKind, gi: &[NodeIdx], gj: &[NodeIdx], deg: impl Fn(NodeIdx) -> usize) -> f64 {
    // Neighbour lists are sorted, so a merge walk finds the intersection.
    let (mut a, mut b) = (0, 0);
    let mut common = 0usize;
    let mut weighted = 0.0;
    while a < gi.len() && b < gj.len() {
        match gi[a].cmp(&gj[b]) {
            std::cmp::Ordering::Less => a += 1,
            std::cmp::Ordering::Greater => b += 1,
            std::cmp::Ordering::Equal => {
                let d = deg(gi[a]) as f64;
                common += 1;
                weighted += match kind {
                    SimilarityKind::AdamicAdar if d > 1.0 => 1.0 / d.ln(),
                    SimilarityKind::ResourceAllocation if d > 0.0 => 1.0 / d,
                    _ => 0.0,
                };
                a += 1;
                b += 1;
            }
        }
    }
    let c = common as f64;
    match kind {
        SimilarityKind::CommonNeighbors => c,
        SimilarityKind::Jaccard => {
            let union = gi.len() + gj.len() - common;
            if union == 0 { 0.0 } else { c / union as f64 }
        }
        SimilarityKind::Sorensen => {
            let total = gi.len() + gj.len();
            if total == 0 { 0.0 } else { 2.0 * c / total as f64 }
        }
        SimilarityKind::AdamicAdar | SimilarityKind::ResourceAllocation => weighted,
    }
}

pub fn similarity(kind: SimilarityKind, g_train: &DiffusionGraph, direction: Direction) -> EdgeScoreMap {
    let topo = g_train.topology();
    let deg = |z: NodeIdx| topo.in_degree(z) + topo.out_degree(z);
    let name = format!("{}_{}", kind.name(), match direction {
        Direction::In => "in",
        Direction::Out => "out",
    });
    EdgeScoreMap::over_edges(name, topo, |i, j| {
        pair_similarity(kind, topo.neighbors(i, direction), topo.neighbors(j, direction), deg)
    })
}

/// Correlates predictions with the contagion rates realized in `g_test`.
/// Pairs missing from the test graph count as realized rate 0. Both graphs
/// must index the same node table.
pub fn evaluate_prediction(pred: &EdgeScoreMap, g_test: &DiffusionGraph, method: CorrMethod) -> Result<EvalReport> {
    let n = pred.len();
    if n < 3 {
        return Err(Error::TooFewSamples { needed: 3, got: n });
    }
    if let Some(&(i, j)) = pred.pairs.iter().find(|&&(i, j)| i.max(j) as usize >= g_test.n_nodes()) {
        return Err(Error::invalid(format!("pair ({i}, {j}) outside the test graph")));
    }
    let realized: Vec<f64> = pred.pairs.iter().map(|&(i, j)| g_test.weight(i, j)).collect();
    let c = correlation(&pred.scores, &realized, method, false)?;
    let observed = pred.pairs.iter().filter(|&&(i, j)| g_test.topology().edge_id(i, j).is_some()).count();
    let mut report = EvalReport::new("prediction");
    report
        .push(format!("{method}({})", pred.provenance), c.value, c.n)
        .meta("predictor", &pred.provenance)
        .meta("method", method)
        .meta("n_edges", n)
        .meta("n_edges_in_test", observed)
        .meta("degenerate", c.degenerate);
    Ok(report)
}

/// IS first, then the four single-property and five similarity baselines.
pub fn all_predictors(g_train: &DiffusionGraph, scores: &ScoreVector, direction: Direction) -> Result<Vec<EdgeScoreMap>> {
    let mut out = vec![predict_is(g_train, scores)?];
    for kind in SingleProperty::ALL {
        out.push(predict_single(kind, g_train, scores)?);
    }
    out.extend(SimilarityKind::ALL.into_iter().map(|kind| similarity(kind, g_train, direction)));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{solve, SolverConfig};

    fn graph(n: usize, edges: &[(NodeIdx, NodeIdx, f64)]) -> DiffusionGraph {
        DiffusionGraph::from_weighted_edges(n, edges).unwrap()
    }

    fn fixed_scores(inf: &[f64], sus: &[f64]) -> ScoreVector {
        ScoreVector {
            influence: inf.to_vec(),
            susceptibility: sus.to_vec(),
            influence_excluded: inf.iter().map(|&x| x == 0.0).collect(),
            susceptibility_excluded: sus.iter().map(|&x| x == 0.0).collect(),
            iterations: 0,
            final_residual: 0.0,
            converged: true,
            oscillating: false,
            warnings: vec![],
        }
    }

    #[test]
    fn is_product() {
        let g = graph(3, &[(0, 1, 0.4), (1, 2, 0.1)]);
        let s = fixed_scores(&[0.8, 0.0, 0.0], &[0.0, 0.5, 0.3]);
        let p = predict_is(&g, &s).unwrap();
        assert!((p.get(0, 1).unwrap() - 0.4).abs() < 1e-15);
        assert_eq!(p.get(1, 2), Some(0.0));
    }

    #[test]
    fn is_prediction_ignores_gauge() {
        let g = graph(4, &[(0, 1, 0.3), (0, 2, 0.6), (1, 2, 0.2), (2, 3, 0.5), (3, 0, 0.4)]);
        let cfg = SolverConfig { tolerance: 1e-13, ..Default::default() };
        let a = predict_is(&g, &solve(&g, &cfg).unwrap()).unwrap();
        let b = predict_is(&g, &solve(&g, &SolverConfig { initial: 10.0, ..cfg }).unwrap()).unwrap();
        for (x, y) in a.scores.iter().zip(&b.scores) {
            assert!((x - y).abs() <= 1e-9 * x.abs().max(1e-12));
        }
    }

    #[test]
    fn single_property_normalization() {
        let g = graph(3, &[(0, 1, 0.5), (0, 2, 0.5), (1, 2, 0.5)]);
        let s = fixed_scores(&[0.9, 0.3, 0.0], &[0.0, 0.2, 0.4]);
        let p = predict_single(SingleProperty::Influence, &g, &s).unwrap();
        assert_eq!(p.get(0, 1), Some(1.0));
        assert_eq!(p.get(0, 2), Some(1.0));
        assert!((p.get(1, 2).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        let p = predict_single(SingleProperty::InDegree, &g, &s).unwrap();
        assert_eq!(p.get(0, 1), Some(0.5));
        assert_eq!(p.get(1, 2), Some(1.0));
        assert!(predict_single(SingleProperty::Influence, &g, &fixed_scores(&[0.0; 3], &[0.1; 3])).is_err());
    }

    #[test]
    fn degree_baseline_on_regular_graph_is_flat() {
        let g = graph(3, &[(0, 1, 0.2), (1, 2, 0.3), (2, 0, 0.4)]);
        let p = predict_single(SingleProperty::OutDegree, &g, &fixed_scores(&[0.1; 3], &[0.1; 3])).unwrap();
        assert!(p.scores.iter().all(|&x| x == 1.0));
    }

    #[test]
    fn similarity_set_arithmetic() {
        let (a, b, c, d) = (0, 1, 2, 3);
        let gi = [a, b, c];
        let gj = [b, c, d];
        let deg = |_| 3;
        assert_eq!(pair_similarity(SimilarityKind::CommonNeighbors, &gi, &gj, deg), 2.0);
        assert_eq!(pair_similarity(SimilarityKind::Jaccard, &gi, &gj, deg), 0.5);
        assert!((pair_similarity(SimilarityKind::Sorensen, &gi, &gj, deg) - 4.0 / 6.0).abs() < 1e-15);
        for kind in SimilarityKind::ALL {
            assert_eq!(pair_similarity(kind, &[0, 1], &[2, 3], deg), 0.0);
            assert_eq!(pair_similarity(kind, &[], &[], deg), 0.0);
        }
    }

    #[test]
    fn weighted_indices() {
        let degs = [2usize, 4];
        let deg = |z: NodeIdx| degs[z as usize];
        assert_eq!(pair_similarity(SimilarityKind::ResourceAllocation, &[0, 1], &[0, 1], deg), 0.75);
        let aa = pair_similarity(SimilarityKind::AdamicAdar, &[0, 1], &[0, 1], deg);
        assert!((aa - (1.0 / 2f64.ln() + 1.0 / 4f64.ln())).abs() < 1e-12);
        assert_eq!(pair_similarity(SimilarityKind::AdamicAdar, &[0], &[0], |_| 1), 0.0);
    }

    #[test]
    fn similarity_on_graph_uses_in_neighbourhoods() {
        // 0,1,2 -> 4 and 1,2,3 -> 5, plus the scored edge 4 -> 5.
        let g = graph(6, &[(0, 4, 0.1), (1, 4, 0.1), (2, 4, 0.1), (1, 5, 0.1), (2, 5, 0.1), (3, 5, 0.1), (4, 5, 0.1)]);
        let p = similarity(SimilarityKind::CommonNeighbors, &g, Direction::In);
        assert_eq!(p.get(4, 5), Some(2.0));
        assert_eq!(p.provenance, "CN_in");
    }

    #[test]
    fn evaluation_conventions() {
        let train = graph(4, &[(0, 1, 0.2), (1, 2, 0.4), (2, 3, 0.6), (3, 0, 0.8)]);
        let test = train.clone();
        let s = fixed_scores(&[1.0; 4], &[1.0; 4]);
        let mut perfect = predict_is(&train, &s).unwrap();
        perfect.scores = train.omega().to_vec();
        let r = evaluate_prediction(&perfect, &test, CorrMethod::Pearson).unwrap();
        assert!((r.entries[0].value - 1.0).abs() < 1e-12);

        let flat = predict_is(&train, &s).unwrap();
        let r = evaluate_prediction(&flat, &test, CorrMethod::Pearson).unwrap();
        assert_eq!(r.entries[0].value, 0.0);
        assert_eq!(r.metadata["degenerate"], "true");

        // Edge (3, 0) is gone in the test period and realizes 0.
        let shrunk = graph(4, &[(0, 1, 0.2), (1, 2, 0.4), (2, 3, 0.6)]);
        let r = evaluate_prediction(&perfect, &shrunk, CorrMethod::Spearman).unwrap();
        assert_eq!(r.metadata["n_edges_in_test"], "3");
        assert_eq!(r.entries[0].n, 4);

        let tiny = graph(3, &[(0, 1, 0.2), (1, 2, 0.4)]);
        assert!(evaluate_prediction(&predict_is(&tiny, &fixed_scores(&[1.0; 3], &[1.0; 3])).unwrap(), &tiny, CorrMethod::Pearson)
            .is_err());
    }
}
