//! Single-seed spreading metrics and precision at top-k against realized
//! cascade sizes.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::DiffusionGraph;
use crate::ingest::CascadeStore;
use crate::solver::ScoreVector;
use crate::NodeIdx;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedMetric {
    /// `I_i`
    Influence,
    /// `sum_j A_ij S_j`
    TotalSusceptibility,
    /// `sum_j A_ij I_j`
    TotalInfluence,
    /// `sum_j A_ij I_i S_j`
    TotalProbability,
    /// `k_out_i * I_i`
    InfluenceWeightedDegree,
    /// `k_out_i`
    OutDegree,
}

impl SeedMetric {
    pub const ALL: [SeedMetric; 6] = [
        SeedMetric::Influence,
        SeedMetric::TotalSusceptibility,
        SeedMetric::TotalInfluence,
        SeedMetric::TotalProbability,
        SeedMetric::InfluenceWeightedDegree,
        SeedMetric::OutDegree,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SeedMetric::Influence => "influence",
            SeedMetric::TotalSusceptibility => "total_susceptibility",
            SeedMetric::TotalInfluence => "total_influence",
            SeedMetric::TotalProbability => "total_probability",
            SeedMetric::InfluenceWeightedDegree => "influence_weighted_degree",
            SeedMetric::OutDegree => "outdegree",
        }
    }
}

impl fmt::Display for SeedMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SeedMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SeedMetric::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Unknown { kind: "seed metric", name: s.to_owned() })
    }
}

/// Per-node scores and the descending order they induce.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRanking {
    pub metric: String,
    pub scores: Vec<f64>,
    /// Nodes by descending score, ties by ascending index.
    pub order: Vec<NodeIdx>,
}

impl SeedRanking {
    pub fn from_scores(metric: impl Into<String>, scores: Vec<f64>) -> Self {
        let order = descending(&scores, (0..scores.len() as NodeIdx).collect());
        SeedRanking { metric: metric.into(), scores, order }
    }
}

fn descending(scores: &[f64], mut nodes: Vec<NodeIdx>) -> Vec<NodeIdx> {
    nodes.sort_by(|&a, &b| scores[b as usize].total_cmp(&scores[a as usize]).then(a.cmp(&b)));
    nodes
}

pub fn seed_score(metric: SeedMetric, g_train: &DiffusionGraph, scores: &ScoreVector) -> Result<SeedRanking> {
    let n = g_train.n_nodes();
    if scores.n_nodes() != n {
        return Err(Error::invalid(format!("scores cover {} nodes, graph has {n}", scores.n_nodes())));
    }
    let topo = g_train.topology();
    let (inf, sus) = (&scores.influence, &scores.susceptibility);
    let sum_over = |i: usize, v: &[f64]| topo.out_neighbors(i as NodeIdx).iter().map(|&j| v[j as usize]).sum::<f64>();
    let values: Vec<f64> = (0..n)
        .map(|i| match metric {
            SeedMetric::Influence => inf[i],
            SeedMetric::TotalSusceptibility => sum_over(i, sus),
            SeedMetric::TotalInfluence => sum_over(i, inf),
            SeedMetric::TotalProbability => inf[i] * sum_over(i, sus),
            SeedMetric::InfluenceWeightedDegree => topo.out_degree(i as NodeIdx) as f64 * inf[i],
            SeedMetric::OutDegree => topo.out_degree(i as NodeIdx) as f64,
        })
        .collect();
    Ok(SeedRanking::from_scores(metric.name(), values))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregate {
    #[default]
    Mean,
    Median,
}

impl FromStr for Aggregate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(Aggregate::Mean),
            "median" => Ok(Aggregate::Median),
            _ => Err(Error::Unknown { kind: "size aggregate", name: s.to_owned() }),
        }
    }
}

/// Spreading size per seed: distinct participants of each cascade the node
/// started, aggregated over its cascades. Nodes that started none are absent.
pub fn realized_sizes(test: &CascadeStore, aggregate: Aggregate) -> BTreeMap<NodeIdx, f64> {
    let mut per_seed: BTreeMap<NodeIdx, Vec<f64>> = BTreeMap::new();
    for c in test.cascades() {
        if let Some(seed) = c.seed() {
            per_seed.entry(seed).or_default().push(c.participants() as f64);
        }
    }
    per_seed
        .into_iter()
        .map(|(seed, mut sizes)| {
            let value = match aggregate {
                Aggregate::Mean => sizes.iter().sum::<f64>() / sizes.len() as f64,
                Aggregate::Median => {
                    sizes.sort_by(f64::total_cmp);
                    let m = sizes.len() / 2;
                    if sizes.len() % 2 == 1 { sizes[m] } else { 0.5 * (sizes[m - 1] + sizes[m]) }
                }
            };
            (seed, value)
        })
        .collect()
}

/// Overlap between the top `ceil(fraction * n)` nodes by metric and by
/// realized size, over the `n` nodes present in both.
pub fn precision_at(ranking: &SeedRanking, sizes: &BTreeMap<NodeIdx, f64>, fraction: f64) -> Result<f64> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::invalid(format!("fraction must lie in (0, 1], got {fraction}")));
    }
    let domain: Vec<NodeIdx> =
        sizes.keys().copied().filter(|&i| (i as usize) < ranking.scores.len()).collect();
    if domain.is_empty() {
        return Err(Error::Empty("no node is both ranked and observed as a seed".into()));
    }
    let k = ((fraction * domain.len() as f64 - 1e-9).ceil() as usize).max(1);
    let by_metric = descending(&ranking.scores, domain.clone());
    let mut size_vec = vec![0.0; ranking.scores.len()];
    for (&i, &s) in sizes {
        if (i as usize) < size_vec.len() {
            size_vec[i as usize] = s;
        }
    }
    let by_size: HashSet<NodeIdx> = descending(&size_vec, domain).into_iter().take(k).collect();
    Ok(by_metric.iter().take(k).filter(|i| by_size.contains(i)).count() as f64 / k as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::parse_events;
    use crate::ingest::Delimiter;

    fn scores(inf: &[f64], sus: &[f64]) -> ScoreVector {
        ScoreVector {
            influence: inf.to_vec(),
            susceptibility: sus.to_vec(),
            influence_excluded: vec![false; inf.len()],
            susceptibility_excluded: vec![false; inf.len()],
            iterations: 0,
            final_residual: 0.0,
            converged: true,
            oscillating: false,
            warnings: vec![],
        }
    }

    #[test]
    fn metric_arithmetic() {
        let g = DiffusionGraph::from_weighted_edges(4, &[(0, 1, 0.5), (0, 2, 0.5), (1, 2, 0.5)]).unwrap();
        let s = scores(&[0.5, 0.1, 0.0, 0.0], &[0.0, 0.2, 0.4, 0.0]);
        let at0 = |m| seed_score(m, &g, &s).unwrap().scores[0];
        assert!((at0(SeedMetric::TotalSusceptibility) - 0.6).abs() < 1e-15);
        assert!((at0(SeedMetric::TotalProbability) - 0.3).abs() < 1e-15);
        assert_eq!(at0(SeedMetric::OutDegree), 2.0);
        assert!((at0(SeedMetric::TotalInfluence) - 0.1).abs() < 1e-15);
        for m in SeedMetric::ALL {
            assert_eq!(seed_score(m, &g, &s).unwrap().scores[3], 0.0, "{m}");
        }
    }

    #[test]
    fn weighted_degree() {
        let g = DiffusionGraph::from_weighted_edges(4, &[(0, 1, 0.5), (0, 2, 0.5), (0, 3, 0.5)]).unwrap();
        let r = seed_score(SeedMetric::InfluenceWeightedDegree, &g, &scores(&[0.5, 0.0, 0.0, 0.0], &[0.0, 1.0, 1.0, 1.0]))
            .unwrap();
        assert_eq!(r.scores[0], 1.5);
    }

    #[test]
    fn ties_break_by_index() {
        let r = SeedRanking::from_scores("x", vec![1.0, 2.0, 1.0, 2.0]);
        assert_eq!(r.order, [1, 3, 0, 2]);
    }

    #[test]
    fn metric_names_parse() {
        for m in SeedMetric::ALL {
            assert_eq!(m.name().parse::<SeedMetric>().unwrap(), m);
        }
        assert!("pagerank".parse::<SeedMetric>().is_err());
    }

    #[test]
    fn sizes_count_distinct_participants() {
        let csv = "cascade_id,user_id,parent_user_id,timestamp\n\
                   c1,a,,0\n\
                   c2,a,,1\nc2,b,a,2\nc2,c,b,3\nc2,c,a,4\n\
                   c3,b,,5\n";
        let (store, _) = parse_events(csv.as_bytes(), Delimiter::Comma).unwrap();
        let sizes = realized_sizes(&store, Aggregate::Mean);
        let a = store.nodes().get("a").unwrap();
        let b = store.nodes().get("b").unwrap();
        assert_eq!(sizes[&a], 2.0);
        assert_eq!(sizes[&b], 1.0);
        assert!(!sizes.contains_key(&store.nodes().get("c").unwrap()));
        assert_eq!(realized_sizes(&store, Aggregate::Median)[&a], 2.0);
    }

    #[test]
    fn precision_counts() {
        let n = 20;
        let sizes: BTreeMap<NodeIdx, f64> = (0..n).map(|i| (i, i as f64)).collect();
        let same = SeedRanking::from_scores("m", (0..n).map(f64::from).collect());
        assert_eq!(precision_at(&same, &sizes, 0.1).unwrap(), 1.0);
        let reversed = SeedRanking::from_scores("m", (0..n).map(|i| -f64::from(i)).collect());
        assert_eq!(precision_at(&reversed, &sizes, 0.1).unwrap(), 0.0);
        // Top-2 by metric is {19, 0}; by size {19, 18}.
        let mut half: Vec<f64> = (0..n).map(f64::from).collect();
        half[0] = 100.0;
        half[18] = -1.0;
        assert_eq!(precision_at(&SeedRanking::from_scores("m", half), &sizes, 0.1).unwrap(), 0.5);
        assert!(precision_at(&same, &BTreeMap::new(), 0.1).is_err());
        assert!(precision_at(&same, &sizes, 0.0).is_err());
    }
}
