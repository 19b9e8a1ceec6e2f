//! Influence/susceptibility reconstruction by nonlinear fixed-point iteration.
//!
//! Each step computes, for every node with a positive outgoing rate,
//!
//! ```text
//! I_i <- f_i / sum_{j in out(i)} S_j        S_j <- g_j / sum_{i in in(j)} I_i
//! ```
//!
//! from the previous iterate, then blends with the previous value:
//! `new = (1 - damping) * old + damping * raw`. `damping = 1` is the plain map.
//!
//! Nodes with zero outgoing rate have influence 0, nodes with zero incoming
//! rate have susceptibility 0, and zero-score nodes are left out of every
//! denominator. The map has a scale freedom (`I -> cI`, `S -> S/c`); no
//! normalization is applied, so the attained scale depends on the initial
//! value and only products `I_i * S_j` and rankings are meaningful.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::DiffusionGraph;
use crate::NodeIdx;

const RESIDUAL_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Initial value for every influence and susceptibility score.
    pub initial: f64,
    pub damping: f64,
    /// Relative change at which iteration stops.
    pub tolerance: f64,
    pub max_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { initial: 1.0, damping: 0.5, tolerance: 1e-8, max_iter: 100_000 }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.initial > 0.0 && self.initial.is_finite()) {
            return Err(Error::invalid(format!("initial value must be positive, got {}", self.initial)));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::invalid(format!("damping must lie in (0, 1], got {}", self.damping)));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::invalid(format!("tolerance must be positive, got {}", self.tolerance)));
        }
        Ok(())
    }
}

/// Reconstructed scores plus solver metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreVector {
    pub influence: Vec<f64>,
    pub susceptibility: Vec<f64>,
    /// Nodes whose influence is pinned to zero.
    pub influence_excluded: Vec<bool>,
    /// Nodes whose susceptibility is pinned to zero.
    pub susceptibility_excluded: Vec<bool>,
    pub iterations: usize,
    pub final_residual: f64,
    pub converged: bool,
    /// Set when the iterate alternates between two states instead of settling.
    pub oscillating: bool,
    pub warnings: Vec<String>,
}

impl ScoreVector {
    /// Starting point: `initial` everywhere except excluded nodes.
    pub fn initial(g: &DiffusionGraph, initial: f64) -> Self {
        let (influence_excluded, susceptibility_excluded) = exclusions(g);
        let fill = |excluded: &[bool]| excluded.iter().map(|&x| if x { 0.0 } else { initial }).collect();
        let mut warnings = Vec::new();
        if influence_excluded.iter().all(|&x| x) && susceptibility_excluded.iter().all(|&x| x) {
            warnings.push("graph has no weighted edges: all nodes excluded".to_owned());
        }
        ScoreVector {
            influence: fill(&influence_excluded),
            susceptibility: fill(&susceptibility_excluded),
            influence_excluded,
            susceptibility_excluded,
            iterations: 0,
            final_residual: 0.0,
            converged: false,
            oscillating: false,
            warnings,
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.influence.len()
    }

    /// Nodes excluded on both sides.
    pub fn fully_excluded(&self) -> impl Iterator<Item = NodeIdx> + '_ {
        self.influence_excluded
            .iter()
            .zip(&self.susceptibility_excluded)
            .enumerate()
            .filter(|(_, (a, b))| **a && **b)
            .map(|(i, _)| i as NodeIdx)
    }

    /// Writes `node_id,I_hat,S_hat,excluded_flag` rows. The flag is `I`, `S`,
    /// `IS` or empty.
    pub fn write_csv<W: std::io::Write>(&self, ids: &[String], sink: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(["node_id", "I_hat", "S_hat", "excluded_flag"])?;
        for (i, id) in ids.iter().enumerate() {
            let flag = match (self.influence_excluded[i], self.susceptibility_excluded[i]) {
                (true, true) => "IS",
                (true, false) => "I",
                (false, true) => "S",
                (false, false) => "",
            };
            w.write_record([
                id.as_str(),
                &self.influence[i].to_string(),
                &self.susceptibility[i].to_string(),
                flag,
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// A node keeps influence iff its outgoing rate is positive and it has an
/// out-neighbour with positive incoming rate (and symmetrically). Positive
/// weights on an edge make both endpoints active, so one pass suffices; the
/// loop handles zero-weight edges.
fn exclusions(g: &DiffusionGraph) -> (Vec<bool>, Vec<bool>) {
    let topo = g.topology();
    let mut i_ex: Vec<bool> = g.f_hat().iter().map(|&f| !(f > 0.0)).collect();
    let mut s_ex: Vec<bool> = g.g_hat().iter().map(|&x| !(x > 0.0)).collect();
    loop {
        let mut changed = false;
        for i in 0..g.n_nodes() {
            let node = i as NodeIdx;
            if !i_ex[i] && topo.out_neighbors(node).iter().all(|&j| s_ex[j as usize]) {
                i_ex[i] = true;
                changed = true;
            }
            if !s_ex[i] && topo.in_neighbors(node).iter().all(|&k| i_ex[k as usize]) {
                s_ex[i] = true;
                changed = true;
            }
        }
        if !changed {
            return (i_ex, s_ex);
        }
    }
}

fn raw_step(g: &DiffusionGraph, current: &ScoreVector, raw_i: &mut [f64], raw_s: &mut [f64]) {
    let topo = g.topology();
    let (f, gg) = (g.f_hat(), g.g_hat());
    for i in 0..g.n_nodes() {
        let node = i as NodeIdx;
        raw_i[i] = if current.influence_excluded[i] {
            0.0
        } else {
            let denom: f64 = topo.out_neighbors(node).iter().map(|&j| current.susceptibility[j as usize]).sum();
            f[i] / denom
        };
        raw_s[i] = if current.susceptibility_excluded[i] {
            0.0
        } else {
            let denom: f64 = topo.in_neighbors(node).iter().map(|&k| current.influence[k as usize]).sum();
            gg[i] / denom
        };
    }
}

fn relative_change(old: &[f64], new: &[f64]) -> f64 {
    old.iter()
        .zip(new)
        .map(|(&o, &n)| (n - o).abs() / o.max(RESIDUAL_FLOOR))
        .fold(0.0, f64::max)
}

/// One damped step of the map. Excluded entries of `current` are zero and
/// stay zero; non-excluded entries must be positive.
pub fn iterate_once(g: &DiffusionGraph, current: &ScoreVector, damping: f64) -> ScoreVector {
    let n = g.n_nodes();
    let mut raw_i = vec![0.0; n];
    let mut raw_s = vec![0.0; n];
    raw_step(g, current, &mut raw_i, &mut raw_s);
    let blend = |old: &[f64], raw: Vec<f64>| -> Vec<f64> {
        old.iter().zip(raw).map(|(&o, r)| (1.0 - damping) * o + damping * r).collect()
    };
    let influence = blend(&current.influence, raw_i);
    let susceptibility = blend(&current.susceptibility, raw_s);
    let residual = relative_change(&current.influence, &influence)
        .max(relative_change(&current.susceptibility, &susceptibility));
    ScoreVector {
        influence,
        susceptibility,
        iterations: current.iterations + 1,
        final_residual: residual,
        converged: false,
        oscillating: false,
        ..current.clone()
    }
}

/// Iterates from the configured initial value until the maximum relative
/// change of any score is at most `tolerance`, or `max_iter` steps have run.
/// Non-convergence is reported through the flags, not as an error.
pub fn solve(g: &DiffusionGraph, cfg: &SolverConfig) -> Result<ScoreVector> {
    cfg.validate()?;
    let mut state = ScoreVector::initial(g, cfg.initial);
    if !state.warnings.is_empty() {
        for w in &state.warnings {
            log::warn!("{w}");
        }
        state.converged = true;
        return Ok(state);
    }

    let n = g.n_nodes();
    let alpha = cfg.damping;
    let mut raw_i = vec![0.0; n];
    let mut raw_s = vec![0.0; n];
    // Iterate from two steps back, for period-2 detection.
    let mut prev_i = state.influence.clone();
    let mut prev_s = state.susceptibility.clone();
    let mut residual = f64::INFINITY;
    let mut two_step = f64::INFINITY;
    let mut iterations = 0;

    while iterations < cfg.max_iter {
        raw_step(g, &state, &mut raw_i, &mut raw_s);
        residual = 0.0f64;
        two_step = 0.0f64;
        for (cur, prev, raw) in [
            (&mut state.influence, &mut prev_i, &raw_i),
            (&mut state.susceptibility, &mut prev_s, &raw_s),
        ] {
            for k in 0..n {
                let old = cur[k];
                let new = (1.0 - alpha) * old + alpha * raw[k];
                residual = residual.max((new - old).abs() / old.max(RESIDUAL_FLOOR));
                two_step = two_step.max((new - prev[k]).abs() / prev[k].max(RESIDUAL_FLOOR));
                prev[k] = old;
                cur[k] = new;
            }
        }
        iterations += 1;
        if !residual.is_finite() {
            state.warnings.push("iteration diverged to a non-finite value".to_owned());
            break;
        }
        if residual <= cfg.tolerance {
            break;
        }
    }

    state.iterations = iterations;
    state.final_residual = residual;
    state.converged = residual <= cfg.tolerance;
    state.oscillating = !state.converged && iterations >= 2 && two_step <= cfg.tolerance;
    if !state.converged {
        log::warn!(
            "solver stopped after {iterations} iterations with residual {residual:e}{}",
            if state.oscillating { " (period-2 oscillation)" } else { "" }
        );
    }
    Ok(state)
}

/// `I_i * S_j` when `i -> j` is an edge of `g`, zero otherwise.
pub fn predicted_rate(scores: &ScoreVector, g: &DiffusionGraph, i: NodeIdx, j: NodeIdx) -> f64 {
    if g.topology().edge_id(i, j).is_none() {
        return 0.0;
    }
    scores.influence[i as usize] * scores.susceptibility[j as usize]
}

/// Spectral radii of the map's Jacobian at given scores.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JacobianSpectrum {
    pub damping: f64,
    /// Spectral radius of the full Jacobian.
    pub radius: f64,
    /// Spectral radius with the scale-freedom directions projected out, one per
    /// weakly connected component. At a fixed point each of these directions is
    /// an eigenvector with eigenvalue exactly 1, so `radius >= 1` always and
    /// local convergence is governed by this value.
    pub radius_gauge_fixed: f64,
    pub dimension: usize,
    pub method: SpectralMethod,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpectralMethod {
    Dense,
    PowerIteration,
}

/// Options for [`jacobian_spectral_radius`].
#[derive(Debug, Clone, Copy)]
pub struct SpectralOptions {
    pub damping: f64,
    /// Above this many active variables, power iteration replaces the dense
    /// eigen-solve.
    pub dense_limit: usize,
    pub power_iterations: usize,
}

impl Default for SpectralOptions {
    fn default() -> Self {
        SpectralOptions { damping: 1.0, dense_limit: 1200, power_iterations: 4000 }
    }
}

/// Sparse Jacobian of the damped map restricted to active variables.
struct Jacobian {
    /// Active influence variables come first, then active susceptibilities.
    dim: usize,
    diag: f64,
    /// (row, col, value) off-diagonal entries.
    entries: Vec<(usize, usize, f64)>,
    /// Unit-norm scale-freedom directions.
    gauge: Vec<Vec<f64>>,
}

impl Jacobian {
    fn build(g: &DiffusionGraph, scores: &ScoreVector, damping: f64) -> Result<Self> {
        let n = g.n_nodes();
        let topo = g.topology();
        let mut var_i = vec![usize::MAX; n];
        let mut var_s = vec![usize::MAX; n];
        let mut dim = 0;
        for i in 0..n {
            if !scores.influence_excluded[i] {
                var_i[i] = dim;
                dim += 1;
            }
        }
        for j in 0..n {
            if !scores.susceptibility_excluded[j] {
                var_s[j] = dim;
                dim += 1;
            }
        }
        if dim == 0 {
            return Err(Error::Empty("no active scores: effective graph is edgeless".into()));
        }
        let (inf, sus) = (&scores.influence, &scores.susceptibility);
        let mut entries = Vec::new();
        for i in 0..n {
            if var_i[i] == usize::MAX {
                continue;
            }
            let node = i as NodeIdx;
            let denom: f64 = topo.out_neighbors(node).iter().map(|&j| sus[j as usize]).sum();
            let coef = -damping * g.f_hat()[i] / (denom * denom);
            for &j in topo.out_neighbors(node) {
                if var_s[j as usize] != usize::MAX {
                    entries.push((var_i[i], var_s[j as usize], coef));
                }
            }
        }
        for j in 0..n {
            if var_s[j] == usize::MAX {
                continue;
            }
            let node = j as NodeIdx;
            let denom: f64 = topo.in_neighbors(node).iter().map(|&k| inf[k as usize]).sum();
            let coef = -damping * g.g_hat()[j] / (denom * denom);
            for &k in topo.in_neighbors(node) {
                if var_i[k as usize] != usize::MAX {
                    entries.push((var_s[j], var_i[k as usize], coef));
                }
            }
        }

        // Weakly connected components over active variables.
        let mut parent: Vec<usize> = (0..dim).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for &(r, c, _) in &entries {
            let (a, b) = (find(&mut parent, r), find(&mut parent, c));
            if a != b {
                parent[a] = b;
            }
        }
        let mut comp_of_root = std::collections::HashMap::new();
        let mut gauge: Vec<Vec<f64>> = Vec::new();
        for i in 0..n {
            for (var, value) in [(var_i[i], inf[i]), (var_s[i], -sus[i])] {
                if var == usize::MAX {
                    continue;
                }
                let root = find(&mut parent, var);
                let c = *comp_of_root.entry(root).or_insert_with(|| {
                    gauge.push(vec![0.0; dim]);
                    gauge.len() - 1
                });
                gauge[c][var] = value;
            }
        }
        for v in &mut gauge {
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                v.iter_mut().for_each(|x| *x /= norm);
            }
        }
        Ok(Jacobian { dim, diag: 1.0 - damping, entries, gauge })
    }

    fn dense(&self, project: bool) -> DMatrix<f64> {
        let mut m = DMatrix::<f64>::identity(self.dim, self.dim) * self.diag;
        for &(r, c, v) in &self.entries {
            m[(r, c)] += v;
        }
        if project {
            // P J with P = I - sum v v^T.
            for v in &self.gauge {
                let vt_m = DMatrix::from_row_slice(1, self.dim, v).clone() * &m;
                let col = DMatrix::from_column_slice(self.dim, 1, v);
                m -= col * vt_m;
            }
        }
        m
    }

    fn apply(&self, x: &[f64], out: &mut [f64], project: bool) {
        for (o, &xi) in out.iter_mut().zip(x) {
            *o = self.diag * xi;
        }
        for &(r, c, v) in &self.entries {
            out[r] += v * x[c];
        }
        if project {
            for v in &self.gauge {
                let dot: f64 = v.iter().zip(out.iter()).map(|(a, b)| a * b).sum();
                out.iter_mut().zip(v).for_each(|(o, vi)| *o -= dot * vi);
            }
        }
    }

    /// Growth-rate estimate `lim ||J^k x||^(1/k)`, averaged over the second
    /// half of the run to smooth complex-pair rotation.
    fn power_radius(&self, project: bool, iterations: usize) -> f64 {
        let mut x: Vec<f64> = (0..self.dim).map(|k| 1.0 + ((k * 7919) % 97) as f64 / 97.0).collect();
        let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
        let n0 = norm(&x);
        x.iter_mut().for_each(|a| *a /= n0);
        let mut y = vec![0.0; self.dim];
        let mut log_growth = 0.0;
        let burn_in = iterations / 2;
        for it in 0..iterations {
            self.apply(&x, &mut y, project);
            let ny = norm(&y);
            if ny == 0.0 || !ny.is_finite() {
                return if ny == 0.0 { 0.0 } else { f64::INFINITY };
            }
            if it >= burn_in {
                log_growth += ny.ln();
            }
            for (a, b) in x.iter_mut().zip(&y) {
                *a = b / ny;
            }
        }
        (log_growth / (iterations - burn_in) as f64).exp()
    }
}

fn dense_radius(m: DMatrix<f64>) -> f64 {
    m.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Spectral radius of the Jacobian of the damped map at `scores`, dense for
/// small systems and by power iteration above `opts.dense_limit` variables.
pub fn jacobian_spectral_radius(
    g: &DiffusionGraph,
    scores: &ScoreVector,
    opts: &SpectralOptions,
) -> Result<JacobianSpectrum> {
    let jac = Jacobian::build(g, scores, opts.damping)?;
    let (radius, radius_gauge_fixed, method) = if jac.dim <= opts.dense_limit {
        (dense_radius(jac.dense(false)), dense_radius(jac.dense(true)), SpectralMethod::Dense)
    } else {
        (
            jac.power_radius(false, opts.power_iterations),
            jac.power_radius(true, opts.power_iterations),
            SpectralMethod::PowerIteration,
        )
    };
    Ok(JacobianSpectrum { damping: opts.damping, radius, radius_gauge_fixed, dimension: jac.dim, method })
}
