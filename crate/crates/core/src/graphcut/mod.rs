//! Alpha-expansion refinement of per-face label probabilities.
//!
//! The energy is
//! `E(l) = Σ_u −log p_u(l_u) + λ Σ_u Σ_{v ∈ N(u)} ξ_S(u, v)·[l_u ≠ l_v]`,
//! where the inner sum runs over ordered neighbor pairs, so every dual edge
//! contributes `2λ·ξ_S`. The pairwise cost is
//! `ξ_S = max(0, −log(min(θ, π)/π) − ω|f_u − f_v|)` with `θ` the exterior
//! dihedral angle and `f` the normalized average geodesic distance.
//! Disagreement is penalized only across concave edges, less so when the
//! two faces differ in `f`; flat and convex edges cost nothing.

mod maxflow;

use std::f64::consts::PI;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

pub use maxflow::FlowNetwork;

use crate::binio::{FormatError, Reader, Writer};
use crate::mesh::DualGraph;

pub const P_MIN: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RefineParams {
    pub lambda: f64,
    pub omega: f64,
}

impl Default for RefineParams {
    fn default() -> Self {
        RefineParams {
            lambda: 1.0,
            omega: 1.0,
        }
    }
}

/// Cost of giving faces `u` and `v` different labels across an edge with
/// exterior dihedral angle `theta`.
pub fn smoothness_cost(theta: f64, f_u: f64, f_v: f64, omega: f64) -> f64 {
    let t = theta.clamp(f64::MIN_POSITIVE, PI);
    (-(t / PI).ln() - omega * (f_u - f_v).abs()).max(0.0)
}

/// Data terms and Potts edge weights of a labelling problem.
#[derive(Debug, Clone)]
pub struct GraphCutProblem {
    /// `unary[u][l]`: cost of giving node `u` label `l`.
    pub unary: Vec<Vec<f64>>,
    /// `(u, v, w)`: `w` is paid when `u` and `v` disagree.
    pub edges: Vec<(usize, usize, f64)>,
}

impl GraphCutProblem {
    pub fn from_probabilities(
        graph: &DualGraph,
        probabilities: &[Vec<f64>],
        feature: &[f64],
        params: RefineParams,
    ) -> Self {
        let unary = probabilities
            .iter()
            .map(|p| p.iter().map(|&x| -x.max(P_MIN).ln()).collect())
            .collect();
        let edges = graph
            .edges()
            .iter()
            .map(|e| {
                let c = smoothness_cost(e.dihedral, feature[e.a], feature[e.b], params.omega);
                (e.a, e.b, 2.0 * params.lambda * c)
            })
            .collect();
        GraphCutProblem { unary, edges }
    }

    pub fn node_count(&self) -> usize {
        self.unary.len()
    }

    pub fn label_count(&self) -> usize {
        self.unary.first().map_or(0, Vec::len)
    }

    pub fn energy(&self, labels: &[usize]) -> f64 {
        let data: f64 = self.unary.iter().zip(labels).map(|(u, &l)| u[l]).sum();
        let smooth: f64 = self
            .edges
            .iter()
            .filter(|&&(u, v, _)| labels[u] != labels[v])
            .map(|&(_, _, w)| w)
            .sum();
        data + smooth
    }

    /// Lowest-cost label per node (ties go to the lower index).
    pub fn argmin_labels(&self) -> Vec<usize> {
        self.unary
            .iter()
            .map(|u| {
                let mut best = 0;
                for (l, &c) in u.iter().enumerate() {
                    if c < u[best] {
                        best = l;
                    }
                }
                best
            })
            .collect()
    }

    /// Best labelling reachable from `labels` by switching any subset of
    /// nodes to `alpha` (one min cut). Source side keeps its label, sink
    /// side takes `alpha`.
    pub fn expansion_move(&self, labels: &[usize], alpha: usize) -> Vec<usize> {
        let n = self.node_count();
        let (s, t) = (n, n + 1);
        let mut net = FlowNetwork::new(n + 2);
        // Linear coefficient of x_u (x_u = 1: switch to alpha).
        let mut linear: Vec<f64> = (0..n).map(|u| self.unary[u][alpha] - self.unary[u][labels[u]]).collect();
        for &(u, v, w) in &self.edges {
            let (lu, lv) = (labels[u], labels[v]);
            let e00 = if lu != lv { w } else { 0.0 };
            let e01 = if lu != alpha { w } else { 0.0 };
            let e10 = if alpha != lv { w } else { 0.0 };
            // E = e00 + (e10 − e00)·x_u + (e11 − e10)·x_v + (e01 + e10 − e00 − e11)(1 − x_u)·x_v, e11 = 0
            linear[u] += e10 - e00;
            linear[v] -= e10;
            let coupling = e01 + e10 - e00;
            debug_assert!(coupling >= -1e-12, "non-submodular expansion term");
            net.add_arc(u, v, coupling.max(0.0));
        }
        for (u, &c) in linear.iter().enumerate() {
            if c > 0.0 {
                // Paid when u ends on the sink side.
                net.add_arc(s, u, c);
            } else if c < 0.0 {
                net.add_arc(u, t, -c);
            }
        }
        net.max_flow(s, t);
        let source = net.source_side(s);
        (0..n).map(|u| if source[u] { labels[u] } else { alpha }).collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExpansionResult {
    pub labels: Vec<usize>,
    /// Energy of the initial labelling followed by each accepted move.
    pub energy_trace: Vec<f64>,
    pub cycles: usize,
}

/// Starts from the per-node argmin of the data term and cycles through the
/// labels in ascending order, accepting a move only when it strictly lowers
/// the energy, until a full cycle brings no improvement.
pub fn alpha_expansion(problem: &GraphCutProblem) -> ExpansionResult {
    let mut labels = problem.argmin_labels();
    let mut energy = problem.energy(&labels);
    let mut trace = vec![energy];
    let mut cycles = 0;
    loop {
        cycles += 1;
        let mut improved = false;
        for alpha in 0..problem.label_count() {
            let candidate = problem.expansion_move(&labels, alpha);
            let e = problem.energy(&candidate);
            if e < energy - 1e-12 * energy.abs().max(1.0) {
                labels = candidate;
                energy = e;
                trace.push(e);
                improved = true;
            }
        }
        if !improved {
            break;
        }
    }
    ExpansionResult {
        labels,
        energy_trace: trace,
        cycles,
    }
}

/// Refines per-face probabilities on a mesh's dual graph.
pub fn refine(graph: &DualGraph, probabilities: &[Vec<f64>], feature: &[f64], params: RefineParams) -> ExpansionResult {
    alpha_expansion(&GraphCutProblem::from_probabilities(graph, probabilities, feature, params))
}

const PROB_MAGIC: &[u8; 8] = b"MSEGPROB";
pub const PROB_VERSION: u32 = 1;

pub fn write_probabilities<W: Write>(out: W, probabilities: &[Vec<f64>]) -> Result<(), FormatError> {
    let k = probabilities.first().map_or(0, Vec::len);
    if probabilities.iter().any(|p| p.len() != k) {
        return Err(FormatError::Invalid("probability rows differ in length".into()));
    }
    let mut w = Writer::new(out);
    w.header(PROB_MAGIC, PROB_VERSION)?;
    w.u64(probabilities.len() as u64)?;
    w.u32(k as u32)?;
    for p in probabilities {
        w.f64s(p)?;
    }
    Ok(())
}

pub fn read_probabilities<R: Read>(input: R) -> Result<Vec<Vec<f64>>, FormatError> {
    let mut r = Reader::new(input);
    r.header(PROB_MAGIC, "probability file", PROB_VERSION)?;
    let n = r.u64("face count")? as usize;
    let k = r.u32("class count")? as usize;
    let rows = (0..n).map(|_| r.f64s(k, "probabilities")).collect::<Result<Vec<_>, _>>()?;
    r.finish()?;
    Ok(rows)
}
