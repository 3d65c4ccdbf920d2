//! Random sparse ground-truth precision matrices over seven graph topologies.
//!
//! Patterns are turned into precision matrices by placing `v` on every edge
//! and `|λ_min(off-diagonal part)| + 0.1 + u` on the diagonal, which makes
//! the result positive definite by construction.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::min_eigenvalue;
use crate::matrix::{EdgeSet, PrecisionMatrix};
use crate::seeds;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TopologyKind {
    ScaleFree,
    Random,
    Band,
    Cluster,
    Hub,
    SmallWorld,
    CorePeriphery,
}

impl TopologyKind {
    pub const ALL: [TopologyKind; 7] = [
        TopologyKind::ScaleFree,
        TopologyKind::SmallWorld,
        TopologyKind::CorePeriphery,
        TopologyKind::Random,
        TopologyKind::Band,
        TopologyKind::Cluster,
        TopologyKind::Hub,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            TopologyKind::ScaleFree => "scale-free",
            TopologyKind::Random => "random",
            TopologyKind::Band => "band",
            TopologyKind::Cluster => "cluster",
            TopologyKind::Hub => "hub",
            TopologyKind::SmallWorld => "small-world",
            TopologyKind::CorePeriphery => "core-periphery",
        }
    }
}

impl fmt::Display for TopologyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TopologyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::Config(format!("unknown topology '{s}'")))
    }
}

fn d_bandwidth() -> usize {
    2
}
fn d_groups() -> usize {
    5
}
fn d_cluster_prob() -> f64 {
    0.3
}
fn d_ring_neighbors() -> usize {
    4
}
fn d_rewire() -> f64 {
    0.1
}
fn d_core_fraction() -> f64 {
    0.1
}
fn d_core_core() -> f64 {
    0.8
}
fn d_core_periphery() -> f64 {
    0.2
}
fn d_periphery_periphery() -> f64 {
    0.02
}
fn d_v() -> f64 {
    0.3
}
fn d_u() -> f64 {
    0.1
}

/// Full description of a generated topology; every knob is serialized so
/// experiment outputs record exactly what was drawn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologySpec {
    pub kind: TopologyKind,
    pub p: usize,
    #[serde(default)]
    pub seed: u64,
    /// Erdős–Rényi edge probability; `3/p` when absent.
    #[serde(default)]
    pub edge_prob: Option<f64>,
    #[serde(default = "d_bandwidth")]
    pub bandwidth: usize,
    /// Group count for cluster and hub graphs.
    #[serde(default = "d_groups")]
    pub groups: usize,
    #[serde(default = "d_cluster_prob")]
    pub cluster_prob: f64,
    /// Ring-lattice degree for small-world graphs (even).
    #[serde(default = "d_ring_neighbors")]
    pub ring_neighbors: usize,
    #[serde(default = "d_rewire")]
    pub rewire_prob: f64,
    #[serde(default = "d_core_fraction")]
    pub core_fraction: f64,
    #[serde(default = "d_core_core")]
    pub core_core_prob: f64,
    #[serde(default = "d_core_periphery")]
    pub core_periphery_prob: f64,
    #[serde(default = "d_periphery_periphery")]
    pub periphery_periphery_prob: f64,
    #[serde(default = "d_v")]
    pub v: f64,
    #[serde(default = "d_u")]
    pub u: f64,
}

impl TopologySpec {
    pub fn new(kind: TopologyKind, p: usize, seed: u64) -> Self {
        Self {
            kind,
            p,
            seed,
            edge_prob: None,
            bandwidth: d_bandwidth(),
            groups: d_groups(),
            cluster_prob: d_cluster_prob(),
            ring_neighbors: d_ring_neighbors(),
            rewire_prob: d_rewire(),
            core_fraction: d_core_fraction(),
            core_core_prob: d_core_core(),
            core_periphery_prob: d_core_periphery(),
            periphery_periphery_prob: d_periphery_periphery(),
            v: d_v(),
            u: d_u(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.p;
        if p < 4 {
            return Err(Error::Config(format!("topologies need p >= 4, got {p}")));
        }
        if !(self.v > 0.0) || !(self.u >= 0.0) {
            return Err(Error::Config(format!("need v > 0 and u >= 0 (v={}, u={})", self.v, self.u)));
        }
        let probs = [
            self.edge_prob.unwrap_or(0.0),
            self.cluster_prob,
            self.rewire_prob,
            self.core_core_prob,
            self.core_periphery_prob,
            self.periphery_periphery_prob,
        ];
        if probs.iter().any(|q| !(0.0..=1.0).contains(q)) {
            return Err(Error::Config("probabilities must lie in [0, 1]".into()));
        }
        match self.kind {
            TopologyKind::Band if self.bandwidth == 0 || self.bandwidth >= p => Err(Error::Config(format!(
                "bandwidth {} infeasible for p={p}",
                self.bandwidth
            ))),
            TopologyKind::Cluster | TopologyKind::Hub if self.groups == 0 || self.groups * 2 > p => {
                Err(Error::Config(format!("{} groups infeasible for p={p}", self.groups)))
            }
            TopologyKind::SmallWorld if self.ring_neighbors == 0 || self.ring_neighbors % 2 == 1 || self.ring_neighbors >= p => {
                Err(Error::Config(format!(
                    "ring degree {} must be even, positive and below p={p}",
                    self.ring_neighbors
                )))
            }
            TopologyKind::CorePeriphery if !(self.core_fraction > 0.0 && self.core_fraction < 1.0) => {
                Err(Error::Config(format!("core fraction {} outside (0, 1)", self.core_fraction)))
            }
            _ => Ok(()),
        }
    }
}

/// Contiguous, near-equal groups of node indices.
fn partition(p: usize, groups: usize) -> Vec<std::ops::Range<usize>> {
    let base = p / groups;
    let extra = p % groups;
    let mut start = 0;
    (0..groups)
        .map(|g| {
            let len = base + usize::from(g < extra);
            let r = start..start + len;
            start += len;
            r
        })
        .collect()
}

/// Draws the sparsity pattern described by `spec`.
pub fn generate_pattern(spec: &TopologySpec) -> Result<EdgeSet> {
    spec.validate()?;
    let p = spec.p;
    let mut rng = seeds::rng(spec.seed);
    let mut e = EdgeSet::empty(p);
    match spec.kind {
        TopologyKind::ScaleFree => {
            // preferential-attachment tree: each new node links to one existing
            // node chosen with probability proportional to its degree
            let mut endpoints = vec![0usize, 1];
            e.insert(0, 1)?;
            for i in 2..p {
                let target = endpoints[rng.random_range(0..endpoints.len())];
                e.insert(i, target)?;
                endpoints.push(i);
                endpoints.push(target);
            }
        }
        TopologyKind::Random => {
            let q = spec.edge_prob.unwrap_or((3.0 / p as f64).min(1.0));
            for j in 0..p {
                for k in (j + 1)..p {
                    if rng.random::<f64>() < q {
                        e.insert(j, k)?;
                    }
                }
            }
        }
        TopologyKind::Band => {
            for j in 0..p {
                for k in (j + 1)..p.min(j + spec.bandwidth + 1) {
                    e.insert(j, k)?;
                }
            }
        }
        TopologyKind::Cluster => {
            for g in partition(p, spec.groups) {
                for j in g.clone() {
                    for k in (j + 1)..g.end {
                        if rng.random::<f64>() < spec.cluster_prob {
                            e.insert(j, k)?;
                        }
                    }
                }
            }
        }
        TopologyKind::Hub => {
            for g in partition(p, spec.groups) {
                for k in (g.start + 1)..g.end {
                    e.insert(g.start, k)?;
                }
            }
        }
        TopologyKind::SmallWorld => {
            let half = spec.ring_neighbors / 2;
            let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); p];
            for i in 0..p {
                for d in 1..=half {
                    let k = (i + d) % p;
                    adj[i].insert(k);
                    adj[k].insert(i);
                }
            }
            for d in 1..=half {
                for i in 0..p {
                    let k = (i + d) % p;
                    if !adj[i].contains(&k) || rng.random::<f64>() >= spec.rewire_prob {
                        continue;
                    }
                    if adj[i].len() >= p - 1 {
                        continue;
                    }
                    let w = loop {
                        let w = rng.random_range(0..p);
                        if w != i && !adj[i].contains(&w) {
                            break w;
                        }
                    };
                    adj[i].remove(&k);
                    adj[k].remove(&i);
                    adj[i].insert(w);
                    adj[w].insert(i);
                }
            }
            for (i, set) in adj.iter().enumerate() {
                for &k in set.iter().filter(|&&k| k > i) {
                    e.insert(i, k)?;
                }
            }
        }
        TopologyKind::CorePeriphery => {
            let core = ((spec.core_fraction * p as f64).round() as usize).clamp(1, p - 1);
            for j in 0..p {
                for k in (j + 1)..p {
                    let q = match (j < core, k < core) {
                        (true, true) => spec.core_core_prob,
                        (false, false) => spec.periphery_periphery_prob,
                        _ => spec.core_periphery_prob,
                    };
                    if rng.random::<f64>() < q {
                        e.insert(j, k)?;
                    }
                }
            }
        }
    }
    Ok(e)
}

/// Places `v` on every edge and lifts the diagonal to `|λ_min| + 0.1 + u`.
pub fn pattern_to_precision(edges: &EdgeSet, v: f64, u: f64) -> Result<PrecisionMatrix> {
    if !(v > 0.0) {
        return Err(Error::Config(format!("edge weight v must be positive, got {v}")));
    }
    let p = edges.num_nodes();
    let mut m = DMatrix::<f64>::zeros(p, p);
    for (j, k) in edges.iter() {
        m[(j, k)] = v;
        m[(k, j)] = v;
    }
    let lift = min_eigenvalue(&m).abs() + 0.1 + u;
    for j in 0..p {
        m[(j, j)] = lift;
    }
    PrecisionMatrix::new(m)
}

/// Pattern and precision matrix in one call.
pub fn generate(spec: &TopologySpec) -> Result<(EdgeSet, PrecisionMatrix)> {
    let e = generate_pattern(spec)?;
    let theta = pattern_to_precision(&e, spec.v, spec.u)?;
    Ok((e, theta))
}
