//! Network summaries, centralities and shock propagation on a
//! partial-correlation network.
//!
//! Topological quantities (degree, distance, eccentricity, clustering) use the
//! binarized graph with an edge wherever `p_jk ≠ 0`. Strength is the signed
//! sum of incident partial correlations unless absolute mode is requested.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{symmetric_spectral_radius, Cholesky};
use crate::matrix::PartialCorrelationMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrengthMode {
    #[default]
    Signed,
    Absolute,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkMeasures {
    pub mean_degree: f64,
    pub mean_eccentricity: f64,
    pub mean_distance: f64,
    pub mean_clustering: f64,
    pub mean_strength: f64,
    pub edge_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeCentrality {
    pub node: usize,
    pub degree: usize,
    pub strength: f64,
    pub eigenvector: f64,
}

fn adjacency(pc: &PartialCorrelationMatrix) -> Vec<Vec<usize>> {
    let p = pc.dim();
    (0..p)
        .map(|j| (0..p).filter(|&k| k != j && pc.get(j, k) != 0.0).collect())
        .collect()
}

/// Hop distances from `source`; `None` for unreachable nodes.
fn bfs(adj: &[Vec<usize>], source: usize) -> Vec<Option<usize>> {
    let mut dist = vec![None; adj.len()];
    dist[source] = Some(0);
    let mut queue = VecDeque::from([source]);
    while let Some(v) = queue.pop_front() {
        let d = dist[v].expect("visited");
        for &w in &adj[v] {
            if dist[w].is_none() {
                dist[w] = Some(d + 1);
                queue.push_back(w);
            }
        }
    }
    dist
}

pub fn strengths(pc: &PartialCorrelationMatrix, mode: StrengthMode) -> Vec<f64> {
    let m = pc.as_matrix();
    (0..pc.dim())
        .map(|j| match mode {
            StrengthMode::Signed => m.row(j).sum(),
            StrengthMode::Absolute => m.row(j).iter().map(|v| v.abs()).sum(),
        })
        .collect()
}

/// Local clustering coefficients; nodes with degree below two score 0.
pub fn clustering_coefficients(pc: &PartialCorrelationMatrix) -> Vec<f64> {
    let adj = adjacency(pc);
    adj.iter()
        .map(|nbrs| {
            let d = nbrs.len();
            if d < 2 {
                return 0.0;
            }
            let mut links = 0usize;
            for (a, &u) in nbrs.iter().enumerate() {
                for &v in &nbrs[a + 1..] {
                    if pc.get(u, v) != 0.0 {
                        links += 1;
                    }
                }
            }
            links as f64 / (d * (d - 1) / 2) as f64
        })
        .collect()
}

/// Per-node eccentricity; isolated nodes get 0.
pub fn eccentricities(pc: &PartialCorrelationMatrix) -> Vec<usize> {
    let adj = adjacency(pc);
    (0..pc.dim())
        .map(|j| bfs(&adj, j).into_iter().flatten().max().unwrap_or(0))
        .collect()
}

pub fn measures(pc: &PartialCorrelationMatrix) -> NetworkMeasures {
    measures_with(pc, StrengthMode::Signed)
}

pub fn measures_with(pc: &PartialCorrelationMatrix, mode: StrengthMode) -> NetworkMeasures {
    let p = pc.dim();
    if p == 0 {
        return NetworkMeasures {
            mean_degree: 0.0,
            mean_eccentricity: 0.0,
            mean_distance: 0.0,
            mean_clustering: 0.0,
            mean_strength: 0.0,
            edge_count: 0,
        };
    }
    let adj = adjacency(pc);
    let pf = p as f64;
    let edge_count = adj.iter().map(Vec::len).sum::<usize>() / 2;
    let mut ecc_sum = 0usize;
    let (mut dist_sum, mut dist_pairs) = (0usize, 0usize);
    for j in 0..p {
        let dist = bfs(&adj, j);
        ecc_sum += dist.iter().flatten().max().copied().unwrap_or(0);
        for d in dist[j + 1..].iter().flatten() {
            dist_sum += d;
            dist_pairs += 1;
        }
    }
    NetworkMeasures {
        mean_degree: 2.0 * edge_count as f64 / pf,
        mean_eccentricity: ecc_sum as f64 / pf,
        mean_distance: if dist_pairs == 0 {
            0.0
        } else {
            dist_sum as f64 / dist_pairs as f64
        },
        mean_clustering: clustering_coefficients(pc).iter().sum::<f64>() / pf,
        mean_strength: strengths(pc, mode).iter().sum::<f64>() / pf,
        edge_count,
    }
}

/// Counts of nodes per degree, indexed by degree `0..=max_degree`.
pub fn degree_histogram(pc: &PartialCorrelationMatrix) -> Vec<usize> {
    let degrees: Vec<usize> = adjacency(pc).iter().map(Vec::len).collect();
    let mut hist = vec![0; degrees.iter().max().map_or(1, |m| m + 1)];
    for d in degrees {
        hist[d] += 1;
    }
    hist
}

const POWER_MAX_STEPS: usize = 10_000;
const POWER_TOL: f64 = 1e-12;

/// Perron vector and eigenvalue of a nonnegative symmetric matrix via power
/// iteration on `A + I` (the shift keeps bipartite graphs from oscillating).
fn perron(a: &DMatrix<f64>) -> Result<(DVector<f64>, f64)> {
    let p = a.nrows();
    let shifted = a + DMatrix::identity(p, p);
    let mut v = DVector::from_element(p, 1.0 / (p as f64).sqrt());
    for _ in 0..POWER_MAX_STEPS {
        let mut next = &shifted * &v;
        let norm = next.norm();
        next /= norm;
        let diff = (&next - &v).amax();
        v = next;
        if diff < POWER_TOL {
            let lambda = v.dot(&(a * &v));
            return Ok((v, lambda));
        }
    }
    Err(Error::Numeric(format!(
        "power iteration did not converge in {POWER_MAX_STEPS} steps"
    )))
}

/// Degree, strength and eigenvector centrality (principal eigenvector of
/// `|P|`, scaled to a maximum of 1) for every node.
pub fn centralities(pc: &PartialCorrelationMatrix) -> Result<Vec<NodeCentrality>> {
    centralities_with(pc, StrengthMode::Signed)
}

pub fn centralities_with(pc: &PartialCorrelationMatrix, mode: StrengthMode) -> Result<Vec<NodeCentrality>> {
    let p = pc.dim();
    let adj = adjacency(pc);
    let strength = strengths(pc, mode);
    let abs = pc.as_matrix().abs();
    let eig = if abs.amax() == 0.0 {
        DVector::zeros(p)
    } else {
        let (v, _) = perron(&abs)?;
        let top = v.amax();
        v.map(|x| x.abs() / top)
    };
    Ok((0..p)
        .map(|j| NodeCentrality {
            node: j,
            degree: adj[j].len(),
            strength: strength[j],
            eigenvector: eig[j],
        })
        .collect())
}

/// Spectral radius of `P` (largest eigenvalue modulus).
pub fn spectral_radius(pc: &PartialCorrelationMatrix) -> f64 {
    symmetric_spectral_radius(pc.as_matrix())
}

/// Perron root of `|P|`, an upper bound on the spectral radius of `P`.
pub fn abs_spectral_radius(pc: &PartialCorrelationMatrix) -> Result<f64> {
    let abs = pc.as_matrix().abs();
    if abs.amax() == 0.0 {
        return Ok(0.0);
    }
    Ok(perron(&abs)?.1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShockResult {
    pub node: usize,
    pub initial: Vec<f64>,
    pub steady_state: Vec<f64>,
    pub total_impact: f64,
    pub spectral_radius: f64,
    pub abs_spectral_radius: f64,
}

/// Steady state `s = (I − P)⁻¹ e_i` of a unit shock at `node`, i.e. the sum
/// `Σ_t Pᵗ e_i` of direct and higher-order effects.
pub fn shock(pc: &PartialCorrelationMatrix, node: usize) -> Result<ShockResult> {
    let p = pc.dim();
    if node >= p {
        return Err(Error::Config(format!(
            "shock node {} out of range for {p} nodes",
            node + 1
        )));
    }
    let radius = spectral_radius(pc);
    if radius >= 1.0 {
        return Err(Error::Divergence { radius });
    }
    let system = DMatrix::identity(p, p) - pc.as_matrix();
    // ρ(P) < 1 makes I − P symmetric positive definite
    let chol = Cholesky::new(&system)
        .ok_or_else(|| Error::Numeric("I - P is not positive definite".into()))?;
    let mut e = DVector::zeros(p);
    e[node] = 1.0;
    let s = chol.solve(&e);
    Ok(ShockResult {
        node,
        initial: e.iter().copied().collect(),
        total_impact: s.sum(),
        steady_state: s.iter().copied().collect(),
        spectral_radius: radius,
        abs_spectral_radius: abs_spectral_radius(pc)?,
    })
}
