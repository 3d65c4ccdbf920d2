//! Core matrix and graph types: precision and partial-correlation matrices,
//! undirected edge sets, and observation tables.
//!
//! All types validate on construction and are immutable afterwards, so they
//! can be shared freely across threads.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{max_abs, max_asymmetry, symmetrize, Cholesky};

/// Relative asymmetry accepted on input before symmetrization.
pub const SYMMETRY_TOL: f64 = 1e-8;

/// Pivot floor for the positive-definiteness gate.
pub const PD_PIVOT_TOL: f64 = 1e-12;

fn check_square_symmetric(m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::Shape(format!(
            "expected a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("matrix has non-finite entries".into()));
    }
    let scale = max_abs(m).max(1.0);
    let asym = max_asymmetry(m);
    if asym > SYMMETRY_TOL * scale {
        return Err(Error::Shape(format!(
            "matrix is not symmetric (max asymmetry {asym:e})"
        )));
    }
    Ok(())
}

/// True iff a Cholesky factorization of `m` succeeds with every pivot above
/// [`PD_PIVOT_TOL`].
pub fn is_positive_definite(m: &DMatrix<f64>) -> Result<bool> {
    check_square_symmetric(m)?;
    Ok(Cholesky::with_tolerance(&symmetrize(m), PD_PIVOT_TOL).is_some())
}

/// A symmetric positive-definite matrix: a precision matrix Θ or the inverse
/// scatter Ψ of a t-distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecisionMatrix {
    m: DMatrix<f64>,
}

impl PrecisionMatrix {
    /// Validates symmetry and positive definiteness. The stored matrix is
    /// the exact symmetrization `(M + Mᵀ)/2`.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        check_square_symmetric(&m)?;
        let m = symmetrize(&m);
        if Cholesky::new(&m).is_none() {
            return Err(Error::Domain("matrix is not positive definite".into()));
        }
        Ok(Self { m })
    }

    pub fn identity(p: usize) -> Self {
        Self {
            m: DMatrix::identity(p, p),
        }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.m
    }

    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.m[(j, k)]
    }

    pub fn cholesky(&self) -> Cholesky {
        Cholesky::new(&self.m).expect("validated positive definite")
    }

    /// The covariance (or scatter) matrix `M⁻¹`.
    pub fn inverse(&self) -> DMatrix<f64> {
        self.cholesky().inverse()
    }

    pub fn log_det(&self) -> f64 {
        self.cholesky().log_det()
    }

    pub fn partial_correlations(&self) -> PartialCorrelationMatrix {
        precision_to_partial_correlation(&self.m).expect("positive definite input")
    }

    /// Off-diagonal support as an edge set (exact nonzeros).
    pub fn support(&self) -> EdgeSet {
        let p = self.dim();
        let mut e = EdgeSet::empty(p);
        for j in 0..p {
            for k in (j + 1)..p {
                if self.m[(j, k)] != 0.0 {
                    e.insert(j, k).expect("indices in range");
                }
            }
        }
        e
    }
}

/// Converts an inverse scatter matrix Ψ to the precision Θ = (ν−2)/ν · Ψ.
pub fn scatter_to_precision(psi: &PrecisionMatrix, nu: f64) -> Result<PrecisionMatrix> {
    if !(nu > 2.0) {
        return Err(Error::Domain(format!(
            "degrees of freedom must exceed 2 for a finite covariance, got {nu}"
        )));
    }
    Ok(PrecisionMatrix {
        m: psi.as_matrix() * ((nu - 2.0) / nu),
    })
}

/// Partial correlations `p_jk = −θ_jk / sqrt(θ_jj θ_kk)` with a zero diagonal.
pub fn precision_to_partial_correlation(theta: &DMatrix<f64>) -> Result<PartialCorrelationMatrix> {
    check_square_symmetric(theta)?;
    let p = theta.nrows();
    if let Some(j) = (0..p).find(|&j| !(theta[(j, j)] > 0.0)) {
        return Err(Error::Domain(format!(
            "diagonal entry {} is not positive ({})",
            j + 1,
            theta[(j, j)]
        )));
    }
    let d: Vec<f64> = (0..p).map(|j| theta[(j, j)].sqrt()).collect();
    let mut out = DMatrix::<f64>::zeros(p, p);
    for j in 0..p {
        for k in (j + 1)..p {
            let avg = 0.5 * (theta[(j, k)] + theta[(k, j)]);
            let v = -avg / (d[j] * d[k]);
            out[(j, k)] = v;
            out[(k, j)] = v;
        }
    }
    PartialCorrelationMatrix::new(out)
}

/// Symmetric matrix with zero diagonal and entries in `[-1, 1]`; the weighted
/// adjacency of a partial-correlation network.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialCorrelationMatrix {
    m: DMatrix<f64>,
}

impl PartialCorrelationMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        check_square_symmetric(&m)?;
        let mut m = symmetrize(&m);
        let p = m.nrows();
        for j in 0..p {
            m[(j, j)] = 0.0;
        }
        for v in m.iter_mut() {
            if v.abs() > 1.0 + 1e-12 {
                return Err(Error::Domain(format!(
                    "partial correlation {v} outside [-1, 1]"
                )));
            }
            *v = v.clamp(-1.0, 1.0);
        }
        Ok(Self { m })
    }

    pub fn zeros(p: usize) -> Self {
        Self {
            m: DMatrix::zeros(p, p),
        }
    }

    /// Builds a matrix from weighted undirected edges.
    pub fn from_edges(p: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let mut m = DMatrix::zeros(p, p);
        for &(j, k, w) in edges {
            if j >= p || k >= p || j == k {
                return Err(Error::Shape(format!("invalid edge ({}, {})", j + 1, k + 1)));
            }
            m[(j, k)] = w;
            m[(k, j)] = w;
        }
        Self::new(m)
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.m[(j, k)]
    }

    /// Edges where the partial correlation is exactly nonzero.
    pub fn edge_set(&self) -> EdgeSet {
        let p = self.dim();
        let mut e = EdgeSet::empty(p);
        for j in 0..p {
            for k in (j + 1)..p {
                if self.m[(j, k)] != 0.0 {
                    e.insert(j, k).expect("indices in range");
                }
            }
        }
        e
    }

    /// Weighted edge list `(j, k, p_jk)` with `j < k`.
    pub fn weighted_edges(&self) -> Vec<(usize, usize, f64)> {
        self.edge_set()
            .iter()
            .map(|(j, k)| (j, k, self.m[(j, k)]))
            .collect()
    }
}

/// Undirected edge set over `p` nodes. Pairs are stored as `(j, k)` with `j < k`
/// and 0-based indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EdgeSet {
    p: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl EdgeSet {
    pub fn empty(p: usize) -> Self {
        Self {
            p,
            edges: BTreeSet::new(),
        }
    }

    pub fn complete(p: usize) -> Self {
        let mut e = Self::empty(p);
        for j in 0..p {
            for k in (j + 1)..p {
                e.edges.insert((j, k));
            }
        }
        e
    }

    pub fn from_pairs<I: IntoIterator<Item = (usize, usize)>>(p: usize, pairs: I) -> Result<Self> {
        let mut e = Self::empty(p);
        for (j, k) in pairs {
            e.insert(j, k)?;
        }
        Ok(e)
    }

    /// Inserts an unordered pair; returns whether it was new.
    pub fn insert(&mut self, j: usize, k: usize) -> Result<bool> {
        if j == k {
            return Err(Error::Shape(format!("self-loop at node {}", j + 1)));
        }
        if j >= self.p || k >= self.p {
            return Err(Error::Shape(format!(
                "edge ({}, {}) out of range for {} nodes",
                j + 1,
                k + 1,
                self.p
            )));
        }
        Ok(self.edges.insert((j.min(k), j.max(k))))
    }

    pub fn remove(&mut self, j: usize, k: usize) -> bool {
        self.edges.remove(&(j.min(k), j.max(k)))
    }

    pub fn contains(&self, j: usize, k: usize) -> bool {
        j != k && self.edges.contains(&(j.min(k), j.max(k)))
    }

    pub fn num_nodes(&self) -> usize {
        self.p
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn is_subset(&self, other: &EdgeSet) -> bool {
        self.edges.is_subset(&other.edges)
    }

    /// Sorted neighbor lists of every node.
    pub fn adjacency_lists(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.p];
        for &(j, k) in &self.edges {
            adj[j].push(k);
            adj[k].push(j);
        }
        for a in &mut adj {
            a.sort_unstable();
        }
        adj
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.p];
        for &(j, k) in &self.edges {
            d[j] += 1;
            d[k] += 1;
        }
        d
    }

    /// Applies a node relabeling `old -> perm[old]`.
    pub fn relabel(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.p {
            return Err(Error::Shape("permutation length mismatch".into()));
        }
        Self::from_pairs(self.p, self.edges.iter().map(|&(j, k)| (perm[j], perm[k])))
    }
}

/// An `n × p` table of observations with optional positive per-row weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: DMatrix<f64>,
    weights: Option<DVector<f64>>,
}

impl Dataset {
    pub fn new(x: DMatrix<f64>) -> Result<Self> {
        if x.nrows() < 2 {
            return Err(Error::Data(format!(
                "need at least 2 observations, got {}",
                x.nrows()
            )));
        }
        if x.ncols() == 0 {
            return Err(Error::Data("dataset has no columns".into()));
        }
        if let Some(pos) = x.iter().position(|v| !v.is_finite()) {
            let (r, c) = (pos % x.nrows(), pos / x.nrows());
            return Err(Error::Data(format!(
                "non-finite value at row {}, column {}",
                r + 1,
                c + 1
            )));
        }
        Ok(Self { x, weights: None })
    }

    pub fn with_weights(self, w: DVector<f64>) -> Result<Self> {
        if w.len() != self.x.nrows() {
            return Err(Error::Shape(format!(
                "weight vector has length {}, expected {}",
                w.len(),
                self.x.nrows()
            )));
        }
        if let Some(i) = w.iter().position(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::Data(format!(
                "weight at row {} must be strictly positive",
                i + 1
            )));
        }
        Ok(Self {
            x: self.x,
            weights: Some(w),
        })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn weights(&self) -> Option<&DVector<f64>> {
        self.weights.as_ref()
    }

    pub fn column_means(&self) -> DVector<f64> {
        let n = self.n() as f64;
        DVector::from_iterator(self.p(), self.x.column_iter().map(|c| c.sum() / n))
    }
}
