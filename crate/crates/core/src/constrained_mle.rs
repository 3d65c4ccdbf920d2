//! Gaussian maximum likelihood for a precision matrix with a fixed zero pattern.
//!
//! Maximizes `log det Ψ − tr(S Ψ)` subject to `ψ_jk = 0` for every pair
//! outside the edge set. The solver works on the implied covariance `W`:
//! each step regresses one variable on its graph neighbors only, using the
//! current `W` restricted to those neighbors, and refreshes that row/column
//! of `W`. At the fixed point `W` agrees with `S` on the edges and the
//! diagonal, and `W⁻¹` vanishes off the edges.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{max_abs, max_asymmetry, symmetrize, Cholesky};
use crate::matrix::{EdgeSet, PrecisionMatrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MleOptions {
    /// Sweeps stop once the mean absolute change of `W` off-diagonals drops
    /// below `change_tol · mean|S|`.
    pub change_tol: f64,
    /// Stationarity requirement `|(Ψ⁻¹)_jk − s_jk| ≤ kkt_tol · max|S|`.
    pub kkt_tol: f64,
    pub max_sweeps: usize,
    pub record_trace: bool,
}

impl Default for MleOptions {
    fn default() -> Self {
        Self {
            change_tol: 1e-8,
            kkt_tol: 1e-6,
            max_sweeps: 500,
            record_trace: false,
        }
    }
}

/// Objective values after one full sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRecord {
    /// `log det Ψ_t − tr(S Ψ_t)` for the zero-patterned iterate `Ψ_t`.
    pub loglik: f64,
    /// `−log det W_t − p`, an upper bound on the constrained maximum.
    pub dual_bound: f64,
}

#[derive(Debug, Clone)]
pub struct ConstrainedMleResult {
    pub psi: PrecisionMatrix,
    /// Implied covariance `W` from the final sweep.
    pub covariance: DMatrix<f64>,
    pub iterations: usize,
    /// Largest `|(Ψ⁻¹)_jk − s_jk|` over the edges and the diagonal.
    pub kkt_residual: f64,
    pub loglik: f64,
    pub trace: Vec<SweepRecord>,
}

/// `log det Ψ − tr(S Ψ)`.
pub fn gaussian_objective(psi: &PrecisionMatrix, s: &DMatrix<f64>) -> f64 {
    psi.log_det() - (s.component_mul(psi.as_matrix())).sum()
}

fn validate(s: &DMatrix<f64>, edges: &EdgeSet) -> Result<()> {
    let p = s.nrows();
    if s.ncols() != p {
        return Err(Error::Shape(format!("covariance is {}x{}", s.nrows(), s.ncols())));
    }
    if edges.num_nodes() != p {
        return Err(Error::Shape(format!(
            "edge set has {} nodes, covariance has {}",
            edges.num_nodes(),
            p
        )));
    }
    if s.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("covariance has non-finite entries".into()));
    }
    if max_asymmetry(s) > 1e-8 * max_abs(s).max(1.0) {
        return Err(Error::Shape("covariance is not symmetric".into()));
    }
    if let Some(j) = (0..p).find(|&j| !(s[(j, j)] > 0.0)) {
        return Err(Error::Domain(format!(
            "covariance diagonal entry {} is not positive",
            j + 1
        )));
    }
    Ok(())
}

/// Solves the neighbor-restricted normal equations for node `j`.
fn node_coefficients(w: &DMatrix<f64>, s: &DMatrix<f64>, j: usize, nbrs: &[usize]) -> Result<DVector<f64>> {
    if nbrs.is_empty() {
        return Ok(DVector::zeros(0));
    }
    let a = w.select_rows(nbrs).select_columns(nbrs);
    let chol = Cholesky::new(&a).ok_or_else(|| {
        Error::Estimation(format!(
            "covariance restricted to the {} neighbors of node {} is not positive definite; \
             the constrained estimate does not exist for this edge set",
            nbrs.len(),
            j + 1
        ))
    })?;
    let rhs = DVector::from_iterator(nbrs.len(), nbrs.iter().map(|&k| s[(k, j)]));
    Ok(chol.solve(&rhs))
}

/// Reads off `Ψ` from the regressions at the current `W`.
fn recover_precision(w: &DMatrix<f64>, s: &DMatrix<f64>, adj: &[Vec<usize>]) -> Result<PrecisionMatrix> {
    let p = s.nrows();
    let mut theta = DMatrix::<f64>::zeros(p, p);
    for j in 0..p {
        let nbrs = &adj[j];
        let beta = node_coefficients(w, s, j, nbrs)?;
        let explained: f64 = nbrs.iter().zip(beta.iter()).map(|(&k, b)| s[(k, j)] * b).sum();
        let resid = s[(j, j)] - explained;
        if !(resid > 0.0) || !resid.is_finite() {
            return Err(Error::Estimation(format!(
                "non-positive residual variance {resid:e} at node {}; no positive-definite solution",
                j + 1
            )));
        }
        let tjj = 1.0 / resid;
        theta[(j, j)] = tjj;
        for (&k, b) in nbrs.iter().zip(beta.iter()) {
            theta[(k, j)] = -b * tjj;
        }
    }
    PrecisionMatrix::new(symmetrize(&theta)).map_err(|_| {
        Error::Estimation("recovered precision matrix is not positive definite".into())
    })
}

fn stationarity_residual(psi: &PrecisionMatrix, s: &DMatrix<f64>, edges: &EdgeSet) -> f64 {
    let inv = psi.inverse();
    let p = s.nrows();
    let diag = (0..p).map(|j| (inv[(j, j)] - s[(j, j)]).abs());
    let off = edges.iter().map(|(j, k)| (inv[(j, k)] - s[(j, k)]).abs());
    diag.chain(off).fold(0.0, f64::max)
}

fn log_det_or_nan(w: &DMatrix<f64>) -> f64 {
    Cholesky::new(w).map(|c| c.log_det()).unwrap_or(f64::NAN)
}

/// Fits the zero-constrained Gaussian MLE with default options.
pub fn fit(s: &DMatrix<f64>, edges: &EdgeSet) -> Result<ConstrainedMleResult> {
    fit_with(s, edges, &MleOptions::default())
}

pub fn fit_with(s: &DMatrix<f64>, edges: &EdgeSet, opts: &MleOptions) -> Result<ConstrainedMleResult> {
    validate(s, edges)?;
    let s = symmetrize(s);
    let p = s.nrows();
    let adj = edges.adjacency_lists();
    let mean_abs_s = s.iter().map(|v| v.abs()).sum::<f64>() / (p * p) as f64;
    let kkt_limit = opts.kkt_tol * max_abs(&s);
    let off_count = (p * p.saturating_sub(1)).max(1) as f64;

    let mut w = s.clone();
    let mut trace = Vec::new();
    let mut sweeps = 0;
    let mut last: Option<(PrecisionMatrix, f64)> = None;

    while sweeps < opts.max_sweeps {
        sweeps += 1;
        let mut total_change = 0.0;
        for j in 0..p {
            let nbrs = &adj[j];
            let beta = node_coefficients(&w, &s, j, nbrs)?;
            for i in 0..p {
                if i == j {
                    continue;
                }
                let v: f64 = nbrs.iter().zip(beta.iter()).map(|(&k, b)| w[(i, k)] * b).sum();
                total_change += (v - w[(i, j)]).abs();
                w[(i, j)] = v;
                w[(j, i)] = v;
            }
        }
        if w.iter().any(|v| !v.is_finite()) {
            return Err(Error::Estimation(format!(
                "implied covariance diverged at sweep {sweeps}"
            )));
        }
        if opts.record_trace {
            let psi = recover_precision(&w, &s, &adj)?;
            trace.push(SweepRecord {
                loglik: gaussian_objective(&psi, &s),
                dual_bound: -log_det_or_nan(&w) - p as f64,
            });
        }
        let mean_change = total_change / off_count;
        if mean_change < opts.change_tol * mean_abs_s {
            let psi = recover_precision(&w, &s, &adj)?;
            let kkt = stationarity_residual(&psi, &s, edges);
            if kkt <= kkt_limit {
                last = Some((psi, kkt));
                break;
            }
        }
    }

    let (psi, kkt) = match last {
        Some(found) => found,
        None => {
            return Err(Error::Estimation(format!(
                "constrained fit did not reach stationarity within {} sweeps",
                opts.max_sweeps
            )))
        }
    };
    Ok(ConstrainedMleResult {
        loglik: gaussian_objective(&psi, &s),
        psi,
        covariance: w,
        iterations: sweeps,
        kkt_residual: kkt,
        trace,
    })
}
