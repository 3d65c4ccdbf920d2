//! EM estimation of a sparse inverse scatter matrix under the multivariate t
//! scale mixture, with the two-stage penalized estimator as the M-step.
//!
//! Each iteration:
//! 1. E-step: `τ_i = (ν + p) / (ν + (x_i − μ)ᵀ Ψ (x_i − μ))`.
//! 2. Weighted mean `μ = Σ τ_i x_i / Σ τ_i`.
//! 3. Row transform `x̃_i = (x_i − μ) √τ_i`.
//! 4. Stage one: elastic-net neighborhood selection on the transformed rows.
//! 5. Stage two: zero-constrained Gaussian MLE on `S = (1/n) Σ τ_i (x_i − μ)(x_i − μ)ᵀ`.
//!
//! Iteration stops when `max_jk |ψ_jk^(t+1) − ψ_jk^(t)| < δ`. Gaussian mode fixes
//! `τ ≡ 1` and performs a single pass.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::constrained_mle;
use crate::elastic_net::PenaltyConfig;
use crate::error::{Error, Result};
use crate::linalg::{symmetrize, Cholesky};
use crate::matrix::{is_positive_definite, Dataset, EdgeSet, PrecisionMatrix};
use crate::neighborhood::{assemble_edges, centered_gram, neighborhoods_from_gram, EdgeRule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    #[serde(rename = "gaussian")]
    Gaussian,
    #[serde(rename = "t")]
    TStudent,
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" | "normal" => Ok(Mode::Gaussian),
            "t" | "student" | "t-student" => Ok(Mode::TStudent),
            other => Err(Error::Config(format!("unknown mode '{other}' (expected gaussian|t)"))),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Gaussian => "gaussian",
            Mode::TStudent => "t",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmConfig {
    /// Degrees of freedom, held fixed. Ignored in Gaussian mode.
    pub nu: f64,
    pub penalty: PenaltyConfig,
    pub rule: EdgeRule,
    /// Convergence threshold on the largest entrywise change of `Ψ`.
    pub delta: f64,
    pub max_iterations: usize,
    pub mode: Mode,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self {
            nu: 3.0,
            penalty: PenaltyConfig {
                alpha: 0.5,
                lambda: 0.1,
            },
            rule: EdgeRule::And,
            delta: 1e-4,
            max_iterations: 200,
            mode: Mode::TStudent,
        }
    }
}

impl EmConfig {
    pub fn validate(&self) -> Result<()> {
        self.penalty.validate()?;
        if self.mode == Mode::TStudent && !(self.nu > 2.0) {
            return Err(Error::Config(format!(
                "t mode needs nu > 2, got {}",
                self.nu
            )));
        }
        if !(self.delta > 0.0) {
            return Err(Error::Config(format!("delta must be positive, got {}", self.delta)));
        }
        if self.max_iterations == 0 {
            return Err(Error::Config("max_iterations must be at least 1".into()));
        }
        Ok(())
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.penalty.lambda = lambda;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub max_change: f64,
    pub edge_count: usize,
    pub positive_definite: bool,
}

#[derive(Debug, Clone)]
pub struct EmState {
    pub mu: DVector<f64>,
    pub psi: PrecisionMatrix,
    pub tau: DVector<f64>,
    pub iteration: usize,
    pub max_change: f64,
    pub converged: bool,
    /// Edge set estimated in the final iteration.
    pub edges: EdgeSet,
    /// Regressions that hit their sweep cap, summed over iterations.
    pub solver_warnings: usize,
    pub history: Vec<IterationRecord>,
}

impl EmState {
    /// Precision matrix implied by the state: `Ψ` itself in Gaussian mode,
    /// `(ν−2)/ν Ψ` in t mode.
    pub fn precision(&self, config: &EmConfig) -> PrecisionMatrix {
        match config.mode {
            Mode::Gaussian => self.psi.clone(),
            Mode::TStudent => crate::matrix::scatter_to_precision(&self.psi, config.nu)
                .expect("validated nu"),
        }
    }
}

fn centered(data: &Dataset, mu: &DVector<f64>) -> Result<DMatrix<f64>> {
    if mu.len() != data.p() {
        return Err(Error::Shape(format!(
            "mean has length {}, data has {} columns",
            mu.len(),
            data.p()
        )));
    }
    let mut d = data.matrix().clone();
    for (j, mut col) in d.column_iter_mut().enumerate() {
        col.add_scalar_mut(-mu[j]);
    }
    Ok(d)
}

fn check_tau(tau: &DVector<f64>, n: usize) -> Result<()> {
    if tau.len() != n {
        return Err(Error::Shape(format!("tau has length {}, expected {n}", tau.len())));
    }
    if let Some(i) = tau.iter().position(|t| !(*t > 0.0) || !t.is_finite()) {
        return Err(Error::Data(format!("tau at row {} is not strictly positive", i + 1)));
    }
    Ok(())
}

/// Expected latent weights given the current mean and inverse scatter.
pub fn e_step(data: &Dataset, mu: &DVector<f64>, psi: &PrecisionMatrix, nu: f64) -> Result<DVector<f64>> {
    if !(nu > 2.0) {
        return Err(Error::Domain(format!("nu must exceed 2, got {nu}")));
    }
    if psi.dim() != data.p() {
        return Err(Error::Shape("precision and data dimensions differ".into()));
    }
    let d = centered(data, mu)?;
    let dq = &d * psi.as_matrix();
    let p = data.p() as f64;
    let mut tau = DVector::zeros(data.n());
    for i in 0..data.n() {
        let q = d.row(i).dot(&dq.row(i));
        if !q.is_finite() {
            return Err(Error::Data(format!(
                "non-finite quadratic form at row {}",
                i + 1
            )));
        }
        // clamp tiny negative round-off
        tau[i] = (nu + p) / (nu + q.max(0.0));
    }
    Ok(tau)
}

/// Weighted mean `Σ τ_i x_i / Σ τ_i`.
pub fn m_step_mean(data: &Dataset, tau: &DVector<f64>) -> Result<DVector<f64>> {
    check_tau(tau, data.n())?;
    let total = tau.sum();
    let mu = data.matrix().tr_mul(tau) / total;
    if mu.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("weighted mean is not finite".into()));
    }
    Ok(mu)
}

/// Rows `(x_i − μ) √τ_i`; the result carries `τ` as its weights.
pub fn transform_rows(data: &Dataset, tau: &DVector<f64>, mu: &DVector<f64>) -> Result<Dataset> {
    check_tau(tau, data.n())?;
    let mut d = centered(data, mu)?;
    for (i, mut row) in d.row_iter_mut().enumerate() {
        row *= tau[i].sqrt();
    }
    Dataset::new(d)?.with_weights(tau.clone())
}

/// `(1/n) Σ τ_i (x_i − μ)(x_i − μ)ᵀ`.
pub fn weighted_scatter(data: &Dataset, tau: &DVector<f64>, mu: &DVector<f64>) -> Result<DMatrix<f64>> {
    let xt = transform_rows(data, tau, mu)?;
    Ok(scatter_of_transformed(xt.matrix()))
}

fn scatter_of_transformed(xt: &DMatrix<f64>) -> DMatrix<f64> {
    symmetrize(&(xt.tr_mul(xt) / xt.nrows() as f64))
}

/// One two-stage M-step on already transformed rows.
fn two_stage(xt: &DMatrix<f64>, config: &EmConfig) -> Result<(PrecisionMatrix, EdgeSet, usize)> {
    let gram = centered_gram(xt);
    let ne = neighborhoods_from_gram(&gram, &config.penalty);
    let edges = assemble_edges(&ne, config.rule)?;
    let s = scatter_of_transformed(xt);
    let fit = constrained_mle::fit(&s, &edges)?;
    Ok((fit.psi, edges, ne.warnings.len()))
}

fn initial_psi(data: &Dataset, mu: &DVector<f64>, nu: f64) -> Result<PrecisionMatrix> {
    let p = data.p();
    let ones = DVector::from_element(data.n(), 1.0);
    let mut s = weighted_scatter(data, &ones, mu)?;
    let chol = if data.n() > p { Cholesky::new(&s) } else { None };
    let chol = match chol {
        Some(c) => c,
        None => {
            let ridge = 1e-3 * s.trace() / p as f64;
            for j in 0..p {
                s[(j, j)] += ridge;
            }
            Cholesky::new(&s).ok_or_else(|| {
                Error::Estimation("sample covariance is degenerate even after ridge".into())
            })?
        }
    };
    PrecisionMatrix::new(chol.inverse() * (nu / (nu - 2.0)))
}

/// Runs the estimator to convergence (or the iteration cap).
pub fn estimate(data: &Dataset, config: &EmConfig) -> Result<EmState> {
    config.validate()?;
    if data.p() < 2 {
        return Err(Error::Data("need at least 2 variables".into()));
    }
    let n = data.n();
    let mu0 = data.column_means();

    if config.mode == Mode::Gaussian {
        let tau = DVector::from_element(n, 1.0);
        let xt = centered(data, &mu0)?;
        let (psi, edges, warnings) = two_stage(&xt, config).map_err(|e| stage_error(e, 1))?;
        let record = IterationRecord {
            iteration: 1,
            max_change: 0.0,
            edge_count: edges.len(),
            positive_definite: true,
        };
        return Ok(EmState {
            mu: mu0,
            psi,
            tau,
            iteration: 1,
            max_change: 0.0,
            converged: true,
            edges,
            solver_warnings: warnings,
            history: vec![record],
        });
    }

    let mut mu = mu0;
    let mut psi = initial_psi(data, &mu, config.nu)?;
    let mut history = Vec::new();
    let mut solver_warnings = 0;
    let mut t = 0;
    loop {
        let tau = e_step(data, &mu, &psi, config.nu)?;
        let mu_next = m_step_mean(data, &tau)?;
        let xt = transform_rows(data, &tau, &mu_next)?;
        let (psi_next, edges, warnings) = two_stage(xt.matrix(), config).map_err(|e| stage_error(e, t + 1))?;
        t += 1;
        solver_warnings += warnings;
        let max_change = (psi_next.as_matrix() - psi.as_matrix()).amax();
        let pd = is_positive_definite(psi_next.as_matrix()).unwrap_or(false);
        debug_assert!(pd, "iterate {t} lost positive definiteness");
        history.push(IterationRecord {
            iteration: t,
            max_change,
            edge_count: edges.len(),
            positive_definite: pd,
        });
        mu = mu_next;
        psi = psi_next;
        let converged = max_change < config.delta;
        if converged || t >= config.max_iterations {
            return Ok(EmState {
                mu,
                psi,
                tau,
                iteration: t,
                max_change,
                converged,
                edges,
                solver_warnings,
                history,
            });
        }
    }
}

fn stage_error(e: Error, iteration: usize) -> Error {
    match e {
        Error::Estimation(msg) => Error::Estimation(format!("EM iteration {iteration}: {msg}")),
        other => other,
    }
}
