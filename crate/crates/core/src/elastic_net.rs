//! Single-response elastic-net regression by cyclic coordinate descent.
//!
//! Minimizes
//!
//! ```text
//! (1/2n) ‖y − a − X b‖² + λ [ α ‖b‖₁ + ½ (1 − α) ‖b‖² ]
//! ```
//!
//! with an unpenalized intercept `a`. Predictors are **not** standardized:
//! callers that want scale-free penalties must rescale columns themselves.
//! Coordinate updates run on the centered Gram matrix ("covariance updates"),
//! so one Gram matrix can serve many regressions that share a design.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mixing weight `alpha` and overall strength `lambda` of the penalty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyConfig {
    pub alpha: f64,
    pub lambda: f64,
}

impl PenaltyConfig {
    pub fn new(alpha: f64, lambda: f64) -> Result<Self> {
        let cfg = Self { alpha, lambda };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Config(format!(
                "alpha must lie in [0, 1], got {}",
                self.alpha
            )));
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::Config(format!(
                "lambda must be finite and non-negative, got {}",
                self.lambda
            )));
        }
        Ok(())
    }

    fn l1(&self) -> f64 {
        self.lambda * self.alpha
    }

    fn l2(&self) -> f64 {
        self.lambda * (1.0 - self.alpha)
    }

    /// `λα‖b‖₁ + λ(1−α)/2 ‖b‖²`.
    pub fn penalty(&self, b: &DVector<f64>) -> f64 {
        self.l1() * b.iter().map(|v| v.abs()).sum::<f64>() + 0.5 * self.l2() * b.norm_squared()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Convergence threshold on the largest coefficient change in a sweep.
    pub tol: f64,
    /// Required subgradient (KKT) residual before a fit is declared converged.
    pub kkt_tol: f64,
    pub max_sweeps: usize,
    /// Keep the objective value after every sweep.
    pub record_objective: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-7,
            kkt_tol: 1e-9,
            max_sweeps: 10_000,
            record_objective: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ElasticNetFit {
    pub coefficients: DVector<f64>,
    pub intercept: f64,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Largest violation of the optimality conditions at return.
    pub kkt_residual: f64,
    /// Objective after each sweep; empty unless requested.
    pub objective_trace: Vec<f64>,
}

/// Sufficient statistics of a centered regression problem, all scaled by `1/n`.
#[derive(Debug, Clone)]
pub(crate) struct GramProblem {
    pub gram: DMatrix<f64>,
    pub xty: DVector<f64>,
    pub yty: f64,
}

pub(crate) struct CoordinateSolution {
    pub coefficients: DVector<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub kkt_residual: f64,
    pub trace: Vec<f64>,
}

fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

fn kkt_residual(grad: &DVector<f64>, b: &DVector<f64>, penalty: &PenaltyConfig) -> f64 {
    let (l1, l2) = (penalty.l1(), penalty.l2());
    grad.iter()
        .zip(b.iter())
        .map(|(&g, &bj)| {
            if bj != 0.0 {
                (g - l2 * bj - l1 * bj.signum()).abs()
            } else {
                (g.abs() - l1).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}

fn objective(problem: &GramProblem, b: &DVector<f64>, grad: &DVector<f64>, penalty: &PenaltyConfig) -> f64 {
    // grad = c − G b, so bᵀGb = bᵀ(c − grad)
    let cb = problem.xty.dot(b);
    let quad = b.dot(&(&problem.xty - grad));
    0.5 * (problem.yty - 2.0 * cb + quad) + penalty.penalty(b)
}

pub(crate) fn solve_gram(
    problem: &GramProblem,
    penalty: &PenaltyConfig,
    opts: &SolverOptions,
) -> CoordinateSolution {
    let m = problem.xty.len();
    let (l1, l2) = (penalty.l1(), penalty.l2());
    let g = &problem.gram;
    let mut b = DVector::<f64>::zeros(m);
    let mut grad = problem.xty.clone();
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    let mut kkt = kkt_residual(&grad, &b, penalty);

    if m == 0 {
        return CoordinateSolution {
            coefficients: b,
            objective: 0.5 * problem.yty,
            iterations: 0,
            converged: true,
            kkt_residual: 0.0,
            trace,
        };
    }

    while iterations < opts.max_sweeps {
        iterations += 1;
        let mut max_change = 0.0_f64;
        for j in 0..m {
            let denom = g[(j, j)] + l2;
            if denom <= 0.0 {
                continue;
            }
            let old = b[j];
            let z = grad[j] + g[(j, j)] * old;
            let new = soft_threshold(z, l1) / denom;
            if new != old {
                let delta = new - old;
                b[j] = new;
                grad.axpy(-delta, &g.column(j), 1.0);
                max_change = max_change.max(delta.abs());
            }
        }
        // refresh to stop drift in the incremental gradient
        grad = &problem.xty - g * &b;
        if opts.record_objective {
            trace.push(objective(problem, &b, &grad, penalty));
        }
        if max_change < opts.tol {
            kkt = kkt_residual(&grad, &b, penalty);
            if kkt <= opts.kkt_tol {
                converged = true;
                break;
            }
        }
    }
    if !converged {
        kkt = kkt_residual(&grad, &b, penalty);
    }
    CoordinateSolution {
        objective: objective(problem, &b, &grad, penalty),
        coefficients: b,
        iterations,
        converged,
        kkt_residual: kkt,
        trace,
    }
}

fn validate_inputs(design: &DMatrix<f64>, response: &DVector<f64>) -> Result<()> {
    if design.nrows() != response.len() {
        return Err(Error::Shape(format!(
            "design has {} rows but response has {}",
            design.nrows(),
            response.len()
        )));
    }
    if response.len() < 2 {
        return Err(Error::Data("need at least 2 observations".into()));
    }
    if design.iter().chain(response.iter()).any(|v| !v.is_finite()) {
        return Err(Error::Data("non-finite value in regression inputs".into()));
    }
    Ok(())
}

struct Centered {
    problem: GramProblem,
    x_mean: DVector<f64>,
    y_mean: f64,
}

fn center(design: &DMatrix<f64>, response: &DVector<f64>) -> Centered {
    let n = design.nrows() as f64;
    let x_mean = DVector::from_iterator(design.ncols(), design.column_iter().map(|c| c.sum() / n));
    let y_mean = response.sum() / n;
    let mut xc = design.clone();
    for (j, mut col) in xc.column_iter_mut().enumerate() {
        col.add_scalar_mut(-x_mean[j]);
    }
    let yc = response.add_scalar(-y_mean);
    let gram = xc.tr_mul(&xc) / n;
    let xty = xc.tr_mul(&yc) / n;
    Centered {
        problem: GramProblem {
            gram,
            xty,
            yty: yc.norm_squared() / n,
        },
        x_mean,
        y_mean,
    }
}

/// Fits one elastic-net regression with default solver settings.
pub fn solve(design: &DMatrix<f64>, response: &DVector<f64>, penalty: &PenaltyConfig) -> Result<ElasticNetFit> {
    solve_with(design, response, penalty, &SolverOptions::default())
}

pub fn solve_with(
    design: &DMatrix<f64>,
    response: &DVector<f64>,
    penalty: &PenaltyConfig,
    opts: &SolverOptions,
) -> Result<ElasticNetFit> {
    validate_inputs(design, response)?;
    penalty.validate()?;
    let centered = center(design, response);
    let sol = solve_gram(&centered.problem, penalty, opts);
    let intercept = centered.y_mean - centered.x_mean.dot(&sol.coefficients);
    Ok(ElasticNetFit {
        coefficients: sol.coefficients,
        intercept,
        objective: sol.objective,
        iterations: sol.iterations,
        converged: sol.converged,
        kkt_residual: sol.kkt_residual,
        objective_trace: sol.trace,
    })
}

/// Smallest `λ` at which every coefficient is zero:
/// `max_j |x_jᵀ(y − ȳ)| / (n α)`. The value is rounded up by a few ulps so
/// that solving at exactly `λ_max` reproduces the all-zero solution.
pub fn lambda_max(design: &DMatrix<f64>, response: &DVector<f64>, alpha: f64) -> Result<f64> {
    validate_inputs(design, response)?;
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Domain(format!(
            "lambda_max needs alpha in (0, 1]; ridge never zeroes coefficients (alpha = {alpha})"
        )));
    }
    Ok(lambda_max_gram(&center(design, response).problem, alpha))
}

pub(crate) fn lambda_max_gram(problem: &GramProblem, alpha: f64) -> f64 {
    problem.xty.amax() / alpha * (1.0 + 4.0 * f64::EPSILON)
}
