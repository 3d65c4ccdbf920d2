//! Penalty grids and BIC-based model selection.

use std::io::Write;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::em::{estimate, EmConfig, EmState, Mode};
use crate::error::{Error, Result};
use crate::matrix::Dataset;

/// Exponentially spaced, strictly increasing penalty values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaGrid {
    values: Vec<f64>,
}

impl LambdaGrid {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn lo(&self) -> f64 {
        self.values[0]
    }

    pub fn hi(&self) -> f64 {
        *self.values.last().expect("non-empty grid")
    }

    /// A grid with a single value, for fixed-penalty runs.
    pub fn single(lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::Config(format!("invalid lambda {lambda}")));
        }
        Ok(Self {
            values: vec![lambda],
        })
    }
}

/// `λ_i = lo · (hi/lo)^((i−1)/(count−1))`, with both endpoints reproduced exactly.
pub fn build_grid(lo: f64, hi: f64, count: usize) -> Result<LambdaGrid> {
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(Error::Config(format!(
            "lambda grid needs 0 < lo < hi, got lo={lo}, hi={hi}"
        )));
    }
    if count < 2 {
        return Err(Error::Config(format!("lambda grid needs at least 2 points, got {count}")));
    }
    let log_ratio = (hi / lo).ln();
    let last = (count - 1) as f64;
    let mut values: Vec<f64> = (0..count)
        .map(|i| lo * (log_ratio * i as f64 / last).exp())
        .collect();
    values[0] = lo;
    values[count - 1] = hi;
    Ok(LambdaGrid { values })
}

/// Log-likelihood of the data at the state's parameters: multivariate t
/// with fixed `ν` in t mode, Gaussian otherwise.
pub fn log_likelihood(state: &EmState, data: &Dataset, config: &EmConfig) -> Result<f64> {
    let p = data.p();
    if state.psi.dim() != p || state.mu.len() != p {
        return Err(Error::Shape("state and data dimensions differ".into()));
    }
    let chol = crate::linalg::Cholesky::new(state.psi.as_matrix())
        .ok_or_else(|| Error::Domain("inverse scatter is not positive definite".into()))?;
    let log_det = chol.log_det();
    let mut d = data.matrix().clone();
    for (j, mut col) in d.column_iter_mut().enumerate() {
        col.add_scalar_mut(-state.mu[j]);
    }
    let dq = &d * state.psi.as_matrix();
    let q = DVector::from_iterator(data.n(), (0..data.n()).map(|i| d.row(i).dot(&dq.row(i))));
    let n = data.n() as f64;
    let pf = p as f64;
    let ll = match config.mode {
        Mode::Gaussian => {
            n * (-0.5 * pf * (2.0 * std::f64::consts::PI).ln() + 0.5 * log_det) - 0.5 * q.sum()
        }
        Mode::TStudent => {
            let nu = config.nu;
            let norm = ln_gamma(0.5 * (nu + pf)) - ln_gamma(0.5 * nu) - 0.5 * pf * (nu * std::f64::consts::PI).ln()
                + 0.5 * log_det;
            n * norm - 0.5 * (nu + pf) * q.iter().map(|qi| (qi / nu).ln_1p()).sum::<f64>()
        }
    };
    if !ll.is_finite() {
        return Err(Error::Numeric("log-likelihood is not finite".into()));
    }
    Ok(ll)
}

/// Number of free parameters of the inverse scatter: edges plus diagonal.
pub fn degrees_of_freedom(state: &EmState) -> usize {
    state.edges.len() + state.psi.dim()
}

/// `−2 ℓ + log(n) · (|E| + p)`.
pub fn bic(state: &EmState, data: &Dataset, config: &EmConfig) -> Result<f64> {
    let ll = log_likelihood(state, data, config)?;
    Ok(-2.0 * ll + (data.n() as f64).ln() * degrees_of_freedom(state) as f64)
}

/// Outcome of one grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub lambda: f64,
    pub bic: Option<f64>,
    pub log_likelihood: Option<f64>,
    pub edge_count: Option<usize>,
    pub iterations: Option<usize>,
    pub converged: bool,
    /// Failure message; failed candidates are excluded from the comparison.
    pub failure: Option<String>,
}

#[derive(Debug, Clone)]
pub struct SelectionReport {
    pub records: Vec<CandidateRecord>,
    pub chosen_index: usize,
    pub state: EmState,
}

impl SelectionReport {
    pub fn chosen(&self) -> &CandidateRecord {
        &self.records[self.chosen_index]
    }

    pub fn chosen_lambda(&self) -> f64 {
        self.chosen().lambda
    }

    pub fn chosen_bic(&self) -> f64 {
        self.chosen().bic.expect("chosen candidate has a score")
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "chosen_lambda": self.chosen_lambda(),
            "chosen_bic": self.chosen_bic(),
            "candidates": self.records,
        })
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["lambda", "bic", "log_likelihood", "edges", "iterations", "converged", "failure"])?;
        for r in &self.records {
            w.write_record([
                r.lambda.to_string(),
                r.bic.map(|v| v.to_string()).unwrap_or_default(),
                r.log_likelihood.map(|v| v.to_string()).unwrap_or_default(),
                r.edge_count.map(|v| v.to_string()).unwrap_or_default(),
                r.iterations.map(|v| v.to_string()).unwrap_or_default(),
                r.converged.to_string(),
                r.failure.clone().unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn score(data: &Dataset, config: &EmConfig) -> Result<(EmState, f64, f64)> {
    let state = estimate(data, config)?;
    let ll = log_likelihood(&state, data, config)?;
    let b = -2.0 * ll + (data.n() as f64).ln() * degrees_of_freedom(&state) as f64;
    Ok((state, ll, b))
}

/// Picks the BIC-minimizing candidate from already scored records. Ties go
/// to the larger penalty.
pub fn argmin_bic(records: &[CandidateRecord]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, r) in records.iter().enumerate() {
        let Some(b) = r.bic else { continue };
        match best {
            None => best = Some(i),
            Some(j) => {
                let bj = records[j].bic.expect("scored");
                if b < bj || (b == bj && r.lambda >= records[j].lambda) {
                    best = Some(i);
                }
            }
        }
    }
    best
}

/// Estimates at every grid value and returns the BIC-optimal model.
pub fn select(data: &Dataset, grid: &LambdaGrid, config: &EmConfig) -> Result<SelectionReport> {
    config.validate()?;
    if grid.is_empty() {
        return Err(Error::Config("empty lambda grid".into()));
    }
    let outcomes: Vec<(CandidateRecord, Option<EmState>)> = grid
        .values()
        .par_iter()
        .map(|&lambda| {
            let cfg = config.with_lambda(lambda);
            match score(data, &cfg) {
                Ok((state, ll, b)) => (
                    CandidateRecord {
                        lambda,
                        bic: Some(b),
                        log_likelihood: Some(ll),
                        edge_count: Some(state.edges.len()),
                        iterations: Some(state.iteration),
                        converged: state.converged,
                        failure: None,
                    },
                    Some(state),
                ),
                Err(e) => (
                    CandidateRecord {
                        lambda,
                        bic: None,
                        log_likelihood: None,
                        edge_count: None,
                        iterations: None,
                        converged: false,
                        failure: Some(e.to_string()),
                    },
                    None,
                ),
            }
        })
        .collect();
    let (records, mut states): (Vec<_>, Vec<_>) = outcomes.into_iter().unzip();
    let Some(chosen_index) = argmin_bic(&records) else {
        return Err(Error::Selection {
            failures: records
                .iter()
                .map(|r| (r.lambda, r.failure.clone().unwrap_or_default()))
                .collect(),
        });
    };
    let state = states[chosen_index].take().expect("scored candidate has a state");
    Ok(SelectionReport {
        records,
        chosen_index,
        state,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{EdgeSet, PrecisionMatrix};
    use nalgebra::DMatrix;

    #[test]
    fn grid_endpoints_and_ratio() {
        let lo = (-6.0_f64).exp();
        let g = build_grid(lo, 2.0, 100).unwrap();
        assert_eq!(g.len(), 100);
        assert_eq!(g.lo(), lo);
        assert_eq!(g.hi(), 2.0);
        assert!((g.lo() - 0.002478752176666).abs() < 1e-12);
        let r = (2.0 / lo).powf(1.0 / 99.0);
        for w in g.values().windows(2) {
            assert!((w[1] / w[0] - r).abs() < 1e-12);
        }
        let two = build_grid(0.5, 3.0, 2).unwrap();
        assert_eq!(two.values(), &[0.5, 3.0]);
        assert!(build_grid(0.0, 1.0, 10).is_err());
        assert!(build_grid(2.0, 1.0, 10).is_err());
        assert!(build_grid(0.1, 1.0, 1).is_err());
    }

    fn state_with(psi: DMatrix<f64>, edges: EdgeSet, mu: Vec<f64>) -> EmState {
        let n = 1;
        EmState {
            mu: DVector::from_vec(mu),
            psi: PrecisionMatrix::new(psi).unwrap(),
            tau: DVector::from_element(n, 1.0),
            iteration: 1,
            max_change: 0.0,
            converged: true,
            edges,
            solver_warnings: 0,
            history: Vec::new(),
        }
    }

    #[test]
    fn gaussian_bic_by_hand() {
        // p = 2, n = 3, Ψ = [[2, -0.5], [-0.5, 1]], μ = 0
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 2.0, -1.0, 1.0]);
        let data = Dataset::new(x).unwrap();
        let psi = DMatrix::from_row_slice(2, 2, &[2.0, -0.5, -0.5, 1.0]);
        let state = state_with(psi, EdgeSet::complete(2), vec![0.0, 0.0]);
        let cfg = EmConfig {
            mode: Mode::Gaussian,
            ..EmConfig::default()
        };
        // quadratic forms: row1 = 2, row2 = 4, row3 = 2 + 1 + 1 = 4 → total 10
        let log_det = (2.0_f64 - 0.25).ln();
        let ll = 3.0 * (-(2.0 * std::f64::consts::PI).ln() + 0.5 * log_det) - 0.5 * 10.0;
        let expected = -2.0 * ll + 3.0_f64.ln() * 3.0;
        assert!((bic(&state, &data, &cfg).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn t_likelihood_matches_density_formula() {
        // p = 1 reduces to a scaled univariate t density
        let x = DMatrix::from_column_slice(2, 1, &[0.5, -1.5]);
        let data = Dataset::new(x).unwrap();
        let state = state_with(DMatrix::from_element(1, 1, 4.0), EdgeSet::empty(1), vec![0.0]);
        let cfg = EmConfig::default();
        let t = statrs::distribution::StudentsT::new(0.0, 0.5, 3.0).unwrap();
        use statrs::distribution::Continuous;
        let expected = t.ln_pdf(0.5) + t.ln_pdf(-1.5);
        assert!((log_likelihood(&state, &data, &cfg).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn fewer_edges_win_equal_likelihood() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 2.0, -1.0, 1.0]);
        let data = Dataset::new(x).unwrap();
        let psi = DMatrix::identity(2, 2);
        let sparse = state_with(psi.clone(), EdgeSet::empty(2), vec![0.0, 0.0]);
        let dense = state_with(psi, EdgeSet::complete(2), vec![0.0, 0.0]);
        let cfg = EmConfig::default();
        assert!(bic(&sparse, &data, &cfg).unwrap() < bic(&dense, &data, &cfg).unwrap());
    }

    #[test]
    fn ties_prefer_larger_lambda() {
        let rec = |lambda: f64, bic: Option<f64>| CandidateRecord {
            lambda,
            bic,
            log_likelihood: None,
            edge_count: None,
            iterations: None,
            converged: true,
            failure: None,
        };
        let records = vec![rec(0.1, Some(5.0)), rec(0.2, Some(3.0)), rec(0.4, Some(3.0)), rec(0.8, None), rec(1.6, Some(4.0))];
        assert_eq!(argmin_bic(&records), Some(2));
        assert_eq!(argmin_bic(&[rec(0.1, None)]), None);
    }
}
