//! Empirical workflow: prices → log-returns → AR-GARCH residuals → rolling
//! network estimation.

pub mod garch;
pub mod ks;
pub mod optim;
pub mod returns;
pub mod rolling;

use chrono::NaiveDate;
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::em::EmConfig;
use crate::error::{Error, Result};
use crate::selection::LambdaGrid;

pub use garch::{fit_ar_garch, simulate_ar_garch, GarchFit, GarchParams};
pub use ks::{fit_t_dof, ks_statistic, KsOutcome, Reference};
pub use returns::{log_returns, PriceTable, ReturnTable};
pub use rolling::{rolling_estimate, window_bounds, WindowBounds, WindowOutcome, ROWS_PER_MONTH, ROWS_PER_YEAR};

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub window: usize,
    pub step: usize,
    pub grid: LambdaGrid,
    pub em: EmConfig,
}

/// Residual diagnostics for one series.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeriesDiagnostics {
    pub name: String,
    pub params: GarchParams,
    pub log_likelihood: f64,
    pub ks_normal: KsOutcome,
    pub fitted_nu: f64,
    pub ks_t: KsOutcome,
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub names: Vec<String>,
    /// Dates of the residual rows when the price table is dated.
    pub dates: Option<Vec<NaiveDate>>,
    /// Standardized residuals, one column per series.
    pub residuals: DMatrix<f64>,
    pub diagnostics: Vec<SeriesDiagnostics>,
    pub windows: Vec<WindowOutcome>,
}

fn stage<T>(name: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Data(m) => Error::Data(format!("{name}: {m}")),
        Error::Fit(m) => Error::Fit(format!("{name}: {m}")),
        Error::Config(m) => Error::Config(format!("{name}: {m}")),
        Error::Estimation(m) => Error::Estimation(format!("{name}: {m}")),
        Error::Numeric(m) => Error::Numeric(format!("{name}: {m}")),
        other => other,
    })
}

fn filter_series(name: &str, series: &[f64]) -> Result<(GarchFit, SeriesDiagnostics)> {
    let fit = stage(&format!("garch[{name}]"), fit_ar_garch(series))?;
    let ks_normal = stage("ks", ks_statistic(&fit.residuals, &Reference::standard_normal()))?;
    let fitted_nu = stage("ks", fit_t_dof(&fit.residuals))?;
    let ks_t = stage("ks", ks_statistic(&fit.residuals, &Reference::unit_variance_t(fitted_nu)))?;
    let diag = SeriesDiagnostics {
        name: name.to_string(),
        params: fit.params,
        log_likelihood: fit.log_likelihood,
        ks_normal,
        fitted_nu,
        ks_t,
    };
    Ok((fit, diag))
}

/// Runs the full chain. Rows with any missing return are dropped before
/// filtering so that every series shares one calendar.
pub fn run(prices: &PriceTable, config: &PipelineConfig) -> Result<PipelineOutput> {
    let returns = stage("returns", log_returns(prices))?.complete_rows();
    let p = returns.names.len();
    let columns: Vec<Vec<f64>> = (0..p)
        .map(|j| returns.column(j).expect("complete rows"))
        .collect();
    let fits = columns
        .par_iter()
        .zip(returns.names.par_iter())
        .map(|(series, name)| filter_series(name, series))
        .collect::<Result<Vec<_>>>()?;
    let t = fits[0].0.residuals.len();
    let residuals = DMatrix::from_fn(t, p, |i, j| fits[j].0.residuals[i]);
    let windows = stage(
        "rolling",
        rolling_estimate(&residuals, config.window, config.step, &config.grid, &config.em),
    )?;
    Ok(PipelineOutput {
        names: returns.names.clone(),
        dates: returns.dates.as_ref().map(|d| d[1..].to_vec()),
        residuals,
        diagnostics: fits.into_iter().map(|(_, d)| d).collect(),
        windows,
    })
}
