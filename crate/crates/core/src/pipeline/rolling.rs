//! Rolling-window network estimation on a residual panel.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytics::{measures, NetworkMeasures};
use crate::em::{EmConfig, EmState};
use crate::error::{Error, Result};
use crate::matrix::{Dataset, PartialCorrelationMatrix};
use crate::selection::{select, LambdaGrid};

pub const ROWS_PER_YEAR: usize = 252;
pub const ROWS_PER_MONTH: usize = 21;

/// Half-open row range `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowBounds {
    pub id: usize,
    pub start: usize,
    pub end: usize,
}

/// Windows of `length` rows advancing by `step`; `(rows − length)/step + 1`
/// of them. A trailing partial window is dropped.
pub fn window_bounds(rows: usize, length: usize, step: usize) -> Result<Vec<WindowBounds>> {
    if length == 0 || step == 0 {
        return Err(Error::Config("window length and step must be positive".into()));
    }
    if rows < length {
        return Err(Error::Data(format!("table has {rows} rows, shorter than the {length}-row window")));
    }
    let count = (rows - length) / step + 1;
    Ok((0..count)
        .map(|id| WindowBounds {
            id,
            start: id * step,
            end: id * step + length,
        })
        .collect())
}

#[derive(Debug, Clone)]
pub struct WindowEstimate {
    pub lambda: f64,
    pub bic: f64,
    pub state: EmState,
    pub partial_correlations: PartialCorrelationMatrix,
    pub measures: NetworkMeasures,
}

#[derive(Debug, Clone)]
pub struct WindowOutcome {
    pub bounds: WindowBounds,
    pub result: std::result::Result<WindowEstimate, String>,
}

impl WindowOutcome {
    /// Mean signed strength, or `None` for a failed window.
    pub fn mean_strength(&self) -> Option<f64> {
        self.result.as_ref().ok().map(|w| w.measures.mean_strength)
    }
}

fn estimate_window(panel: &DMatrix<f64>, b: WindowBounds, grid: &LambdaGrid, config: &EmConfig) -> Result<WindowEstimate> {
    let data = Dataset::new(panel.rows(b.start, b.end - b.start).into_owned())?;
    let report = select(&data, grid, config)?;
    let pc = report.state.precision(config).partial_correlations();
    Ok(WindowEstimate {
        lambda: report.chosen_lambda(),
        bic: report.chosen_bic(),
        measures: measures(&pc),
        partial_correlations: pc,
        state: report.state,
    })
}

/// Estimates each window independently. Failures are recorded per window
/// and do not stop the sequence.
pub fn rolling_estimate(
    panel: &DMatrix<f64>,
    length: usize,
    step: usize,
    grid: &LambdaGrid,
    config: &EmConfig,
) -> Result<Vec<WindowOutcome>> {
    config.validate()?;
    let bounds = window_bounds(panel.nrows(), length, step)?;
    Ok(bounds
        .into_par_iter()
        .map(|b| WindowOutcome {
            bounds: b,
            result: estimate_window(panel, b, grid, config).map_err(|e| e.to_string()),
        })
        .collect())
}
