//! Monte Carlo harness: generate a true network, sample from it, estimate
//! with each configured estimator and score the result.
//!
//! A cell is one (topology, distribution, n, run) combination. The true
//! network depends only on (topology, run), so every distribution and sample
//! size of a run is scored against the same graph. Cells run in parallel and
//! are reported in cell order.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::elastic_net::PenaltyConfig;
use crate::em::{EmConfig, Mode};
use crate::error::{Error, Result};
use crate::matrix::{EdgeSet, PartialCorrelationMatrix};
use crate::metrics::{confusion, f1, frobenius_partial_corr};
use crate::neighborhood::EdgeRule;
use crate::netgen::{generate, TopologyKind, TopologySpec};
use crate::samplers::{sample, DistributionKind, DistributionSpec};
use crate::seeds::derive_seed;
use crate::selection::{build_grid, select, LambdaGrid};

fn d_p() -> usize {
    20
}
fn d_topologies() -> Vec<TopologyKind> {
    vec![TopologyKind::ScaleFree]
}
fn d_distributions() -> Vec<DistributionChoice> {
    vec![DistributionChoice::default()]
}
fn d_n() -> Vec<usize> {
    vec![100]
}
fn d_runs() -> usize {
    1
}
fn d_estimators() -> Vec<Mode> {
    vec![Mode::Gaussian, Mode::TStudent]
}
fn d_alphas() -> Vec<f64> {
    vec![0.5]
}
fn d_lambda_lo() -> f64 {
    (-6.0f64).exp()
}
fn d_lambda_hi() -> f64 {
    2.0
}
fn d_lambda_count() -> usize {
    100
}
fn d_nu() -> f64 {
    3.0
}
fn d_pd() -> f64 {
    0.85
}
fn d_delta() -> f64 {
    1e-4
}
fn d_max_iterations() -> usize {
    200
}

/// Sampling law of one experiment arm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistributionChoice {
    pub kind: DistributionKind,
    #[serde(default = "d_nu")]
    pub nu: f64,
    #[serde(default = "d_pd")]
    pub pd: f64,
}

impl Default for DistributionChoice {
    fn default() -> Self {
        Self {
            kind: DistributionKind::Normal,
            nu: d_nu(),
            pd: d_pd(),
        }
    }
}

impl DistributionChoice {
    fn spec(&self, seed: u64) -> DistributionSpec {
        DistributionSpec {
            kind: self.kind,
            nu: self.nu,
            pd: self.pd,
            seed,
        }
    }
}

/// Experiment description. Every omitted field takes its default, and the
/// resolved manifest is echoed into the summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentManifest {
    #[serde(default = "d_p")]
    pub p: usize,
    #[serde(default = "d_topologies")]
    pub topologies: Vec<TopologyKind>,
    #[serde(default = "d_distributions")]
    pub distributions: Vec<DistributionChoice>,
    #[serde(default = "d_n")]
    pub n: Vec<usize>,
    #[serde(default = "d_runs")]
    pub runs: usize,
    #[serde(default = "d_estimators")]
    pub estimators: Vec<Mode>,
    #[serde(default = "d_alphas")]
    pub alphas: Vec<f64>,
    #[serde(default = "d_lambda_lo")]
    pub lambda_lo: f64,
    #[serde(default = "d_lambda_hi")]
    pub lambda_hi: f64,
    #[serde(default = "d_lambda_count")]
    pub lambda_count: usize,
    #[serde(default)]
    pub rule: EdgeRule,
    #[serde(default)]
    pub seed: u64,
    /// Degrees of freedom assumed by the t-mode estimator.
    #[serde(default = "d_nu")]
    pub nu: f64,
    #[serde(default = "d_delta")]
    pub delta: f64,
    #[serde(default = "d_max_iterations")]
    pub max_iterations: usize,
}

impl Default for ExperimentManifest {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

impl ExperimentManifest {
    pub fn from_json(text: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(text).map_err(|e| Error::Config(format!("manifest: {e}")))?;
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let empty = [
            ("topologies", self.topologies.is_empty()),
            ("distributions", self.distributions.is_empty()),
            ("n", self.n.is_empty()),
            ("estimators", self.estimators.is_empty()),
            ("alphas", self.alphas.is_empty()),
        ];
        if let Some((name, _)) = empty.iter().find(|(_, e)| *e) {
            return Err(Error::Config(format!("manifest field '{name}' must not be empty")));
        }
        if self.runs == 0 {
            return Err(Error::Config("manifest needs runs >= 1".into()));
        }
        if let Some(n) = self.n.iter().find(|&&n| n < 2) {
            return Err(Error::Config(format!("sample size {n} is below 2")));
        }
        for &kind in &self.topologies {
            TopologySpec::new(kind, self.p, 0).validate()?;
        }
        for d in &self.distributions {
            d.spec(0).validate()?;
        }
        self.grid()?;
        for &alpha in &self.alphas {
            self.em_config(Mode::Gaussian, alpha).validate()?;
            if self.estimators.contains(&Mode::TStudent) {
                self.em_config(Mode::TStudent, alpha).validate()?;
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<LambdaGrid> {
        if self.lambda_count == 1 {
            LambdaGrid::single(self.lambda_lo)
        } else {
            build_grid(self.lambda_lo, self.lambda_hi, self.lambda_count)
        }
    }

    pub fn em_config(&self, mode: Mode, alpha: f64) -> EmConfig {
        EmConfig {
            nu: self.nu,
            penalty: PenaltyConfig {
                alpha,
                lambda: self.lambda_lo,
            },
            rule: self.rule,
            delta: self.delta,
            max_iterations: self.max_iterations,
            mode,
        }
    }

    pub fn cell_count(&self) -> usize {
        self.topologies.len() * self.distributions.len() * self.n.len() * self.runs
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Cell {
    index: usize,
    topology: usize,
    distribution: usize,
    n: usize,
    run: usize,
}

fn cells(m: &ExperimentManifest) -> Vec<Cell> {
    let mut out = Vec::with_capacity(m.cell_count());
    for topology in 0..m.topologies.len() {
        for distribution in 0..m.distributions.len() {
            for n in 0..m.n.len() {
                for run in 0..m.runs {
                    out.push(Cell {
                        index: out.len(),
                        topology,
                        distribution,
                        n,
                        run,
                    });
                }
            }
        }
    }
    out
}

/// One scored estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub cell: usize,
    pub run: usize,
    pub topology: TopologyKind,
    pub distribution: String,
    pub n: usize,
    pub estimator: Mode,
    pub alpha: f64,
    pub true_edges: usize,
    pub lambda: Option<f64>,
    pub edges: Option<usize>,
    pub f1: Option<f64>,
    pub frobenius: Option<f64>,
    /// `None` on success, otherwise the failure message.
    pub failure: Option<String>,
}

struct Scored {
    lambda: f64,
    edges: usize,
    f1: f64,
    frobenius: f64,
}

fn score(
    data: &crate::matrix::Dataset,
    grid: &LambdaGrid,
    config: &EmConfig,
    truth: &EdgeSet,
    truth_pc: &PartialCorrelationMatrix,
) -> Result<Scored> {
    let report = select(data, grid, config)?;
    let pc = report.state.precision(config).partial_correlations();
    let est = pc.edge_set();
    Ok(Scored {
        lambda: report.chosen_lambda(),
        edges: est.len(),
        f1: f1(&confusion(&est, truth)?),
        frobenius: frobenius_partial_corr(&pc, truth_pc)?,
    })
}

fn run_cell(m: &ExperimentManifest, grid: &LambdaGrid, cell: Cell) -> Vec<MetricRow> {
    let kind = m.topologies[cell.topology];
    let choice = m.distributions[cell.distribution];
    let n = m.n[cell.n];
    let label = choice.spec(0).label();
    let base = |estimator: Mode, alpha: f64, true_edges: usize| MetricRow {
        cell: cell.index,
        run: cell.run,
        topology: kind,
        distribution: label.clone(),
        n,
        estimator,
        alpha,
        true_edges,
        lambda: None,
        edges: None,
        f1: None,
        frobenius: None,
        failure: None,
    };
    let arms = || {
        m.estimators
            .iter()
            .flat_map(|&e| m.alphas.iter().map(move |&a| (e, a)))
    };

    let truth_seed = derive_seed(m.seed, &[0, cell.topology as u64, cell.run as u64]);
    let sample_seed = derive_seed(
        m.seed,
        &[1, cell.topology as u64, cell.distribution as u64, cell.n as u64, cell.run as u64],
    );
    let prepared = generate(&TopologySpec::new(kind, m.p, truth_seed))
        .and_then(|(truth, theta)| Ok((sample(&theta, n, &choice.spec(sample_seed))?, truth, theta)));
    let (data, truth, theta) = match prepared {
        Ok(v) => v,
        Err(e) => {
            return arms()
                .map(|(est, a)| MetricRow {
                    failure: Some(format!("data generation: {e}")),
                    ..base(est, a, 0)
                })
                .collect()
        }
    };
    let truth_pc = theta.partial_correlations();
    arms()
        .map(|(estimator, alpha)| {
            let row = base(estimator, alpha, truth.len());
            match score(&data, grid, &m.em_config(estimator, alpha), &truth, &truth_pc) {
                Ok(s) => MetricRow {
                    lambda: Some(s.lambda),
                    edges: Some(s.edges),
                    f1: Some(s.f1),
                    frobenius: Some(s.frobenius),
                    ..row
                },
                Err(e) => MetricRow {
                    failure: Some(e.to_string()),
                    ..row
                },
            }
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub manifest: ExperimentManifest,
    pub rows: Vec<MetricRow>,
}

pub fn run_experiment(manifest: &ExperimentManifest) -> Result<ExperimentResult> {
    manifest.validate()?;
    let grid = manifest.grid()?;
    let rows = cells(manifest)
        .into_par_iter()
        .map(|c| run_cell(manifest, &grid, c))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();
    Ok(ExperimentResult {
        manifest: manifest.clone(),
        rows,
    })
}

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map(T::to_string).unwrap_or_default()
}

pub const METRICS_HEADER: [&str; 13] = [
    "cell",
    "run",
    "topology",
    "distribution",
    "n",
    "estimator",
    "alpha",
    "true_edges",
    "lambda",
    "edges",
    "f1",
    "frobenius",
    "failure",
];

impl ExperimentResult {
    pub fn write_metrics_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(METRICS_HEADER)?;
        for r in &self.rows {
            w.write_record([
                r.cell.to_string(),
                r.run.to_string(),
                r.topology.name().to_string(),
                r.distribution.clone(),
                r.n.to_string(),
                r.estimator.to_string(),
                r.alpha.to_string(),
                r.true_edges.to_string(),
                opt(&r.lambda),
                opt(&r.edges),
                opt(&r.f1),
                opt(&r.frobenius),
                r.failure.clone().unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.failure.is_some()).count()
    }

    /// Per-arm medians keyed by (topology, distribution, n, estimator, alpha),
    /// preceded by the resolved manifest.
    pub fn summary(&self) -> serde_json::Value {
        let mut groups: BTreeMap<(String, String, usize, String, String), Vec<&MetricRow>> = BTreeMap::new();
        for r in &self.rows {
            groups
                .entry((
                    r.topology.name().to_string(),
                    r.distribution.clone(),
                    r.n,
                    r.estimator.to_string(),
                    r.alpha.to_string(),
                ))
                .or_default()
                .push(r);
        }
        let arms: Vec<serde_json::Value> = groups
            .into_iter()
            .map(|((topology, distribution, n, estimator, alpha), rows)| {
                let f1s: Vec<f64> = rows.iter().filter_map(|r| r.f1).collect();
                let fds: Vec<f64> = rows.iter().filter_map(|r| r.frobenius).collect();
                serde_json::json!({
                    "topology": topology,
                    "distribution": distribution,
                    "n": n,
                    "estimator": estimator,
                    "alpha": alpha.parse::<f64>().expect("formatted float"),
                    "runs": rows.len(),
                    "failures": rows.len() - f1s.len(),
                    "median_f1": median(&f1s),
                    "median_frobenius": median(&fds),
                })
            })
            .collect();
        serde_json::json!({
            "manifest": self.manifest,
            "rows": self.rows.len(),
            "failures": self.failures(),
            "arms": arms,
        })
    }
}

/// Median of the finite values; `None` when there are none.
pub fn median(values: &[f64]) -> Option<f64> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) })
}
