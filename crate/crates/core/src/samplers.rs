//! Multivariate samplers for simulation studies: normal, t via the gamma
//! scale mixture, and a contaminated normal.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Cholesky;
use crate::matrix::{Dataset, PrecisionMatrix};
use crate::seeds;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistributionKind {
    Normal,
    T,
    ContaminatedNormal,
}

impl FromStr for DistributionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "normal" => Ok(Self::Normal),
            "t" => Ok(Self::T),
            "contaminated-normal" | "contaminated" => Ok(Self::ContaminatedNormal),
            other => Err(Error::Config(format!("unknown distribution '{other}'"))),
        }
    }
}

fn d_nu() -> f64 {
    3.0
}
fn d_pd() -> f64 {
    0.85
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistributionSpec {
    pub kind: DistributionKind,
    /// Degrees of freedom (t only).
    #[serde(default = "d_nu")]
    pub nu: f64,
    /// Probability that a contaminated-normal row keeps the correlated law.
    #[serde(default = "d_pd")]
    pub pd: f64,
    #[serde(default)]
    pub seed: u64,
}

impl DistributionSpec {
    pub fn normal(seed: u64) -> Self {
        Self {
            kind: DistributionKind::Normal,
            nu: d_nu(),
            pd: d_pd(),
            seed,
        }
    }

    pub fn t(nu: f64, seed: u64) -> Self {
        Self {
            kind: DistributionKind::T,
            nu,
            ..Self::normal(seed)
        }
    }

    pub fn contaminated(pd: f64, seed: u64) -> Self {
        Self {
            kind: DistributionKind::ContaminatedNormal,
            pd,
            ..Self::normal(seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind == DistributionKind::T && !(self.nu > 2.0) {
            return Err(Error::Config(format!("t sampler needs nu > 2, got {}", self.nu)));
        }
        if !(0.0..=1.0).contains(&self.pd) {
            return Err(Error::Config(format!("pd must lie in [0, 1], got {}", self.pd)));
        }
        Ok(())
    }

    /// Short label used in result tables.
    pub fn label(&self) -> String {
        match self.kind {
            DistributionKind::Normal => "normal".into(),
            DistributionKind::T => format!("t{}", self.nu),
            DistributionKind::ContaminatedNormal => format!("contaminated{}", self.pd),
        }
    }
}

impl fmt::Display for DistributionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// I.i.d. Gamma(shape ν/2, rate ν/2) draws; mean 1.
pub fn sample_gamma_tau(nu: f64, n: usize, seed: u64) -> Result<DVector<f64>> {
    let mut rng = seeds::rng(seed);
    gamma_draws(nu, n, &mut rng)
}

fn gamma_draws<R: Rng>(nu: f64, n: usize, rng: &mut R) -> Result<DVector<f64>> {
    let g = Gamma::new(0.5 * nu, 2.0 / nu)
        .map_err(|e| Error::Domain(format!("invalid gamma parameters for nu={nu}: {e}")))?;
    Ok(DVector::from_iterator(n, (0..n).map(|_| g.sample(rng))))
}

/// Draws `n` rows whose covariance is `Θ⁻¹` (for the t law, via the scatter
/// `(ν−2)/ν Θ⁻¹`).
pub fn sample(theta: &PrecisionMatrix, n: usize, spec: &DistributionSpec) -> Result<Dataset> {
    spec.validate()?;
    if n < 2 {
        return Err(Error::Config(format!("need at least 2 rows, got {n}")));
    }
    let p = theta.dim();
    let sigma = theta.inverse();
    let chol = Cholesky::new(&sigma)
        .ok_or_else(|| Error::Domain("covariance implied by theta is not positive definite".into()))?;
    let l = chol.factor();
    let mut rng = seeds::rng(spec.seed);
    let mut z = DMatrix::<f64>::zeros(p, n);
    for v in z.iter_mut() {
        *v = rng.sample(StandardNormal);
    }
    // correlated draws, one column per observation
    let mut x = l * &z;
    match spec.kind {
        DistributionKind::Normal => {}
        DistributionKind::T => {
            let mut tau_rng = seeds::rng(seeds::derive_seed(spec.seed, &[1]));
            let tau = gamma_draws(spec.nu, n, &mut tau_rng)?;
            let shrink = ((spec.nu - 2.0) / spec.nu).sqrt();
            for (i, mut col) in x.column_iter_mut().enumerate() {
                col *= shrink / tau[i].sqrt();
            }
        }
        DistributionKind::ContaminatedNormal => {
            let mut gate_rng = seeds::rng(seeds::derive_seed(spec.seed, &[2]));
            let sd: Vec<f64> = (0..p).map(|j| sigma[(j, j)].sqrt()).collect();
            for i in 0..n {
                let keep = gate_rng.random::<f64>() < spec.pd;
                if !keep {
                    for j in 0..p {
                        x[(j, i)] = sd[j] * z[(j, i)];
                    }
                }
            }
        }
    }
    Dataset::new(x.transpose())
}
