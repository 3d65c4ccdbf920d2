//! AR(1)-GARCH(1,1) filtering by Gaussian quasi-maximum likelihood.
//!
//! ```text
//! r_t  = c + φ r_{t−1} + ε_t
//! σ²_t = ω + a ε²_{t−1} + b σ²_{t−1}
//! ```
//!
//! The first residual uses the sample variance of ε as its conditional
//! variance. Parameters are searched in an unconstrained space that maps onto
//! `|φ| < 1`, `ω > 0`, `a, b ≥ 0`, `a + b < 1`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::optim::{nelder_mead, NelderMeadOptions};
use crate::error::{Error, Result};
use crate::seeds;

pub const MIN_SERIES_LEN: usize = 250;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GarchParams {
    pub c: f64,
    pub phi: f64,
    pub omega: f64,
    pub a: f64,
    pub b: f64,
}

impl GarchParams {
    pub fn is_admissible(&self) -> bool {
        self.omega > 0.0 && self.a >= 0.0 && self.b >= 0.0 && self.a + self.b < 1.0 && self.phi.abs() < 1.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GarchFit {
    pub params: GarchParams,
    /// Standardized residuals `ε_t / σ_t`, one shorter than the input.
    pub residuals: Vec<f64>,
    pub conditional_variance: Vec<f64>,
    pub log_likelihood: f64,
    pub converged: bool,
    pub evaluations: usize,
}

/// Innovations and conditional variances implied by `params`.
pub fn filter(params: &GarchParams, series: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let eps: Vec<f64> = series
        .windows(2)
        .map(|w| w[1] - params.c - params.phi * w[0])
        .collect();
    let m = eps.len() as f64;
    let mean = eps.iter().sum::<f64>() / m;
    let var0 = eps.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / m;
    let mut sigma2 = Vec::with_capacity(eps.len());
    let mut prev = var0;
    for t in 0..eps.len() {
        let s = if t == 0 {
            var0
        } else {
            params.omega + params.a * eps[t - 1].powi(2) + params.b * prev
        };
        sigma2.push(s);
        prev = s;
    }
    (eps, sigma2)
}

fn gaussian_loglik(eps: &[f64], sigma2: &[f64]) -> f64 {
    let ln2pi = (2.0 * std::f64::consts::PI).ln();
    -0.5 * eps
        .iter()
        .zip(sigma2)
        .map(|(e, s)| ln2pi + s.ln() + e * e / s)
        .sum::<f64>()
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Maps between the unconstrained search space and model parameters, scaled
/// to the series so the simplex works with O(1) coordinates.
struct Transform {
    scale: f64,
    var: f64,
}

impl Transform {
    fn to_params(&self, x: &[f64]) -> GarchParams {
        let persistence = 0.9999 * logistic(x[3]);
        let share = logistic(x[4]);
        GarchParams {
            c: x[0] * self.scale,
            phi: 0.9999 * x[1].tanh(),
            omega: x[2].exp() * self.var,
            a: persistence * share,
            b: persistence * (1.0 - share),
        }
    }

    fn encode(&self, p: &GarchParams) -> Vec<f64> {
        let persistence = ((p.a + p.b) / 0.9999).clamp(1e-6, 1.0 - 1e-6);
        let share = (p.a / (p.a + p.b)).clamp(1e-6, 1.0 - 1e-6);
        vec![
            p.c / self.scale,
            (p.phi / 0.9999).clamp(-0.999, 0.999).atanh(),
            (p.omega / self.var).ln(),
            logit(persistence),
            logit(share),
        ]
    }
}

fn residual_variance(z: &[f64]) -> f64 {
    let m = z.len() as f64;
    let mean = z.iter().sum::<f64>() / m;
    z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / m
}

/// Fits the model by Nelder–Mead with restarts from the running optimum and
/// from a few alternative starting points.
pub fn fit_ar_garch(series: &[f64]) -> Result<GarchFit> {
    if series.len() < MIN_SERIES_LEN {
        return Err(Error::Data(format!(
            "AR-GARCH fitting needs at least {MIN_SERIES_LEN} observations, got {}",
            series.len()
        )));
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("series contains non-finite values".into()));
    }
    let n = series.len() as f64;
    let mean = series.iter().sum::<f64>() / n;
    let var = series.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    if !(var > 1e-300) {
        return Err(Error::Fit("series has zero variance; GARCH model is degenerate".into()));
    }
    let tr = Transform {
        scale: var.sqrt(),
        var,
    };
    let lag1 = series.windows(2).map(|w| (w[0] - mean) * (w[1] - mean)).sum::<f64>() / (n * var);
    let phi0 = lag1.clamp(-0.5, 0.5);

    let objective = |x: &[f64]| {
        let p = tr.to_params(x);
        let (eps, s2) = filter(&p, series);
        if s2.iter().any(|s| !(*s > 0.0)) {
            return f64::INFINITY;
        }
        -gaussian_loglik(&eps, &s2)
    };

    let starts = [(0.05, 0.90), (0.10, 0.80), (0.03, 0.95), (0.15, 0.50)];
    let opts = NelderMeadOptions::default();
    let mut best: Option<(Vec<f64>, f64, bool)> = None;
    let mut evaluations = 0;
    for (a0, b0) in starts {
        let p0 = GarchParams {
            c: mean * (1.0 - phi0),
            phi: phi0,
            omega: var * (1.0 - a0 - b0),
            a: a0,
            b: b0,
        };
        let mut x = tr.encode(&p0);
        let mut value = f64::INFINITY;
        let mut converged = false;
        for _ in 0..6 {
            let m = nelder_mead(objective, &x, &opts);
            evaluations += m.evaluations;
            let improved = value - m.value;
            x = m.x;
            converged = m.converged;
            let done = improved.abs() < 1e-9 * (1.0 + m.value.abs());
            value = m.value;
            if done && converged {
                break;
            }
        }
        if !value.is_finite() {
            continue;
        }
        let p = tr.to_params(&x);
        let (eps, s2) = filter(&p, series);
        let z: Vec<f64> = eps.iter().zip(&s2).map(|(e, s)| e / s.sqrt()).collect();
        let ok = converged && (0.8..=1.2).contains(&residual_variance(&z));
        let better = match &best {
            None => true,
            Some((_, v, c)) => (ok && !c) || (ok == *c && value < *v),
        };
        if better {
            best = Some((x, value, ok));
        }
        if ok {
            break;
        }
    }

    let Some((x, value, ok)) = best else {
        return Err(Error::Fit("quasi-likelihood is not finite at any starting point".into()));
    };
    if !ok {
        return Err(Error::Fit(format!(
            "optimizer did not converge to an admissible fit after restarts (neg. loglik {value:.6})"
        )));
    }
    let params = tr.to_params(&x);
    let (eps, s2) = filter(&params, series);
    let residuals = eps.iter().zip(&s2).map(|(e, s)| e / s.sqrt()).collect();
    Ok(GarchFit {
        params,
        residuals,
        log_likelihood: gaussian_loglik(&eps, &s2),
        conditional_variance: s2,
        converged: true,
        evaluations,
    })
}

/// Simulates `n` observations after discarding `burn_in` warm-up draws.
pub fn simulate_ar_garch(params: &GarchParams, n: usize, burn_in: usize, seed: u64) -> Result<Vec<f64>> {
    if !params.is_admissible() {
        return Err(Error::Config(format!("inadmissible GARCH parameters {params:?}")));
    }
    let mut rng = seeds::rng(seed);
    let uncond = params.omega / (1.0 - params.a - params.b);
    let mut s2 = uncond;
    let mut eps_prev = 0.0;
    let mut r_prev = params.c / (1.0 - params.phi);
    let mut out = Vec::with_capacity(n);
    for t in 0..(n + burn_in) {
        s2 = params.omega + params.a * eps_prev * eps_prev + params.b * s2;
        let z: f64 = rng.sample(StandardNormal);
        let eps = s2.sqrt() * z;
        let r = params.c + params.phi * r_prev + eps;
        if t >= burn_in {
            out.push(r);
        }
        eps_prev = eps;
        r_prev = r;
    }
    Ok(out)
}
