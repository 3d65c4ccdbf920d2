//! One-sample Kolmogorov–Smirnov checks on filtered residuals.

use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal, StudentsT};

use crate::error::{Error, Result};

pub const MIN_KS_SAMPLE: usize = 20;

/// Asymptotic 5% critical value coefficient.
pub const KS_CRITICAL_COEF: f64 = 1.358;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum Reference {
    Normal { mean: f64, sd: f64 },
    StudentT { nu: f64, loc: f64, scale: f64 },
}

impl Reference {
    pub fn standard_normal() -> Self {
        Reference::Normal { mean: 0.0, sd: 1.0 }
    }

    /// Student t with `nu > 2` degrees of freedom rescaled to unit variance.
    pub fn unit_variance_t(nu: f64) -> Self {
        Reference::StudentT {
            nu,
            loc: 0.0,
            scale: ((nu - 2.0) / nu).sqrt(),
        }
    }

    fn cdf_fn(&self) -> Result<Box<dyn Fn(f64) -> f64>> {
        match *self {
            Reference::Normal { mean, sd } => {
                let d = Normal::new(mean, sd).map_err(|e| Error::Config(format!("normal reference: {e}")))?;
                Ok(Box::new(move |x| d.cdf(x)))
            }
            Reference::StudentT { nu, loc, scale } => {
                let d = StudentsT::new(loc, scale, nu).map_err(|e| Error::Config(format!("t reference: {e}")))?;
                Ok(Box::new(move |x| d.cdf(x)))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsOutcome {
    pub statistic: f64,
    pub critical_value: f64,
    pub reject: bool,
}

/// `D = sup_x |F_n(x) − F(x)|`, rejected at 5% when `D > 1.358/√n`.
pub fn ks_statistic(sample: &[f64], reference: &Reference) -> Result<KsOutcome> {
    let n = sample.len();
    if n < MIN_KS_SAMPLE {
        return Err(Error::Data(format!("KS test needs at least {MIN_KS_SAMPLE} values, got {n}")));
    }
    if sample.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("KS sample contains non-finite values".into()));
    }
    let cdf = reference.cdf_fn()?;
    let mut xs = sample.to_vec();
    xs.sort_by(f64::total_cmp);
    let nf = n as f64;
    let statistic = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / nf).max((i + 1) as f64 / nf - f)
        })
        .fold(0.0, f64::max);
    let critical_value = KS_CRITICAL_COEF / nf.sqrt();
    Ok(KsOutcome {
        statistic,
        critical_value,
        reject: statistic > critical_value,
    })
}

/// Maximum-likelihood degrees of freedom for a unit-variance t fitted to the
/// standardized sample, searched on `(2, 200]` by golden section in `ln(ν − 2)`.
pub fn fit_t_dof(sample: &[f64]) -> Result<f64> {
    if sample.len() < MIN_KS_SAMPLE {
        return Err(Error::Data(format!(
            "t fit needs at least {MIN_KS_SAMPLE} values, got {}",
            sample.len()
        )));
    }
    let n = sample.len() as f64;
    let mean = sample.iter().sum::<f64>() / n;
    let sd = (sample.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    if !(sd > 0.0) || !sd.is_finite() {
        return Err(Error::Data("t fit needs a sample with positive finite variance".into()));
    }
    let z: Vec<f64> = sample.iter().map(|v| (v - mean) / sd).collect();
    let negloglik = |s: f64| {
        let nu = 2.0 + s.exp();
        let d = StudentsT::new(0.0, ((nu - 2.0) / nu).sqrt(), nu).expect("valid t");
        -z.iter().map(|&x| d.ln_pdf(x)).sum::<f64>()
    };
    let (mut a, mut b) = ((0.01f64).ln(), (198.0f64).ln());
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (negloglik(c), negloglik(d));
    while b - a > 1e-6 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = negloglik(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = negloglik(d);
        }
    }
    Ok(2.0 + (0.5 * (a + b)).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeds;
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal, StudentT};
    use statrs::distribution::ContinuousCDF;

    #[test]
    fn exact_quantiles_fit_almost_perfectly() {
        let n = 400;
        let d = Normal::new(0.0, 1.0).unwrap();
        let q: Vec<f64> = (0..n).map(|i| d.inverse_cdf((i as f64 + 0.5) / n as f64)).collect();
        let out = ks_statistic(&q, &Reference::standard_normal()).unwrap();
        // statrs inverts the normal CDF to roughly 1e-10
        assert!(out.statistic <= 0.5 / n as f64 + 1e-9, "{}", out.statistic);
        assert!(!out.reject);
    }

    #[test]
    fn heavy_tails_are_detected() {
        let dist = StudentT::new(3.0).unwrap();
        let mut rejects = 0;
        for rep in 0..100 {
            let mut rng = seeds::rng(seeds::derive_seed(11, &[rep]));
            let s = (1.0f64 / 3.0).sqrt();
            let x: Vec<f64> = (0..500).map(|_| dist.sample(&mut rng) * s).collect();
            if ks_statistic(&x, &Reference::standard_normal()).unwrap().reject {
                rejects += 1;
            }
        }
        assert!(rejects >= 90, "{rejects}/100");
    }

    #[test]
    fn size_is_near_nominal() {
        let mut rejects = 0;
        for rep in 0..300 {
            let mut rng = seeds::rng(seeds::derive_seed(12, &[rep]));
            let x: Vec<f64> = (0..1000).map(|_| rng.sample(StandardNormal)).collect();
            if ks_statistic(&x, &Reference::standard_normal()).unwrap().reject {
                rejects += 1;
            }
        }
        assert!((3..=30).contains(&rejects), "{rejects}/300");
    }

    #[test]
    fn dof_fit_tracks_the_truth() {
        let mut rng = seeds::rng(4);
        let dist = StudentT::new(4.0).unwrap();
        let x: Vec<f64> = (0..20_000).map(|_| dist.sample(&mut rng)).collect();
        let nu = fit_t_dof(&x).unwrap();
        assert!((3.0..6.0).contains(&nu), "{nu}");
        let g: Vec<f64> = (0..20_000).map(|_| rng.sample(StandardNormal)).collect();
        assert!(fit_t_dof(&g).unwrap() > 30.0);
    }

    #[test]
    fn small_samples_error() {
        assert!(ks_statistic(&[0.0; 19], &Reference::standard_normal()).is_err());
        let t = Reference::unit_variance_t(5.0);
        assert!(ks_statistic(&[0.1; 20], &t).is_ok());
    }
}
