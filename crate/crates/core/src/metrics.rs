//! Edge-recovery scores and partial-correlation distances.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{EdgeSet, PartialCorrelationMatrix};

/// Counts over all `p(p−1)/2` unordered node pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

pub fn confusion(estimate: &EdgeSet, truth: &EdgeSet) -> Result<ConfusionCounts> {
    let p = truth.num_nodes();
    if estimate.num_nodes() != p {
        return Err(Error::Shape(format!(
            "estimated edge set has {} nodes, truth has {p}",
            estimate.num_nodes()
        )));
    }
    let tp = estimate.iter().filter(|&(j, k)| truth.contains(j, k)).count();
    let fp = estimate.len() - tp;
    let fn_ = truth.len() - tp;
    let pairs = p * p.saturating_sub(1) / 2;
    Ok(ConfusionCounts {
        tp,
        fp,
        fn_,
        tn: pairs - tp - fp - fn_,
    })
}

/// Harmonic mean of precision and recall. An empty estimate of an empty
/// truth scores 1; any miss with no true positive scores 0.
pub fn f1(c: &ConfusionCounts) -> f64 {
    if c.tp == 0 {
        return if c.fp == 0 && c.fn_ == 0 { 1.0 } else { 0.0 };
    }
    let (pr, re) = (c.precision(), c.recall());
    2.0 * pr * re / (pr + re)
}

/// `sqrt(Σ_jk (p_jk − q_jk)²)` over all entries.
pub fn frobenius_partial_corr(a: &PartialCorrelationMatrix, b: &PartialCorrelationMatrix) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::Shape(format!("dimensions differ: {} vs {}", a.dim(), b.dim())));
    }
    Ok((a.as_matrix() - b.as_matrix()).norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_edges(p: usize, rng: &mut ChaCha8Rng) -> EdgeSet {
        let mut e = EdgeSet::empty(p);
        for j in 0..p {
            for k in (j + 1)..p {
                if rng.random::<bool>() {
                    e.insert(j, k).unwrap();
                }
            }
        }
        e
    }

    fn random_pc(p: usize, rng: &mut ChaCha8Rng) -> PartialCorrelationMatrix {
        let mut edges = Vec::new();
        for j in 0..p {
            for k in (j + 1)..p {
                edges.push((j, k, rng.random_range(-1.0..1.0)));
            }
        }
        PartialCorrelationMatrix::from_edges(p, &edges).unwrap()
    }

    #[test]
    fn perfect_and_empty_estimates() {
        let truth = EdgeSet::from_pairs(4, [(0, 1), (1, 2)]).unwrap();
        let c = confusion(&truth, &truth).unwrap();
        assert_eq!((c.fp, c.fn_), (0, 0));
        assert_eq!(f1(&c), 1.0);
        let c = confusion(&EdgeSet::empty(4), &truth).unwrap();
        assert_eq!((c.tp, c.fn_), (0, 2));
        assert_eq!(f1(&c), 0.0);
        assert!(confusion(&EdgeSet::empty(3), &truth).is_err());
    }

    #[test]
    fn f1_arithmetic() {
        let c = ConfusionCounts { tp: 2, fp: 1, fn_: 1, tn: 0 };
        assert!((c.precision() - 2.0 / 3.0).abs() < 1e-15);
        assert!((f1(&c) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(f1(&ConfusionCounts { tp: 0, fp: 3, fn_: 0, tn: 0 }), 0.0);
        assert_eq!(f1(&ConfusionCounts { tp: 0, fp: 0, fn_: 0, tn: 6 }), 1.0);
    }

    #[test]
    fn confusion_matches_pair_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let est = random_edges(6, &mut rng);
            let truth = random_edges(6, &mut rng);
            let c = confusion(&est, &truth).unwrap();
            let mut brute = ConfusionCounts { tp: 0, fp: 0, fn_: 0, tn: 0 };
            for j in 0..6 {
                for k in (j + 1)..6 {
                    match (est.contains(j, k), truth.contains(j, k)) {
                        (true, true) => brute.tp += 1,
                        (true, false) => brute.fp += 1,
                        (false, true) => brute.fn_ += 1,
                        (false, false) => brute.tn += 1,
                    }
                }
            }
            assert_eq!(c, brute);
            assert_eq!(c.total(), 15);
            let f = f1(&c);
            assert!((0.0..=1.0).contains(&f));
        }
    }

    #[test]
    fn confusion_invariant_under_relabeling() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let est = random_edges(7, &mut rng);
        let truth = random_edges(7, &mut rng);
        let perm = [3, 0, 6, 1, 5, 2, 4];
        let a = confusion(&est, &truth).unwrap();
        let b = confusion(&est.relabel(&perm).unwrap(), &truth.relabel(&perm).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn frobenius_cases() {
        let z = PartialCorrelationMatrix::zeros(3);
        assert_eq!(frobenius_partial_corr(&z, &z).unwrap(), 0.0);
        let one = PartialCorrelationMatrix::from_edges(3, &[(0, 2, 0.3)]).unwrap();
        assert!((frobenius_partial_corr(&z, &one).unwrap() - (2.0_f64 * 0.09).sqrt()).abs() < 1e-15);
        assert!(frobenius_partial_corr(&z, &PartialCorrelationMatrix::zeros(4)).is_err());
    }

    #[test]
    fn frobenius_matches_loop_and_is_a_metric() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let a = random_pc(5, &mut rng);
            let b = random_pc(5, &mut rng);
            let c = random_pc(5, &mut rng);
            let mut s = 0.0;
            for j in 0..5 {
                for k in 0..5 {
                    s += (a.get(j, k) - b.get(j, k)).powi(2);
                }
            }
            let ab = frobenius_partial_corr(&a, &b).unwrap();
            assert!((ab - s.sqrt()).abs() < 1e-12);
            assert_eq!(ab, frobenius_partial_corr(&b, &a).unwrap());
            let ac = frobenius_partial_corr(&a, &c).unwrap();
            let cb = frobenius_partial_corr(&c, &b).unwrap();
            assert!(ab <= ac + cb + 1e-12);
        }
    }
}
