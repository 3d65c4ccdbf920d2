//! Structure estimation by per-node elastic-net regressions.
//!
//! Each variable is regressed on all others; node `j` enters the neighborhood
//! of `k` when its coefficient in the regression for `k` is exactly nonzero.
//! Asymmetric neighborhoods are reconciled with the AND or OR rule.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::elastic_net::{lambda_max_gram, solve_gram, GramProblem, PenaltyConfig, SolverOptions};
use crate::error::{Error, Result};
use crate::matrix::{Dataset, EdgeSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeRule {
    #[default]
    And,
    Or,
}

impl FromStr for EdgeRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "and" => Ok(EdgeRule::And),
            "or" => Ok(EdgeRule::Or),
            other => Err(Error::Config(format!("unknown edge rule '{other}' (expected and|or)"))),
        }
    }
}

impl fmt::Display for EdgeRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EdgeRule::And => "and",
            EdgeRule::Or => "or",
        })
    }
}

/// A regression whose coordinate descent hit its sweep cap.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeWarning {
    pub node: usize,
    pub message: String,
}

/// Per-node neighbor sets `ne(k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Neighborhoods {
    pub sets: Vec<BTreeSet<usize>>,
    pub warnings: Vec<NodeWarning>,
}

impl Neighborhoods {
    pub fn from_sets(sets: Vec<BTreeSet<usize>>) -> Self {
        Self {
            sets,
            warnings: Vec::new(),
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.sets.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeighborhoodResult {
    pub neighborhoods: Neighborhoods,
    pub edges: EdgeSet,
    pub rule: EdgeRule,
}

/// Centered second-moment matrix `(1/n) X_cᵀ X_c` of the columns of `x`.
pub(crate) fn centered_gram(x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows() as f64;
    let mut xc = x.clone();
    for mut col in xc.column_iter_mut() {
        let mean = col.sum() / n;
        col.add_scalar_mut(-mean);
    }
    xc.tr_mul(&xc) / n
}

fn node_problem(gram: &DMatrix<f64>, k: usize) -> GramProblem {
    let p = gram.nrows();
    let others: Vec<usize> = (0..p).filter(|&j| j != k).collect();
    let sub = gram.select_rows(&others).select_columns(&others);
    let xty = DVector::from_iterator(others.len(), others.iter().map(|&j| gram[(j, k)]));
    GramProblem {
        gram: sub,
        xty,
        yty: gram[(k, k)],
    }
}

/// Runs the `p` regressions on a precomputed centered Gram matrix.
pub(crate) fn neighborhoods_from_gram(gram: &DMatrix<f64>, penalty: &PenaltyConfig) -> Neighborhoods {
    let p = gram.nrows();
    let opts = SolverOptions::default();
    let per_node: Vec<(BTreeSet<usize>, Option<NodeWarning>)> = (0..p)
        .into_par_iter()
        .map(|k| {
            let problem = node_problem(gram, k);
            let sol = solve_gram(&problem, penalty, &opts);
            let set = sol
                .coefficients
                .iter()
                .enumerate()
                .filter(|(_, b)| **b != 0.0)
                .map(|(idx, _)| if idx < k { idx } else { idx + 1 })
                .collect();
            let warn = (!sol.converged).then(|| NodeWarning {
                node: k,
                message: format!(
                    "regression did not converge in {} sweeps (kkt residual {:e})",
                    sol.iterations, sol.kkt_residual
                ),
            });
            (set, warn)
        })
        .collect();
    let mut sets = Vec::with_capacity(p);
    let mut warnings = Vec::new();
    for (s, w) in per_node {
        sets.push(s);
        warnings.extend(w);
    }
    Neighborhoods { sets, warnings }
}

/// Largest per-response `λ_max`; at or above it every neighborhood is empty.
pub fn graph_lambda_max(data: &Dataset, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Domain(format!("alpha must lie in (0, 1], got {alpha}")));
    }
    let gram = centered_gram(data.matrix());
    Ok((0..data.p())
        .map(|k| lambda_max_gram(&node_problem(&gram, k), alpha))
        .fold(0.0, f64::max))
}

/// Regresses every column on the others with one shared penalty.
pub fn select_neighborhoods(data: &Dataset, penalty: &PenaltyConfig) -> Result<Neighborhoods> {
    penalty.validate()?;
    if data.p() < 2 {
        return Err(Error::Data("structure estimation needs at least 2 variables".into()));
    }
    Ok(neighborhoods_from_gram(&centered_gram(data.matrix()), penalty))
}

/// Symmetrizes neighborhoods into an undirected edge set.
pub fn assemble_edges(neighborhoods: &Neighborhoods, rule: EdgeRule) -> Result<EdgeSet> {
    let p = neighborhoods.num_nodes();
    let sets = &neighborhoods.sets;
    for (k, s) in sets.iter().enumerate() {
        if let Some(&j) = s.iter().find(|&&j| j >= p || j == k) {
            return Err(Error::Shape(format!(
                "neighborhood of node {} lists invalid node {}",
                k + 1,
                j + 1
            )));
        }
    }
    let mut edges = EdgeSet::empty(p);
    for j in 0..p {
        for k in (j + 1)..p {
            let jk = sets[k].contains(&j);
            let kj = sets[j].contains(&k);
            let keep = match rule {
                EdgeRule::And => jk && kj,
                EdgeRule::Or => jk || kj,
            };
            if keep {
                edges.insert(j, k)?;
            }
        }
    }
    Ok(edges)
}

/// Stage one end to end: regressions followed by edge assembly.
pub fn estimate_structure(data: &Dataset, penalty: &PenaltyConfig, rule: EdgeRule) -> Result<NeighborhoodResult> {
    let neighborhoods = select_neighborhoods(data, penalty)?;
    let edges = assemble_edges(&neighborhoods, rule)?;
    Ok(NeighborhoodResult {
        neighborhoods,
        edges,
        rule,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sets(v: &[&[usize]]) -> Neighborhoods {
        Neighborhoods::from_sets(v.iter().map(|s| s.iter().copied().collect()).collect())
    }

    #[test]
    fn and_or_on_one_sided_neighborhood() {
        let ne = sets(&[&[1], &[]]);
        assert!(assemble_edges(&ne, EdgeRule::And).unwrap().is_empty());
        let or = assemble_edges(&ne, EdgeRule::Or).unwrap();
        assert_eq!(or.iter().collect::<Vec<_>>(), vec![(0, 1)]);
    }

    #[test]
    fn symmetric_neighborhoods_agree() {
        let ne = sets(&[&[1, 2], &[0], &[0]]);
        assert_eq!(
            assemble_edges(&ne, EdgeRule::And).unwrap(),
            assemble_edges(&ne, EdgeRule::Or).unwrap()
        );
    }

    #[test]
    fn rule_parsing() {
        assert_eq!("AND".parse::<EdgeRule>().unwrap(), EdgeRule::And);
        assert_eq!("or".parse::<EdgeRule>().unwrap(), EdgeRule::Or);
        assert!(matches!("xor".parse::<EdgeRule>(), Err(Error::Config(_))));
    }

    #[test]
    fn invalid_neighbor_index_rejected() {
        let ne = sets(&[&[5], &[]]);
        assert!(assemble_edges(&ne, EdgeRule::Or).is_err());
        let ne = sets(&[&[0], &[]]);
        assert!(assemble_edges(&ne, EdgeRule::Or).is_err());
    }

    fn random_neighborhoods() -> impl Strategy<Value = Neighborhoods> {
        (2usize..9).prop_flat_map(|p| {
            proptest::collection::vec(proptest::collection::vec(any::<bool>(), p), p).prop_map(move |bits| {
                Neighborhoods::from_sets(
                    bits.iter()
                        .enumerate()
                        .map(|(k, row)| {
                            row.iter()
                                .enumerate()
                                .filter(|(j, b)| **b && *j != k)
                                .map(|(j, _)| j)
                                .collect()
                        })
                        .collect(),
                )
            })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn and_is_subset_of_or(ne in random_neighborhoods()) {
            let and = assemble_edges(&ne, EdgeRule::And).unwrap();
            let or = assemble_edges(&ne, EdgeRule::Or).unwrap();
            prop_assert!(and.is_subset(&or));
        }

        #[test]
        fn relabeling_commutes(ne in random_neighborhoods(), seed in any::<u64>()) {
            let p = ne.num_nodes();
            let mut perm: Vec<usize> = (0..p).collect();
            // deterministic shuffle from the seed
            let mut s = seed;
            for i in (1..p).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                perm.swap(i, (s >> 33) as usize % (i + 1));
            }
            let mut relabeled = vec![BTreeSet::new(); p];
            for (k, set) in ne.sets.iter().enumerate() {
                relabeled[perm[k]] = set.iter().map(|&j| perm[j]).collect();
            }
            let relabeled = Neighborhoods::from_sets(relabeled);
            for rule in [EdgeRule::And, EdgeRule::Or] {
                let a = assemble_edges(&ne, rule).unwrap().relabel(&perm).unwrap();
                let b = assemble_edges(&relabeled, rule).unwrap();
                prop_assert_eq!(a, b);
            }
        }
    }
}
