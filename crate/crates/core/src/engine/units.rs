use crate::dataset::{
    compute_scaling_prior, GroupStructure, ScalingPolicy, ScalingPrior, SparseDataset,
    TreeStructure,
};
use crate::error::{FgmError, Result};
use crate::worstcase::{
    poly_top, score_features, score_groups, tree_top, Constraint, PolyMap, TopB,
};

use super::active_set::Coordinate;
use super::train::Structure;

/// The candidate units of one training run, with scaling factors resolved
/// against the training data.
#[derive(Debug, Clone)]
pub enum UnitSpace {
    Plain(ScalingPrior),
    Groups(GroupStructure),
    Tree(TreeStructure),
    Polynomial { map: PolyMap, block: usize },
}

impl UnitSpace {
    pub fn resolve(structure: &Structure, data: &SparseDataset, policy: ScalingPolicy) -> Result<Self> {
        let m = data.n_features();
        Ok(match structure {
            Structure::Plain => UnitSpace::Plain(compute_scaling_prior(data, policy)),
            Structure::Groups(g) => {
                if g.n_features() != m {
                    return Err(FgmError::argument(format!(
                        "group structure over {} features, data has {m}",
                        g.n_features()
                    )));
                }
                UnitSpace::Groups(g.clone().with_scaling(data, policy))
            }
            Structure::Tree(t) => {
                if t.n_features() != m {
                    return Err(FgmError::argument(format!(
                        "tree structure over {} features, data has {m}",
                        t.n_features()
                    )));
                }
                UnitSpace::Tree(t.clone().with_scaling(data, policy))
            }
            Structure::Polynomial { gamma, r, block } => UnitSpace::Polynomial {
                map: PolyMap::new(m, *gamma, *r)?,
                block: (*block).max(1),
            },
        })
    }

    /// Number of candidate units.
    pub fn len(&self) -> usize {
        match self {
            UnitSpace::Plain(l) => l.len(),
            UnitSpace::Groups(g) => g.len(),
            UnitSpace::Tree(t) => t.len(),
            UnitSpace::Polynomial { map, .. } => map.dim(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Worst-case analysis: the top-`B` units under `alpha`, best first,
    /// with their scores.
    pub fn generate(&self, alpha: &[f64], data: &SparseDataset, budget: usize) -> Result<Vec<(usize, f64)>> {
        let top = match self {
            UnitSpace::Plain(lambda) => heap_of(&score_features(alpha, data, lambda)?, budget),
            UnitSpace::Groups(g) => heap_of(&score_groups(alpha, data, g)?, budget),
            UnitSpace::Tree(t) => tree_top(alpha, data, t, budget)?.0,
            UnitSpace::Polynomial { map, block } => poly_top(alpha, data, map, budget, *block)?,
        };
        Ok(top.into_sorted())
    }

    /// Columns to cache for a constraint.
    pub fn coordinates(&self, constraint: &Constraint) -> Vec<Coordinate> {
        let mut out = Vec::new();
        for &u in constraint.ids() {
            match self {
                UnitSpace::Plain(lambda) => out.push(Coordinate {
                    unit: u,
                    feature: u,
                    scale: lambda.get(u),
                }),
                UnitSpace::Groups(g) => out.extend(g.features(u).iter().map(|&j| Coordinate {
                    unit: u,
                    feature: j,
                    scale: g.lambda(u),
                })),
                UnitSpace::Tree(t) => out.extend(t.features(u).iter().map(|&j| Coordinate {
                    unit: u,
                    feature: j,
                    scale: t.lambda(u),
                })),
                UnitSpace::Polynomial { .. } => out.push(Coordinate {
                    unit: u,
                    feature: u,
                    scale: 1.0,
                }),
            }
        }
        out
    }

    pub fn poly_map(&self) -> Option<&PolyMap> {
        match self {
            UnitSpace::Polynomial { map, .. } => Some(map),
            _ => None,
        }
    }

    /// Input features (or virtual coordinates) covered by unit `u`.
    pub fn unit_features(&self, u: usize) -> Vec<usize> {
        match self {
            UnitSpace::Plain(_) | UnitSpace::Polynomial { .. } => vec![u],
            UnitSpace::Groups(g) => g.features(u).to_vec(),
            UnitSpace::Tree(t) => t.features(u).to_vec(),
        }
    }
}

fn heap_of(scores: &[f64], budget: usize) -> TopB {
    let mut top = TopB::new(budget);
    for (j, &s) in scores.iter().enumerate() {
        top.push(j, s);
    }
    top
}
