//! Worst-case analysis: score every candidate unit against the current dual
//! variables and keep the `B` best as a new constraint.
//!
//! A unit's score is `c = λ²‖ω_G‖²` where `ω = Σ_i α_i y_i x_i` and `G` is
//! the unit's feature set. Selection keeps the `B` largest scores; ties go to
//! the smaller id and zero scores stay selectable, so results are
//! deterministic and always of size `min(B, p)`.

mod hik;
mod poly;
mod topk;
mod tree;

pub use hik::score_hik;
pub use poly::{score_polynomial_streamed, PolyMap, VirtualFeature};
pub(crate) use poly::poly_top;
pub(crate) use tree::tree_top;
pub use topk::{select_top_b, TopB};
pub use tree::{score_tree_nodes, score_tree_pruned, tree_search, TreeSearch};

use serde::{Deserialize, Serialize};

use crate::dataset::{GroupStructure, ScalingPrior, SparseDataset};
use crate::error::{FgmError, Result};

/// One generated selection: sorted, unique unit ids chosen under budget `B`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Constraint {
    ids: Vec<usize>,
    budget: usize,
}

impl Constraint {
    /// Sorts and deduplicates `ids`.
    pub fn new(mut ids: Vec<usize>, budget: usize) -> Self {
        ids.sort_unstable();
        ids.dedup();
        debug_assert!(ids.len() <= budget, "{} ids over budget {budget}", ids.len());
        Self { ids, budget }
    }

    pub fn ids(&self) -> &[usize] {
        &self.ids
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// Checks that `alpha` is a valid dual vector for `data`.
pub(crate) fn check_alpha(alpha: &[f64], n: usize) -> Result<()> {
    if alpha.len() != n {
        return Err(FgmError::contract(format!(
            "{} dual variables for {n} instances",
            alpha.len()
        )));
    }
    if let Some((i, a)) = alpha.iter().enumerate().find(|(_, a)| !(**a >= 0.0) || !a.is_finite()) {
        return Err(FgmError::contract(format!("dual variable {i} is {a}, expected finite and ≥ 0")));
    }
    Ok(())
}

/// `ω = Σ_i α_i y_i x_i`.
pub fn omega(alpha: &[f64], data: &SparseDataset) -> Result<Vec<f64>> {
    check_alpha(alpha, data.n_samples())?;
    let q: Vec<f64> = alpha.iter().zip(data.labels()).map(|(a, y)| a * y).collect();
    Ok(data.weighted_row_sum(&q))
}

/// Per-feature scores `c_j = λ_j² ω_j²`.
pub fn score_features(alpha: &[f64], data: &SparseDataset, lambda: &ScalingPrior) -> Result<Vec<f64>> {
    if lambda.len() != data.n_features() {
        return Err(FgmError::contract(format!(
            "scaling prior of length {} for {} features",
            lambda.len(),
            data.n_features()
        )));
    }
    let w = omega(alpha, data)?;
    Ok(w.iter()
        .zip(lambda.as_slice())
        .map(|(o, l)| l * l * o * o)
        .collect())
}

/// Per-group scores `c_g = λ_g² ‖ω_G‖²`.
pub fn score_groups(alpha: &[f64], data: &SparseDataset, groups: &GroupStructure) -> Result<Vec<f64>> {
    if groups.n_features() != data.n_features() {
        return Err(FgmError::contract("group structure dimension differs from the data"));
    }
    let w = omega(alpha, data)?;
    Ok((0..groups.len())
        .map(|g| {
            let l = groups.lambda(g);
            l * l * groups.features(g).iter().map(|&j| w[j] * w[j]).sum::<f64>()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Group;

    fn two_by_two() -> SparseDataset {
        SparseDataset::from_rows(
            2,
            vec![vec![(0, 1.0), (1, 2.0)], vec![(0, 3.0), (1, -1.0)]],
            vec![1.0, -1.0],
        )
        .unwrap()
    }

    #[test]
    fn feature_scores_by_hand() {
        let d = two_by_two();
        let c = score_features(&[1.0, 1.0], &d, &ScalingPrior::ones(2)).unwrap();
        assert_eq!(c, vec![4.0, 9.0]);
        assert_eq!(select_top_b(&c, 1).ids(), &[1]);
        let zero = score_features(&[0.0, 0.0], &d, &ScalingPrior::ones(2)).unwrap();
        assert_eq!(zero, vec![0.0, 0.0]);
    }

    #[test]
    fn negative_or_nan_alpha_is_rejected() {
        let d = two_by_two();
        let ones = ScalingPrior::ones(2);
        assert!(matches!(score_features(&[-1.0, 1.0], &d, &ones), Err(FgmError::Contract(_))));
        assert!(score_features(&[f64::NAN, 1.0], &d, &ones).is_err());
        assert!(score_features(&[1.0], &d, &ones).is_err());
    }

    #[test]
    fn group_scores_by_hand() {
        // ω = (−2, 3, 1)
        let d = SparseDataset::from_rows(
            3,
            vec![vec![(0, 1.0), (1, 2.0), (2, 1.0)], vec![(0, 3.0), (1, -1.0)]],
            vec![1.0, -1.0],
        )
        .unwrap();
        let groups = GroupStructure::new(
            3,
            vec![
                Group { name: "a".into(), features: vec![0, 1], lambda: None },
                Group { name: "b".into(), features: vec![2], lambda: None },
            ],
        )
        .unwrap();
        assert_eq!(score_groups(&[1.0, 1.0], &d, &groups).unwrap(), vec![13.0, 1.0]);

        let muted = GroupStructure::new(
            3,
            vec![
                Group { name: "a".into(), features: vec![0, 1], lambda: Some(0.0) },
                Group { name: "b".into(), features: vec![2], lambda: None },
            ],
        )
        .unwrap();
        assert_eq!(score_groups(&[1.0, 1.0], &d, &muted).unwrap(), vec![0.0, 1.0]);
    }

    #[test]
    fn singleton_groups_match_feature_scores() {
        let d = two_by_two();
        let alpha = [0.3, 1.7];
        let g = score_groups(&alpha, &d, &GroupStructure::singletons(2)).unwrap();
        let f = score_features(&alpha, &d, &ScalingPrior::ones(2)).unwrap();
        assert_eq!(g, f);
    }

    #[test]
    fn constraint_is_sorted_and_unique() {
        let c = Constraint::new(vec![5, 1, 3], 3);
        assert_eq!(c.ids(), &[1, 3, 5]);
        assert_eq!(c.budget(), 3);
    }
}
