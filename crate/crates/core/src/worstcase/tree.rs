use crate::dataset::{SparseDataset, TreeStructure};
use crate::error::{FgmError, Result};

use super::{omega, Constraint, TopB};

/// Result of a pruned tree search.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeSearch {
    pub constraint: Constraint,
    /// Nodes whose score was computed.
    pub visited: usize,
}

fn node_mass(tree: &TreeStructure, w: &[f64], h: usize) -> f64 {
    tree.features(h).iter().map(|&j| w[j] * w[j]).sum()
}

fn check_dim(tree: &TreeStructure, data: &SparseDataset) -> Result<()> {
    if tree.n_features() != data.n_features() {
        return Err(FgmError::contract("tree dimension differs from the data"));
    }
    Ok(())
}

/// Score `λ_h²‖ω_{G_h}‖²` of every node.
pub fn score_tree_nodes(alpha: &[f64], data: &SparseDataset, tree: &TreeStructure) -> Result<Vec<f64>> {
    check_dim(tree, data)?;
    let w = omega(alpha, data)?;
    Ok((0..tree.len())
        .map(|h| {
            let l = tree.lambda(h);
            l * l * node_mass(tree, &w, h)
        })
        .collect())
}

/// Top-`B` tree nodes, skipping every subtree that provably cannot enter.
///
/// Descendants of `h` have feature sets inside `G_h`, so their scores are at
/// most `λ_max(h)²‖ω_{G_h}‖²` with `λ_max` the largest node weight in the
/// subtree. When that bound is strictly below the current `B`-th best score
/// the subtree is not expanded.
pub fn tree_search(alpha: &[f64], data: &SparseDataset, tree: &TreeStructure, budget: usize) -> Result<TreeSearch> {
    let (top, visited) = tree_top(alpha, data, tree, budget)?;
    Ok(TreeSearch {
        constraint: top.into_constraint(),
        visited,
    })
}

pub(crate) fn tree_top(alpha: &[f64], data: &SparseDataset, tree: &TreeStructure, budget: usize) -> Result<(TopB, usize)> {
    check_dim(tree, data)?;
    let w = omega(alpha, data)?;
    let mut top = TopB::new(budget);
    let mut visited = 0;
    let mut stack: Vec<usize> = tree.roots().iter().rev().copied().collect();
    while let Some(h) = stack.pop() {
        visited += 1;
        let mass = node_mass(tree, &w, h);
        let l = tree.lambda(h);
        top.push(h, l * l * mass);
        let lmax = tree.subtree_lambda_max(h);
        if let Some(c_min) = top.threshold() {
            if lmax * lmax * mass < c_min {
                continue;
            }
        }
        stack.extend(tree.children(h).iter().rev());
    }
    Ok((top, visited))
}

pub fn score_tree_pruned(alpha: &[f64], data: &SparseDataset, tree: &TreeStructure, budget: usize) -> Result<Constraint> {
    tree_search(alpha, data, tree, budget).map(|s| s.constraint)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::TreeNode;
    use crate::worstcase::select_top_b;

    fn node(name: &str, parent: Option<usize>, features: Vec<usize>) -> TreeNode {
        TreeNode {
            name: name.into(),
            parent,
            features,
            lambda: None,
        }
    }

    #[test]
    fn single_node_tree() {
        let d = SparseDataset::from_rows(2, vec![vec![(0, 1.0)]], vec![1.0]).unwrap();
        let tree = TreeStructure::new(2, vec![node("root", None, vec![0, 1])]).unwrap();
        assert_eq!(score_tree_pruned(&[1.0], &d, &tree, 1).unwrap().ids(), &[0]);
    }

    #[test]
    fn zero_mass_subtree_is_skipped() {
        // Feature 2 carries all the signal; the {0, 1} subtree has ω = 0.
        let d = SparseDataset::from_rows(3, vec![vec![(2, 2.0)], vec![(2, -1.0)]], vec![1.0, -1.0]).unwrap();
        let tree = TreeStructure::new(
            3,
            vec![
                node("right", None, vec![2]),
                node("left", None, vec![0, 1]),
                node("l0", Some(1), vec![0]),
                node("l1", Some(1), vec![1]),
            ],
        )
        .unwrap();
        let search = tree_search(&[1.0, 1.0], &d, &tree, 1).unwrap();
        assert_eq!(search.visited, 2);
        let exhaustive = select_top_b(&score_tree_nodes(&[1.0, 1.0], &d, &tree).unwrap(), 1);
        assert_eq!(search.constraint, exhaustive);
        assert_eq!(exhaustive.ids(), &[0]);
    }
}
