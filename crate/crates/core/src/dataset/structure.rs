//! Feature group and tree definitions.
//!
//! Group file lines: `name: i1 i2 ... [| lambda=<float>]`.
//! Tree file lines: `name parent: i1 i2 ... [| lambda=<float>]` where `parent`
//! is another node's name or `ROOT`. Feature ids are 0-based.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::scaling::inverse_or_zero;
use super::{ScalingPolicy, ScalingPrior, SparseDataset};
use crate::error::{FgmError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Group {
    pub name: String,
    pub features: Vec<usize>,
    /// Explicit scaling factor; `None` defers to the scaling policy.
    pub lambda: Option<f64>,
}

/// Pairwise-disjoint, non-empty feature groups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupStructure {
    n_features: usize,
    groups: Vec<Group>,
    lambda: Vec<f64>,
}

impl GroupStructure {
    pub fn new(n_features: usize, mut groups: Vec<Group>) -> Result<Self> {
        for group in groups.iter_mut() {
            group.features.sort_unstable();
        }
        let mut owner: Vec<Option<usize>> = vec![None; n_features];
        let mut names = HashSet::new();
        for (g, group) in groups.iter().enumerate() {
            if !names.insert(group.name.as_str()) {
                return Err(FgmError::Structure(format!("duplicate group name {:?}", group.name)));
            }
            if group.features.is_empty() {
                return Err(FgmError::Structure(format!("group {:?} is empty", group.name)));
            }
            check_lambda(group.lambda).map_err(FgmError::Structure)?;
            for &j in &group.features {
                if j >= n_features {
                    return Err(FgmError::Structure(format!(
                        "group {:?} references feature {j} outside dimension {n_features}",
                        group.name
                    )));
                }
                if let Some(prev) = owner[j] {
                    return Err(FgmError::Structure(format!(
                        "feature {j} appears in groups {:?} and {:?}",
                        groups[prev].name, group.name
                    )));
                }
                owner[j] = Some(g);
            }
        }
        let lambda = groups.iter().map(|g| g.lambda.unwrap_or(1.0)).collect();
        Ok(Self {
            n_features,
            groups,
            lambda,
        })
    }

    /// Singleton groups, one per feature.
    pub fn singletons(n_features: usize) -> Self {
        let groups = (0..n_features)
            .map(|j| Group {
                name: format!("f{j}"),
                features: vec![j],
                lambda: None,
            })
            .collect();
        Self::new(n_features, groups).expect("singletons are disjoint")
    }

    /// Fills in scaling factors for groups without an explicit one.
    ///
    /// Under [`ScalingPolicy::InverseNorm`] a group's factor is the inverse of
    /// the Frobenius norm of its columns.
    pub fn with_scaling(mut self, data: &SparseDataset, policy: ScalingPolicy) -> Self {
        let sq = data.column_sq_norms();
        self.lambda = self
            .groups
            .iter()
            .map(|g| {
                g.lambda.unwrap_or_else(|| match policy {
                    ScalingPolicy::Ones => 1.0,
                    ScalingPolicy::InverseNorm => inverse_or_zero(
                        g.features
                            .iter()
                            .map(|&j| sq.get(j).copied().unwrap_or(0.0))
                            .sum::<f64>()
                            .sqrt(),
                    ),
                })
            })
            .collect();
        self
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn groups(&self) -> &[Group] {
        &self.groups
    }

    pub fn features(&self, g: usize) -> &[usize] {
        &self.groups[g].features
    }

    pub fn lambda(&self, g: usize) -> f64 {
        self.lambda[g]
    }

    pub fn prior(&self) -> ScalingPrior {
        ScalingPrior::new(self.lambda.clone()).expect("validated factors")
    }
}

fn check_lambda(lambda: Option<f64>) -> std::result::Result<(), String> {
    match lambda {
        Some(v) if !v.is_finite() || v < 0.0 => Err(format!("invalid lambda {v}")),
        _ => Ok(()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    pub name: String,
    pub parent: Option<usize>,
    pub features: Vec<usize>,
    pub lambda: Option<f64>,
}

/// A tree-structured family of groups: any two node sets are disjoint or
/// nested, every child is contained in its parent, and the nodes cover all
/// features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeStructure {
    n_features: usize,
    nodes: Vec<TreeNode>,
    children: Vec<Vec<usize>>,
    roots: Vec<usize>,
    lambda: Vec<f64>,
    subtree_lambda_max: Vec<f64>,
}

impl TreeStructure {
    pub fn new(n_features: usize, mut nodes: Vec<TreeNode>) -> Result<Self> {
        let p = nodes.len();
        let mut names = HashSet::new();
        for node in nodes.iter_mut() {
            if !names.insert(node.name.clone()) {
                return Err(FgmError::Tree(format!("duplicate node name {:?}", node.name)));
            }
            if node.features.is_empty() {
                return Err(FgmError::Tree(format!("node {:?} is empty", node.name)));
            }
            check_lambda(node.lambda).map_err(FgmError::Tree)?;
            node.features.sort_unstable();
            if node.features.windows(2).any(|w| w[0] == w[1]) {
                return Err(FgmError::Tree(format!("node {:?} repeats a feature", node.name)));
            }
            if let Some(&j) = node.features.iter().find(|&&j| j >= n_features) {
                return Err(FgmError::Tree(format!(
                    "node {:?} references feature {j} outside dimension {n_features}",
                    node.name
                )));
            }
        }

        let mut children = vec![Vec::new(); p];
        let mut roots = Vec::new();
        for (h, node) in nodes.iter().enumerate() {
            match node.parent {
                None => roots.push(h),
                Some(parent) if parent >= p || parent == h => {
                    return Err(FgmError::Tree(format!("node {:?} has an invalid parent", node.name)))
                }
                Some(parent) => {
                    if !is_subset(&node.features, &nodes[parent].features) {
                        return Err(FgmError::Tree(format!(
                            "node {:?} is not contained in its parent {:?}",
                            node.name, nodes[parent].name
                        )));
                    }
                    children[parent].push(h);
                }
            }
        }
        // Every node must reach a root; a cycle would leave nodes unreachable.
        let mut reached = 0usize;
        let mut stack = roots.clone();
        while let Some(h) = stack.pop() {
            reached += 1;
            stack.extend(children[h].iter().copied());
        }
        if reached != p {
            return Err(FgmError::Tree("parent links contain a cycle".into()));
        }

        // Laminarity: nodes sharing a feature must be nested.
        let mut containing: Vec<Vec<usize>> = vec![Vec::new(); n_features];
        for (h, node) in nodes.iter().enumerate() {
            for &j in &node.features {
                containing[j].push(h);
            }
        }
        let mut checked: HashSet<(usize, usize)> = HashSet::new();
        for (j, list) in containing.iter_mut().enumerate() {
            if list.is_empty() {
                return Err(FgmError::Tree(format!("feature {j} is not covered by any node")));
            }
            list.sort_by_key(|&h| std::cmp::Reverse(nodes[h].features.len()));
            for pair in list.windows(2) {
                let (big, small) = (pair[0], pair[1]);
                if checked.insert((big, small))
                    && !is_subset(&nodes[small].features, &nodes[big].features)
                {
                    return Err(FgmError::Tree(format!(
                        "nodes {:?} and {:?} overlap without nesting",
                        nodes[big].name, nodes[small].name
                    )));
                }
            }
        }

        let lambda: Vec<f64> = nodes.iter().map(|n| n.lambda.unwrap_or(1.0)).collect();
        let mut tree = Self {
            n_features,
            nodes,
            children,
            roots,
            lambda,
            subtree_lambda_max: Vec::new(),
        };
        tree.refresh_subtree_max();
        Ok(tree)
    }

    /// Fills in scaling factors for nodes without an explicit one and
    /// recomputes the per-subtree maxima used for pruning.
    pub fn with_scaling(mut self, data: &SparseDataset, policy: ScalingPolicy) -> Self {
        let sq = data.column_sq_norms();
        self.lambda = self
            .nodes
            .iter()
            .map(|n| {
                n.lambda.unwrap_or_else(|| match policy {
                    ScalingPolicy::Ones => 1.0,
                    ScalingPolicy::InverseNorm => inverse_or_zero(
                        n.features
                            .iter()
                            .map(|&j| sq.get(j).copied().unwrap_or(0.0))
                            .sum::<f64>()
                            .sqrt(),
                    ),
                })
            })
            .collect();
        self.refresh_subtree_max();
        self
    }

    fn refresh_subtree_max(&mut self) {
        let p = self.nodes.len();
        let mut out = self.lambda.clone();
        // Post-order over an explicit stack.
        let mut order = Vec::with_capacity(p);
        let mut stack = self.roots.clone();
        while let Some(h) = stack.pop() {
            order.push(h);
            stack.extend(self.children[h].iter().copied());
        }
        for &h in order.iter().rev() {
            for &c in &self.children[h] {
                out[h] = out[h].max(out[c]);
            }
        }
        self.subtree_lambda_max = out;
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn features(&self, h: usize) -> &[usize] {
        &self.nodes[h].features
    }

    pub fn children(&self, h: usize) -> &[usize] {
        &self.children[h]
    }

    pub fn roots(&self) -> &[usize] {
        &self.roots
    }

    pub fn lambda(&self, h: usize) -> f64 {
        self.lambda[h]
    }

    /// Largest scaling factor over node `h` and all of its descendants.
    pub fn subtree_lambda_max(&self, h: usize) -> f64 {
        self.subtree_lambda_max[h]
    }
}

fn is_subset(small: &[usize], big: &[usize]) -> bool {
    let mut it = big.iter();
    small.iter().all(|x| it.any(|y| y == x))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| FgmError::io(path, e))
}

pub fn load_groups(path: impl AsRef<Path>, n_features: usize) -> Result<GroupStructure> {
    parse_groups(open(path.as_ref())?, n_features)
}

pub fn load_tree(path: impl AsRef<Path>, n_features: usize) -> Result<TreeStructure> {
    parse_tree(open(path.as_ref())?, n_features)
}

struct StructureLine {
    lineno: usize,
    head: String,
    features: Vec<usize>,
    lambda: Option<f64>,
}

fn parse_lines<R: BufRead>(reader: R) -> Result<Vec<StructureLine>> {
    let mut out = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.map_err(|e| FgmError::io("<reader>", e))?;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let bad = |message: String| FgmError::Parse {
            line: lineno,
            message,
        };
        let (body, suffix) = match content.split_once('|') {
            Some((b, s)) => (b, Some(s.trim())),
            None => (content, None),
        };
        let (head, ids) = body
            .split_once(':')
            .ok_or_else(|| bad("expected `name: ids`".into()))?;
        let features = ids
            .split_whitespace()
            .map(|t| t.parse::<usize>().map_err(|_| bad(format!("bad feature id {t:?}"))))
            .collect::<Result<Vec<_>>>()?;
        let lambda = match suffix {
            None => None,
            Some(s) => {
                let v = s
                    .strip_prefix("lambda=")
                    .ok_or_else(|| bad(format!("unknown suffix {s:?}")))?;
                Some(v.trim().parse::<f64>().map_err(|_| bad(format!("bad lambda {v:?}")))?)
            }
        };
        out.push(StructureLine {
            lineno,
            head: head.trim().to_string(),
            features,
            lambda,
        });
    }
    Ok(out)
}

pub fn parse_groups<R: BufRead>(reader: R, n_features: usize) -> Result<GroupStructure> {
    let groups = parse_lines(reader)?
        .into_iter()
        .map(|l| {
            if l.head.is_empty() || l.head.contains(char::is_whitespace) {
                return Err(FgmError::Parse {
                    line: l.lineno,
                    message: format!("bad group name {:?}", l.head),
                });
            }
            Ok(Group {
                name: l.head,
                features: l.features,
                lambda: l.lambda,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    GroupStructure::new(n_features, groups)
}

pub fn parse_tree<R: BufRead>(reader: R, n_features: usize) -> Result<TreeStructure> {
    let lines = parse_lines(reader)?;
    let mut heads = Vec::with_capacity(lines.len());
    for l in &lines {
        let mut parts = l.head.split_whitespace();
        match (parts.next(), parts.next(), parts.next()) {
            (Some(name), Some(parent), None) => heads.push((name.to_string(), parent.to_string())),
            _ => {
                return Err(FgmError::Parse {
                    line: l.lineno,
                    message: format!("expected `name parent:`, found {:?}", l.head),
                })
            }
        }
    }
    let index: HashMap<&str, usize> = heads
        .iter()
        .enumerate()
        .map(|(h, (name, _))| (name.as_str(), h))
        .collect();
    let mut nodes = Vec::with_capacity(lines.len());
    for (l, (name, parent)) in lines.into_iter().zip(&heads) {
        let parent = if parent == "ROOT" {
            None
        } else {
            Some(*index.get(parent.as_str()).ok_or_else(|| {
                FgmError::Tree(format!("node {name:?} names unknown parent {parent:?}"))
            })?)
        };
        nodes.push(TreeNode {
            name: name.clone(),
            parent,
            features: l.features,
            lambda: l.lambda,
        });
    }
    TreeStructure::new(n_features, nodes)
}
