use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::dataset::SparseDataset;
use crate::error::{FgmError, Result};
use crate::subsolver::BlockWeights;
use crate::worstcase::{Constraint, PolyMap};

/// One cached column: which unit produced it, which input coordinate it
/// reads (a feature id, or a flat virtual-feature id in polynomial mode) and
/// the scaling factor applied.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coordinate {
    pub unit: usize,
    pub feature: usize,
    pub scale: f64,
}

#[derive(Debug, Clone)]
struct CachedBlock {
    coords: Vec<Coordinate>,
    /// Column-major `n × coords.len()`.
    values: Vec<f64>,
}

/// Generated constraints and the dense copies of their scaled columns.
#[derive(Debug, Clone)]
pub struct ActiveSet {
    n: usize,
    constraints: Vec<Constraint>,
    blocks: Vec<CachedBlock>,
}

impl ActiveSet {
    pub fn new(n_samples: usize) -> Self {
        Self {
            n: n_samples,
            constraints: Vec::new(),
            blocks: Vec::new(),
        }
    }

    pub fn n_samples(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    /// True when a constraint with the same unit ids is already present.
    pub fn contains(&self, constraint: &Constraint) -> bool {
        self.constraints.iter().any(|c| c.ids() == constraint.ids())
    }

    pub fn block_dims(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.coords.len()).collect()
    }

    pub fn coordinates(&self, t: usize) -> &[Coordinate] {
        &self.blocks[t].coords
    }

    pub fn column(&self, t: usize, k: usize) -> &[f64] {
        &self.blocks[t].values[k * self.n..(k + 1) * self.n]
    }

    /// Total number of cached columns.
    pub fn n_columns(&self) -> usize {
        self.blocks.iter().map(|b| b.coords.len()).sum()
    }

    /// Adds a constraint whose columns are given densely.
    pub fn push_dense(
        &mut self,
        constraint: Constraint,
        coords: Vec<Coordinate>,
        columns: Vec<Vec<f64>>,
    ) -> Result<()> {
        if coords.len() != columns.len() {
            return Err(FgmError::contract("one column per coordinate required"));
        }
        if let Some(c) = columns.iter().find(|c| c.len() != self.n) {
            return Err(FgmError::contract(format!(
                "column of length {} in a cache over {} instances",
                c.len(),
                self.n
            )));
        }
        self.check_new(&constraint)?;
        self.constraints.push(constraint);
        self.blocks.push(CachedBlock {
            coords,
            values: columns.concat(),
        });
        Ok(())
    }

    /// Adds a constraint, extracting its scaled columns from `data` in a
    /// single pass over the nonzeros. Polynomial coordinates are expanded on
    /// the fly through `poly`.
    pub fn push_from_data(
        &mut self,
        constraint: Constraint,
        coords: Vec<Coordinate>,
        data: &SparseDataset,
        poly: Option<&PolyMap>,
    ) -> Result<()> {
        if data.n_samples() != self.n {
            return Err(FgmError::contract("dataset size differs from the cache"));
        }
        self.check_new(&constraint)?;
        let n = self.n;
        let mut values = vec![0.0; n * coords.len()];
        match poly {
            None => {
                let mut slots: HashMap<u32, Vec<usize>> = HashMap::new();
                for (k, c) in coords.iter().enumerate() {
                    if c.feature >= data.n_features() {
                        return Err(FgmError::contract(format!(
                            "feature {} outside dimension {}",
                            c.feature,
                            data.n_features()
                        )));
                    }
                    slots.entry(c.feature as u32).or_default().push(k);
                }
                for (i, (idx, val)) in data.rows().enumerate() {
                    for (j, v) in idx.iter().zip(val) {
                        if let Some(ks) = slots.get(j) {
                            for &k in ks {
                                values[k * n + i] = coords[k].scale * v;
                            }
                        }
                    }
                }
            }
            Some(map) => {
                for (k, c) in coords.iter().enumerate() {
                    let vf = map.decode(c.feature).ok_or_else(|| {
                        FgmError::contract(format!("virtual feature {} out of range", c.feature))
                    })?;
                    for (i, (idx, val)) in data.rows().enumerate() {
                        values[k * n + i] = c.scale * map.value(vf, idx, val);
                    }
                }
            }
        }
        self.constraints.push(constraint);
        self.blocks.push(CachedBlock { coords, values });
        Ok(())
    }

    fn check_new(&self, constraint: &Constraint) -> Result<()> {
        if self.contains(constraint) {
            return Err(FgmError::contract(format!(
                "constraint {:?} already in the active set",
                constraint.ids()
            )));
        }
        Ok(())
    }

    pub(crate) fn check_shape(&self, w: &BlockWeights) -> Result<()> {
        if w.len() != self.blocks.len()
            || w.blocks()
                .iter()
                .zip(&self.blocks)
                .any(|(wt, b)| wt.len() != b.coords.len())
        {
            return Err(FgmError::contract(format!(
                "block dimensions {:?} do not match the cache {:?}",
                w.dims(),
                self.block_dims()
            )));
        }
        Ok(())
    }

    /// Per-block products `X_t w_t`.
    pub fn block_products(&self, w: &BlockWeights) -> Result<Vec<Vec<f64>>> {
        self.check_shape(w)?;
        Ok(self
            .blocks
            .iter()
            .zip(w.blocks())
            .map(|(b, wt)| {
                let mut out = vec![0.0; self.n];
                for (k, &wk) in wt.iter().enumerate() {
                    if wk == 0.0 {
                        continue;
                    }
                    let col = &b.values[k * self.n..(k + 1) * self.n];
                    for (o, x) in out.iter_mut().zip(col) {
                        *o += wk * x;
                    }
                }
                out
            })
            .collect())
    }

    /// Decision scores `s_i = Σ_t w_t'x_it`.
    pub fn scores(&self, w: &BlockWeights) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.n];
        for prod in self.block_products(w)? {
            for (o, p) in out.iter_mut().zip(prod) {
                *o += p;
            }
        }
        Ok(out)
    }

    /// `X_t' d` for every block.
    pub fn transpose_mul(&self, d: &[f64]) -> BlockWeights {
        BlockWeights::new(
            self.blocks
                .iter()
                .map(|b| {
                    b.values
                        .chunks_exact(self.n)
                        .map(|col| col.iter().zip(d).map(|(x, y)| x * y).sum())
                        .collect()
                })
                .collect(),
        )
    }

    /// `‖X_t'(α ⊙ y)‖²` for every block: the worst-case score of each stored
    /// constraint under `α`.
    pub fn constraint_scores(&self, alpha: &[f64], labels: &[f64]) -> Vec<f64> {
        let q: Vec<f64> = alpha.iter().zip(labels).map(|(a, y)| a * y).collect();
        self.transpose_mul(&q)
            .blocks()
            .iter()
            .map(|b| b.iter().map(|x| x * x).sum())
            .collect()
    }
}
