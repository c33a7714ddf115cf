//! Primal solver for the ℓ₁²-regularized subproblem
//! `min_w ½(Σ_t ‖w_t‖)² + p(w)` over the cached feature blocks.

mod apg;
mod moreau;

pub use apg::{apg_solve, objective, ApgOptions, ApgOutcome};
pub(crate) use apg::{MAX_BACKTRACK, Q_SLACK};
pub use moreau::{moreau_projection, moreau_shrinkage};

use serde::{Deserialize, Serialize};

/// Per-constraint weight blocks `w_t`, concatenated as the subproblem
/// variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct BlockWeights {
    blocks: Vec<Vec<f64>>,
}

impl BlockWeights {
    pub fn new(blocks: Vec<Vec<f64>>) -> Self {
        Self { blocks }
    }

    pub fn zeros(dims: &[usize]) -> Self {
        Self {
            blocks: dims.iter().map(|&d| vec![0.0; d]).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.blocks.iter().map(Vec::len).collect()
    }

    pub fn block(&self, t: usize) -> &[f64] {
        &self.blocks[t]
    }

    pub fn block_mut(&mut self, t: usize) -> &mut [f64] {
        &mut self.blocks[t]
    }

    pub fn blocks(&self) -> &[Vec<f64>] {
        &self.blocks
    }

    pub fn into_blocks(self) -> Vec<Vec<f64>> {
        self.blocks
    }

    /// Appends a zero block of dimension `dim`.
    pub fn zero_extended(&self, dim: usize) -> Self {
        let mut blocks = self.blocks.clone();
        blocks.push(vec![0.0; dim]);
        Self { blocks }
    }

    pub fn block_norms(&self) -> Vec<f64> {
        self.blocks.iter().map(|b| norm(b)).collect()
    }

    pub fn scale(&mut self, a: f64) {
        self.blocks.iter_mut().flatten().for_each(|x| *x *= a);
    }

    /// `self += a * other`.
    pub fn axpy(&mut self, a: f64, other: &BlockWeights) {
        for (x, y) in self.blocks.iter_mut().flatten().zip(other.blocks.iter().flatten()) {
            *x += a * y;
        }
    }

    pub fn dot(&self, other: &BlockWeights) -> f64 {
        self.blocks
            .iter()
            .flatten()
            .zip(other.blocks.iter().flatten())
            .map(|(x, y)| x * y)
            .sum()
    }

    pub fn sq_norm(&self) -> f64 {
        self.dot(self)
    }

    pub fn sq_distance(&self, other: &BlockWeights) -> f64 {
        self.blocks
            .iter()
            .flatten()
            .zip(other.blocks.iter().flatten())
            .map(|(x, y)| (x - y) * (x - y))
            .sum()
    }

    pub fn is_finite(&self) -> bool {
        self.blocks.iter().flatten().all(|x| x.is_finite())
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `Ω(w) = ½(Σ_t ‖w_t‖₂)²`.
pub fn regularizer(w: &BlockWeights) -> f64 {
    let s: f64 = w.block_norms().iter().sum();
    0.5 * s * s
}

/// MKL kernel weights implied by a primal solution, `μ_t = ‖w_t‖ / Σ_s ‖w_s‖`.
///
/// All zeros when `w = 0`.
pub fn kernel_weights(w: &BlockWeights) -> Vec<f64> {
    let norms = w.block_norms();
    let total: f64 = norms.iter().sum();
    if total > 0.0 {
        norms.iter().map(|n| n / total).collect()
    } else {
        vec![0.0; norms.len()]
    }
}
