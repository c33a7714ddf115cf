//! Sparse design matrices, LIBSVM I/O, synthetic benchmarks and feature
//! structures (groups, trees, scaling priors).

mod libsvm;
mod scaling;
mod structure;
mod synthetic;

pub use libsvm::{load_libsvm, parse_libsvm, write_libsvm};
pub use scaling::{compute_scaling_prior, ScalingPolicy, ScalingPrior};
pub use structure::{
    load_groups, load_tree, parse_groups, parse_tree, Group, GroupStructure, TreeNode,
    TreeStructure,
};
pub use synthetic::{
    generate_split, generate_synthetic, generate_truth, load_ground_truth, write_ground_truth,
    GroundTruth, SyntheticSpec, Weighting, TEST_STREAM, TRAIN_STREAM,
};

use crate::error::{FgmError, Result};

/// Instance-major sparse matrix with ±1 labels.
///
/// Rows are stored in compressed form: the nonzeros of row `i` live in
/// `indices[indptr[i]..indptr[i + 1]]` with strictly increasing column ids.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseDataset {
    n_features: usize,
    indptr: Vec<usize>,
    indices: Vec<u32>,
    values: Vec<f64>,
    labels: Vec<f64>,
}

impl SparseDataset {
    /// Builds a dataset from per-row `(feature, value)` lists.
    ///
    /// Rows are sorted by feature id; duplicate ids within a row, ids outside
    /// `[0, n_features)` and labels other than ±1 are rejected.
    pub fn from_rows(
        n_features: usize,
        rows: Vec<Vec<(usize, f64)>>,
        labels: Vec<f64>,
    ) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(FgmError::contract(format!(
                "{} rows but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        if n_features > u32::MAX as usize {
            return Err(FgmError::argument("feature dimension exceeds u32 range"));
        }
        let mut builder = DatasetBuilder::with_capacity(n_features, rows.len(), 0);
        for (i, (mut row, label)) in rows.into_iter().zip(labels).enumerate() {
            row.sort_by_key(|&(j, _)| j);
            for pair in row.windows(2) {
                if pair[0].0 == pair[1].0 {
                    return Err(FgmError::contract(format!(
                        "row {i} repeats feature {}",
                        pair[0].0
                    )));
                }
            }
            builder.push_row(&row, label)?;
        }
        Ok(builder.finish())
    }

    pub fn n_samples(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    /// Column ids and values of row `i`.
    pub fn row(&self, i: usize) -> (&[u32], &[f64]) {
        let range = self.indptr[i]..self.indptr[i + 1];
        (&self.indices[range.clone()], &self.values[range])
    }

    pub fn rows(&self) -> impl Iterator<Item = (&[u32], &[f64])> + '_ {
        (0..self.n_samples()).map(move |i| self.row(i))
    }

    /// Returns a copy with the feature dimension raised to `n_features`.
    pub fn with_dim(mut self, n_features: usize) -> Result<Self> {
        let max_seen = self.indices.iter().map(|&j| j as usize + 1).max().unwrap_or(0);
        if n_features < max_seen {
            return Err(FgmError::argument(format!(
                "dimension {n_features} is smaller than the largest feature index {max_seen}"
            )));
        }
        self.n_features = n_features;
        Ok(self)
    }

    /// Squared Euclidean norm of every column.
    pub fn column_sq_norms(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n_features];
        for (&j, &v) in self.indices.iter().zip(&self.values) {
            out[j as usize] += v * v;
        }
        out
    }

    /// Dense copy of column `j`.
    pub fn column(&self, j: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.n_samples()];
        for (i, slot) in out.iter_mut().enumerate() {
            let (idx, val) = self.row(i);
            if let Ok(pos) = idx.binary_search(&(j as u32)) {
                *slot = val[pos];
            }
        }
        out
    }

    /// Column-major copy: for each feature, the `(row, value)` nonzeros.
    pub fn to_columns(&self) -> Vec<Vec<(u32, f64)>> {
        let mut cols = vec![Vec::new(); self.n_features];
        for (i, (idx, val)) in self.rows().enumerate() {
            for (&j, &v) in idx.iter().zip(val) {
                cols[j as usize].push((i as u32, v));
            }
        }
        cols
    }

    /// Restriction to the given columns, renumbered `0..columns.len()` in the
    /// order supplied.
    pub fn select_columns(&self, columns: &[usize]) -> Result<Self> {
        let mut remap = vec![u32::MAX; self.n_features];
        for (new, &old) in columns.iter().enumerate() {
            if old >= self.n_features {
                return Err(FgmError::contract(format!(
                    "column {old} outside dimension {}",
                    self.n_features
                )));
            }
            if remap[old] != u32::MAX {
                return Err(FgmError::contract(format!("column {old} listed twice")));
            }
            remap[old] = new as u32;
        }
        let mut builder = DatasetBuilder::with_capacity(columns.len(), self.n_samples(), 0);
        let mut row = Vec::new();
        for (i, (idx, val)) in self.rows().enumerate() {
            row.clear();
            for (&j, &v) in idx.iter().zip(val) {
                let mapped = remap[j as usize];
                if mapped != u32::MAX {
                    row.push((mapped as usize, v));
                }
            }
            row.sort_by_key(|&(j, _)| j);
            builder.push_row(&row, self.labels[i])?;
        }
        Ok(builder.finish())
    }

    /// `Σ_i coef_i x_i`, accumulated in row order.
    pub fn weighted_row_sum(&self, coef: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_features];
        for (i, (idx, val)) in self.rows().enumerate() {
            let q = coef[i];
            if q == 0.0 {
                continue;
            }
            for (&j, &v) in idx.iter().zip(val) {
                out[j as usize] += q * v;
            }
        }
        out
    }

    /// `X w` for a dense weight vector of length `n_features`.
    pub fn mul_vec(&self, w: &[f64]) -> Vec<f64> {
        self.rows()
            .map(|(idx, val)| idx.iter().zip(val).map(|(&j, &v)| v * w[j as usize]).sum())
            .collect()
    }
}

/// Incremental row-by-row construction of a [`SparseDataset`].
#[derive(Debug)]
pub(crate) struct DatasetBuilder {
    n_features: usize,
    indptr: Vec<usize>,
    indices: Vec<u32>,
    values: Vec<f64>,
    labels: Vec<f64>,
}

impl DatasetBuilder {
    pub(crate) fn with_capacity(n_features: usize, rows: usize, nnz: usize) -> Self {
        let mut indptr = Vec::with_capacity(rows + 1);
        indptr.push(0);
        Self {
            n_features,
            indptr,
            indices: Vec::with_capacity(nnz),
            values: Vec::with_capacity(nnz),
            labels: Vec::with_capacity(rows),
        }
    }

    /// Appends one row; `row` must already be sorted by feature id.
    pub(crate) fn push_row(&mut self, row: &[(usize, f64)], label: f64) -> Result<()> {
        if label != 1.0 && label != -1.0 {
            return Err(FgmError::contract(format!("label {label} is not ±1")));
        }
        let mut prev: Option<usize> = None;
        for &(j, v) in row {
            if j >= self.n_features {
                return Err(FgmError::contract(format!(
                    "feature {j} outside dimension {}",
                    self.n_features
                )));
            }
            if prev.is_some_and(|p| p >= j) {
                return Err(FgmError::contract("row feature ids not strictly increasing"));
            }
            prev = Some(j);
            self.indices.push(j as u32);
            self.values.push(v);
        }
        self.indptr.push(self.indices.len());
        self.labels.push(label);
        Ok(())
    }

    pub(crate) fn finish(self) -> SparseDataset {
        SparseDataset {
            n_features: self.n_features,
            indptr: self.indptr,
            indices: self.indices,
            values: self.values,
            labels: self.labels,
        }
    }
}
