//! Gaussian synthetic benchmarks with a sparse ground-truth weight vector.
//!
//! All randomness comes from ChaCha20 seeded with the user seed; the ground
//! truth, training split and test split each draw from their own stream so
//! that, for one seed, adding or resizing a split never perturbs the others.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{DatasetBuilder, SparseDataset};
use crate::error::{FgmError, Result};

const TRUTH_STREAM: u64 = 0;
/// Stream used for the training split.
pub const TRAIN_STREAM: u64 = 1;
/// Stream used for the test split.
pub const TEST_STREAM: u64 = 2;

/// Shape of the informative weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Weighting {
    /// `u ~ Uniform(0, 1]`.
    TypeI,
    /// `u^0.3`: flatter decay.
    TypeII,
    /// `u^3`: sharper decay.
    TypeIII,
}

impl Weighting {
    pub fn from_index(t: u8) -> Result<Self> {
        match t {
            1 => Ok(Weighting::TypeI),
            2 => Ok(Weighting::TypeII),
            3 => Ok(Weighting::TypeIII),
            other => Err(FgmError::argument(format!("weighting type must be 1, 2 or 3, got {other}"))),
        }
    }

    fn apply(self, u: f64) -> f64 {
        match self {
            Weighting::TypeI => u,
            Weighting::TypeII => u.powf(0.3),
            Weighting::TypeIII => u.powi(3),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n: usize,
    pub m: usize,
    pub informative: usize,
    pub weighting: Weighting,
    pub seed: u64,
}

/// Dense ground-truth weights and their support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    weights: Vec<f64>,
    support: Vec<usize>,
}

impl GroundTruth {
    pub fn new(weights: Vec<f64>) -> Self {
        let support = weights
            .iter()
            .enumerate()
            .filter(|(_, w)| **w != 0.0)
            .map(|(j, _)| j)
            .collect();
        Self { weights, support }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Indices of the nonzero weights, ascending.
    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }
}

fn rng_for(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Draws the sparse ground truth for `spec`.
pub fn generate_truth(spec: &SyntheticSpec) -> Result<GroundTruth> {
    if spec.informative == 0 || spec.informative > spec.m {
        return Err(FgmError::argument(format!(
            "informative count must be in 1..={}, got {}",
            spec.m, spec.informative
        )));
    }
    let mut rng = rng_for(spec.seed, TRUTH_STREAM);
    let mut support = rand::seq::index::sample(&mut rng, spec.m, spec.informative).into_vec();
    support.sort_unstable();
    let mut weights = vec![0.0; spec.m];
    for &j in &support {
        // 1 - [0, 1) keeps the draw in (0, 1].
        let u = 1.0 - rng.random::<f64>();
        weights[j] = spec.weighting.apply(u);
    }
    Ok(GroundTruth::new(weights))
}

/// Samples `n` instances with iid standard normal features labelled by
/// `sign(x'w)` (zero maps to +1).
pub fn generate_split(truth: &GroundTruth, n: usize, seed: u64, stream: u64) -> SparseDataset {
    let m = truth.dim();
    let mut rng = rng_for(seed, stream);
    let mut builder = DatasetBuilder::with_capacity(m, n, n * m);
    let mut row: Vec<(usize, f64)> = Vec::with_capacity(m);
    for _ in 0..n {
        row.clear();
        for j in 0..m {
            let v: f64 = rng.sample(StandardNormal);
            row.push((j, v));
        }
        let score: f64 = truth.support.iter().map(|&j| row[j].1 * truth.weights[j]).sum();
        let label = if score >= 0.0 { 1.0 } else { -1.0 };
        builder
            .push_row(&row, label)
            .expect("generated rows are well formed");
    }
    builder.finish()
}

/// Ground truth plus the training split for `spec`.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<(SparseDataset, GroundTruth)> {
    let truth = generate_truth(spec)?;
    let train = generate_split(&truth, spec.n, spec.seed, TRAIN_STREAM);
    Ok((train, truth))
}

/// Writes `index weight` lines (0-based) for the nonzero weights.
pub fn write_ground_truth(truth: &GroundTruth, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let write = || -> std::io::Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "# dim {}", truth.dim())?;
        for &j in truth.support() {
            writeln!(out, "{} {:?}", j, truth.weights[j])?;
        }
        out.flush()
    };
    write().map_err(|e| FgmError::io(path, e))
}

/// Reads a ground-truth file written by [`write_ground_truth`].
///
/// The dimension comes from the `# dim` header when present, otherwise from
/// `dim`, otherwise from the largest index.
pub fn load_ground_truth(path: impl AsRef<Path>, dim: Option<usize>) -> Result<GroundTruth> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| FgmError::io(path, e))?;
    let mut header_dim = None;
    let mut entries = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.map_err(|e| FgmError::io(path, e))?;
        let line = line.trim();
        if let Some(rest) = line.strip_prefix("# dim") {
            header_dim = rest.trim().parse::<usize>().ok();
            continue;
        }
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = || FgmError::Parse {
            line: lineno,
            message: format!("expected `index weight`, found {line:?}"),
        };
        let mut parts = line.split_whitespace();
        let j: usize = parts.next().and_then(|t| t.parse().ok()).ok_or_else(bad)?;
        let w: f64 = parts.next().and_then(|t| t.parse().ok()).ok_or_else(bad)?;
        if parts.next().is_some() {
            return Err(bad());
        }
        entries.push((j, w));
    }
    let max_seen = entries.iter().map(|&(j, _)| j + 1).max().unwrap_or(0);
    let m = header_dim.or(dim).unwrap_or(max_seen).max(max_seen);
    let mut weights = vec![0.0; m];
    for (j, w) in entries {
        weights[j] = w;
    }
    Ok(GroundTruth::new(weights))
}
