use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{GroundTruth, SparseDataset};
use crate::error::{FgmError, Result};
use crate::subsolver::BlockWeights;
use crate::worstcase::{Constraint, PolyMap};

use super::active_set::ActiveSet;
use super::train::{SolverConfig, TraceRecord};
use super::units::UnitSpace;

pub const MODEL_VERSION: u32 = 1;

/// What the unit ids of a model refer to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelMode {
    Plain,
    Groups,
    Tree,
    Polynomial,
}

/// Which trainer produced a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Fgm,
    L1,
    L2Full,
    Debiased,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    DuplicateConstraint,
    ObjectiveConverged,
    MaxOuter,
    /// Not an iterative cutting-plane run.
    Direct,
}

/// Effective coefficient on one input feature (or polynomial coordinate).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightEntry {
    pub id: usize,
    pub weight: f64,
}

/// A trained sparse linear classifier.
///
/// Weights are stored with all scaling folded in, so prediction needs only
/// the raw features. The JSON form has a fixed field order and excludes
/// timings, so identical runs serialize identically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub version: u32,
    pub kind: ModelKind,
    pub mode: ModelMode,
    pub n_features: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub poly: Option<PolyMap>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<SolverConfig>,
    pub stop_reason: StopReason,
    /// Selected units: features, groups, tree nodes or polynomial coordinates.
    pub support_units: Vec<usize>,
    /// Input features (polynomial coordinates in polynomial mode) covered by
    /// the selected units.
    pub support_features: Vec<usize>,
    pub weights: Vec<WeightEntry>,
    #[serde(default)]
    pub constraints: Vec<Constraint>,
    #[serde(default)]
    pub trace: Vec<TraceRecord>,
}

impl Model {
    /// A plain-mode model from a dense weight vector; support is the
    /// nonzero entries.
    pub fn from_dense(kind: ModelKind, weights: &[f64]) -> Self {
        let entries: Vec<WeightEntry> = weights
            .iter()
            .enumerate()
            .filter(|(_, w)| **w != 0.0)
            .map(|(id, &weight)| WeightEntry { id, weight })
            .collect();
        let support: Vec<usize> = entries.iter().map(|e| e.id).collect();
        Self {
            version: MODEL_VERSION,
            kind,
            mode: ModelMode::Plain,
            n_features: weights.len(),
            poly: None,
            config: None,
            stop_reason: StopReason::Direct,
            support_units: support.clone(),
            support_features: support,
            weights: entries,
            constraints: Vec::new(),
            trace: Vec::new(),
        }
    }

    pub(crate) fn from_training(
        units: &UnitSpace,
        active: &ActiveSet,
        w: &BlockWeights,
        n_features: usize,
        config: SolverConfig,
        trace: Vec<TraceRecord>,
        stop_reason: StopReason,
    ) -> Self {
        let mut agg: BTreeMap<usize, f64> = BTreeMap::new();
        let mut support_units = BTreeSet::new();
        for (t, wt) in w.blocks().iter().enumerate() {
            let coords = active.coordinates(t);
            if wt.iter().all(|x| *x == 0.0) {
                continue;
            }
            for (c, &wk) in coords.iter().zip(wt) {
                support_units.insert(c.unit);
                *agg.entry(c.feature).or_insert(0.0) += wk * c.scale;
            }
        }
        let support_features: BTreeSet<usize> = support_units
            .iter()
            .flat_map(|&u| units.unit_features(u))
            .collect();
        let mode = match units {
            UnitSpace::Plain(_) => ModelMode::Plain,
            UnitSpace::Groups(_) => ModelMode::Groups,
            UnitSpace::Tree(_) => ModelMode::Tree,
            UnitSpace::Polynomial { .. } => ModelMode::Polynomial,
        };
        Self {
            version: MODEL_VERSION,
            kind: ModelKind::Fgm,
            mode,
            n_features,
            poly: units.poly_map().copied(),
            config: Some(config),
            stop_reason,
            support_units: support_units.into_iter().collect(),
            support_features: support_features.into_iter().collect(),
            weights: agg
                .into_iter()
                .filter(|(_, w)| *w != 0.0)
                .map(|(id, weight)| WeightEntry { id, weight })
                .collect(),
            constraints: active.constraints().to_vec(),
            trace,
        }
    }

    pub fn support_units(&self) -> &[usize] {
        &self.support_units
    }

    pub fn support_features(&self) -> &[usize] {
        &self.support_features
    }

    /// Number of outer iterations recorded.
    pub fn outer_iterations(&self) -> usize {
        self.trace.len()
    }

    /// Dense weight vector over the input features (plain-like modes only).
    pub fn dense_weights(&self) -> Result<Vec<f64>> {
        if self.mode == ModelMode::Polynomial {
            return Err(FgmError::argument("polynomial models have no dense input-space weights"));
        }
        let mut w = vec![0.0; self.n_features];
        for e in &self.weights {
            w[e.id] = e.weight;
        }
        Ok(w)
    }

    /// Decision scores `Σ weight · φ(x)` for every instance.
    pub fn decision_values(&self, data: &SparseDataset) -> Result<Vec<f64>> {
        match self.mode {
            ModelMode::Polynomial => {
                let map = self
                    .poly
                    .ok_or_else(|| FgmError::contract("polynomial model without map parameters"))?;
                let mut decoded = Vec::with_capacity(self.weights.len());
                for e in &self.weights {
                    let f = map.decode(e.id).ok_or_else(|| {
                        FgmError::contract(format!("virtual feature {} out of range", e.id))
                    })?;
                    decoded.push((f, e.weight));
                }
                if data.n_features() > map.m {
                    return Err(FgmError::contract(format!(
                        "data has {} features, the polynomial model expects at most {}",
                        data.n_features(),
                        map.m
                    )));
                }
                Ok(data
                    .rows()
                    .map(|(idx, val)| decoded.iter().map(|&(f, w)| w * map.value(f, idx, val)).sum())
                    .collect())
            }
            _ => {
                if let Some(e) = self.weights.iter().find(|e| e.id >= data.n_features()) {
                    return Err(FgmError::contract(format!(
                        "model uses feature {} but the data has {} features",
                        e.id,
                        data.n_features()
                    )));
                }
                let mut w = vec![0.0; data.n_features()];
                for e in &self.weights {
                    w[e.id] = e.weight;
                }
                Ok(data.mul_vec(&w))
            }
        }
    }

    /// Predicted ±1 labels, with `sign(0) = +1`.
    pub fn predict(&self, data: &SparseDataset) -> Result<Vec<f64>> {
        Ok(self
            .decision_values(data)?
            .into_iter()
            .map(|s| if s >= 0.0 { 1.0 } else { -1.0 })
            .collect())
    }

    /// Fraction of instances whose predicted label matches.
    pub fn accuracy(&self, data: &SparseDataset) -> Result<f64> {
        let pred = self.predict(data)?;
        if pred.is_empty() {
            return Ok(0.0);
        }
        let hits = pred.iter().zip(data.labels()).filter(|(p, y)| p == y).count();
        Ok(hits as f64 / pred.len() as f64)
    }

    /// Number of ground-truth support features among the selected features.
    pub fn evaluate_recovery(&self, truth: &GroundTruth) -> Result<usize> {
        if self.mode == ModelMode::Polynomial {
            return Err(FgmError::argument(
                "feature recovery is undefined for polynomial models",
            ));
        }
        let truth: BTreeSet<usize> = truth.support().iter().copied().collect();
        Ok(self
            .support_features
            .iter()
            .filter(|j| truth.contains(j))
            .count())
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| FgmError::Serde(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: Model = serde_json::from_str(text).map_err(|e| FgmError::Serde(e.to_string()))?;
        if model.version != MODEL_VERSION {
            return Err(FgmError::Serde(format!(
                "unsupported model version {} (expected {MODEL_VERSION})",
                model.version
            )));
        }
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = self.to_json()?;
        text.push('\n');
        fs::write(path, text).map_err(|e| FgmError::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| FgmError::io(path, e))?;
        Self::from_json(&text)
    }
}
