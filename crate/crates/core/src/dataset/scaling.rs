use serde::{Deserialize, Serialize};

use super::SparseDataset;
use crate::error::{FgmError, Result};

/// How per-unit scaling factors are derived from the data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ScalingPolicy {
    #[default]
    Ones,
    /// `1 / ‖column‖₂`, with zero columns mapped to 0.
    InverseNorm,
}

impl std::str::FromStr for ScalingPolicy {
    type Err = FgmError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ones" => Ok(ScalingPolicy::Ones),
            "inverse-norm" | "inverse_norm" => Ok(ScalingPolicy::InverseNorm),
            other => Err(FgmError::argument(format!("unknown scaling policy {other:?}"))),
        }
    }
}

/// Non-negative per-unit scaling factors (one per feature, group or node).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingPrior {
    lambda: Vec<f64>,
}

impl ScalingPrior {
    pub fn new(lambda: Vec<f64>) -> Result<Self> {
        if let Some(bad) = lambda.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(FgmError::argument(format!(
                "scaling factors must be finite and non-negative, found {bad}"
            )));
        }
        Ok(Self { lambda })
    }

    pub fn ones(p: usize) -> Self {
        Self {
            lambda: vec![1.0; p],
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.lambda
    }

    pub fn len(&self) -> usize {
        self.lambda.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambda.is_empty()
    }

    pub fn get(&self, j: usize) -> f64 {
        self.lambda[j]
    }
}

/// Inverse of a norm with the `0/0 = 0` convention.
pub(crate) fn inverse_or_zero(norm: f64) -> f64 {
    if norm > 0.0 {
        1.0 / norm
    } else {
        0.0
    }
}

/// Per-feature scaling prior under `policy`.
pub fn compute_scaling_prior(data: &SparseDataset, policy: ScalingPolicy) -> ScalingPrior {
    match policy {
        ScalingPolicy::Ones => ScalingPrior::ones(data.n_features()),
        ScalingPolicy::InverseNorm => ScalingPrior {
            lambda: data
                .column_sq_norms()
                .into_iter()
                .map(|sq| inverse_or_zero(sq.sqrt()))
                .collect(),
        },
    }
}
