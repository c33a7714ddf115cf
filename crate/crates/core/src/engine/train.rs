use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dataset::{GroupStructure, ScalingPolicy, SparseDataset, TreeStructure};
use crate::error::{FgmError, Result};
use crate::loss::{Loss, LossKind};
use crate::subsolver::{apg_solve, ApgOptions, BlockWeights};
use crate::worstcase::Constraint;

use super::active_set::ActiveSet;
use super::model::{Model, StopReason};
use super::units::UnitSpace;

/// What the worst-case analysis selects over.
#[derive(Debug, Clone)]
pub enum Structure {
    Plain,
    Groups(GroupStructure),
    Tree(TreeStructure),
    /// Degree-2 polynomial coordinates of `(γ x'z + r)²`, scored `block`
    /// anchor features at a time.
    Polynomial { gamma: f64, r: f64, block: usize },
}

/// How the first Lipschitz estimate is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum L0Policy {
    /// `0.1 · n · C`.
    #[default]
    Scaled,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub budget: usize,
    pub c: f64,
    pub loss: LossKind,
    pub eps_apg: f64,
    pub eps_outer: f64,
    pub max_outer: usize,
    pub eta: f64,
    pub l0: L0Policy,
    pub max_inner: usize,
    pub scaling: ScalingPolicy,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            budget: 10,
            c: 10.0,
            loss: LossKind::SquaredHinge,
            eps_apg: 1e-4,
            eps_outer: 1e-2,
            max_outer: 15,
            eta: 0.8,
            l0: L0Policy::Scaled,
            max_inner: 1000,
            scaling: ScalingPolicy::Ones,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(FgmError::argument(msg));
        if self.budget == 0 {
            return bad("budget must be at least 1".into());
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            return bad(format!("C must be positive, got {}", self.c));
        }
        if !(self.eps_apg > 0.0) || !(self.eps_outer > 0.0) {
            return bad("tolerances must be positive".into());
        }
        if self.max_outer == 0 || self.max_inner == 0 {
            return bad("iteration caps must be at least 1".into());
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return bad(format!("eta must lie in (0, 1), got {}", self.eta));
        }
        if let L0Policy::Fixed(l) = self.l0 {
            if !(l > 0.0 && l.is_finite()) {
                return bad(format!("initial Lipschitz estimate must be positive, got {l}"));
            }
        }
        Ok(())
    }

    pub fn loss(&self) -> Result<Loss> {
        Loss::new(self.loss, self.c)
    }
}

/// Diagnostics of one outer iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: usize,
    /// Subproblem objective `F(w_T)`.
    pub objective: f64,
    /// Lower bound `−F(w_T)`: a certified lower bound on the optimal value
    /// of the min–max problem, non-decreasing over iterations.
    pub beta: f64,
    /// `max_t −f(α_T, d_t)` over the stored constraints.
    pub beta_dual: f64,
    /// Running minimum of `−f(α_j, d_{j+1})`, an upper bound.
    pub phi: f64,
    pub inner_iterations: usize,
    /// Unit ids of the constraint added in this iteration.
    pub selected: Vec<usize>,
    /// Wall time since training started. Not written to model files, which
    /// must be reproducible byte for byte.
    #[serde(skip, default)]
    pub seconds: f64,
}

/// Lower and upper bound sequences of a run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BoundsTrace {
    pub beta: Vec<f64>,
    pub phi: Vec<f64>,
}

impl BoundsTrace {
    pub fn from_trace(trace: &[TraceRecord]) -> Self {
        Self {
            beta: trace.iter().map(|r| r.beta).collect(),
            phi: trace.iter().map(|r| r.phi).collect(),
        }
    }

    /// Checks monotonicity of both sequences and `β_T ≤ φ_T`, each up to
    /// `rel` relative slack. Returns a description of the first violation.
    pub fn check(&self, rel: f64) -> std::result::Result<(), String> {
        let slack = |x: f64| rel * x.abs().max(1.0);
        for (t, w) in self.beta.windows(2).enumerate() {
            if w[1] < w[0] - slack(w[0]) {
                return Err(format!("beta decreased at iteration {}: {} -> {}", t + 2, w[0], w[1]));
            }
        }
        for (t, w) in self.phi.windows(2).enumerate() {
            if w[1] > w[0] + slack(w[0]) {
                return Err(format!("phi increased at iteration {}: {} -> {}", t + 2, w[0], w[1]));
            }
        }
        for (t, (b, p)) in self.beta.iter().zip(&self.phi).enumerate() {
            if *b > p + rel * p.abs() {
                return Err(format!("beta {b} above phi {p} at iteration {}", t + 1));
            }
        }
        Ok(())
    }
}

/// `−f(α, d) = ½ c(d) + Σ_i ℓ*(α_i)` for a constraint whose summed worst-case
/// score under `α` is `score`.
pub fn neg_dual_value(score: f64, alpha: &[f64], loss: &Loss) -> f64 {
    0.5 * score + loss.conjugate_sum(alpha)
}

/// `(max_t −f(α, d_t), −f(α, d_new))` over the stored constraints and a newly
/// generated one with summed score `new_score`.
pub fn eval_bounds(alpha: &[f64], active: &ActiveSet, labels: &[f64], loss: &Loss, new_score: f64) -> (f64, f64) {
    let stored = active
        .constraint_scores(alpha, labels)
        .into_iter()
        .fold(0.0f64, f64::max);
    (neg_dual_value(stored, alpha, loss), neg_dual_value(new_score, alpha, loss))
}

/// Trains a sparse linear classifier by alternating worst-case constraint
/// generation with an accelerated proximal-gradient solve over the cached
/// columns of all constraints generated so far.
pub fn fgm_train(data: &SparseDataset, structure: &Structure, cfg: &SolverConfig) -> Result<Model> {
    cfg.validate()?;
    let loss = cfg.loss()?;
    let n = data.n_samples();
    if n == 0 {
        return Err(FgmError::argument("training set is empty"));
    }
    let units = UnitSpace::resolve(structure, data, cfg.scaling)?;
    if units.is_empty() {
        return Err(FgmError::argument("no candidate units to select from"));
    }
    let labels = data.labels();
    let start = Instant::now();

    let mut active = ActiveSet::new(n);
    let mut w = BlockWeights::default();
    let mut alpha = vec![1.0; n];
    let mut l_next = match cfg.l0 {
        L0Policy::Scaled => 0.1 * n as f64 * cfg.c,
        L0Policy::Fixed(l) => l,
    };
    let mut phi = f64::INFINITY;
    let mut trace: Vec<TraceRecord> = Vec::new();

    let mut next = units.generate(&alpha, data, cfg.budget)?;
    let stop = loop {
        let constraint = Constraint::new(next.iter().map(|&(u, _)| u).collect(), cfg.budget);
        let coords = units.coordinates(&constraint);
        let dim = coords.len();
        active.push_from_data(constraint.clone(), coords, data, units.poly_map())?;
        let iteration = active.len();

        let warm = w.zero_extended(dim);
        let opts = ApgOptions {
            eta: cfg.eta,
            eps: cfg.eps_apg,
            max_inner: cfg.max_inner,
            l_init: l_next,
        };
        let solved = apg_solve(&active, labels, &loss, warm, &opts).map_err(|e| match e {
            FgmError::Numerical { iteration: inner, message } => FgmError::Numerical {
                iteration,
                message: format!("{message} (inner iteration {inner})"),
            },
            other => other,
        })?;
        w = solved.weights;
        l_next = cfg.eta * cfg.eta * solved.tau;

        let scores = active.scores(&w)?;
        alpha = loss.recover_duals(&loss.margins(&scores, labels));

        next = units.generate(&alpha, data, cfg.budget)?;
        let new_score: f64 = next.iter().map(|&(_, s)| s).sum();
        let (beta_dual, upper) = eval_bounds(&alpha, &active, labels, &loss, new_score);
        phi = phi.min(upper);
        let objective = solved.objective;
        trace.push(TraceRecord {
            iteration,
            objective,
            beta: -objective,
            beta_dual,
            phi,
            inner_iterations: solved.iterations,
            selected: constraint.ids().to_vec(),
            seconds: start.elapsed().as_secs_f64(),
        });
        log::debug!(
            "outer {iteration}: F = {objective:.6e}, phi = {phi:.6e}, {} inner iterations",
            solved.iterations
        );

        let candidate = Constraint::new(next.iter().map(|&(u, _)| u).collect(), cfg.budget);
        if active.contains(&candidate) {
            break StopReason::DuplicateConstraint;
        }
        if iteration > 1 {
            let prev = trace[iteration - 2].objective;
            if (prev - objective).abs() / prev.abs().max(1e-12) <= cfg.eps_outer {
                break StopReason::ObjectiveConverged;
            }
        }
        if iteration >= cfg.max_outer {
            break StopReason::MaxOuter;
        }
    };
    Ok(Model::from_training(&units, &active, &w, data.n_features(), cfg.clone(), trace, stop))
}
