//! Comparison solvers: ℓ₁-regularized and full ℓ₂-regularized linear
//! classifiers over all features, and de-bias retraining on a fixed support.
//!
//! Both regularized problems are solved by the same monotone accelerated
//! proximal gradient scheme as the subproblem solver, with an elementwise
//! proximal step.

use crate::dataset::SparseDataset;
use crate::engine::{Model, ModelKind};
use crate::error::{FgmError, Result};
use crate::loss::{Loss, LossKind};
use crate::subsolver::{MAX_BACKTRACK, Q_SLACK};

/// Default `C` for de-bias retraining.
pub const DEBIAS_C: f64 = 20.0;

/// Dense weights over all input features with the run's objective trace.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseWeights {
    pub w: Vec<f64>,
    pub objective: f64,
    pub trace: Vec<f64>,
    pub iterations: usize,
    /// Step parameter accepted last; a good starting estimate for a warm
    /// restart on a nearby problem.
    pub tau: f64,
}

impl DenseWeights {
    /// Number of nonzero weights.
    pub fn support_size(&self) -> usize {
        self.w.iter().filter(|x| **x != 0.0).count()
    }

    pub fn support(&self) -> Vec<usize> {
        self.w
            .iter()
            .enumerate()
            .filter(|(_, x)| **x != 0.0)
            .map(|(j, _)| j)
            .collect()
    }

    pub fn into_model(self, kind: ModelKind) -> Model {
        Model::from_dense(kind, &self.w)
    }
}

/// Iteration controls for the baseline solvers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineOptions {
    /// Stopping tolerance on the scaled optimality residual: minimum-norm
    /// subgradient over the ℓ₁ weight for ℓ₁, `‖∇F‖ / (1 + ‖w‖)` for ℓ₂.
    pub eps: f64,
    pub max_iter: usize,
    pub eta: f64,
}

impl Default for BaselineOptions {
    fn default() -> Self {
        Self {
            eps: 1e-4,
            max_iter: 1000,
            eta: 0.8,
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Penalty {
    L1(f64),
    Ridge,
}

impl Penalty {
    fn value(&self, w: &[f64]) -> f64 {
        match self {
            Penalty::L1(reg) => reg * w.iter().map(|x| x.abs()).sum::<f64>(),
            Penalty::Ridge => 0.5 * w.iter().map(|x| x * x).sum::<f64>(),
        }
    }

    /// Proximal step of `s · penalty`, in place.
    fn prox(&self, g: &mut [f64], s: f64) {
        match self {
            Penalty::L1(reg) => {
                let t = reg * s;
                for x in g.iter_mut() {
                    *x = if *x > t {
                        *x - t
                    } else if *x < -t {
                        *x + t
                    } else {
                        0.0
                    };
                }
            }
            Penalty::Ridge => {
                let c = 1.0 / (1.0 + s);
                g.iter_mut().for_each(|x| *x *= c);
            }
        }
    }
}

/// Scaled first-order optimality residual of `penalty(w) + p(Xw)`.
///
/// Ridge: `‖w + ∇p(w)‖ / (1 + ‖w‖)`. ℓ₁: the largest entry of the minimum-norm
/// subgradient, divided by the ℓ₁ weight.
fn stationarity(data: &SparseDataset, loss: &Loss, penalty: Penalty, w: &[f64], xw: &[f64]) -> f64 {
    let (_, deriv) = loss.value_and_derivative(xw, data.labels());
    let g = data.weighted_row_sum(&deriv);
    match penalty {
        Penalty::Ridge => {
            let r = w.iter().zip(&g).map(|(a, b)| (a + b) * (a + b)).sum::<f64>().sqrt();
            r / (1.0 + norm(w))
        }
        Penalty::L1(reg) => {
            let worst = w.iter().zip(&g).fold(0.0f64, |acc, (&wj, &gj)| {
                let r = if wj > 0.0 {
                    (gj + reg).abs()
                } else if wj < 0.0 {
                    (gj - reg).abs()
                } else {
                    (gj.abs() - reg).max(0.0)
                };
                acc.max(r)
            });
            worst / reg
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn numerical(iteration: usize, message: &str) -> FgmError {
    FgmError::Numerical {
        iteration,
        message: message.to_string(),
    }
}

/// Monotone accelerated proximal gradient for `penalty(w) + p(Xw)`.
fn solve(
    data: &SparseDataset,
    loss: &Loss,
    penalty: Penalty,
    warm: Vec<f64>,
    l_init: f64,
    opts: &BaselineOptions,
) -> Result<DenseWeights> {
    if !(opts.eta > 0.0 && opts.eta < 1.0) {
        return Err(FgmError::argument(format!("eta must lie in (0, 1), got {}", opts.eta)));
    }
    if warm.len() != data.n_features() {
        return Err(FgmError::contract("warm start has the wrong dimension"));
    }
    let labels = data.labels();
    let objective = |w: &[f64], xw: &[f64]| penalty.value(w) + loss.value(xw, labels);

    let mut xw = data.mul_vec(&warm);
    let mut w = warm;
    let mut f_w = objective(&w, &xw);
    if !f_w.is_finite() {
        return Err(numerical(0, "objective at the starting point is not finite"));
    }
    let mut v = w.clone();
    let mut xv = xw.clone();
    let mut rho = 1.0f64;
    let mut tau_k = l_init;
    let mut cap = l_init.max(1e3 * l_init);
    let mut cap_hits = 0usize;
    let mut trace = vec![f_w];
    let mut iterations = 0;

    if stationarity(data, loss, penalty, &w, &xw) <= opts.eps {
        return Ok(DenseWeights { w, objective: f_w, trace, iterations, tau: tau_k });
    }

    for k in 1..=opts.max_iter {
        iterations = k;
        let (p_v, deriv) = loss.value_and_derivative(&xv, labels);
        let grad = data.weighted_row_sum(&deriv);
        let mut tau = opts.eta * tau_k;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACK {
            let mut z: Vec<f64> = v.iter().zip(&grad).map(|(a, g)| a - g / tau).collect();
            penalty.prox(&mut z, 1.0 / tau);
            let xz = data.mul_vec(&z);
            let r_z = penalty.value(&z);
            let f_z = r_z + loss.value(&xz, labels);
            if !f_z.is_finite() {
                return Err(numerical(k, "objective became non-finite"));
            }
            let (mut lin, mut sq) = (0.0, 0.0);
            for ((zi, vi), gi) in z.iter().zip(&v).zip(&grad) {
                let d = zi - vi;
                lin += gi * d;
                sq += d * d;
            }
            let q = p_v + lin + r_z + 0.5 * tau * sq;
            if f_z <= q + Q_SLACK * q.abs().max(1.0) {
                accepted = Some((z, xz, f_z));
                break;
            }
            let next = tau / opts.eta;
            if next > cap {
                cap_hits += 1;
                if cap_hits >= 2 {
                    cap *= 2.0;
                    cap_hits = 0;
                }
                tau = next.min(cap);
            } else {
                cap_hits = 0;
                tau = next;
            }
        }
        let Some((z, xz, f_z)) = accepted else {
            return Err(numerical(k, "line search failed to find a sufficient decrease"));
        };
        tau_k = tau;

        let rho_next = 0.5 * (1.0 + (1.0 + 4.0 * rho * rho).sqrt());
        let a = rho / rho_next;
        let b = (rho - 1.0) / rho_next;
        let improved = f_z <= f_w;
        let (nw, nxw) = if improved { (z.clone(), xz.clone()) } else { (w.clone(), xw.clone()) };
        // v = next + a(z − next) + b(next − w)
        let mix = |next: &[f64], z: &[f64], old: &[f64]| -> Vec<f64> {
            next.iter()
                .zip(z)
                .zip(old)
                .map(|((n, z), o)| n + a * (z - n) + b * (n - o))
                .collect()
        };
        v = mix(&nw, &z, &w);
        xv = mix(&nxw, &xz, &xw);
        w = nw;
        xw = nxw;
        if improved {
            f_w = f_z;
        }
        rho = rho_next;
        trace.push(f_w);

        let done = improved && stationarity(data, loss, penalty, &w, &xw) <= opts.eps;
        if done {
            break;
        }
    }
    Ok(DenseWeights {
        objective: f_w,
        w,
        trace,
        iterations,
        tau: tau_k,
    })
}

fn default_l_init(data: &SparseDataset, loss: &Loss) -> f64 {
    0.1 * data.n_samples().max(1) as f64 * loss.c
}

/// Minimizes `reg·‖w‖₁ + p(w)` over all features.
pub fn l1_prox_train(data: &SparseDataset, loss: &Loss, reg: f64, opts: &BaselineOptions) -> Result<DenseWeights> {
    l1_prox_train_warm(data, loss, reg, vec![0.0; data.n_features()], default_l_init(data, loss), opts)
}

/// [`l1_prox_train`] from a given starting point and Lipschitz estimate.
pub fn l1_prox_train_warm(
    data: &SparseDataset,
    loss: &Loss,
    reg: f64,
    warm: Vec<f64>,
    l_init: f64,
    opts: &BaselineOptions,
) -> Result<DenseWeights> {
    if !(reg > 0.0 && reg.is_finite()) {
        return Err(FgmError::argument(format!("ℓ₁ weight must be positive, got {reg}")));
    }
    solve(data, loss, Penalty::L1(reg), warm, l_init, opts)
}

/// Smallest ℓ₁ weight at which `w = 0` is optimal: `‖∇p(0)‖_∞`.
pub fn l1_reg_max(data: &SparseDataset, loss: &Loss) -> f64 {
    let (_, deriv) = loss.value_and_derivative(&vec![0.0; data.n_samples()], data.labels());
    data.weighted_row_sum(&deriv)
        .into_iter()
        .fold(0.0, |acc, g| acc.max(g.abs()))
}

/// Minimizes `½‖w‖² + p(w)` over all features; stops once
/// `‖∇F(w)‖ ≤ eps·(1 + ‖w‖)`.
pub fn l2_full_train(data: &SparseDataset, loss: &Loss, opts: &BaselineOptions) -> Result<DenseWeights> {
    solve(
        data,
        loss,
        Penalty::Ridge,
        vec![0.0; data.n_features()],
        default_l_init(data, loss),
        opts,
    )
}

/// Refits a ridge model with trade-off `c_large` on the given support only.
///
/// The returned model reports `support` as its support even where a refit
/// weight happens to be exactly zero.
pub fn retrain_unbiased(
    data: &SparseDataset,
    support: &[usize],
    kind: LossKind,
    c_large: f64,
    opts: &BaselineOptions,
) -> Result<Model> {
    if support.is_empty() {
        return Err(FgmError::argument("cannot retrain on an empty support"));
    }
    let mut support = support.to_vec();
    support.sort_unstable();
    support.dedup();
    let loss = Loss::new(kind, c_large)?;
    let restricted = data.select_columns(&support)?;
    let fit = l2_full_train(&restricted, &loss, opts)?;
    let mut w = vec![0.0; data.n_features()];
    for (&j, &v) in support.iter().zip(&fit.w) {
        w[j] = v;
    }
    let mut model = Model::from_dense(ModelKind::Debiased, &w);
    model.support_units = support.clone();
    model.support_features = support;
    Ok(model)
}

/// Outcome of a search for an ℓ₁ weight giving a target support size.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportMatch {
    pub target: usize,
    pub reg: f64,
    pub weights: DenseWeights,
    /// Whether the support size is within the requested tolerance.
    pub matched: bool,
}

impl SupportMatch {
    pub fn support_size(&self) -> usize {
        self.weights.support_size()
    }
}

/// Path settings for [`l1_match_supports`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathOptions {
    /// Ratio between consecutive ℓ₁ weights on the continuation grid.
    pub ratio: f64,
    pub max_grid: usize,
    pub max_bisect: usize,
    /// Allowed relative deviation from the target support size.
    pub tolerance: f64,
    pub solver: BaselineOptions,
}

impl Default for PathOptions {
    fn default() -> Self {
        Self {
            ratio: 0.85,
            max_grid: 80,
            max_bisect: 30,
            tolerance: 0.05,
            solver: BaselineOptions {
                eps: 1e-3,
                max_iter: 5000,
                eta: 0.8,
            },
        }
    }
}

struct PathPoint {
    reg: f64,
    fit: DenseWeights,
}

/// For every target support size, an ℓ₁ weight whose solution has a support
/// within `tolerance` of it.
///
/// A warm-started continuation runs down a logarithmic grid from
/// `‖∇p(0)‖_∞` until the largest target is passed; each target is then
/// refined by bisection in `log(reg)` between the grid points bracketing it.
/// Targets that cannot be met return the closest solution found with
/// `matched = false`.
pub fn l1_match_supports(
    data: &SparseDataset,
    loss: &Loss,
    targets: &[usize],
    opts: &PathOptions,
) -> Result<Vec<SupportMatch>> {
    if !(opts.ratio > 0.0 && opts.ratio < 1.0) {
        return Err(FgmError::argument("path ratio must lie in (0, 1)"));
    }
    let within = |size: usize, target: usize| {
        (size as f64 - target as f64).abs() <= opts.tolerance * target as f64
    };
    let top = targets.iter().copied().max().unwrap_or(0);
    let top_hi = (top as f64 * (1.0 + opts.tolerance)).floor() as usize;

    let reg_max = l1_reg_max(data, loss);
    if !(reg_max > 0.0) {
        return Err(FgmError::argument("ℓ₁ path is empty: the loss gradient at zero vanishes"));
    }
    let mut path: Vec<PathPoint> = Vec::new();
    let mut warm = vec![0.0; data.n_features()];
    let mut l_init = default_l_init(data, loss);
    let mut reg = reg_max;
    for _ in 0..opts.max_grid {
        reg *= opts.ratio;
        let fit = l1_prox_train_warm(data, loss, reg, warm, l_init, &opts.solver)?;
        warm = fit.w.clone();
        l_init = fit.tau;
        let size = fit.support_size();
        log::debug!("l1 path: reg = {reg:.4e}, support = {size}");
        path.push(PathPoint { reg, fit });
        if size > top_hi {
            break;
        }
    }

    let mut out = Vec::with_capacity(targets.len());
    for &target in targets {
        let closest = |pts: &[&PathPoint]| -> usize {
            (0..pts.len())
                .min_by_key(|&i| (pts[i].fit.support_size() as i64 - target as i64).unsigned_abs())
                .expect("non-empty path")
        };
        let refs: Vec<&PathPoint> = path.iter().collect();
        let best = closest(&refs);
        if within(refs[best].fit.support_size(), target) {
            out.push(SupportMatch {
                target,
                reg: refs[best].reg,
                weights: refs[best].fit.clone(),
                matched: true,
            });
            continue;
        }
        // Bracket: last point below the target, first point above it.
        let above = path.iter().position(|p| p.fit.support_size() > target);
        let (mut lo_reg, mut hi_reg, mut warm, mut l_init) = match above {
            Some(i) if i > 0 => (
                path[i].reg,
                path[i - 1].reg,
                path[i - 1].fit.w.clone(),
                path[i - 1].fit.tau,
            ),
            _ => {
                out.push(SupportMatch {
                    target,
                    reg: refs[best].reg,
                    weights: refs[best].fit.clone(),
                    matched: false,
                });
                continue;
            }
        };
        let mut best_fit = (refs[best].reg, refs[best].fit.clone());
        let mut matched = false;
        for _ in 0..opts.max_bisect {
            let mid = (lo_reg * hi_reg).sqrt();
            let fit = l1_prox_train_warm(data, loss, mid, warm.clone(), l_init, &opts.solver)?;
            let size = fit.support_size();
            let gap = |s: usize| (s as i64 - target as i64).unsigned_abs();
            if gap(size) < gap(best_fit.1.support_size()) {
                best_fit = (mid, fit.clone());
            }
            if within(size, target) {
                best_fit = (mid, fit);
                matched = true;
                break;
            }
            if size > target {
                lo_reg = mid;
            } else {
                hi_reg = mid;
                warm = fit.w;
                l_init = fit.tau;
            }
        }
        out.push(SupportMatch {
            target,
            reg: best_fit.0,
            weights: best_fit.1,
            matched,
        });
    }
    Ok(out)
}
