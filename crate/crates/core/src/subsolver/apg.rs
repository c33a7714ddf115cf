use crate::engine::ActiveSet;
use crate::error::{FgmError, Result};
use crate::loss::Loss;

use super::{moreau_shrinkage, norm, regularizer, BlockWeights};

/// Relative slack on the sufficient-decrease test, absorbing rounding in
/// objectives of large magnitude.
pub(crate) const Q_SLACK: f64 = 1e-14;
/// Backtracking steps allowed within one iteration before giving up.
pub(crate) const MAX_BACKTRACK: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApgOptions {
    /// Backtracking factor in (0, 1).
    pub eta: f64,
    /// Relative objective change at which the solver stops.
    pub eps: f64,
    pub max_inner: usize,
    /// Initial Lipschitz estimate; the first step tries `eta * l_init`.
    pub l_init: f64,
}

impl Default for ApgOptions {
    fn default() -> Self {
        Self {
            eta: 0.8,
            eps: 1e-4,
            max_inner: 1000,
            l_init: 1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ApgOutcome {
    pub weights: BlockWeights,
    /// Step parameter accepted in the last iteration.
    pub tau: f64,
    /// Largest step parameter accepted over the run.
    pub max_tau: f64,
    /// `F(w) = Ω(w) + p(w)` at the returned weights, evaluated directly.
    pub objective: f64,
    pub iterations: usize,
    /// Objective of the iterates, starting with the warm start.
    pub trace: Vec<f64>,
}

/// Objective `Ω(w) + p(w)` evaluated directly from the cache.
pub fn objective(cache: &ActiveSet, labels: &[f64], loss: &Loss, w: &BlockWeights) -> Result<f64> {
    if labels.len() != cache.n_samples() {
        return Err(FgmError::contract("label count differs from the cache"));
    }
    let scores = cache.scores(w)?;
    Ok(regularizer(w) + loss.value(&scores, labels))
}

/// Weights together with their per-block products `X_t w_t`.
#[derive(Clone)]
struct Point {
    w: BlockWeights,
    prod: Vec<Vec<f64>>,
}

impl Point {
    fn scores(&self, n: usize) -> Vec<f64> {
        let mut s = vec![0.0; n];
        for p in &self.prod {
            for (si, pi) in s.iter_mut().zip(p) {
                *si += pi;
            }
        }
        s
    }

    /// `a·x + b·y + c·z` on both the weights and the cached products.
    fn combine(a: f64, x: &Point, b: f64, y: &Point, c: f64, z: &Point) -> Point {
        let mix = |p: &[f64], q: &[f64], r: &[f64]| -> Vec<f64> {
            p.iter()
                .zip(q)
                .zip(r)
                .map(|((p, q), r)| a * p + b * q + c * r)
                .collect()
        };
        Point {
            w: BlockWeights::new(
                x.w.blocks()
                    .iter()
                    .zip(y.w.blocks())
                    .zip(z.w.blocks())
                    .map(|((p, q), r)| mix(p, q, r))
                    .collect(),
            ),
            prod: x
                .prod
                .iter()
                .zip(&y.prod)
                .zip(&z.prod)
                .map(|((p, q), r)| mix(p, q, r))
                .collect(),
        }
    }
}

/// Minimizes `½(Σ_t ‖w_t‖)² + p(w)` over the cached blocks by accelerated
/// proximal gradient with backtracking.
///
/// Iterates are kept monotone: a proximal candidate that increases the
/// objective is used only for momentum. Candidate objectives inside the line
/// search are evaluated from cached products `X_t v_t` and `X_t ∇_t`, so each
/// trial step costs `O(nT)` instead of a pass over the columns.
pub fn apg_solve(
    cache: &ActiveSet,
    labels: &[f64],
    loss: &Loss,
    warm: BlockWeights,
    opts: &ApgOptions,
) -> Result<ApgOutcome> {
    if !(opts.eta > 0.0 && opts.eta < 1.0) {
        return Err(FgmError::argument(format!("eta must lie in (0, 1), got {}", opts.eta)));
    }
    if !(opts.l_init > 0.0 && opts.l_init.is_finite()) {
        return Err(FgmError::argument(format!("initial Lipschitz estimate {} must be positive", opts.l_init)));
    }
    if !(opts.eps > 0.0) {
        return Err(FgmError::argument("APG tolerance must be positive"));
    }
    if labels.len() != cache.n_samples() {
        return Err(FgmError::contract("label count differs from the cache"));
    }
    let n = cache.n_samples();

    let prod = cache.block_products(&warm)?;
    let mut cur = Point { w: warm, prod };
    let mut f_cur = regularizer(&cur.w) + loss.value(&cur.scores(n), labels);
    if !f_cur.is_finite() {
        return Err(numerical(0, "objective at the starting point is not finite"));
    }
    let mut v = cur.clone();
    let mut rho = 1.0f64;
    let mut tau_k = opts.l_init;
    let mut max_tau = 0.0f64;
    let mut cap = opts.l_init.max(1e3 * opts.l_init);
    let mut cap_hits = 0usize;
    let mut f_last_candidate = f_cur;
    let mut trace = vec![f_cur];
    let mut iterations = 0;

    for k in 1..=opts.max_inner {
        iterations = k;
        let (p_v, deriv) = loss.value_and_derivative(&v.scores(n), labels);
        let grad = cache.transpose_mul(&deriv);
        let grad_prod = cache.block_products(&grad)?;

        let mut tau = opts.eta * tau_k;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACK {
            let mut g = v.w.clone();
            g.axpy(-1.0 / tau, &grad);
            let norms: Vec<f64> = g.blocks().iter().map(|b| norm(b)).collect();
            let coef = moreau_shrinkage(&norms, 1.0 / tau);
            let z = BlockWeights::new(
                g.blocks()
                    .iter()
                    .zip(&coef)
                    .map(|(b, c)| b.iter().map(|x| c * x).collect())
                    .collect(),
            );
            let z_prod: Vec<Vec<f64>> = v
                .prod
                .iter()
                .zip(&grad_prod)
                .zip(&coef)
                .map(|((a, b), &c)| {
                    if c == 0.0 {
                        vec![0.0; n]
                    } else {
                        a.iter().zip(b).map(|(a, b)| c * (a - b / tau)).collect()
                    }
                })
                .collect();
            let z = Point { w: z, prod: z_prod };
            let omega_z = regularizer(&z.w);
            let f_z = omega_z + loss.value(&z.scores(n), labels);
            if !f_z.is_finite() {
                return Err(numerical(k, "objective became non-finite"));
            }
            let mut diff = z.w.clone();
            diff.axpy(-1.0, &v.w);
            let q = p_v + grad.dot(&diff) + omega_z + 0.5 * tau * diff.sq_norm();
            if f_z <= q + Q_SLACK * q.abs().max(1.0) {
                accepted = Some((z, f_z));
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
        let Some((z, f_z)) = accepted else {
            return Err(numerical(k, "line search failed to find a sufficient decrease"));
        };
        tau_k = tau;
        max_tau = max_tau.max(tau);

        let improved = f_z <= f_cur;
        let next = if improved { z.clone() } else { cur.clone() };
        let rho_next = 0.5 * (1.0 + (1.0 + 4.0 * rho * rho).sqrt());
        // v = next + (ρ/ρ')(z − next) + ((ρ − 1)/ρ')(next − cur)
        let a = rho / rho_next;
        let b = (rho - 1.0) / rho_next;
        v = Point::combine(1.0 - a + b, &next, a, &z, -b, &cur);
        cur = next;
        if improved {
            f_cur = f_z;
        }
        rho = rho_next;
        trace.push(f_cur);

        let change = (f_last_candidate - f_z).abs() / f_last_candidate.abs().max(1e-12);
        f_last_candidate = f_z;
        if change <= opts.eps {
            break;
        }
    }
    let objective = objective(cache, labels, loss, &cur.w)?;
    if !objective.is_finite() {
        return Err(numerical(iterations, "final objective is not finite"));
    }
    Ok(ApgOutcome {
        weights: cur.w,
        tau: tau_k,
        max_tau,
        objective,
        iterations,
        trace,
    })
}

fn numerical(iteration: usize, message: &str) -> FgmError {
    FgmError::Numerical {
        iteration,
        message: message.to_string(),
    }
}
