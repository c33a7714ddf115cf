//! Independent reference implementations shared by the integration tests.
//!
//! Nothing here calls into the code under test except to build inputs, so a
//! disagreement points at one side or the other rather than at both.

#![allow(dead_code)]

use fgm::dataset::{SparseDataset, TreeNode, TreeStructure};
use fgm::engine::{ActiveSet, Coordinate};
use fgm::worstcase::Constraint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

pub fn labels(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect()
}

/// Random sparse dataset with Gaussian entries present with probability
/// `density` and random labels.
pub fn random_dataset(rng: &mut ChaCha8Rng, n: usize, m: usize, density: f64) -> SparseDataset {
    let rows: Vec<Vec<(usize, f64)>> = (0..n)
        .map(|_| {
            let mut row = Vec::new();
            for j in 0..m {
                if rng.random::<f64>() < density {
                    row.push((j, normal(rng)));
                }
            }
            row
        })
        .collect();
    let y = labels(rng, n);
    SparseDataset::from_rows(m, rows, y).unwrap()
}

pub fn dense_rows(data: &SparseDataset) -> Vec<Vec<f64>> {
    data.rows()
        .map(|(idx, val)| {
            let mut x = vec![0.0; data.n_features()];
            for (&j, &v) in idx.iter().zip(val) {
                x[j as usize] = v;
            }
            x
        })
        .collect()
}

pub fn random_alpha(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random::<f64>() * 2.0).collect()
}

/// `ω_j = Σ_i α_i y_i x_ij` from dense rows.
pub fn omega_dense(alpha: &[f64], data: &SparseDataset) -> Vec<f64> {
    let mut w = vec![0.0; data.n_features()];
    for ((x, &a), &y) in dense_rows(data).iter().zip(alpha).zip(data.labels()) {
        for (wj, xj) in w.iter_mut().zip(x) {
            *wj += a * y * xj;
        }
    }
    w
}

/// Ids of the `b` best scores under the stated tie rule (higher score, then
/// smaller id), sorted ascending.
pub fn top_b_by_sort(scores: &[f64], b: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&i, &j| scores[j].total_cmp(&scores[i]).then(i.cmp(&j)));
    order.truncate(b);
    order.sort_unstable();
    order
}

/// Maximum of `Σ_{j∈S} c_j` over all subsets of size `min(b, p)`, with every
/// maximizing subset.
pub fn brute_force_subsets(scores: &[f64], b: usize) -> (f64, Vec<Vec<usize>>) {
    let p = scores.len();
    let b = b.min(p);
    let mut best = f64::NEG_INFINITY;
    let mut argmax = Vec::new();
    for mask in 0u32..(1 << p) {
        if mask.count_ones() as usize != b {
            continue;
        }
        let ids: Vec<usize> = (0..p).filter(|j| mask & (1 << j) != 0).collect();
        let value: f64 = ids.iter().map(|&j| scores[j]).sum();
        if value > best {
            best = value;
            argmax = vec![ids];
        } else if value == best {
            argmax.push(ids);
        }
    }
    (best, argmax)
}

/// Objective `½‖w − g‖² + s·½(Σ_t ‖w_t‖)²`.
pub fn prox_objective(g: &[Vec<f64>], w: &[Vec<f64>], s: f64) -> f64 {
    let mut fit = 0.0;
    let mut sum_norms = 0.0;
    for (gt, wt) in g.iter().zip(w) {
        fit += gt.iter().zip(wt).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        sum_norms += wt.iter().map(|x| x * x).sum::<f64>().sqrt();
    }
    0.5 * fit + 0.5 * s * sum_norms * sum_norms
}

/// Numeric minimizer of the proximal objective.
///
/// For fixed block norms the fit term is smallest when each `w_t` points
/// along `g_t`, so the problem reduces to the coefficients `c ∈ [0, 1]^T` of
/// `w_t = c_t g_t`: a convex box-constrained quadratic, solved here by exact
/// cyclic coordinate descent until no coefficient moves more than `tol`.
pub fn prox_oracle(g: &[Vec<f64>], s: f64, tol: f64) -> Vec<Vec<f64>> {
    let u: Vec<f64> = g.iter().map(|b| b.iter().map(|x| x * x).sum::<f64>().sqrt()).collect();
    let mut c = vec![0.0; u.len()];
    for _ in 0..1_000_000 {
        let mut moved = 0.0f64;
        let total: f64 = c.iter().zip(&u).map(|(c, u)| c * u).sum();
        let mut total = total;
        for t in 0..u.len() {
            if u[t] == 0.0 {
                continue;
            }
            let rest = total - c[t] * u[t];
            // d/dc_t: −(1 − c_t)u_t² + s u_t (c_t u_t + rest) = 0
            let next = ((u[t] - s * rest) / (u[t] * (1.0 + s))).clamp(0.0, 1.0);
            moved = moved.max((next - c[t]).abs());
            total = rest + next * u[t];
            c[t] = next;
        }
        if moved <= tol {
            break;
        }
    }
    g.iter()
        .zip(&c)
        .map(|(b, &ct)| b.iter().map(|x| ct * x).collect())
        .collect()
}

/// Random tree: a root over all features whose subtrees split a node's
/// features into disjoint random parts, some of which are left uncovered.
pub fn random_tree(rng: &mut ChaCha8Rng, m: usize, max_nodes: usize) -> TreeStructure {
    let mut nodes = vec![TreeNode {
        name: "n0".into(),
        parent: None,
        features: (0..m).collect(),
        lambda: Some(0.25 + rng.random::<f64>()),
    }];
    let mut frontier = vec![0usize];
    while let Some(h) = frontier.pop() {
        let feats = nodes[h].features.clone();
        if feats.len() < 2 || nodes.len() >= max_nodes {
            continue;
        }
        let k = rng.random_range(2..=feats.len().min(4));
        let mut parts = vec![Vec::new(); k];
        for &j in &feats {
            // Index k drops the feature from every child.
            let slot = rng.random_range(0..=k);
            if slot < k {
                parts[slot].push(j);
            }
        }
        for part in parts.into_iter().filter(|p| !p.is_empty()) {
            if nodes.len() >= max_nodes {
                break;
            }
            let id = nodes.len();
            let lambda = if rng.random::<f64>() < 0.2 { None } else { Some(0.25 + rng.random::<f64>()) };
            nodes.push(TreeNode {
                name: format!("n{id}"),
                parent: Some(h),
                features: part,
                lambda,
            });
            frontier.push(id);
        }
    }
    TreeStructure::new(m, nodes).unwrap()
}

/// Scores `λ_h² Σ_{j∈G_h} ω_j²` for every node, from dense rows.
pub fn tree_scores_dense(alpha: &[f64], data: &SparseDataset, tree: &TreeStructure) -> Vec<f64> {
    let w = omega_dense(alpha, data);
    (0..tree.len())
        .map(|h| {
            let l = tree.lambda(h);
            l * l * tree.features(h).iter().map(|&j| w[j] * w[j]).sum::<f64>()
        })
        .collect()
}

/// Materialized degree-2 polynomial map of a dense row in the documented
/// layout: constant, linear terms, squares, then crosses `a < b`
/// lexicographically.
pub fn poly_features(x: &[f64], gamma: f64, r: f64) -> Vec<f64> {
    let m = x.len();
    let mut out = Vec::with_capacity((m + 2) * (m + 1) / 2);
    out.push(r);
    out.extend(x.iter().map(|v| (2.0 * gamma * r).sqrt() * v));
    out.extend(x.iter().map(|v| gamma * v * v));
    for a in 0..m {
        for b in a + 1..m {
            out.push(std::f64::consts::SQRT_2 * gamma * x[a] * x[b]);
        }
    }
    out
}

/// Per-coordinate scores `(Σ_i α_i y_i φ_k(x_i))²` over the materialized map.
pub fn poly_scores_materialized(alpha: &[f64], data: &SparseDataset, gamma: f64, r: f64) -> Vec<f64> {
    let rows = dense_rows(data);
    let dim = (data.n_features() + 2) * (data.n_features() + 1) / 2;
    let mut w = vec![0.0; dim];
    for ((x, &a), &y) in rows.iter().zip(alpha).zip(data.labels()) {
        for (wk, phi) in w.iter_mut().zip(poly_features(x, gamma, r)) {
            *wk += a * y * phi;
        }
    }
    w.into_iter().map(|v| v * v).collect()
}

/// HIK feature scores by the defining double sum.
pub fn hik_double_sum(alpha: &[f64], data: &SparseDataset, beta: f64) -> Vec<f64> {
    let rows = dense_rows(data);
    let y = data.labels();
    (0..data.n_features())
        .map(|k| {
            let mut c = 0.0;
            for i in 0..rows.len() {
                for j in 0..rows.len() {
                    let h = rows[i][k].abs().powf(beta).min(rows[j][k].abs().powf(beta));
                    c += alpha[i] * y[i] * alpha[j] * y[j] * h;
                }
            }
            c
        })
        .collect()
}

/// A cache of `dims.len()` constraints with dense Gaussian columns.
pub fn random_cache(rng: &mut ChaCha8Rng, n: usize, dims: &[usize]) -> ActiveSet {
    let mut cache = ActiveSet::new(n);
    let mut next = 0usize;
    for &d in dims {
        let ids: Vec<usize> = (next..next + d).collect();
        next += d;
        let coords = ids
            .iter()
            .map(|&j| Coordinate { unit: j, feature: j, scale: 1.0 })
            .collect();
        let columns = (0..d).map(|_| (0..n).map(|_| normal(rng)).collect()).collect();
        cache.push_dense(Constraint::new(ids, d), coords, columns).unwrap();
    }
    cache
}

/// Dense copy of the cached columns, block by block.
pub fn cache_columns(cache: &ActiveSet) -> Vec<Vec<Vec<f64>>> {
    cache
        .block_dims()
        .iter()
        .enumerate()
        .map(|(t, &d)| (0..d).map(|k| cache.column(t, k).to_vec()).collect())
        .collect()
}

/// Per-instance loss written out from its definition.
pub fn loss_value(kind: fgm::loss::LossKind, c: f64, scores: &[f64], y: &[f64]) -> f64 {
    use fgm::loss::LossKind;
    scores
        .iter()
        .zip(y)
        .map(|(&s, &yi)| match kind {
            LossKind::SquaredHinge => 0.5 * c * (1.0 - yi * s).max(0.0).powi(2),
            LossKind::Logistic => c * (1.0 + (-yi * s).exp()).ln(),
        })
        .sum()
}

/// Derivative of [`loss_value`] with respect to each score.
pub fn loss_derivative(kind: fgm::loss::LossKind, c: f64, scores: &[f64], y: &[f64]) -> Vec<f64> {
    use fgm::loss::LossKind;
    scores
        .iter()
        .zip(y)
        .map(|(&s, &yi)| match kind {
            LossKind::SquaredHinge => -c * yi * (1.0 - yi * s).max(0.0),
            LossKind::Logistic => -c * yi / (1.0 + (yi * s).exp()),
        })
        .collect()
}

/// Minimizer of the cutting-plane subproblem `½(Σ_t ‖w_t‖)² + p(w)` by an
/// independent route: the variational form
/// `½(Σ_t ‖w_t‖)² = min_{μ ∈ simplex} ½ Σ_t ‖w_t‖²/μ_t`.
///
/// Alternates an exact `μ` update (`μ_t ∝ ‖w_t‖`) with a ridge solve in the
/// rescaled variables `v_t = w_t/√μ_t`, by gradient descent with a step
/// from a bound on the curvature. Returns the objective value reached.
pub fn subproblem_oracle(
    columns: &[Vec<Vec<f64>>],
    y: &[f64],
    kind: fgm::loss::LossKind,
    c: f64,
    rounds: usize,
) -> f64 {
    let n = y.len();
    let t_count = columns.len();
    let mut mu = vec![1.0 / t_count as f64; t_count];
    let mut w: Vec<Vec<f64>> = columns.iter().map(|b| vec![0.0; b.len()]).collect();
    let curvature = match kind {
        fgm::loss::LossKind::SquaredHinge => c,
        fgm::loss::LossKind::Logistic => 0.25 * c,
    };
    let frob: f64 = columns.iter().flatten().flatten().map(|x| x * x).sum();
    let eval = |w: &[Vec<f64>]| -> f64 {
        let mut s = vec![0.0; n];
        for (b, wt) in columns.iter().zip(w) {
            for (col, &wk) in b.iter().zip(wt) {
                for i in 0..n {
                    s[i] += wk * col[i];
                }
            }
        }
        let norms: f64 = w.iter().map(|b| b.iter().map(|x| x * x).sum::<f64>().sqrt()).sum();
        0.5 * norms * norms + loss_value(kind, c, &s, y)
    };
    for _ in 0..rounds {
        // v-step: minimize ½‖v‖² + p(Σ_t √μ_t X_t v_t).
        let root: Vec<f64> = mu.iter().map(|m| m.sqrt()).collect();
        let step = 1.0 / (1.0 + curvature * frob);
        let mut v: Vec<Vec<f64>> = w
            .iter()
            .zip(&root)
            .map(|(b, &r)| b.iter().map(|x| if r > 0.0 { x / r } else { 0.0 }).collect())
            .collect();
        for _ in 0..200 {
            let mut s = vec![0.0; n];
            for ((b, vt), &r) in columns.iter().zip(&v).zip(&root) {
                for (col, &vk) in b.iter().zip(vt) {
                    for i in 0..n {
                        s[i] += r * vk * col[i];
                    }
                }
            }
            let d = loss_derivative(kind, c, &s, y);
            for ((b, vt), &r) in columns.iter().zip(v.iter_mut()).zip(&root) {
                for (col, vk) in b.iter().zip(vt.iter_mut()) {
                    let g: f64 = *vk + r * col.iter().zip(&d).map(|(x, di)| x * di).sum::<f64>();
                    *vk -= step * g;
                }
            }
        }
        w = v
            .iter()
            .zip(&root)
            .map(|(b, &r)| b.iter().map(|x| r * x).collect())
            .collect();
        // μ-step.
        let norms: Vec<f64> = w.iter().map(|b| b.iter().map(|x| x * x).sum::<f64>().sqrt() + 1e-12).collect();
        let total: f64 = norms.iter().sum();
        mu = norms.iter().map(|x| x / total).collect();
    }
    eval(&w)
}

/// Minimizer of a one-dimensional convex function on `[lo, hi]` by golden
/// section search.
pub fn golden_section(mut f: impl FnMut(f64) -> f64, mut lo: f64, mut hi: f64, iters: usize) -> f64 {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - ratio * (hi - lo);
    let mut b = lo + ratio * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    for _ in 0..iters {
        if fa <= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - ratio * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + ratio * (hi - lo);
            fb = f(b);
        }
    }
    0.5 * (lo + hi)
}

/// Cyclic coordinate descent with exact 1-D minimization (golden section on
/// a bracket) for `penalty(w) + loss(Xw)` over dense rows.
pub fn coordinate_descent(
    rows: &[Vec<f64>],
    y: &[f64],
    penalty: impl Fn(f64) -> f64,
    kind: fgm::loss::LossKind,
    c: f64,
    sweeps: usize,
    radius: f64,
) -> (Vec<f64>, f64) {
    let m = rows.first().map_or(0, |r| r.len());
    let mut w = vec![0.0; m];
    let objective = |w: &[f64]| -> f64 {
        let s: Vec<f64> = rows.iter().map(|x| x.iter().zip(w).map(|(a, b)| a * b).sum()).collect();
        w.iter().map(|&v| penalty(v)).sum::<f64>() + loss_value(kind, c, &s, y)
    };
    for _ in 0..sweeps {
        for j in 0..m {
            let mut trial = w.clone();
            let best = golden_section(
                |v| {
                    trial[j] = v;
                    objective(&trial)
                },
                -radius,
                radius,
                200,
            );
            // Exact zeros matter for the ℓ₁ penalty's kink.
            let mut at_zero = w.clone();
            at_zero[j] = 0.0;
            let mut at_best = w.clone();
            at_best[j] = best;
            w[j] = if objective(&at_zero) <= objective(&at_best) { 0.0 } else { best };
        }
    }
    let f = objective(&w);
    (w, f)
}
