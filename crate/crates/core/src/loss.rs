//! Smooth empirical losses over the cached feature blocks and recovery of
//! the dual variables from the primal margins.
//!
//! Both losses are written in terms of the decision scores
//! `s_i = Σ_t w_t'x_it`:
//!
//! * squared hinge: `ξ_i = max(1 − y_i s_i, 0)`, `p = C/2 Σ ξ_i²`
//! * logistic: `ξ_i = −y_i s_i`, `p = C Σ log(1 + e^{ξ_i})`

use serde::{Deserialize, Serialize};

use crate::engine::ActiveSet;
use crate::error::{FgmError, Result};
use crate::subsolver::BlockWeights;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossKind {
    SquaredHinge,
    Logistic,
}

impl std::str::FromStr for LossKind {
    type Err = FgmError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "squared-hinge" | "squared_hinge" | "l2svm" => Ok(LossKind::SquaredHinge),
            "logistic" | "lr" => Ok(LossKind::Logistic),
            other => Err(FgmError::argument(format!("unknown loss {other:?}"))),
        }
    }
}

/// A loss together with its trade-off parameter `C`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Loss {
    pub kind: LossKind,
    pub c: f64,
}

/// Per-instance loss arguments `ξ_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Margins {
    kind: LossKind,
    xi: Vec<f64>,
}

impl Margins {
    pub fn kind(&self) -> LossKind {
        self.kind
    }

    pub fn xi(&self) -> &[f64] {
        &self.xi
    }
}

/// `log(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// `e^z / (1 + e^z)` without overflow.
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn xlogx(x: f64) -> f64 {
    if x > 0.0 {
        x * x.ln()
    } else {
        0.0
    }
}

impl Loss {
    pub fn new(kind: LossKind, c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(FgmError::argument(format!("C must be positive and finite, got {c}")));
        }
        Ok(Self { kind, c })
    }

    pub fn squared_hinge(c: f64) -> Self {
        Self::new(LossKind::SquaredHinge, c).expect("positive C")
    }

    pub fn logistic(c: f64) -> Self {
        Self::new(LossKind::Logistic, c).expect("positive C")
    }

    pub fn margins(&self, scores: &[f64], labels: &[f64]) -> Margins {
        let xi = scores
            .iter()
            .zip(labels)
            .map(|(&s, &y)| match self.kind {
                LossKind::SquaredHinge => (1.0 - y * s).max(0.0),
                LossKind::Logistic => -y * s,
            })
            .collect();
        Margins {
            kind: self.kind,
            xi,
        }
    }

    pub fn value_of(&self, margins: &Margins) -> f64 {
        match self.kind {
            LossKind::SquaredHinge => 0.5 * self.c * margins.xi.iter().map(|x| x * x).sum::<f64>(),
            LossKind::Logistic => self.c * margins.xi.iter().map(|&x| softplus(x)).sum::<f64>(),
        }
    }

    /// Loss value at the given decision scores.
    pub fn value(&self, scores: &[f64], labels: &[f64]) -> f64 {
        match self.kind {
            LossKind::SquaredHinge => {
                let sum: f64 = scores
                    .iter()
                    .zip(labels)
                    .map(|(&s, &y)| {
                        let xi = (1.0 - y * s).max(0.0);
                        xi * xi
                    })
                    .sum();
                0.5 * self.c * sum
            }
            LossKind::Logistic => {
                self.c
                    * scores
                        .iter()
                        .zip(labels)
                        .map(|(&s, &y)| softplus(-y * s))
                        .sum::<f64>()
            }
        }
    }

    /// Loss value and `∂p/∂s_i` for every instance.
    pub fn value_and_derivative(&self, scores: &[f64], labels: &[f64]) -> (f64, Vec<f64>) {
        let mut value = 0.0;
        let deriv = scores
            .iter()
            .zip(labels)
            .map(|(&s, &y)| match self.kind {
                LossKind::SquaredHinge => {
                    let xi = (1.0 - y * s).max(0.0);
                    value += xi * xi;
                    if xi > 0.0 {
                        -self.c * xi * y
                    } else {
                        0.0
                    }
                }
                LossKind::Logistic => {
                    let xi = -y * s;
                    value += softplus(xi);
                    -self.c * sigmoid(xi) * y
                }
            })
            .collect();
        let value = match self.kind {
            LossKind::SquaredHinge => 0.5 * self.c * value,
            LossKind::Logistic => self.c * value,
        };
        (value, deriv)
    }

    /// Dual variables recovered from the margins: `Cξ_i` for the squared
    /// hinge, `Cσ(ξ_i)` for the logistic loss.
    pub fn recover_duals(&self, margins: &Margins) -> Vec<f64> {
        margins
            .xi
            .iter()
            .map(|&x| match margins.kind {
                LossKind::SquaredHinge => self.c * x,
                LossKind::Logistic => self.c * sigmoid(x),
            })
            .collect()
    }

    /// `Σ_i ℓ*(α_i)`, the conjugate of the per-instance loss summed over the
    /// dual vector; `+∞` outside the conjugate's domain.
    ///
    /// Together with the worst-case score this gives the dual objective used
    /// for the cutting-plane bounds.
    pub fn conjugate_sum(&self, alpha: &[f64]) -> f64 {
        let c = self.c;
        match self.kind {
            LossKind::SquaredHinge => alpha
                .iter()
                .map(|&a| {
                    if a < 0.0 {
                        f64::INFINITY
                    } else {
                        a * a / (2.0 * c) - a
                    }
                })
                .sum(),
            LossKind::Logistic => alpha
                .iter()
                .map(|&a| {
                    if !(0.0..=c).contains(&a) {
                        f64::INFINITY
                    } else {
                        xlogx(a) + xlogx(c - a) - xlogx(c)
                    }
                })
                .sum(),
        }
    }
}

/// Loss value and margins of the block weights over the cached columns.
pub fn eval_loss(
    blocks: &BlockWeights,
    cache: &ActiveSet,
    labels: &[f64],
    loss: &Loss,
) -> Result<(f64, Margins)> {
    check_labels(cache, labels)?;
    let scores = cache.scores(blocks)?;
    let margins = loss.margins(&scores, labels);
    Ok((loss.value_of(&margins), margins))
}

/// Gradient of the loss with respect to every block.
pub fn eval_gradient(
    blocks: &BlockWeights,
    cache: &ActiveSet,
    labels: &[f64],
    loss: &Loss,
) -> Result<BlockWeights> {
    check_labels(cache, labels)?;
    let scores = cache.scores(blocks)?;
    let (_, deriv) = loss.value_and_derivative(&scores, labels);
    Ok(cache.transpose_mul(&deriv))
}

pub fn recover_duals(margins: &Margins, loss: &Loss) -> Vec<f64> {
    loss.recover_duals(margins)
}

fn check_labels(cache: &ActiveSet, labels: &[f64]) -> Result<()> {
    if labels.len() != cache.n_samples() {
        return Err(FgmError::contract(format!(
            "{} labels for a cache over {} instances",
            labels.len(),
            cache.n_samples()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{ActiveSet, Coordinate};
    use crate::worstcase::Constraint;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Builds a cache with the given dense column-major blocks.
    fn cache_from(n: usize, blocks: &[Vec<Vec<f64>>]) -> ActiveSet {
        let mut cache = ActiveSet::new(n);
        let mut next = 0;
        for block in blocks {
            let ids: Vec<usize> = (next..next + block.len()).collect();
            next += block.len();
            let coords = ids
                .iter()
                .map(|&j| Coordinate {
                    unit: j,
                    feature: j,
                    scale: 1.0,
                })
                .collect();
            cache
                .push_dense(Constraint::new(ids, block.len()), coords, block.clone())
                .unwrap();
        }
        cache
    }

    fn random_instance(rng: &mut ChaCha8Rng, n: usize, dims: &[usize]) -> (ActiveSet, BlockWeights, Vec<f64>) {
        let blocks: Vec<Vec<Vec<f64>>> = dims
            .iter()
            .map(|&d| (0..d).map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).collect())
            .collect();
        let w = BlockWeights::new(
            dims.iter()
                .map(|&d| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect(),
        );
        let labels = (0..n).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
        (cache_from(n, &blocks), w, labels)
    }

    /// Direct dense evaluation of the loss, independent of the cache code.
    fn dense_loss(cache: &ActiveSet, w: &BlockWeights, labels: &[f64], loss: &Loss) -> f64 {
        let n = labels.len();
        let mut total = 0.0;
        for i in 0..n {
            let mut s = 0.0;
            for (t, wt) in w.blocks().iter().enumerate() {
                for (k, wk) in wt.iter().enumerate() {
                    s += wk * cache.column(t, k)[i];
                }
            }
            total += match loss.kind {
                LossKind::SquaredHinge => {
                    let xi = f64::max(1.0 - labels[i] * s, 0.0);
                    0.5 * loss.c * xi * xi
                }
                LossKind::Logistic => loss.c * (1.0 + (-labels[i] * s).exp()).ln(),
            };
        }
        total
    }

    #[test]
    fn squared_hinge_at_zero() {
        let cache = cache_from(4, &[vec![vec![1.0, -2.0, 0.5, 3.0]]]);
        let w = BlockWeights::zeros(&[1]);
        let labels = [1.0, -1.0, 1.0, -1.0];
        let loss = Loss::squared_hinge(10.0);
        let (value, margins) = eval_loss(&w, &cache, &labels, &loss).unwrap();
        assert_eq!(value, 20.0);
        assert_eq!(margins.xi(), &[1.0; 4]);
        // All instances active: gradient is -C Σ y_i x_i.
        let g = eval_gradient(&w, &cache, &labels, &loss).unwrap();
        assert_eq!(g.block(0), &[-10.0 * (1.0 + 2.0 + 0.5 - 3.0)]);
        assert_eq!(recover_duals(&margins, &loss), vec![10.0; 4]);
    }

    #[test]
    fn logistic_at_zero() {
        let cache = cache_from(2, &[vec![vec![2.0, 4.0]]]);
        let w = BlockWeights::zeros(&[1]);
        let labels = [1.0, 1.0];
        let loss = Loss::logistic(1.0);
        let (value, _) = eval_loss(&w, &cache, &labels, &loss).unwrap();
        assert!((value - 2.0 * 2f64.ln()).abs() < 1e-15);
        let g = eval_gradient(&w, &cache, &labels, &loss).unwrap();
        assert!((g.block(0)[0] - (-0.5 * 6.0)).abs() < 1e-15);
    }

    #[test]
    fn dual_recovery_examples() {
        let hinge = Loss::squared_hinge(10.0);
        let m = Margins {
            kind: LossKind::SquaredHinge,
            xi: vec![0.2, 0.0, 1.0],
        };
        let alpha = hinge.recover_duals(&m);
        assert!((alpha[0] - 2.0).abs() < 1e-15);
        assert_eq!(&alpha[1..], &[0.0, 10.0]);

        let logistic = Loss::logistic(4.0);
        let m = Margins {
            kind: LossKind::Logistic,
            xi: vec![0.0, -800.0, 800.0],
        };
        let alpha = logistic.recover_duals(&m);
        assert_eq!(alpha[0], 2.0);
        assert!(alpha[1] >= 0.0 && alpha[1] < 1e-300);
        assert_eq!(alpha[2], 4.0);
    }

    #[test]
    fn logistic_is_overflow_safe() {
        let loss = Loss::logistic(1.0);
        let v = loss.value(&[-1000.0, 1000.0], &[1.0, 1.0]);
        assert!((v - 1000.0).abs() < 1e-9);
        let (_, d) = loss.value_and_derivative(&[-1000.0], &[1.0]);
        assert_eq!(d[0], -1.0);
    }

    #[test]
    fn matches_dense_recomputation() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for kind in [LossKind::SquaredHinge, LossKind::Logistic] {
            let loss = Loss::new(kind, 1.7).unwrap();
            let (cache, w, labels) = random_instance(&mut rng, 5, &[2, 3]);
            let (value, _) = eval_loss(&w, &cache, &labels, &loss).unwrap();
            let direct = dense_loss(&cache, &w, &labels, &loss);
            assert!((value - direct).abs() <= 1e-12 * direct.abs().max(1.0));
        }
    }

    #[test]
    fn dimension_mismatch_is_a_contract_error() {
        let cache = cache_from(2, &[vec![vec![1.0, 1.0]]]);
        let loss = Loss::squared_hinge(1.0);
        let bad = BlockWeights::zeros(&[2]);
        assert!(matches!(
            eval_loss(&bad, &cache, &[1.0, 1.0], &loss),
            Err(FgmError::Contract(_))
        ));
        let w = BlockWeights::zeros(&[1]);
        assert!(eval_loss(&w, &cache, &[1.0], &loss).is_err());
    }

    #[test]
    fn conjugate_vanishes_at_zero() {
        assert_eq!(Loss::squared_hinge(3.0).conjugate_sum(&[0.0, 0.0]), 0.0);
        assert_eq!(Loss::logistic(3.0).conjugate_sum(&[0.0, 0.0]), 0.0);
        assert_eq!(Loss::logistic(3.0).conjugate_sum(&[4.0]), f64::INFINITY);
    }

    /// Central finite differences, step 1e-5, relative tolerance 1e-4.
    fn fd_agrees(loss: &Loss, cache: &ActiveSet, w: &BlockWeights, labels: &[f64]) -> bool {
        let grad = eval_gradient(w, cache, labels, loss).unwrap();
        let h = 1e-5;
        for t in 0..w.len() {
            for k in 0..w.block(t).len() {
                let mut plus = w.clone();
                plus.block_mut(t)[k] += h;
                let mut minus = w.clone();
                minus.block_mut(t)[k] -= h;
                let fd = (eval_loss(&plus, cache, labels, loss).unwrap().0
                    - eval_loss(&minus, cache, labels, loss).unwrap().0)
                    / (2.0 * h);
                let g = grad.block(t)[k];
                if (fd - g).abs() > 1e-4 * g.abs().max(1.0) {
                    return false;
                }
            }
        }
        true
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..50 {
            for kind in [LossKind::SquaredHinge, LossKind::Logistic] {
                let loss = Loss::new(kind, rng.random_range(0.1..10.0)).unwrap();
                let (cache, w, labels) = random_instance(&mut rng, 6, &[2, 1, 3]);
                assert!(fd_agrees(&loss, &cache, &w, &labels));
            }
        }
    }

    proptest! {
        #[test]
        fn loss_is_convex(seed in 0u64..10_000, theta in 0.0f64..=1.0, logistic in any::<bool>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let kind = if logistic { LossKind::Logistic } else { LossKind::SquaredHinge };
            let loss = Loss::new(kind, 2.0).unwrap();
            let (cache, w1, labels) = random_instance(&mut rng, 7, &[2, 2]);
            let w2 = BlockWeights::new(vec![
                vec![rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)],
                vec![rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)],
            ]);
            let mut mix = w1.clone();
            mix.scale(theta);
            mix.axpy(1.0 - theta, &w2);
            let f = |w: &BlockWeights| eval_loss(w, &cache, &labels, &loss).unwrap().0;
            prop_assert!(f(&mix) <= theta * f(&w1) + (1.0 - theta) * f(&w2) + 1e-10);
        }

        #[test]
        fn hinge_duals_at_zero_are_c(n in 1usize..20, c in 0.01f64..100.0) {
            let cache = cache_from(n, &[vec![vec![0.5; n]]]);
            let labels = vec![1.0; n];
            let loss = Loss::squared_hinge(c);
            let (_, m) = eval_loss(&BlockWeights::zeros(&[1]), &cache, &labels, &loss).unwrap();
            prop_assert_eq!(recover_duals(&m, &loss), vec![c; n]);
        }
    }
}
