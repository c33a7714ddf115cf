use serde::{Deserialize, Serialize};

use crate::dataset::SparseDataset;
use crate::error::{FgmError, Result};

use super::{check_alpha, Constraint, TopB};

/// One coordinate of the degree-2 polynomial feature map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VirtualFeature {
    Constant,
    Linear(usize),
    Square(usize),
    /// Product of features `a < b`.
    Cross(usize, usize),
}

/// Explicit map of the kernel `(γ x'z + r)²` over `m` input features:
/// `φ(x) = [r, √(2γr) x_a, γ x_a², √2 γ x_a x_b (a < b)]`.
///
/// Flat ids enumerate the constant, then `Linear(0..m)`, then
/// `Square(0..m)`, then `Cross(a, b)` in lexicographic order, for a total of
/// `(m + 2)(m + 1)/2` coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolyMap {
    pub m: usize,
    pub gamma: f64,
    pub r: f64,
}

impl PolyMap {
    pub fn new(m: usize, gamma: f64, r: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(FgmError::argument(format!("gamma must be positive, got {gamma}")));
        }
        if !(r >= 0.0 && r.is_finite()) {
            return Err(FgmError::argument(format!("r must be non-negative, got {r}")));
        }
        Ok(Self { m, gamma, r })
    }

    pub fn dim(&self) -> usize {
        (self.m + 2) * (self.m + 1) / 2
    }

    /// Flat id of the first `Cross(a, ·)` coordinate.
    fn cross_start(&self, a: usize) -> usize {
        1 + 2 * self.m + a * (self.m - 1) - a * a.saturating_sub(1) / 2
    }

    pub fn flat(&self, f: VirtualFeature) -> usize {
        match f {
            VirtualFeature::Constant => 0,
            VirtualFeature::Linear(a) => 1 + a,
            VirtualFeature::Square(a) => 1 + self.m + a,
            VirtualFeature::Cross(a, b) => self.cross_start(a) + (b - a - 1),
        }
    }

    pub fn decode(&self, flat: usize) -> Option<VirtualFeature> {
        let m = self.m;
        if flat >= self.dim() {
            return None;
        }
        Some(match flat {
            0 => VirtualFeature::Constant,
            f if f <= m => VirtualFeature::Linear(f - 1),
            f if f <= 2 * m => VirtualFeature::Square(f - 1 - m),
            f => {
                // Largest anchor whose block starts at or before `f`.
                let (mut lo, mut hi) = (0usize, m - 1);
                while lo + 1 < hi {
                    let mid = (lo + hi) / 2;
                    if self.cross_start(mid) <= f {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                let a = if self.cross_start(hi) <= f { hi } else { lo };
                VirtualFeature::Cross(a, a + 1 + f - self.cross_start(a))
            }
        })
    }

    /// Value of coordinate `f` on a sparse row.
    pub fn value(&self, f: VirtualFeature, idx: &[u32], val: &[f64]) -> f64 {
        let x = |a: usize| match idx.binary_search(&(a as u32)) {
            Ok(p) => val[p],
            Err(_) => 0.0,
        };
        match f {
            VirtualFeature::Constant => self.r,
            VirtualFeature::Linear(a) => (2.0 * self.gamma * self.r).sqrt() * x(a),
            VirtualFeature::Square(a) => self.gamma * x(a) * x(a),
            VirtualFeature::Cross(a, b) => std::f64::consts::SQRT_2 * self.gamma * x(a) * x(b),
        }
    }
}

/// Top-`B` polynomial coordinates by `ω_k²`, without materializing the map.
///
/// Anchors `a` are processed `block` at a time. For each block the partial
/// Gram rows `Σ_i q_i x_ia x_ib` (`q = α ⊙ y`) are accumulated for all `b`,
/// which yields every `Cross(a, ·)` and `Square(a)` score of the block; the
/// scores stream through a size-`B` heap. Working memory beyond the data is
/// `O(B + block·m)`. The selection equals the one over the full expansion.
pub fn score_polynomial_streamed(
    alpha: &[f64],
    data: &SparseDataset,
    map: &PolyMap,
    budget: usize,
    block: usize,
) -> Result<Constraint> {
    poly_top(alpha, data, map, budget, block).map(TopB::into_constraint)
}

pub(crate) fn poly_top(
    alpha: &[f64],
    data: &SparseDataset,
    map: &PolyMap,
    budget: usize,
    block: usize,
) -> Result<TopB> {
    check_alpha(alpha, data.n_samples())?;
    if map.m != data.n_features() {
        return Err(FgmError::contract("polynomial map dimension differs from the data"));
    }
    if block == 0 {
        return Err(FgmError::argument("block size must be at least 1"));
    }
    let m = map.m;
    let q: Vec<f64> = alpha.iter().zip(data.labels()).map(|(a, y)| a * y).collect();
    let mut top = TopB::new(budget);

    let q_sum: f64 = q.iter().sum();
    let c0 = map.r * q_sum;
    top.push(0, c0 * c0);

    let w = data.weighted_row_sum(&q);
    let lin = (2.0 * map.gamma * map.r).sqrt();
    for (a, wa) in w.iter().enumerate() {
        let v = lin * wa;
        top.push(map.flat(VirtualFeature::Linear(a)), v * v);
    }

    let columns = data.to_columns();
    let cross = std::f64::consts::SQRT_2 * map.gamma;
    let mut gram = vec![0.0; block * m];
    let mut start = 0;
    while start < m {
        let end = (start + block).min(m);
        gram[..(end - start) * m].fill(0.0);
        for a in start..end {
            let row = &mut gram[(a - start) * m..(a - start + 1) * m];
            for &(i, xa) in &columns[a] {
                let qx = q[i as usize] * xa;
                if qx == 0.0 {
                    continue;
                }
                let (idx, val) = data.row(i as usize);
                let from = idx.partition_point(|&b| (b as usize) < a);
                for (&b, &xb) in idx[from..].iter().zip(&val[from..]) {
                    row[b as usize] += qx * xb;
                }
            }
        }
        for a in start..end {
            let row = &gram[(a - start) * m..(a - start + 1) * m];
            let sq = map.gamma * row[a];
            top.push(map.flat(VirtualFeature::Square(a)), sq * sq);
            let base = map.cross_start(a);
            for b in a + 1..m {
                let v = cross * row[b];
                top.push(base + (b - a - 1), v * v);
            }
        }
        start = end;
    }
    Ok(top)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dimension_and_enumeration() {
        let map = PolyMap::new(3, 1.0, 1.0).unwrap();
        assert_eq!(map.dim(), 10);
        let expected = [
            VirtualFeature::Constant,
            VirtualFeature::Linear(0),
            VirtualFeature::Linear(1),
            VirtualFeature::Linear(2),
            VirtualFeature::Square(0),
            VirtualFeature::Square(1),
            VirtualFeature::Square(2),
            VirtualFeature::Cross(0, 1),
            VirtualFeature::Cross(0, 2),
            VirtualFeature::Cross(1, 2),
        ];
        for (flat, f) in expected.iter().enumerate() {
            assert_eq!(map.flat(*f), flat);
            assert_eq!(map.decode(flat), Some(*f));
        }
        assert_eq!(map.decode(10), None);
    }

    #[test]
    fn flat_ids_are_a_bijection() {
        for m in 1..30 {
            let map = PolyMap::new(m, 0.5, 2.0).unwrap();
            for flat in 0..map.dim() {
                assert_eq!(map.flat(map.decode(flat).unwrap()), flat);
            }
        }
    }

    #[test]
    fn kernel_identity() {
        // φ(x)'φ(z) = (γ x'z + r)²
        let map = PolyMap::new(3, 0.7, 1.3).unwrap();
        let (xi, xv) = (vec![0u32, 2], vec![1.5, -2.0]);
        let (zi, zv) = (vec![0u32, 1, 2], vec![0.5, 3.0, 1.0]);
        let dot: f64 = (0..map.dim())
            .map(|k| {
                let f = map.decode(k).unwrap();
                map.value(f, &xi, &xv) * map.value(f, &zi, &zv)
            })
            .sum();
        let lin = 1.5 * 0.5 + -2.0 * 1.0;
        let kernel = (0.7 * lin + 1.3f64).powi(2);
        assert!((dot - kernel).abs() < 1e-12);
    }

    #[test]
    fn zero_alpha_returns_first_ids() {
        let d = SparseDataset::from_rows(3, vec![vec![(0, 1.0), (1, 2.0)]], vec![1.0]).unwrap();
        let map = PolyMap::new(3, 2.0, 1.0).unwrap();
        let c = score_polynomial_streamed(&[0.0], &d, &map, 4, 2).unwrap();
        assert_eq!(c.ids(), &[0, 1, 2, 3]);
    }
}
