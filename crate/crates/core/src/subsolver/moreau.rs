use super::{norm, BlockWeights};

/// Shrinkage coefficients of the ℓ₁² proximal step for block norms `u`.
///
/// Returns `c_t ≥ 0` such that the minimizer of
/// `½‖w − g‖² + s·½(Σ_t ‖w_t‖)²` is `w_t = c_t g_t`, where `u_t = ‖g_t‖`.
/// The block norms are soft-thresholded by
/// `ς = s/(1 + ρs) Σ_{i≤ρ} u_(i)`, with `ρ` the largest rank `j` (norms
/// sorted descending) for which `u_(j) > s/(1 + js) Σ_{i≤j} u_(i)`.
pub fn moreau_shrinkage(u: &[f64], s: f64) -> Vec<f64> {
    debug_assert!(s > 0.0);
    let mut sorted: Vec<f64> = u.to_vec();
    sorted.sort_unstable_by(|a, b| b.total_cmp(a));

    let mut prefix = 0.0;
    let mut rho = 0usize;
    let mut rho_sum = 0.0;
    for (j, &uj) in sorted.iter().enumerate() {
        let rank = (j + 1) as f64;
        prefix += uj;
        if uj - s / (1.0 + rank * s) * prefix > 0.0 {
            rho = j + 1;
            rho_sum = prefix;
        }
    }
    let threshold = if rho == 0 {
        0.0
    } else {
        s / (1.0 + rho as f64 * s) * rho_sum
    };

    u.iter()
        .map(|&ut| {
            let o = ut - threshold;
            if o > 0.0 && ut > 0.0 {
                o / ut
            } else {
                0.0
            }
        })
        .collect()
}

/// Closed-form proximal operator of `s·Ω` at `g`.
///
/// Every output block is either zero or a positive multiple of the
/// corresponding input block.
pub fn moreau_projection(g: &BlockWeights, s: f64) -> BlockWeights {
    let u: Vec<f64> = g.blocks().iter().map(|b| norm(b)).collect();
    let coef = moreau_shrinkage(&u, s);
    BlockWeights::new(
        g.blocks()
            .iter()
            .zip(coef)
            .map(|(b, c)| b.iter().map(|x| c * x).collect())
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn single_block_halves_at_unit_step() {
        // ½‖w − g‖² + ½‖w‖² is minimized at g/2.
        let out = moreau_projection(&BlockWeights::new(vec![vec![3.0, 4.0]]), 1.0);
        assert!(close(out.block(0), &[1.5, 2.0], 1e-15));
    }

    #[test]
    fn two_symmetric_blocks() {
        // Stationarity 2(c − 1) + 4c = 0 gives c = 1/3.
        let g = BlockWeights::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        let out = moreau_projection(&g, 1.0);
        assert!(close(out.block(0), &[1.0 / 3.0, 0.0], 1e-15));
        assert!(close(out.block(1), &[0.0, 1.0 / 3.0], 1e-15));
    }

    #[test]
    fn zero_input() {
        let out = moreau_projection(&BlockWeights::zeros(&[2, 3]), 0.7);
        assert_eq!(out, BlockWeights::zeros(&[2, 3]));
    }

    #[test]
    fn small_blocks_are_zeroed() {
        // With a large step the threshold exceeds the smaller norm.
        let coef = moreau_shrinkage(&[10.0, 0.1], 1.0);
        assert!(coef[0] > 0.0);
        assert_eq!(coef[1], 0.0);
    }

    proptest! {
        #[test]
        fn output_parallels_input(
            blocks in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 1..6), 1..8),
            log_s in -3.0f64..3.0,
        ) {
            let g = BlockWeights::new(blocks);
            let out = moreau_projection(&g, 10f64.powf(log_s));
            for (gt, wt) in g.blocks().iter().zip(out.blocks()) {
                let zero = wt.iter().all(|x| *x == 0.0);
                let c = if norm(gt) > 0.0 { norm(wt) / norm(gt) } else { 0.0 };
                prop_assert!(c <= 1.0 + 1e-12);
                let parallel = gt.iter().zip(wt).all(|(a, b)| (c * a - b).abs() <= 1e-12 * a.abs().max(1.0));
                prop_assert!(zero || (c > 0.0 && parallel));
            }
        }

        #[test]
        fn coefficient_order_follows_norms(
            u in prop::collection::vec(0.0f64..10.0, 1..10),
            s in 0.01f64..10.0,
        ) {
            // Shrunk norms o_t = c_t u_t preserve the ordering of u.
            let c = moreau_shrinkage(&u, s);
            for i in 0..u.len() {
                for j in 0..u.len() {
                    if u[i] >= u[j] {
                        prop_assert!(c[i] * u[i] >= c[j] * u[j] - 1e-12);
                    }
                }
            }
        }
    }
}
