//! Scalar and block shrinkage rules, the resulting basis-domain estimators,
//! and a per-coefficient check of their constrained characterisation.
//!
//! The family `eta_theta(x, q) = x (1 - q^theta / |x|^theta)_+` covers soft
//! (`theta = 1`), garrote (`theta = 2`) and, as the limit, hard thresholding.

use serde::{Deserialize, Serialize};

use crate::dictionaries::{BlockPartition, OrthoBasis};
use crate::error::{check_len, invalid, Result};
use crate::model::Observation;

/// Shape parameter of the shrinkage family. The hard rule is a separate
/// variant rather than an infinite float.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Theta {
    Finite(f64),
    Hard,
}

impl Theta {
    pub const SOFT: Theta = Theta::Finite(1.0);
    pub const GARROTE: Theta = Theta::Finite(2.0);

    fn validate(self) -> Result<()> {
        match self {
            Theta::Finite(t) if !(t > 0.0 && t.is_finite()) => {
                invalid(format!("theta must be positive, got {t}"))
            }
            _ => Ok(()),
        }
    }

    /// Shrinkage factor applied to a (block) coefficient of magnitude `mag`.
    fn factor(self, mag: f64, q: f64) -> f64 {
        if mag <= q {
            return 0.0;
        }
        match self {
            Theta::Hard => 1.0,
            Theta::Finite(1.0) => 1.0 - q / mag,
            Theta::Finite(2.0) => 1.0 - (q / mag) * (q / mag),
            Theta::Finite(t) => 1.0 - (q / mag).powf(t),
        }
    }
}

/// A shrinkage rule with one threshold per coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShrinkageRule {
    pub theta: Theta,
    pub thresholds: Vec<f64>,
}

impl ShrinkageRule {
    pub fn new(theta: Theta, thresholds: Vec<f64>) -> Result<Self> {
        theta.validate()?;
        check_positive(&thresholds)?;
        Ok(ShrinkageRule { theta, thresholds })
    }

    pub fn uniform(theta: Theta, q: f64, len: usize) -> Result<Self> {
        Self::new(theta, vec![q; len])
    }
}

fn check_positive(q: &[f64]) -> Result<()> {
    match q.iter().find(|q| !(**q > 0.0 && q.is_finite())) {
        Some(bad) => invalid(format!("thresholds must be positive, got {bad}")),
        None => Ok(()),
    }
}

/// `eta_theta(x, q)`.
pub fn eta_theta(x: f64, q: f64, theta: Theta) -> Result<f64> {
    if !(q > 0.0) {
        return invalid(format!("threshold must be positive, got {q}"));
    }
    theta.validate()?;
    Ok(x * theta.factor(x.abs(), q))
}

/// Soft thresholding without argument checks; `q = 0` returns `x`.
pub fn soft(x: f64, q: f64) -> f64 {
    if x > q {
        x - q
    } else if x < -q {
        x + q
    } else {
        0.0
    }
}

/// Block rule `x (1 - q^theta / ||x||_2^theta)_+`.
pub fn eta_block(x: &[f64], q: f64, theta: Theta) -> Vec<f64> {
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let f = theta.factor(norm, q);
    x.iter().map(|v| v * f).collect()
}

/// Basis-domain estimator `sum_l eta_theta(<phi_l, Y>, q_l) phi_l`.
pub fn wavelet_threshold(
    obs: &Observation,
    basis: &dyn OrthoBasis,
    rule: &ShrinkageRule,
) -> Result<Vec<f64>> {
    let coeffs = basis.analyze(&obs.y)?;
    check_len("thresholds", coeffs.len(), rule.thresholds.len())?;
    let shrunk: Vec<f64> = coeffs
        .iter()
        .zip(&rule.thresholds)
        .map(|(&c, &q)| c * rule.theta.factor(c.abs(), q))
        .collect();
    basis.synthesize(&shrunk)
}

/// Data-dependent weights `q^2 / max(q, |c|)` under which soft thresholding
/// reproduces the garrote.
pub fn garrote_weights(coeffs: &[f64], q: &[f64]) -> Result<Vec<f64>> {
    check_len("thresholds", coeffs.len(), q.len())?;
    check_positive(q)?;
    Ok(coeffs
        .iter()
        .zip(q)
        .map(|(c, q)| q * q / q.max(c.abs()))
        .collect())
}

/// Degenerate weights reproducing hard thresholding: `q` where `|c| <= q`,
/// otherwise `0` (the coefficient is then pinned to the data, `0/0 = 1`).
pub fn hard_weights(coeffs: &[f64], q: &[f64]) -> Result<Vec<f64>> {
    check_len("thresholds", coeffs.len(), q.len())?;
    check_positive(q)?;
    Ok(coeffs
        .iter()
        .zip(q)
        .map(|(c, &q)| if c.abs() <= q { q } else { 0.0 })
        .collect())
}

/// Block estimator: each block of coefficients shrunk by [`eta_block`].
pub fn block_threshold(
    obs: &Observation,
    basis: &dyn OrthoBasis,
    partition: &BlockPartition,
    thresholds: &[f64],
    theta: Theta,
) -> Result<Vec<f64>> {
    theta.validate()?;
    if !partition.covers() || partition.size() != basis.len() {
        return invalid("block partition must cover the coefficient index set");
    }
    check_len("block thresholds", partition.num_blocks(), thresholds.len())?;
    check_positive(thresholds)?;
    let coeffs = basis.analyze(&obs.y)?;
    let mut out = vec![0.0; coeffs.len()];
    for (block, &q) in partition.blocks().iter().zip(thresholds) {
        let x = partition_values(block, &coeffs);
        for (&i, v) in block.iter().zip(eta_block(&x, q, theta)) {
            out[i] = v;
        }
    }
    basis.synthesize(&out)
}

fn partition_values(block: &[usize], coeffs: &[f64]) -> Vec<f64> {
    block.iter().map(|&i| coeffs[i]).collect()
}

/// Outcome of [`verify_characterization`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharacterizationReport {
    pub feasible: bool,
    pub coefficientwise_minimal: bool,
    /// `min_l (1 - |<phi_l, Y - beta>| / q_l)`; negative when infeasible.
    pub margin: f64,
    /// Largest distance of a coefficient from the minimum-modulus point of
    /// its feasible interval.
    pub max_gap: f64,
}

/// Checks that `beta_hat` solves
/// `min sum |<phi_l, beta>|^r  s.t.  max_l |<phi_l, Y - beta>| / q_l <= 1`.
///
/// The constraint decouples across orthonormal coefficients, so the unique
/// minimiser takes in each coefficient the point of smallest modulus in
/// `[<phi_l,Y> - q_l, <phi_l,Y> + q_l]`, i.e. the soft threshold.
pub fn verify_characterization(
    beta_hat: &[f64],
    obs: &Observation,
    basis: &dyn OrthoBasis,
    thresholds: &[f64],
) -> Result<CharacterizationReport> {
    check_positive(thresholds)?;
    verify_weighted_characterization(beta_hat, obs, basis, thresholds)
}

/// As [`verify_characterization`] but admits zero weights, read with the
/// convention `0/0 = 1` and `x/0 = inf` for `x > 0` (the coefficient must
/// equal the data coefficient).
pub fn verify_weighted_characterization(
    beta_hat: &[f64],
    obs: &Observation,
    basis: &dyn OrthoBasis,
    weights: &[f64],
) -> Result<CharacterizationReport> {
    const TOL: f64 = 1e-9;
    let data = basis.analyze(&obs.y)?;
    let est = basis.analyze(beta_hat)?;
    check_len("weights", data.len(), weights.len())?;
    if weights.iter().any(|w| !(*w >= 0.0)) {
        return invalid("weights must be nonnegative");
    }
    let mut margin = f64::INFINITY;
    let mut max_gap: f64 = 0.0;
    for ((&c, &b), &w) in data.iter().zip(&est).zip(weights) {
        let resid = (c - b).abs();
        let ratio = if w > 0.0 {
            resid / w
        } else if resid <= TOL {
            1.0
        } else {
            f64::INFINITY
        };
        margin = margin.min(1.0 - ratio);
        max_gap = max_gap.max((b - soft(c, w)).abs());
    }
    Ok(CharacterizationReport {
        feasible: margin >= -TOL,
        coefficientwise_minimal: max_gap <= TOL,
        margin,
        max_gap,
    })
}

/// Outcome of [`verify_block_characterization`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockCharacterizationReport {
    /// `max_a ||B_a (Y - beta)||_inf / q_a <= 1`.
    pub feasible_linf: bool,
    /// `max_a ||B_a (Y - beta)||_2 / q_a <= 1`.
    pub feasible_l2: bool,
    /// Every block equals the minimum-norm point of the ball
    /// `{x : ||B_a Y - x||_2 <= q_a}`.
    pub blockwise_minimal: bool,
    pub margin_l2: f64,
    pub max_gap: f64,
}

/// Block analogue of [`verify_characterization`]. Feasibility is reported in
/// both the sup-norm and the Euclidean norm of each residual block;
/// minimality is checked against the Euclidean ball, whose minimum-norm point
/// is the block soft threshold.
pub fn verify_block_characterization(
    beta_hat: &[f64],
    obs: &Observation,
    basis: &dyn OrthoBasis,
    partition: &BlockPartition,
    thresholds: &[f64],
) -> Result<BlockCharacterizationReport> {
    const TOL: f64 = 1e-9;
    check_positive(thresholds)?;
    check_len("block thresholds", partition.num_blocks(), thresholds.len())?;
    let data = basis.analyze(&obs.y)?;
    let est = basis.analyze(beta_hat)?;
    let mut worst_inf: f64 = f64::NEG_INFINITY;
    let mut margin_l2 = f64::INFINITY;
    let mut max_gap: f64 = 0.0;
    for (block, &q) in partition.blocks().iter().zip(thresholds) {
        let y = partition_values(block, &data);
        let b = partition_values(block, &est);
        let resid: Vec<f64> = y.iter().zip(&b).map(|(u, v)| u - v).collect();
        worst_inf = worst_inf.max(crate::linalg::norm_inf(&resid) / q);
        margin_l2 = margin_l2.min(1.0 - crate::linalg::norm2(&resid) / q);
        let target = eta_block(&y, q, Theta::SOFT);
        max_gap = max_gap.max(crate::linalg::max_abs_diff(&b, &target));
    }
    Ok(BlockCharacterizationReport {
        feasible_linf: worst_inf <= 1.0 + TOL,
        feasible_l2: margin_l2 >= -TOL,
        blockwise_minimal: max_gap <= TOL,
        margin_l2,
        max_gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dictionaries::{HaarBasis, StandardBasis};
    use crate::linalg::{dot, max_abs_diff};
    use crate::model::gaussian_noise;

    #[test]
    fn eta_examples() {
        assert_eq!(eta_theta(2.0, 1.0, Theta::SOFT).unwrap(), 1.0);
        for t in [Theta::SOFT, Theta::GARROTE, Theta::Finite(5.0), Theta::Hard] {
            assert_eq!(eta_theta(0.5, 1.0, t).unwrap(), 0.0);
        }
        assert_eq!(eta_theta(2.0, 1.0, Theta::GARROTE).unwrap(), 1.5);
        assert_eq!(eta_theta(2.0, 1.0, Theta::Hard).unwrap(), 2.0);
        assert!(eta_theta(2.0, 0.0, Theta::SOFT).is_err());
        assert!(eta_theta(2.0, -1.0, Theta::Hard).is_err());
        assert!(eta_theta(2.0, 1.0, Theta::Finite(0.0)).is_err());
    }

    #[test]
    fn eta_is_monotone_in_theta() {
        let thetas = [1.0, 2.0, 4.0, 8.0, 64.0];
        for i in 0..=400 {
            let x = -4.0 + 0.02 * i as f64;
            let vals: Vec<f64> = thetas
                .iter()
                .map(|&t| eta_theta(x, 1.0, Theta::Finite(t)).unwrap().abs())
                .collect();
            assert!(vals.windows(2).all(|w| w[0] <= w[1] + 1e-15));
            let hard = eta_theta(x, 1.0, Theta::Hard).unwrap().abs();
            assert!(vals[4] <= hard + 1e-15);
            // oddness
            for &t in &thetas {
                let a = eta_theta(x, 1.0, Theta::Finite(t)).unwrap();
                let b = eta_theta(-x, 1.0, Theta::Finite(t)).unwrap();
                assert_eq!(a, -b);
            }
        }
    }

    #[test]
    fn wavelet_threshold_examples() {
        let b = HaarBasis::for_len(8).unwrap();
        let rule = ShrinkageRule::uniform(Theta::SOFT, 0.7, 8).unwrap();
        let zero = Observation::new(vec![0.0; 8], 1.0).unwrap();
        assert_eq!(wavelet_threshold(&zero, &b, &rule).unwrap(), vec![0.0; 8]);

        let c = 2.0;
        let q0 = 1.5;
        let mut q = vec![0.3; 8];
        q[0] = q0;
        let obs = Observation::new(vec![c; 8], 1.0).unwrap();
        let rule = ShrinkageRule::new(Theta::SOFT, q).unwrap();
        let est = wavelet_threshold(&obs, &b, &rule).unwrap();
        let expect = c - q0 / 8f64.sqrt();
        assert!(est.iter().all(|x| (x - expect).abs() < 1e-12));
    }

    #[test]
    fn wavelet_threshold_matches_dense_oracle() {
        let b = HaarBasis::for_len(8).unwrap();
        let vectors: Vec<Vec<f64>> = (0..8).map(|i| b.vector(i)).collect();
        for seed in 0..20 {
            let y = gaussian_noise(8, 1.0, seed);
            let q = gaussian_noise(8, 0.3, seed + 1000)
                .into_iter()
                .map(|x| x.abs() + 0.1)
                .collect::<Vec<_>>();
            let obs = Observation::new(y.clone(), 1.0).unwrap();
            let est = wavelet_threshold(
                &obs,
                &b,
                &ShrinkageRule::new(Theta::SOFT, q.clone()).unwrap(),
            )
            .unwrap();
            let mut oracle = vec![0.0; 8];
            for (v, &ql) in vectors.iter().zip(&q) {
                let c = dot(v, &y);
                let s = c.signum() * (c.abs() - ql).max(0.0);
                for (o, x) in oracle.iter_mut().zip(v) {
                    *o += s * x;
                }
            }
            assert!(max_abs_diff(&est, &oracle) < 1e-12);
        }
    }

    #[test]
    fn garrote_weight_identity() {
        assert_eq!(garrote_weights(&[0.5], &[1.0]).unwrap(), vec![1.0]);
        let w = garrote_weights(&[2.0], &[1.0]).unwrap();
        assert_eq!(w, vec![0.5]);
        assert_eq!(soft(2.0, w[0]), 1.5);
        assert_eq!(eta_theta(2.0, 1.0, Theta::GARROTE).unwrap(), 1.5);
    }

    #[test]
    fn hard_weight_convention() {
        assert_eq!(
            hard_weights(&[0.5, 2.0], &[1.0, 1.0]).unwrap(),
            vec![1.0, 0.0]
        );
        let basis = StandardBasis { n: 2 };
        let obs = Observation::new(vec![0.5, 2.0], 1.0).unwrap();
        let w = hard_weights(&obs.y, &[1.0, 1.0]).unwrap();
        let hard = wavelet_threshold(
            &obs,
            &basis,
            &ShrinkageRule::uniform(Theta::Hard, 1.0, 2).unwrap(),
        )
        .unwrap();
        assert_eq!(hard, vec![0.0, 2.0]);
        let rep = verify_weighted_characterization(&hard, &obs, &basis, &w).unwrap();
        assert!(rep.feasible && rep.coefficientwise_minimal);
        let rep = verify_weighted_characterization(&[0.0, 1.9], &obs, &basis, &w).unwrap();
        assert!(!rep.feasible);
    }

    #[test]
    fn block_examples() {
        assert_eq!(eta_block(&[3.0, 4.0], 5.0, Theta::SOFT), vec![0.0, 0.0]);
        let v = eta_block(&[3.0, 4.0], 2.5, Theta::SOFT);
        assert!((v[0] - 1.5).abs() < 1e-15 && (v[1] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn block_js_is_block_soft_with_adjusted_threshold() {
        let b = HaarBasis::for_len(16).unwrap();
        let part = BlockPartition::haar_levels(16, 3).unwrap();
        for seed in 0..30 {
            let obs = Observation::new(gaussian_noise(16, 2.0, seed), 1.0).unwrap();
            let q: Vec<f64> = (0..part.num_blocks())
                .map(|a| 0.5 + 0.4 * a as f64)
                .collect();
            let js = block_threshold(&obs, &b, &part, &q, Theta::GARROTE).unwrap();
            let coeffs = b.analyze(&obs.y).unwrap();
            let norms = part.block_norms(&coeffs);
            let w: Vec<f64> = q
                .iter()
                .zip(&norms)
                .map(|(q, n)| q * q / q.max(*n))
                .collect();
            let soft = block_threshold(&obs, &b, &part, &w, Theta::SOFT).unwrap();
            assert!(max_abs_diff(&js, &soft) < 1e-12);
        }
    }

    #[test]
    fn block_threshold_rejects_partial_partition() {
        let b = StandardBasis { n: 3 };
        let part = BlockPartition::new(vec![vec![0, 1]], 3).unwrap();
        let obs = Observation::new(vec![1.0; 3], 1.0).unwrap();
        assert!(block_threshold(&obs, &b, &part, &[1.0], Theta::SOFT).is_err());
    }

    #[test]
    fn characterization_examples() {
        let b = HaarBasis::for_len(64).unwrap();
        let q = vec![(2.0 * 64f64.ln()).sqrt(); 64];
        let obs = Observation::new(
            gaussian_noise(64, 1.0, 3)
                .iter()
                .enumerate()
                .map(|(i, e)| e + (i / 16) as f64 * 3.0)
                .collect(),
            1.0,
        )
        .unwrap();
        let est = wavelet_threshold(
            &obs,
            &b,
            &ShrinkageRule::new(Theta::SOFT, q.clone()).unwrap(),
        )
        .unwrap();
        let rep = verify_characterization(&est, &obs, &b, &q).unwrap();
        assert!(rep.feasible && rep.coefficientwise_minimal, "{rep:?}");

        let rep = verify_characterization(&obs.y, &obs, &b, &q).unwrap();
        assert!(rep.feasible && !rep.coefficientwise_minimal);

        let rep = verify_characterization(&[0.0; 64], &obs, &b, &q).unwrap();
        assert!(!rep.feasible);
    }
}
