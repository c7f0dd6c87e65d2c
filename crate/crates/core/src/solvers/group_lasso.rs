//! The adaptive group lasso, the conjugate of the block l1 norm and the
//! dual constrained reformulation.

use serde::{Deserialize, Serialize};

use super::mind::{pdhg_solve, MindProblem};
use super::pdhg::PdhgOptions;
use super::regularizer::{GroupPenalty, Regularizer};
use crate::dictionaries::ProbeSystem;
use crate::error::{check_len, invalid, Result};
use crate::linalg::{dist2, dot, norm2, power_norm, sub};
use crate::model::{DesignOperator, Observation};
use crate::multiscale::MultiscaleConstraint;

/// Options for the accelerated proximal-gradient solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FistaOptions {
    pub max_iter: usize,
    /// Stops once `||beta_k - beta_{k-1}|| <= tol max(1, ||beta_k||)`.
    pub tol: f64,
}

impl Default for FistaOptions {
    fn default() -> Self {
        FistaOptions {
            max_iter: 100_000,
            tol: 1e-13,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupLassoResult {
    pub beta_hat: Vec<f64>,
    pub iterations: usize,
    pub objective: f64,
    pub converged: bool,
}

fn group_lasso_objective(
    x: &DesignOperator,
    y: &[f64],
    pen: &GroupPenalty,
    gamma: f64,
    b: &[f64],
) -> f64 {
    let r = sub(y, &x.apply_unchecked(b));
    0.5 * dot(&r, &r) + gamma * pen.value(b).expect("length checked")
}

/// Minimises `1/2 ||Y - X beta||^2 + gamma sum_a w_a ||B_a Phi beta||_2` by
/// FISTA with gradient-based restart. The proximal step is block soft
/// thresholding in the coefficient domain.
pub fn group_lasso_solve(
    x: &DesignOperator,
    y: &[f64],
    pen: &GroupPenalty,
    gamma: f64,
    opts: &FistaOptions,
) -> Result<GroupLassoResult> {
    check_len("observation", x.rows(), y.len())?;
    check_len("penalty basis", x.cols(), pen.len())?;
    if !(gamma > 0.0 && gamma.is_finite()) {
        return invalid(format!("penalty weight must be positive, got {gamma}"));
    }
    let p = x.cols();
    let lip = if x.is_identity() {
        1.0
    } else {
        let l = power_norm(p, 100, |v| x.apply_unchecked(v), |v| x.adjoint_unchecked(v));
        1.01 * l * l
    };
    if lip == 0.0 {
        let beta = vec![0.0; p];
        let objective = group_lasso_objective(x, y, pen, gamma, &beta);
        return Ok(GroupLassoResult {
            beta_hat: beta,
            iterations: 0,
            objective,
            converged: true,
        });
    }
    let step = 1.0 / lip;
    let mut beta = vec![0.0; p];
    let mut z = beta.clone();
    let mut t = 1.0f64;
    let mut converged = false;
    let mut iterations = 0;
    for k in 1..=opts.max_iter {
        iterations = k;
        let grad = x.adjoint_unchecked(&sub(&x.apply_unchecked(&z), y));
        let v: Vec<f64> = z.iter().zip(&grad).map(|(z, g)| z - step * g).collect();
        let next = pen.prox(&v, step * gamma);
        let delta = dist2(&next, &beta);
        // restart when the momentum direction opposes the step
        let restart = z
            .iter()
            .zip(&next)
            .zip(&beta)
            .map(|((z, n), b)| (z - n) * (n - b))
            .sum::<f64>()
            > 0.0;
        let t_next = if restart {
            1.0
        } else {
            0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt())
        };
        let mom = if restart { 0.0 } else { (t - 1.0) / t_next };
        z = next
            .iter()
            .zip(&beta)
            .map(|(n, b)| n + mom * (n - b))
            .collect();
        t = t_next;
        beta = next;
        if delta <= opts.tol * norm2(&beta).max(1.0) {
            converged = true;
            break;
        }
    }
    let objective = group_lasso_objective(x, y, pen, gamma, &beta);
    Ok(GroupLassoResult {
        beta_hat: beta,
        iterations,
        objective,
        converged,
    })
}

/// Value of the Fenchel conjugate of `sum_a w_a ||B_a Phi .||_2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConjugateValue {
    Zero,
    Infinite,
}

/// The conjugate is `0` when `max_a ||B_a Phi mu||_2 / w_a <= 1` and `+inf`
/// otherwise. Coefficients outside the partition carry no penalty, so any
/// mass there also makes the conjugate infinite.
pub fn conjugate_block_l1(mu: &[f64], pen: &GroupPenalty) -> Result<ConjugateValue> {
    Ok(if dual_norm(mu, pen)? <= 1.0 + 1e-12 {
        ConjugateValue::Zero
    } else {
        ConjugateValue::Infinite
    })
}

/// `max_a ||B_a Phi mu||_2 / w_a` (infinite if `mu` has mass outside the
/// partition).
pub fn dual_norm(mu: &[f64], pen: &GroupPenalty) -> Result<f64> {
    let c = pen.basis.analyze(mu)?;
    let mut covered = vec![false; c.len()];
    let mut worst: f64 = 0.0;
    for (b, &w) in pen.partition.blocks().iter().zip(&pen.weights) {
        let mut s = 0.0;
        for &i in b {
            covered[i] = true;
            s += c[i] * c[i];
        }
        worst = worst.max(s.sqrt() / w);
    }
    if c.iter().zip(&covered).any(|(v, cov)| !cov && *v != 0.0) {
        return Ok(f64::INFINITY);
    }
    Ok(worst)
}

/// `min 1/2 ||X beta||^2  s.t.  max_a ||B_a Phi X^T (Y - X beta)||_2 / w_a <= gamma`
/// as a [`MindProblem`].
pub fn dual_constrained_problem(
    x: &DesignOperator,
    y: &[f64],
    pen: &GroupPenalty,
    gamma: f64,
) -> Result<MindProblem> {
    check_len("observation", x.rows(), y.len())?;
    check_len("penalty basis", x.cols(), pen.len())?;
    let n = x.rows();
    // rows of B_a Phi X^T, i.e. X phi_l for every coefficient l in block a
    let mut rows = Vec::new();
    for b in pen.partition.blocks() {
        for &l in b {
            rows.push(x.apply(&pen.basis.vector(l))?);
        }
    }
    let probes = ProbeSystem::dense(
        n,
        rows,
        &pen.sizes(),
        pen.weights.clone(),
        vec![0.0; pen.partition.num_blocks()],
    )?;
    let obs = Observation {
        y: y.to_vec(),
        sigma: 1.0,
        seed: None,
    };
    MindProblem::new(
        x.clone(),
        obs,
        MultiscaleConstraint::new(probes, gamma)?,
        Regularizer::PredictionSq(x.clone()),
    )
}

/// Outcome of [`verify_dual_equivalence`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualEquivalenceReport {
    /// `||X beta_penalized - X beta_constrained||_2`.
    pub prediction_gap: f64,
    /// `gamma - max_a ||B_a Phi X^T (Y - X beta_penalized)||_2 / w_a`.
    pub penalized_slack: f64,
    /// Constraint slack of the constrained solution.
    pub constrained_slack: f64,
    /// `||X^T (Y - X beta_penalized)||_inf`.
    pub kkt_residual: f64,
    pub beta_penalized: Vec<f64>,
    pub beta_constrained: Vec<f64>,
    pub iterations: usize,
}

/// Solves the group lasso and its dual constrained form independently and
/// compares their predictions.
pub fn verify_dual_equivalence(
    x: &DesignOperator,
    y: &[f64],
    pen: &GroupPenalty,
    gamma: f64,
    fista: &FistaOptions,
    pdhg: &PdhgOptions,
) -> Result<DualEquivalenceReport> {
    let gl = group_lasso_solve(x, y, pen, gamma, fista)?;
    let problem = dual_constrained_problem(x, y, pen, gamma)?;
    let report = pdhg_solve(&problem, pdhg)?;
    let fit1 = x.apply(&gl.beta_hat)?;
    let fit2 = x.apply(&report.beta_hat)?;
    let corr = x.apply_adjoint(&sub(y, &fit1))?;
    Ok(DualEquivalenceReport {
        prediction_gap: dist2(&fit1, &fit2),
        penalized_slack: gamma - dual_norm(&corr, pen)?,
        constrained_slack: report.constraint_slack,
        kkt_residual: crate::linalg::norm_inf(&corr),
        beta_penalized: gl.beta_hat,
        beta_constrained: report.beta_hat,
        iterations: report.iterations,
    })
}

/// Outcome of [`verify_conjugate_reformulation`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConjugateReformulationReport {
    /// The penalised minimiser makes the conjugate term finite.
    pub cross_feasible: bool,
    /// `|P(beta_2) - P(beta_1)|` with `P` the penalised objective.
    pub penalized_objective_gap: f64,
    /// `|1/2 ||X beta_1||^2 - 1/2 ||X beta_2||^2|`.
    pub dual_objective_gap: f64,
    pub prediction_gap: f64,
}

/// For `R = sum_a w_a ||B_a Phi .||_2`, compares the minimiser of
/// `1/2 ||Y - X beta||^2 + R(beta)` with that of
/// `1/2 ||X beta||^2 + R*(X^T (Y - X beta))`.
pub fn verify_conjugate_reformulation(
    x: &DesignOperator,
    y: &[f64],
    pen: &GroupPenalty,
    fista: &FistaOptions,
    pdhg: &PdhgOptions,
) -> Result<ConjugateReformulationReport> {
    let rep = verify_dual_equivalence(x, y, pen, 1.0, fista, pdhg)?;
    let b1 = &rep.beta_penalized;
    let b2 = &rep.beta_constrained;
    let corr = x.apply_adjoint(&sub(y, &x.apply(b1)?))?;
    let cross_feasible = conjugate_block_l1(&corr, pen)? == ConjugateValue::Zero
        || dual_norm(&corr, pen)? <= 1.0 + 1e-7;
    let half_sq = |b: &[f64]| -> Result<f64> { Ok(0.5 * norm2(&x.apply(b)?).powi(2)) };
    Ok(ConjugateReformulationReport {
        cross_feasible,
        penalized_objective_gap: (group_lasso_objective(x, y, pen, 1.0, b2)
            - group_lasso_objective(x, y, pen, 1.0, b1))
        .abs(),
        dual_objective_gap: (half_sq(b1)? - half_sq(b2)?).abs(),
        prediction_gap: rep.prediction_gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dictionaries::{handle, BlockPartition, HaarBasis, StandardBasis};
    use crate::model::gaussian_noise;
    use crate::thresholding::{block_threshold, Theta};

    fn haar_penalty(n: usize, block: usize) -> GroupPenalty {
        let part = BlockPartition::haar_levels(n, block).unwrap();
        let w = (0..part.num_blocks())
            .map(|a| 1.0 + 0.1 * a as f64)
            .collect();
        GroupPenalty::new(handle(HaarBasis::for_len(n).unwrap()), part, w).unwrap()
    }

    #[test]
    fn singleton_blocks_give_soft_thresholding() {
        let n = 16;
        let pen = GroupPenalty::new(
            handle(HaarBasis::for_len(n).unwrap()),
            BlockPartition::singletons(n),
            vec![1.0; n],
        )
        .unwrap();
        let y = gaussian_noise(n, 2.0, 3);
        let r = group_lasso_solve(
            &DesignOperator::identity(n),
            &y,
            &pen,
            1.3,
            &FistaOptions::default(),
        )
        .unwrap();
        let c = pen.basis.analyze(&y).unwrap();
        let expect: Vec<f64> = c
            .iter()
            .map(|&v| crate::thresholding::soft(v, 1.3))
            .collect();
        let got = pen.basis.analyze(&r.beta_hat).unwrap();
        assert!(crate::linalg::max_abs_diff(&got, &expect) < 1e-12);
    }

    #[test]
    fn identity_design_matches_block_thresholding() {
        let pen = haar_penalty(32, 4);
        for seed in 0..10 {
            let y = gaussian_noise(32, 1.5, seed);
            let gamma = 0.9;
            let r = group_lasso_solve(
                &DesignOperator::identity(32),
                &y,
                &pen,
                gamma,
                &FistaOptions::default(),
            )
            .unwrap();
            let q: Vec<f64> = pen.weights.iter().map(|w| gamma * w).collect();
            let obs = Observation::new(y, 1.0).unwrap();
            let bt =
                block_threshold(&obs, pen.basis.as_ref(), &pen.partition, &q, Theta::SOFT).unwrap();
            assert!(crate::linalg::max_abs_diff(&r.beta_hat, &bt) < 1e-6);
        }
    }

    #[test]
    fn huge_penalty_gives_zero() {
        let pen = haar_penalty(16, 2);
        let y = gaussian_noise(16, 1.0, 2);
        let r = group_lasso_solve(
            &DesignOperator::identity(16),
            &y,
            &pen,
            1e9,
            &FistaOptions::default(),
        )
        .unwrap();
        assert!(r.beta_hat.iter().all(|&b| b == 0.0));
    }

    #[test]
    fn conjugate_examples() {
        let pen = GroupPenalty::new(
            handle(StandardBasis { n: 2 }),
            BlockPartition::covering(vec![vec![0, 1]], 2).unwrap(),
            vec![5.0],
        )
        .unwrap();
        assert_eq!(
            conjugate_block_l1(&[0.0, 0.0], &pen).unwrap(),
            ConjugateValue::Zero
        );
        assert_eq!(
            conjugate_block_l1(&[3.0, 4.0], &pen).unwrap(),
            ConjugateValue::Zero
        );
        assert_eq!(
            conjugate_block_l1(&[3.03, 4.04], &pen).unwrap(),
            ConjugateValue::Infinite
        );
    }

    #[test]
    fn lasso_null_threshold() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| gaussian_noise(8, 1.0, 500 + i)).collect();
        let x = DesignOperator::from_rows(&rows).unwrap();
        let y = gaussian_noise(20, 1.0, 7);
        let pen = GroupPenalty::new(
            handle(StandardBasis { n: 8 }),
            BlockPartition::singletons(8),
            vec![1.0; 8],
        )
        .unwrap();
        let gamma = crate::linalg::norm_inf(&x.apply_adjoint(&y).unwrap()) * 1.01;
        let r = group_lasso_solve(&x, &y, &pen, gamma, &FistaOptions::default()).unwrap();
        assert!(r.beta_hat.iter().all(|&b| b == 0.0));
        assert!(dual_norm(&x.apply_adjoint(&y).unwrap(), &pen).unwrap() <= gamma);
    }

    #[test]
    fn dual_equivalence_identity_design() {
        let pen = haar_penalty(16, 2);
        let y = gaussian_noise(16, 2.0, 9);
        let rep = verify_dual_equivalence(
            &DesignOperator::identity(16),
            &y,
            &pen,
            0.8,
            &FistaOptions::default(),
            &PdhgOptions {
                tol: 1e-10,
                ..PdhgOptions::default()
            },
        )
        .unwrap();
        assert!(rep.prediction_gap < 1e-5, "{rep:?}");
        assert!(rep.penalized_slack >= -1e-9);
    }
}
