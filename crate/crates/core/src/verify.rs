//! Randomised oracle suites that check the exact equivalences between the
//! constrained programs and their closed forms or penalised counterparts.
//! Every suite reports the worst measured gap over its instances next to
//! the limit it must stay under.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dictionaries::{
    handle, BasisHandle, BlockPartition, HaarBasis, ProbeSystem, StandardBasis,
};
use crate::error::{invalid, MindError, Result};
use crate::linalg::{dist2, max_abs_diff, norm2, sub};
use crate::model::{gaussian_noise, DesignOperator, Observation};
use crate::multiscale::{universal_threshold, MultiscaleConstraint};
use crate::signals::random_steps;
use crate::solvers::{
    discrepancy_calibrate, dual_constrained_problem, group_lasso_solve, pdhg_solve,
    penalized_solve, solve_r_constrained, verify_conjugate_reformulation, verify_dual_equivalence,
    FistaOptions, GroupPenalty, MindProblem, PdhgOptions, Regularizer,
};
use crate::thresholding::{
    block_threshold, eta_theta, garrote_weights, soft, verify_block_characterization,
    verify_characterization, verify_weighted_characterization, ShrinkageRule, Theta,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    /// Coefficient-wise l1 under coefficient constraints is soft thresholding.
    Soft,
    /// Garrote equals soft thresholding with data-dependent weights.
    Garrote,
    /// Block soft thresholding solves the block-constrained program.
    Block,
    /// Block soft, group lasso and the constrained dual program coincide.
    Group,
    /// Lasso and its constrained dual program share the prediction.
    Lasso,
    /// Penalised minimiser at the discrepancy level solves the
    /// residual-constrained program.
    Discrepancy,
    /// Penalised minimiser solves the matching regulariser-constrained
    /// least-squares program.
    Sublevel,
    /// Penalised group lasso versus its Fenchel-conjugate reformulation.
    Conjugate,
}

impl Suite {
    pub const ALL: [Suite; 8] = [
        Suite::Soft,
        Suite::Garrote,
        Suite::Block,
        Suite::Group,
        Suite::Lasso,
        Suite::Discrepancy,
        Suite::Sublevel,
        Suite::Conjugate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Soft => "soft",
            Suite::Garrote => "garrote",
            Suite::Block => "block",
            Suite::Group => "group",
            Suite::Lasso => "lasso",
            Suite::Discrepancy => "discrepancy",
            Suite::Sublevel => "sublevel",
            Suite::Conjugate => "conjugate",
        }
    }

    /// Instances run when no count is given.
    pub fn default_instances(self) -> usize {
        match self {
            Suite::Soft | Suite::Block => 200,
            Suite::Garrote => 10_000,
            Suite::Group | Suite::Lasso => 50,
            Suite::Discrepancy | Suite::Sublevel | Suite::Conjugate => 20,
        }
    }

    /// Parses a suite name, or `all` for every suite.
    pub fn parse_selection(s: &str) -> Result<Vec<Suite>> {
        if s == "all" {
            return Ok(Suite::ALL.to_vec());
        }
        s.parse().map(|x| vec![x])
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = MindError;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Suite::ALL.iter().map(|x| x.name()).collect();
                MindError::InvalidInput(format!(
                    "unknown suite {s:?}; expected one of {} or all",
                    names.join(", ")
                ))
            })
    }
}

/// One measured quantity and its limit; passes when `value <= limit`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    pub passed: bool,
}

impl Check {
    fn new(name: &str, value: f64, limit: f64) -> Self {
        Check {
            name: name.to_owned(),
            value,
            limit,
            passed: value <= limit,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub instances: usize,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub passed: bool,
    pub seed: u64,
    pub suites: Vec<SuiteReport>,
}

/// Runs the selected suites; `instances` overrides every suite's default.
pub fn run(suites: &[Suite], instances: Option<usize>, seed: u64) -> Result<VerifyReport> {
    if instances == Some(0) {
        return invalid("at least one instance is required");
    }
    let mut out = Vec::new();
    for &s in suites {
        out.push(run_suite(
            s,
            instances.unwrap_or(s.default_instances()),
            seed,
        )?);
    }
    Ok(VerifyReport {
        passed: out.iter().all(|s| s.passed),
        seed,
        suites: out,
    })
}

pub fn run_suite(suite: Suite, instances: usize, seed: u64) -> Result<SuiteReport> {
    let start = std::time::Instant::now();
    let checks = match suite {
        Suite::Soft => soft_suite(instances, seed)?,
        Suite::Garrote => garrote_suite(instances, seed)?,
        Suite::Block => block_suite(instances, seed)?,
        Suite::Group => group_suite(instances, seed)?,
        Suite::Lasso => lasso_suite(instances, seed)?,
        Suite::Discrepancy => discrepancy_suite(instances, seed)?,
        Suite::Sublevel => sublevel_suite(instances, seed)?,
        Suite::Conjugate => conjugate_suite(instances, seed)?,
    };
    Ok(SuiteReport {
        suite,
        instances,
        passed: checks.iter().all(|c| c.passed),
        checks,
        seconds: start.elapsed().as_secs_f64(),
    })
}

fn haar(n: usize) -> BasisHandle {
    handle(HaarBasis::for_len(n).expect("dyadic length"))
}

/// Step signal plus unit noise, distinct for every `(seed, k)`.
fn noisy_steps(n: usize, height: f64, seed: u64, k: usize) -> Vec<f64> {
    let s = seed.wrapping_mul(1_000_003).wrapping_add(k as u64);
    let (truth, _) = random_steps(n, 3, n / 8, height, s);
    truth
        .iter()
        .zip(gaussian_noise(n, 1.0, s ^ 0x5bd1_e995))
        .map(|(a, e)| a + e)
        .collect()
}

fn uniform(len: usize, lo: f64, hi: f64, seed: u64) -> Vec<f64> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| rng.random_range(lo..hi)).collect()
}

fn soft_suite(instances: usize, seed: u64) -> Result<Vec<Check>> {
    let n = 64;
    let basis = haar(n);
    let q = universal_threshold(n, 1.0)?;
    let thresholds = vec![q; n];
    let mut gap: f64 = 0.0;
    let mut failures = 0usize;
    for k in 0..instances {
        let y = noisy_steps(n, 4.0, seed, k);
        let obs = Observation::new(y, 1.0)?;
        let closed = crate::thresholding::wavelet_threshold(
            &obs,
            basis.as_ref(),
            &ShrinkageRule::new(Theta::SOFT, thresholds.clone())?,
        )?;
        let problem = MindProblem::new(
            DesignOperator::identity(n),
            obs.clone(),
            MultiscaleConstraint::new(
                ProbeSystem::coefficients(basis.clone(), thresholds.clone())?,
                1.0,
            )?,
            Regularizer::L1Coeff {
                basis: basis.clone(),
                weights: vec![1.0; n],
            },
        )?;
        let solved = pdhg_solve(&problem, &PdhgOptions::default())?;
        gap = gap.max(max_abs_diff(&solved.beta_hat, &closed));
        let rep = verify_characterization(&closed, &obs, basis.as_ref(), &thresholds)?;
        if !(rep.feasible && rep.coefficientwise_minimal) {
            failures += 1;
        }
    }
    Ok(vec![
        Check::new("max_abs_gap", gap, 1e-6),
        Check::new("characterization_failures", failures as f64, 0.0),
    ])
}

fn garrote_suite(instances: usize, seed: u64) -> Result<Vec<Check>> {
    let coeffs: Vec<f64> = gaussian_noise(instances, 3.0, seed);
    let q = uniform(instances, 0.5, 4.0, seed ^ 1);
    let w = garrote_weights(&coeffs, &q)?;
    let mut gap: f64 = 0.0;
    for ((c, q), w) in coeffs.iter().zip(&q).zip(&w) {
        gap = gap.max((eta_theta(*c, *q, Theta::GARROTE)? - soft(*c, *w)).abs());
    }
    // the weighted characterization on a basis instance
    let n = 64;
    let basis = haar(n);
    let mut failures = 0usize;
    for k in 0..instances.div_ceil(500) {
        let obs = Observation::new(noisy_steps(n, 4.0, seed, k), 1.0)?;
        let c = basis.analyze(&obs.y)?;
        let qn = vec![2.5; n];
        let est = crate::thresholding::wavelet_threshold(
            &obs,
            basis.as_ref(),
            &ShrinkageRule::new(Theta::GARROTE, qn.clone())?,
        )?;
        let rep = verify_weighted_characterization(
            &est,
            &obs,
            basis.as_ref(),
            &garrote_weights(&c, &qn)?,
        )?;
        if !(rep.feasible && rep.coefficientwise_minimal) {
            failures += 1;
        }
    }
    Ok(vec![
        Check::new("max_abs_gap", gap, 1e-12),
        Check::new("characterization_failures", failures as f64, 0.0),
    ])
}

fn block_suite(instances: usize, seed: u64) -> Result<Vec<Check>> {
    let n = 64;
    let basis = haar(n);
    let partition = BlockPartition::contiguous(n, 8)?;
    let mut failures = 0usize;
    let mut worst_margin = f64::INFINITY;
    for k in 0..instances {
        let obs = Observation::new(noisy_steps(n, 4.0, seed, k), 1.0)?;
        let q = uniform(partition.num_blocks(), 2.0, 5.0, seed ^ (k as u64 + 7));
        let est = block_threshold(&obs, basis.as_ref(), &partition, &q, Theta::SOFT)?;
        let rep = verify_block_characterization(&est, &obs, basis.as_ref(), &partition, &q)?;
        if !(rep.feasible_l2 && rep.blockwise_minimal) {
            failures += 1;
        }
        worst_margin = worst_margin.min(rep.margin_l2);
    }
    Ok(vec![
        Check::new("characterization_failures", failures as f64, 0.0),
        Check::new("negative_margin", (-worst_margin).max(0.0), 1e-9),
    ])
}

fn group_penalty(n: usize, blocks: usize, seed: u64) -> Result<GroupPenalty> {
    let partition = BlockPartition::contiguous(n, n / blocks)?;
    let w = uniform(partition.num_blocks(), 0.5, 1.5, seed);
    GroupPenalty::new(haar(n), partition, w)
}

fn group_suite(instances: usize, seed: u64) -> Result<Vec<Check>> {
    let n = 64;
    let id = DesignOperator::identity(n);
    let mut worst = [0.0f64; 3];
    for k in 0..instances {
        let pen = group_penalty(n, 8, seed ^ (k as u64 * 31 + 3))?;
        let y = noisy_steps(n, 4.0, seed, k);
        let gamma = 2.5;
        let thresholds: Vec<f64> = pen.weights.iter().map(|w| gamma * w).collect();
        let obs = Observation::new(y.clone(), 1.0)?;
        let bs = block_threshold(
            &obs,
            pen.basis.as_ref(),
            &pen.partition,
            &thresholds,
            Theta::SOFT,
        )?;
        let gl = group_lasso_solve(&id, &y, &pen, gamma, &FistaOptions::default())?.beta_hat;
        let problem = dual_constrained_problem(&id, &y, &pen, gamma)?;
        let pd = pdhg_solve(&problem, &PdhgOptions::default())?.beta_hat;
        worst[0] = worst[0].max(dist2(&bs, &gl));
        worst[1] = worst[1].max(dist2(&bs, &pd));
        worst[2] = worst[2].max(dist2(&gl, &pd));
    }
    Ok(vec![
        Check::new("block_soft_vs_group_lasso", worst[0], 1e-5),
        Check::new("block_soft_vs_constrained", worst[1], 1e-5),
        Check::new("group_lasso_vs_constrained", worst[2], 1e-5),
    ])
}

fn dense_design(n: usize, p: usize, seed: u64) -> Result<DesignOperator> {
    DesignOperator::dense(n, p, gaussian_noise(n * p, 1.0, seed))
}

fn sparse_response(x: &DesignOperator, seed: u64) -> Result<Vec<f64>> {
    let mut beta = vec![0.0; x.cols()];
    beta[0] = 2.0;
    beta[x.cols() / 2] = -1.5;
    let fit = x.apply(&beta)?;
    Ok(fit
        .iter()
        .zip(gaussian_noise(fit.len(), 0.5, seed))
        .map(|(a, e)| a + e)
        .collect())
}

fn lasso_suite(instances: usize, seed: u64) -> Result<Vec<Check>> {
    let (n, p) = (20, 8);
    let pen = GroupPenalty::new(
        handle(StandardBasis { n: p }),
        BlockPartition::singletons(p),
        vec![1.0; p],
    )?;
    let mut kkt_excess: f64 = 0.0;
    let mut gap: f64 = 0.0;
    for k in 0..instances {
        let s = seed.wrapping_mul(7919).wrapping_add(k as u64);
        let x = dense_design(n, p, s)?;
        let y = sparse_response(&x, s ^ 0xabcd)?;
        let gamma = 0.3 * crate::linalg::norm_inf(&x.apply_adjoint(&y)?);
        let rep = verify_dual_equivalence(
            &x,
            &y,
            &pen,
            gamma,
            &FistaOptions::default(),
            &PdhgOptions::default(),
        )?;
        kkt_excess = kkt_excess.max(rep.kkt_residual / gamma - 1.0);
        gap = gap.max(rep.prediction_gap);
    }
    Ok(vec![
        Check::new("kkt_relative_excess", kkt_excess, 1e-6),
        Check::new("prediction_gap", gap, 1e-5),
    ])
}

const ROUND_TRIP_REGS: [Regularizer; 2] = [Regularizer::L2Sq, Regularizer::Tv];

fn tight() -> PdhgOptions {
    PdhgOptions {
        tol: 1e-10,
        max_iter: 200_000,
        ..PdhgOptions::default()
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-12)
}

fn discrepancy_suite(instances: usize, seed: u64) -> Result<Vec<Check>> {
    let n = 32;
    let id = DesignOperator::identity(n);
    let mut worst = [0.0f64; 2];
    let mut gamma_err: f64 = 0.0;
    for k in 0..instances {
        let y = noisy_steps(n, 3.0, seed, k);
        let mean = y.iter().sum::<f64>() / n as f64;
        let spread = norm2(&y.iter().map(|v| v - mean).collect::<Vec<_>>());
        for (r, reg) in ROUND_TRIP_REGS.into_iter().enumerate() {
            let q = 0.5 * spread;
            let cal = discrepancy_calibrate(&id, &y, &reg, q, 1e-10, &tight())?;
            let penalized = reg.evaluate(&cal.beta_hat)?;
            let problem = MindProblem::new(
                id.clone(),
                Observation::new(y.clone(), 1.0)?,
                MultiscaleConstraint::new(ProbeSystem::identity(n), q)?,
                reg.clone(),
            )?;
            let constrained = pdhg_solve(&problem, &tight())?.objective;
            worst[r] = worst[r].max(rel(penalized, constrained));
            if matches!(reg, Regularizer::L2Sq) {
                let expect = q / (norm2(&y) - q);
                gamma_err = gamma_err.max(rel(cal.gamma, expect));
            }
        }
    }
    Ok(vec![
        Check::new("l2_sq_objective_rel_gap", worst[0], 1e-4),
        Check::new("tv_objective_rel_gap", worst[1], 1e-4),
        Check::new("l2_sq_gamma_rel_error", gamma_err, 1e-6),
    ])
}

fn sublevel_suite(instances: usize, seed: u64) -> Result<Vec<Check>> {
    let n = 32;
    let id = DesignOperator::identity(n);
    let mut worst = [0.0f64; 2];
    for k in 0..instances {
        let y = noisy_steps(n, 3.0, seed, k);
        for (r, reg) in ROUND_TRIP_REGS.into_iter().enumerate() {
            let beta = penalized_solve(&id, &y, &reg, 1.5, &tight())?;
            let c = reg.evaluate(&beta)?;
            let fid = 0.5 * norm2(&sub(&y, &beta)).powi(2);
            let rep = solve_r_constrained(&id, &y, &reg, c, &tight())?;
            worst[r] = worst[r].max(rel(fid, rep.fidelity));
        }
    }
    Ok(vec![
        Check::new("l2_sq_fidelity_rel_gap", worst[0], 1e-4),
        Check::new("tv_fidelity_rel_gap", worst[1], 1e-4),
    ])
}

fn conjugate_suite(instances: usize, seed: u64) -> Result<Vec<Check>> {
    let (n, p) = (20, 8);
    let mut infeasible = 0usize;
    let mut worst = [0.0f64; 2];
    for k in 0..instances {
        let s = seed.wrapping_mul(104_729).wrapping_add(k as u64);
        let x = dense_design(n, p, s)?;
        let y = sparse_response(&x, s ^ 0x1234)?;
        let pen = GroupPenalty::new(
            handle(StandardBasis { n: p }),
            BlockPartition::contiguous(p, 2)?,
            uniform(4, 1.0, 3.0, s),
        )?;
        let rep = verify_conjugate_reformulation(
            &x,
            &y,
            &pen,
            &FistaOptions::default(),
            &PdhgOptions::default(),
        )?;
        if !rep.cross_feasible {
            infeasible += 1;
        }
        worst[0] = worst[0].max(rep.prediction_gap);
        worst[1] = worst[1].max(rep.penalized_objective_gap);
    }
    Ok(vec![
        Check::new("conjugate_infinite", infeasible as f64, 0.0),
        Check::new("prediction_gap", worst[0], 1e-5),
        Check::new("objective_gap", worst[1], 1e-6),
    ])
}
