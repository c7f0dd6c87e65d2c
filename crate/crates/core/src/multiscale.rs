//! The multiscale statistic `T = max_a { ||T_a r||_2 / w_a - s_a }`, its
//! calibration by Monte Carlo or by the Gumbel limit, feasibility checks and
//! coverage simulation.
//!
//! Monte Carlo replication `r` draws its noise from seed `seed + r`, so the
//! sample, and every quantile derived from it, is the same under sequential
//! and parallel execution.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dictionaries::ProbeSystem;
use crate::error::{check_len, invalid, Result};
use crate::model::{gaussian_noise, simulate, DesignOperator, Observation};
use crate::par::Execution;

/// Slack below which a constraint counts as satisfied.
pub const FEASIBILITY_TOL: f64 = 1e-9;

const BOOTSTRAP_ROUNDS: usize = 200;
const BOOTSTRAP_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

/// `max_a { ||T_a (Y - X beta)||_2 / w_a - s_a } <= q`.
#[derive(Debug, Clone)]
pub struct MultiscaleConstraint {
    pub probes: ProbeSystem,
    pub q: f64,
}

impl MultiscaleConstraint {
    pub fn new(probes: ProbeSystem, q: f64) -> Result<Self> {
        if !q.is_finite() {
            return invalid(format!("threshold must be finite, got {q}"));
        }
        Ok(MultiscaleConstraint { probes, q })
    }
}

/// An empirical `(1 - alpha)`-quantile of the statistic under pure noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileEstimate {
    pub alpha: f64,
    pub q_alpha: f64,
    pub reps: usize,
    /// Bootstrap standard error of `q_alpha`.
    pub stderr: f64,
}

/// Signed distance to the constraint boundary: `q - T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Feasibility {
    pub feasible: bool,
    pub slack: f64,
}

/// Fraction of replications on which `R(beta_hat) <= R(beta)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coverage {
    pub coverage: f64,
    pub reps: usize,
    pub covered: usize,
    /// Replications on which the estimator returned an error; they count as
    /// not covered.
    pub failures: usize,
}

pub fn multiscale_statistic(residual: &[f64], probes: &ProbeSystem) -> Result<f64> {
    probes.statistic(residual)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        invalid(format!("alpha must lie in (0, 1), got {alpha}"))
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        invalid(format!("noise level must be positive, got {sigma}"))
    }
}

/// Draws `reps` values of the statistic on pure noise `N(0, sigma^2 I_n)`,
/// returned sorted ascending.
pub fn null_distribution(
    probes: &ProbeSystem,
    sigma: f64,
    reps: usize,
    seed: u64,
    exec: Execution,
) -> Result<Vec<f64>> {
    check_sigma(sigma)?;
    let n = probes.n();
    if probes.num_probes() == 0 {
        return invalid("empty probe system");
    }
    let mut sample = exec
        .map_indexed(reps, |r| {
            let eps = gaussian_noise(n, sigma, seed.wrapping_add(r as u64));
            probes.statistic(&eps)
        })
        .into_iter()
        .collect::<Result<Vec<f64>>>()?;
    sample.sort_by(f64::total_cmp);
    Ok(sample)
}

/// The `ceil(reps (1 - alpha))`-th order statistic of a sorted sample.
pub fn empirical_quantile(sorted: &[f64], alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if sorted.is_empty() {
        return invalid("empty sample");
    }
    Ok(sorted[order_index(sorted.len(), alpha)])
}

fn order_index(len: usize, alpha: f64) -> usize {
    let k = (len as f64 * (1.0 - alpha)).ceil() as usize;
    k.clamp(1, len) - 1
}

fn bootstrap_stderr(sample: &[f64], alpha: f64, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ BOOTSTRAP_SALT);
    let m = sample.len();
    let k = order_index(m, alpha);
    let mut buf = vec![0.0; m];
    let estimates: Vec<f64> = (0..BOOTSTRAP_ROUNDS)
        .map(|_| {
            for b in buf.iter_mut() {
                *b = sample[rng.random_range(0..m)];
            }
            *buf.select_nth_unstable_by(k, f64::total_cmp).1
        })
        .collect();
    let mean = estimates.iter().sum::<f64>() / BOOTSTRAP_ROUNDS as f64;
    let var =
        estimates.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (BOOTSTRAP_ROUNDS - 1) as f64;
    var.sqrt()
}

/// Monte Carlo `(1 - alpha)`-quantile of the statistic under pure noise.
/// The statistic is pivotal, so the truth plays no role.
pub fn monte_carlo_quantile(
    probes: &ProbeSystem,
    n: usize,
    sigma: f64,
    alpha: f64,
    reps: usize,
    seed: u64,
) -> Result<QuantileEstimate> {
    monte_carlo_quantile_with(probes, n, sigma, alpha, reps, seed, Execution::default())
}

pub fn monte_carlo_quantile_with(
    probes: &ProbeSystem,
    n: usize,
    sigma: f64,
    alpha: f64,
    reps: usize,
    seed: u64,
    exec: Execution,
) -> Result<QuantileEstimate> {
    check_alpha(alpha)?;
    if reps < 100 {
        return invalid(format!(
            "at least 100 replications are required, got {reps}"
        ));
    }
    check_len("probe dimension", n, probes.n())?;
    let sample = null_distribution(probes, sigma, reps, seed, exec)?;
    Ok(QuantileEstimate {
        alpha,
        q_alpha: empirical_quantile(&sample, alpha)?,
        reps,
        stderr: bootstrap_stderr(&sample, alpha, seed),
    })
}

/// Second-order Gumbel approximation to the `(1 - alpha)`-quantile of the
/// maximum of `n` absolute standard Gaussians, scaled by `sigma`.
pub fn gumbel_threshold(n: usize, sigma: f64, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if n < 3 {
        return invalid(format!("the Gumbel approximation needs n >= 3, got {n}"));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return invalid(format!("noise level must be nonnegative, got {sigma}"));
    }
    let ln_n = (n as f64).ln();
    let root = (2.0 * ln_n).sqrt();
    let x = -(-(1.0 - alpha).ln()).ln();
    Ok(sigma * root + sigma * (2.0 * x - ln_n.ln() - std::f64::consts::PI.ln()) / (2.0 * root))
}

/// `sigma sqrt(2 log n)`.
pub fn universal_threshold(n: usize, sigma: f64) -> Result<f64> {
    if n < 2 {
        return invalid(format!("the universal threshold needs n >= 2, got {n}"));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return invalid(format!("noise level must be nonnegative, got {sigma}"));
    }
    Ok(sigma * (2.0 * (n as f64).ln()).sqrt())
}

/// Checks `T(Y - X beta) <= q` up to [`FEASIBILITY_TOL`].
pub fn is_feasible(
    beta: &[f64],
    obs: &Observation,
    op: &DesignOperator,
    c: &MultiscaleConstraint,
) -> Result<Feasibility> {
    let fit = op.apply(beta)?;
    check_len("observation", fit.len(), obs.y.len())?;
    let resid: Vec<f64> = obs.y.iter().zip(&fit).map(|(y, f)| y - f).collect();
    let slack = c.q - c.probes.statistic(&resid)?;
    Ok(Feasibility {
        feasible: slack >= -FEASIBILITY_TOL,
        slack,
    })
}

/// Simulates `reps` observations `Y = X beta + eps` (seed `seed + r`) and
/// counts how often `R(estimator(Y)) <= R(beta) + 1e-9`.
#[allow(clippy::too_many_arguments)]
pub fn simulate_guarantee<E, R>(
    op: &DesignOperator,
    truth: &[f64],
    sigma: f64,
    estimator: E,
    reg: R,
    reps: usize,
    seed: u64,
    exec: Execution,
) -> Result<Coverage>
where
    E: Fn(&Observation) -> Result<Vec<f64>> + Sync + Send,
    R: Fn(&[f64]) -> f64 + Sync + Send,
{
    check_sigma(sigma)?;
    if reps == 0 {
        return invalid("at least one replication is required");
    }
    op.apply(truth)?;
    let bound = reg(truth) + 1e-9;
    let outcomes = exec.map_indexed(reps, |r| {
        let obs = simulate(op, truth, sigma, seed.wrapping_add(r as u64))?;
        Ok(estimator(&obs).map(|b| reg(&b) <= bound))
    });
    let mut covered = 0;
    let mut failures = 0;
    for o in outcomes {
        match o? {
            Ok(true) => covered += 1,
            Ok(false) => {}
            Err(_) => failures += 1,
        }
    }
    Ok(Coverage {
        coverage: covered as f64 / reps as f64,
        reps,
        covered,
        failures,
    })
}

/// `1.4826 * median |d_k|` over the finest Haar details
/// `d_k = (y_{2k} - y_{2k+1}) / sqrt(2)`. Works for any `n >= 2`; a trailing
/// odd sample is ignored.
pub fn estimate_sigma(y: &[f64]) -> Result<f64> {
    if y.len() < 2 {
        return invalid("noise estimation needs at least two samples");
    }
    let mut d: Vec<f64> = y
        .chunks_exact(2)
        .map(|p| ((p[0] - p[1]) / std::f64::consts::SQRT_2).abs())
        .collect();
    let m = d.len();
    d.sort_by(f64::total_cmp);
    let median = if m % 2 == 1 {
        d[m / 2]
    } else {
        0.5 * (d[m / 2 - 1] + d[m / 2])
    };
    Ok(1.4826 * median)
}
