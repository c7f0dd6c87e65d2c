//! Penalised least squares `min 1/2 ||Y - X beta||^2 + gamma R(beta)`, the
//! discrepancy principle for choosing `gamma`, and the sublevel-constrained
//! form `min 1/2 ||Y - X beta||^2 s.t. R(beta) <= c`.

use serde::{Deserialize, Serialize};

use super::group_lasso::{group_lasso_solve, FistaOptions};
use super::pdhg::{BlockFn, DualBlock, Engine, PdhgOptions, Quadratic};
use super::prox::prox_tv_1d;
use super::regularizer::{GroupPenalty, Regularizer};
use crate::dictionaries::BlockPartition;
use crate::error::{check_len, invalid, MindError, Result};
use crate::linalg::{cholesky_solve, diff_n, diff_n_adjoint, dist2, norm2, sub};
use crate::model::DesignOperator;
use crate::thresholding::soft;

const GAMMA_MIN: f64 = 1e-8;
const GAMMA_MAX: f64 = 1e8;

/// Dense Gram-type matrix `sum_k A_k^T A_k` assembled column by column.
fn assemble(p: usize, apply: impl Fn(&[f64]) -> Vec<f64>) -> Vec<f64> {
    let mut m = vec![0.0; p * p];
    let mut e = vec![0.0; p];
    for j in 0..p {
        e[j] = 1.0;
        let col = apply(&e);
        for i in 0..p {
            m[i * p + j] = col[i];
        }
        e[j] = 0.0;
    }
    m
}

/// Solves `(I + gamma D_k^T D_k) beta = y` with a banded Cholesky
/// factorisation (bandwidth `k`).
fn smoothing_spline(y: &[f64], order: usize, gamma: f64) -> Vec<f64> {
    let n = y.len();
    if n <= order {
        return y.to_vec();
    }
    let bw = order;
    // band[i][d] = A[i][i - d]
    let mut band = vec![vec![0.0; bw + 1]; n];
    let mut e = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        let col = diff_n_adjoint(&diff_n(&e, order), order);
        for (i, &v) in col.iter().enumerate().skip(j).take(bw + 1) {
            band[i][i - j] = gamma * v + if i == j { 1.0 } else { 0.0 };
        }
        e[j] = 0.0;
    }
    // in-place banded Cholesky, L stored in band
    for i in 0..n {
        for d in (0..=bw.min(i)).rev() {
            let j = i - d;
            let mut s = band[i][d];
            for k in j.saturating_sub(bw).max(i.saturating_sub(bw))..j {
                s -= band[i][i - k] * band[j][j - k];
            }
            if d == 0 {
                band[i][0] = s.sqrt();
            } else {
                band[i][d] = s / band[j][0];
            }
        }
    }
    let mut z = vec![0.0; n];
    for i in 0..n {
        let mut s = y[i];
        for k in i.saturating_sub(bw)..i {
            s -= band[i][i - k] * z[k];
        }
        z[i] = s / band[i][0];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = z[i];
        for k in i + 1..(i + bw + 1).min(n) {
            s -= band[k][k - i] * x[k];
        }
        x[i] = s / band[i][0];
    }
    x
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma.is_finite() {
        Ok(())
    } else {
        invalid(format!("penalty weight must be positive, got {gamma}"))
    }
}

/// `argmin 1/2 ||Y - X beta||^2 + gamma R(beta)`.
///
/// Closed forms are used where they exist (taut string for TV, linear
/// systems for quadratic penalties, coefficient shrinkage for `X = I`);
/// block and coefficient l1 penalties with a general design use FISTA and
/// every other case uses the primal-dual iteration.
pub fn penalized_solve(
    op: &DesignOperator,
    y: &[f64],
    reg: &Regularizer,
    gamma: f64,
    opts: &PdhgOptions,
) -> Result<Vec<f64>> {
    check_len("observation", op.rows(), y.len())?;
    check_gamma(gamma)?;
    reg.validate(op.cols())?;
    let p = op.cols();
    if op.is_identity() {
        match reg {
            Regularizer::Tv => return prox_tv_1d(y, gamma),
            Regularizer::L2Sq => return Ok(y.iter().map(|v| v / (1.0 + gamma)).collect()),
            Regularizer::L1Coeff { basis, weights } => {
                let c: Vec<f64> = basis
                    .analyze(y)?
                    .iter()
                    .zip(weights)
                    .map(|(&c, w)| soft(c, gamma * w))
                    .collect();
                return basis.synthesize(&c);
            }
            Regularizer::BlockL1(g) => return Ok(g.prox(y, gamma)),
            Regularizer::SqDiff { order } => return Ok(smoothing_spline(y, *order, gamma)),
            Regularizer::PredictionSq(x) => {
                let m = assemble(p, |e| {
                    let v = x.adjoint_unchecked(&x.apply_unchecked(e));
                    e.iter().zip(&v).map(|(e, v)| e + gamma * v).collect()
                });
                return cholesky_solve(&m, p, y)
                    .ok_or_else(|| MindError::InvalidInput("singular system".into()));
            }
            _ => {}
        }
    }
    match reg {
        Regularizer::L2Sq => {
            let m = assemble(p, |e| {
                let v = op.adjoint_unchecked(&op.apply_unchecked(e));
                v.iter().zip(e).map(|(v, e)| v + gamma * e).collect()
            });
            let rhs = op.adjoint_unchecked(y);
            return cholesky_solve(&m, p, &rhs)
                .ok_or_else(|| MindError::InvalidInput("singular system".into()));
        }
        Regularizer::BlockL1(g) => {
            return Ok(group_lasso_solve(op, y, g, gamma, &FistaOptions::default())?.beta_hat)
        }
        Regularizer::L1Coeff { basis, weights } => {
            let pen = GroupPenalty::new(
                basis.clone(),
                BlockPartition::singletons(p),
                weights.clone(),
            )?;
            return Ok(group_lasso_solve(op, y, &pen, gamma, &FistaOptions::default())?.beta_hat);
        }
        _ => {}
    }
    let mut primal = Quadratic::zero(p);
    let mut blocks = reg.split(p, gamma, &mut primal)?;
    push_fidelity(op, y, &mut primal, &mut blocks);
    let engine = Engine {
        dim: p,
        primal,
        blocks,
    };
    Ok(engine.run(opts, |_| true).x)
}

fn push_fidelity<'a>(
    op: &'a DesignOperator,
    y: &'a [f64],
    primal: &mut Quadratic,
    blocks: &mut Vec<DualBlock<'a>>,
) {
    if op.is_identity() {
        primal.add(1.0, y);
    } else {
        blocks.push(DualBlock::new(
            move |b: &[f64]| op.apply_unchecked(b),
            move |u: &[f64]| op.adjoint_unchecked(u),
            BlockFn::HalfSqDist(y.to_vec()),
        ));
    }
}

/// Residual norm reached by the minimisers of `R` (the smallest residual
/// over `argmin R`), when it is known in closed form.
fn minimizer_residual(
    op: &DesignOperator,
    y: &[f64],
    reg: &Regularizer,
) -> Option<(f64, Vec<f64>)> {
    let p = op.cols();
    match reg {
        Regularizer::L2Sq
        | Regularizer::L1Coeff { .. }
        | Regularizer::BlockL1(_)
        | Regularizer::SobolevKq { .. } => Some((norm2(y), vec![0.0; p])),
        Regularizer::Tv | Regularizer::SqDiff { .. } => {
            let k = match reg {
                Regularizer::SqDiff { order } => *order,
                _ => 1,
            };
            // least-squares fit over polynomials of degree < k
            let basis: Vec<Vec<f64>> = (0..k.min(p))
                .map(|d| {
                    (0..p)
                        .map(|i| ((i as f64) / p as f64).powi(d as i32))
                        .collect()
                })
                .collect();
            let cols: Vec<Vec<f64>> = basis.iter().map(|b| op.apply_unchecked(b)).collect();
            let m = cols.len();
            let mut gram = vec![0.0; m * m];
            for i in 0..m {
                for j in 0..m {
                    gram[i * m + j] = crate::linalg::dot(&cols[i], &cols[j]);
                }
            }
            let rhs: Vec<f64> = cols.iter().map(|c| crate::linalg::dot(c, y)).collect();
            let coef = cholesky_solve(&gram, m, &rhs)?;
            let mut beta = vec![0.0; p];
            for (c, b) in coef.iter().zip(&basis) {
                for (x, v) in beta.iter_mut().zip(b) {
                    *x += c * v;
                }
            }
            Some((dist2(y, &op.apply_unchecked(&beta)), beta))
        }
        _ => None,
    }
}

/// Outcome of [`discrepancy_calibrate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub gamma: f64,
    pub beta_hat: Vec<f64>,
    /// `||Y - X beta_hat||_2`.
    pub residual: f64,
    /// True when a minimiser of `R` already satisfies `||Y - X beta|| <= q`;
    /// `gamma` is then reported as `0` and `beta_hat` is that minimiser.
    pub degenerate: bool,
    pub iterations: usize,
}

/// Chooses `gamma` by bisection in `log gamma` over `[1e-8, 1e8]` so that the
/// penalised minimiser has residual norm `q` (within `tol`).
pub fn discrepancy_calibrate(
    op: &DesignOperator,
    y: &[f64],
    reg: &Regularizer,
    q: f64,
    tol: f64,
    opts: &PdhgOptions,
) -> Result<Calibration> {
    check_len("observation", op.rows(), y.len())?;
    if !(q > 0.0 && q.is_finite()) {
        return invalid(format!("discrepancy level must be positive, got {q}"));
    }
    let residual = |g: f64| -> Result<(f64, Vec<f64>)> {
        let b = penalized_solve(op, y, reg, g, opts)?;
        Ok((dist2(y, &op.apply(&b)?), b))
    };
    let known = minimizer_residual(op, y, reg);
    let (r_hi, b_hi) = match &known {
        Some((r, b)) => (*r, b.clone()),
        None => residual(GAMMA_MAX)?,
    };
    if r_hi <= q {
        return Ok(Calibration {
            gamma: 0.0,
            beta_hat: b_hi,
            residual: r_hi,
            degenerate: true,
            iterations: 0,
        });
    }
    let (r_lo, b_lo) = residual(GAMMA_MIN)?;
    if r_lo > q + tol {
        return invalid(format!(
            "discrepancy level {q} is below the attainable residual {r_lo}"
        ));
    }
    let (mut lo, mut hi) = (GAMMA_MIN.ln(), GAMMA_MAX.ln());
    let mut best = (GAMMA_MIN, r_lo, b_lo);
    let mut iterations = 0;
    while (best.1 - q).abs() > tol && iterations < 200 {
        iterations += 1;
        let mid = 0.5 * (lo + hi);
        let g = mid.exp();
        let (r, b) = residual(g)?;
        if r > q {
            hi = mid;
        } else {
            lo = mid;
        }
        if (r - q).abs() < (best.1 - q).abs() {
            best = (g, r, b);
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    Ok(Calibration {
        gamma: best.0,
        beta_hat: best.2,
        residual: best.1,
        degenerate: false,
        iterations,
    })
}

/// Outcome of [`solve_r_constrained`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SublevelReport {
    pub beta_hat: Vec<f64>,
    /// `1/2 ||Y - X beta_hat||^2`.
    pub fidelity: f64,
    pub reg_value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// `min 1/2 ||Y - X beta||^2  s.t.  R(beta) <= c` by the primal-dual
/// iteration. Supported for TV, squared differences, `l2_sq` and
/// coefficient l1.
pub fn solve_r_constrained(
    op: &DesignOperator,
    y: &[f64],
    reg: &Regularizer,
    c: f64,
    opts: &PdhgOptions,
) -> Result<SublevelReport> {
    check_len("observation", op.rows(), y.len())?;
    let p = op.cols();
    let mut primal = Quadratic::zero(p);
    let mut blocks = vec![reg.sublevel_block(p, c)?];
    push_fidelity(op, y, &mut primal, &mut blocks);
    let engine = Engine {
        dim: p,
        primal,
        blocks,
    };
    let run = engine.run(opts, |b| {
        reg.evaluate(b).is_ok_and(|r| r <= c + opts.tol * (1.0 + c))
    });
    let fit = op.apply(&run.x)?;
    let r = sub(y, &fit);
    Ok(SublevelReport {
        fidelity: 0.5 * crate::linalg::dot(&r, &r),
        reg_value: reg.evaluate(&run.x)?,
        beta_hat: run.x,
        iterations: run.iterations,
        converged: run.converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dictionaries::{handle, HaarBasis};
    use crate::model::gaussian_noise;

    fn tight() -> PdhgOptions {
        PdhgOptions {
            tol: 1e-11,
            max_iter: 200_000,
            ..PdhgOptions::default()
        }
    }

    #[test]
    fn smoothing_spline_matches_dense_solve() {
        for order in 1..=3 {
            let y = gaussian_noise(20, 1.0, order as u64);
            let g = 2.5;
            let fast = smoothing_spline(&y, order, g);
            let m = assemble(20, |e| {
                let v = diff_n_adjoint(&diff_n(e, order), order);
                e.iter().zip(&v).map(|(e, v)| e + g * v).collect()
            });
            let dense = cholesky_solve(&m, 20, &y).unwrap();
            assert!(crate::linalg::max_abs_diff(&fast, &dense) < 1e-10);
        }
    }

    #[test]
    fn penalized_paths_agree_with_pdhg() {
        let y = gaussian_noise(16, 1.0, 2);
        let id = DesignOperator::identity(16);
        let h = handle(HaarBasis::for_len(16).unwrap());
        let regs = [
            Regularizer::Tv,
            Regularizer::SqDiff { order: 2 },
            Regularizer::L1Coeff {
                basis: h,
                weights: vec![1.0; 16],
            },
        ];
        for reg in &regs {
            let exact = penalized_solve(&id, &y, reg, 0.7, &tight()).unwrap();
            // the same problem through the generic engine
            let mut primal = Quadratic::zero(16);
            let mut blocks = reg.split(16, 0.7, &mut primal).unwrap();
            push_fidelity(&id, &y, &mut primal, &mut blocks);
            let run = Engine {
                dim: 16,
                primal,
                blocks,
            }
            .run(&tight(), |_| true);
            assert!(
                crate::linalg::max_abs_diff(&exact, &run.x) < 1e-6,
                "{}",
                reg.name()
            );
        }
    }

    #[test]
    fn l2_discrepancy_matches_closed_form() {
        let y = gaussian_noise(32, 1.0, 4);
        let ny = norm2(&y);
        let q = 0.4 * ny;
        let cal = discrepancy_calibrate(
            &DesignOperator::identity(32),
            &y,
            &Regularizer::L2Sq,
            q,
            1e-10,
            &tight(),
        )
        .unwrap();
        assert!(!cal.degenerate);
        let expect = q / (ny - q);
        assert!(
            (cal.gamma / expect - 1.0).abs() < 1e-8,
            "{} vs {expect}",
            cal.gamma
        );
        let cal = discrepancy_calibrate(
            &DesignOperator::identity(32),
            &y,
            &Regularizer::L2Sq,
            ny + 0.1,
            1e-10,
            &tight(),
        )
        .unwrap();
        assert!(cal.degenerate && cal.gamma == 0.0);
    }

    #[test]
    fn l2_sublevel_is_radial_scaling() {
        let y = gaussian_noise(10, 1.0, 5);
        let c = 0.1 * 0.5 * norm2(&y).powi(2);
        let rep = solve_r_constrained(
            &DesignOperator::identity(10),
            &y,
            &Regularizer::L2Sq,
            c,
            &tight(),
        )
        .unwrap();
        let f = (2.0 * c).sqrt() / norm2(&y);
        let expect: Vec<f64> = y.iter().map(|v| v * f).collect();
        assert!(crate::linalg::max_abs_diff(&rep.beta_hat, &expect) < 1e-7);
    }
}
