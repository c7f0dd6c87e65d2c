use serde::{Deserialize, Serialize};

use super::pdhg::{BlockFn, DualBlock, Engine, PdhgOptions, Quadratic};
use super::regularizer::Regularizer;
use crate::error::{check_len, MindError, Result};
use crate::model::{DesignOperator, Observation};
use crate::multiscale::{is_feasible, MultiscaleConstraint};

/// `min R(beta)  s.t.  max_a { ||T_a (Y - X beta)||_2 / w_a - s_a } <= q`.
#[derive(Debug, Clone)]
pub struct MindProblem {
    pub op: DesignOperator,
    pub obs: Observation,
    pub constraint: MultiscaleConstraint,
    pub reg: Regularizer,
}

impl MindProblem {
    pub fn new(
        op: DesignOperator,
        obs: Observation,
        constraint: MultiscaleConstraint,
        reg: Regularizer,
    ) -> Result<Self> {
        check_len("observation", op.rows(), obs.len())?;
        check_len("probe dimension", op.rows(), constraint.probes.n())?;
        reg.validate(op.cols())?;
        Ok(MindProblem {
            op,
            obs,
            constraint,
            reg,
        })
    }
}

/// Result of a constrained solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub beta_hat: Vec<f64>,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    /// `q - T(Y - X beta_hat)`; negative values are violations.
    pub constraint_slack: f64,
    pub dual_gap: Option<f64>,
    pub objective: f64,
    /// Fixed-point residual every `trace_every` iterations.
    pub residual_trace: Vec<f64>,
    pub converged: bool,
}

/// Solves a [`MindProblem`] by the primal-dual iteration over the stacked
/// operator `[analysis of R; probes o X]`.
///
/// Returns [`MindError::Infeasible`] when the constraint cannot be met
/// (detected from a negative ball radius or a diverging dual sequence),
/// [`MindError::NotConverged`] when the budget runs out on a violated
/// constraint without divergence, and [`MindError::Unsupported`] for
/// non-convex regularizers.
pub fn pdhg_solve(problem: &MindProblem, opts: &PdhgOptions) -> Result<SolveReport> {
    let MindProblem {
        op,
        obs,
        constraint,
        reg,
    } = problem;
    if !reg.is_convex() {
        return Err(MindError::Unsupported(format!(
            "{} is not convex; use the change-point solvers",
            reg.name()
        )));
    }
    let p = op.cols();
    let probes = &constraint.probes;
    let q = constraint.q;

    // each probe group is divided by its weight, so the balls have radii q + s_a
    let weights = probes.weights();
    let sizes = probes.group_sizes();
    let radii: Vec<f64> = probes.penalties().iter().map(|s| q + s).collect();
    if let Some(&r) = radii.iter().min_by(|a, b| a.total_cmp(b)) {
        if r < 0.0 {
            return Err(MindError::Infeasible {
                slack: r,
                iterations: 0,
            });
        }
    }

    let mut primal = Quadratic::zero(p);
    let mut blocks = reg.split(p, 1.0, &mut primal)?;
    let inv_w: Vec<f64> = sizes
        .iter()
        .zip(&weights)
        .flat_map(|(&g, w)| std::iter::repeat_n(1.0 / w, g))
        .collect();
    let scale = |mut v: Vec<f64>, f: &[f64]| {
        v.iter_mut().zip(f).for_each(|(a, b)| *a *= b);
        v
    };
    let centers = scale(probes.apply(&obs.y)?, &inv_w);
    let (fwd, bwd) = (inv_w.clone(), inv_w);
    blocks.push(DualBlock::new(
        move |b: &[f64]| {
            scale(
                probes
                    .apply(&op.apply_unchecked(b))
                    .expect("dimensions checked"),
                &fwd,
            )
        },
        move |u: &[f64]| {
            let v = scale(u.to_vec(), &bwd);
            op.adjoint_unchecked(&probes.adjoint(&v).expect("dimensions checked"))
        },
        BlockFn::Balls {
            sizes,
            centers,
            radii,
        },
    ));
    let engine = Engine {
        dim: p,
        primal,
        blocks,
    };
    let slack_tol = opts.tol * (1.0 + q.abs());
    let run = engine.run(opts, |x| {
        is_feasible(x, obs, op, constraint).is_ok_and(|f| f.slack >= -slack_tol)
    });
    let feas = is_feasible(&run.x, obs, op, constraint)?;
    if feas.slack < -slack_tol && !run.converged {
        if run.dual_growth > 1.5 {
            return Err(MindError::Infeasible {
                slack: feas.slack,
                iterations: run.iterations,
            });
        }
        return Err(MindError::NotConverged {
            iterations: run.iterations,
            slack: feas.slack,
            residual: run.primal_residual.max(run.dual_residual),
        });
    }
    Ok(SolveReport {
        objective: reg.evaluate(&run.x)?,
        beta_hat: run.x,
        iterations: run.iterations,
        primal_residual: run.primal_residual,
        dual_residual: run.dual_residual,
        constraint_slack: feas.slack,
        dual_gap: run.gap,
        residual_trace: run.trace,
        converged: run.converged,
    })
}
