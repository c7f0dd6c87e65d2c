//! Convex solvers for constrained and penalised variational estimators.
//!
//! Constrained programs are solved by one primal-dual engine over a stacked
//! operator; the group lasso uses accelerated proximal gradient; the total
//! variation proximal map is computed exactly by the taut string.

mod calibrate;
mod group_lasso;
mod mind;
mod pdhg;
mod prox;
mod regularizer;

pub use calibrate::{
    discrepancy_calibrate, penalized_solve, solve_r_constrained, Calibration, SublevelReport,
};
pub use group_lasso::{
    conjugate_block_l1, dual_constrained_problem, dual_norm, group_lasso_solve,
    verify_conjugate_reformulation, verify_dual_equivalence, ConjugateReformulationReport,
    ConjugateValue, DualEquivalenceReport, FistaOptions, GroupLassoResult,
};
pub use mind::{pdhg_solve, MindProblem, SolveReport};
pub use pdhg::PdhgOptions;
pub use prox::{project_ball, project_weighted_l1_ball, prox_tv_1d, BallNorm};
pub use regularizer::{GroupPenalty, Regularizer, SobolevExponent};
