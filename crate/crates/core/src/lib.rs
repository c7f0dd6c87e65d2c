//! Multiscale constrained estimation: shrinkage rules, primal-dual solvers
//! for constrained variational programs, threshold calibration and
//! change-point segmentation.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod changepoint;
mod error;

pub mod dictionaries;
pub mod linalg;
pub mod model;
pub mod multiscale;
pub mod par;
pub mod signals;
pub mod solvers;
pub mod thresholding;
pub mod verify;

pub use error::{MindError, Result};
