//! Probe-functional systems: orthonormal bases (Haar), block partitions of a
//! coefficient index set, and interval systems with scale penalties.

mod haar;
mod intervals;
mod partition;
mod probes;

pub use haar::{BasisHandle, HaarBasis, HaarIndex, OrthoBasis, StandardBasis};
pub use intervals::{
    default_scale_penalties, nemirovskii_norm, IntervalProbe, IntervalSystem, IntervalVariant,
    ScalePenalty,
};
pub use partition::BlockPartition;
pub use probes::{handle, ProbeKind, ProbeSystem};

use crate::error::{invalid, Result};
use crate::linalg::{dot, norm2};
use crate::par::Execution;

/// Number of ordered pairs `(l, m)`, diagonal included, with
/// `|<phi_l, phi_m>| >= rho`.
pub fn coherence_count(vectors: &[Vec<f64>], rho: f64) -> Result<usize> {
    if !(rho > 0.0 && rho < 1.0) {
        return invalid(format!("coherence level must lie in (0, 1), got {rho}"));
    }
    if let Some(first) = vectors.first() {
        if vectors.iter().any(|v| v.len() != first.len()) {
            return invalid("dictionary vectors differ in length");
        }
    }
    for (i, v) in vectors.iter().enumerate() {
        let norm = norm2(v);
        if (norm - 1.0).abs() > 1e-8 {
            return invalid(format!("dictionary vector {i} has norm {norm}, expected 1"));
        }
    }
    let counts = Execution::Parallel.map_indexed(vectors.len(), |i| {
        vectors
            .iter()
            .filter(|w| dot(&vectors[i], w).abs() >= rho)
            .count()
    });
    Ok(counts.into_iter().sum())
}
