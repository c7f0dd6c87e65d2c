use std::sync::Arc;

use super::haar::BasisHandle;
use super::intervals::{prefix_sums, IntervalSystem};
use super::partition::BlockPartition;
use crate::error::{check_len, invalid, Result};
use crate::linalg::dot;

/// The linear maps `T_a` of a probe family.
#[derive(Debug, Clone)]
pub enum ProbeKind {
    /// A single probe, the identity on `R^n`.
    Identity,
    /// One scalar probe per basis coefficient, `v -> <phi_a, v>`.
    Coefficients(BasisHandle),
    /// One probe per block of basis coefficients.
    Blocks {
        basis: BasisHandle,
        partition: BlockPartition,
    },
    /// One scalar probe per interval, `v -> sum_{i in B} v_i`.
    Intervals(IntervalSystem),
    /// Explicit rows over `R^n`; probe `a` owns rows `offsets[a]..offsets[a + 1]`.
    Dense { rows: Vec<f64>, offsets: Vec<usize> },
}

/// A family `(T_a, w_a, s_a)` of linear probes with weights and scale
/// penalties. For interval systems the weights are `sqrt(len)` and the
/// penalties come from the system, so they are not stored.
#[derive(Debug, Clone)]
pub struct ProbeSystem {
    n: usize,
    kind: ProbeKind,
    weights: Vec<f64>,
    penalties: Vec<f64>,
}

fn validate_scales(weights: &[f64], penalties: &[f64]) -> Result<()> {
    if let Some(w) = weights.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
        return invalid(format!(
            "probe weights must be positive and finite, got {w}"
        ));
    }
    if let Some(s) = penalties.iter().find(|s| !(**s >= 0.0 && s.is_finite())) {
        return invalid(format!("scale penalties must be nonnegative, got {s}"));
    }
    Ok(())
}

impl ProbeSystem {
    fn build(n: usize, kind: ProbeKind, weights: Vec<f64>, penalties: Vec<f64>) -> Result<Self> {
        let sys = ProbeSystem {
            n,
            kind,
            weights,
            penalties,
        };
        if !matches!(sys.kind, ProbeKind::Intervals(_)) {
            let m = sys.num_probes();
            check_len("probe weights", m, sys.weights.len())?;
            check_len("probe penalties", m, sys.penalties.len())?;
            validate_scales(&sys.weights, &sys.penalties)?;
        }
        Ok(sys)
    }

    pub fn identity(n: usize) -> Self {
        Self::build(n, ProbeKind::Identity, vec![1.0], vec![0.0]).expect("unit weight is valid")
    }

    /// Scalar coefficient probes with the given weights and zero penalties.
    pub fn coefficients(basis: BasisHandle, weights: Vec<f64>) -> Result<Self> {
        let m = basis.len();
        Self::coefficients_with(basis, weights, vec![0.0; m])
    }

    pub fn coefficients_with(
        basis: BasisHandle,
        weights: Vec<f64>,
        penalties: Vec<f64>,
    ) -> Result<Self> {
        let n = basis.len();
        Self::build(n, ProbeKind::Coefficients(basis), weights, penalties)
    }

    pub fn blocks(
        basis: BasisHandle,
        partition: BlockPartition,
        weights: Vec<f64>,
    ) -> Result<Self> {
        if partition.size() != basis.len() {
            return invalid("partition size differs from basis length");
        }
        let n = basis.len();
        let m = partition.num_blocks();
        Self::build(
            n,
            ProbeKind::Blocks { basis, partition },
            weights,
            vec![0.0; m],
        )
    }

    pub fn intervals(sys: IntervalSystem) -> Self {
        ProbeSystem {
            n: sys.n(),
            kind: ProbeKind::Intervals(sys),
            weights: Vec::new(),
            penalties: Vec::new(),
        }
    }

    /// General probes from explicit rows: `group_sizes[a]` consecutive rows
    /// form probe `a`.
    pub fn dense(
        n: usize,
        rows: Vec<Vec<f64>>,
        group_sizes: &[usize],
        weights: Vec<f64>,
        penalties: Vec<f64>,
    ) -> Result<Self> {
        if rows.iter().any(|r| r.len() != n) {
            return invalid("probe rows must have length n");
        }
        if group_sizes.iter().sum::<usize>() != rows.len() || group_sizes.contains(&0) {
            return invalid("probe group sizes do not match the number of rows");
        }
        let mut offsets = vec![0];
        for g in group_sizes {
            offsets.push(offsets.last().unwrap() + g);
        }
        Self::build(
            n,
            ProbeKind::Dense {
                rows: rows.concat(),
                offsets,
            },
            weights,
            penalties,
        )
    }

    /// Each row is its own scalar probe with unit weight and no penalty.
    pub fn functionals(n: usize, rows: Vec<Vec<f64>>) -> Result<Self> {
        let m = rows.len();
        Self::dense(n, rows, &vec![1; m], vec![1.0; m], vec![0.0; m])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> &ProbeKind {
        &self.kind
    }

    pub fn num_probes(&self) -> usize {
        match &self.kind {
            ProbeKind::Identity => 1,
            ProbeKind::Coefficients(b) => b.len(),
            ProbeKind::Blocks { partition, .. } => partition.num_blocks(),
            ProbeKind::Intervals(sys) => sys.num_intervals(),
            ProbeKind::Dense { offsets, .. } => offsets.len() - 1,
        }
    }

    /// Total length of the stacked probe outputs.
    pub fn output_dim(&self) -> usize {
        match &self.kind {
            ProbeKind::Identity => self.n,
            ProbeKind::Blocks { partition, .. } => partition.blocks().iter().map(Vec::len).sum(),
            ProbeKind::Dense { offsets, .. } => *offsets.last().unwrap(),
            _ => self.num_probes(),
        }
    }

    /// True for scalar probes on an orthonormal basis with unit weights and
    /// no penalties, the setting of the Gumbel approximation.
    pub fn is_plain_basis(&self) -> bool {
        matches!(self.kind, ProbeKind::Coefficients(_))
            && self.weights.iter().all(|&w| w == 1.0)
            && self.penalties.iter().all(|&s| s == 0.0)
    }

    pub fn has_zero_penalties(&self) -> bool {
        match &self.kind {
            ProbeKind::Intervals(sys) => {
                matches!(sys.penalty(), super::intervals::ScalePenalty::Zero)
            }
            _ => self.penalties.iter().all(|&s| s == 0.0),
        }
    }

    /// Group sizes of the stacked output, in probe order.
    pub fn group_sizes(&self) -> Vec<usize> {
        match &self.kind {
            ProbeKind::Identity => vec![self.n],
            ProbeKind::Blocks { partition, .. } => {
                partition.blocks().iter().map(Vec::len).collect()
            }
            ProbeKind::Dense { offsets, .. } => offsets.windows(2).map(|w| w[1] - w[0]).collect(),
            _ => vec![1; self.num_probes()],
        }
    }

    /// Weights `w_a` in probe order.
    pub fn weights(&self) -> Vec<f64> {
        match &self.kind {
            ProbeKind::Intervals(sys) => sys.intervals().map(|i| i.weight).collect(),
            _ => self.weights.clone(),
        }
    }

    /// Penalties `s_a` in probe order.
    pub fn penalties(&self) -> Vec<f64> {
        match &self.kind {
            ProbeKind::Intervals(sys) => sys.intervals().map(|i| i.penalty).collect(),
            _ => self.penalties.clone(),
        }
    }

    /// Stacked outputs `(T_a v)_a`.
    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len("probe input", self.n, v.len())?;
        Ok(match &self.kind {
            ProbeKind::Identity => v.to_vec(),
            ProbeKind::Coefficients(b) => b.analyze(v)?,
            ProbeKind::Blocks { basis, partition } => {
                let c = basis.analyze(v)?;
                partition
                    .blocks()
                    .iter()
                    .flat_map(|b| b.iter().map(|&i| c[i]))
                    .collect()
            }
            ProbeKind::Intervals(sys) => {
                let mut out = Vec::with_capacity(sys.num_intervals());
                sys.for_each_sum(v, |_, _, s| out.push(s));
                out
            }
            ProbeKind::Dense { rows, .. } => rows.chunks_exact(self.n).map(|r| dot(r, v)).collect(),
        })
    }

    /// Adjoint of [`ProbeSystem::apply`].
    pub fn adjoint(&self, u: &[f64]) -> Result<Vec<f64>> {
        check_len("probe output", self.output_dim(), u.len())?;
        Ok(match &self.kind {
            ProbeKind::Identity => u.to_vec(),
            ProbeKind::Coefficients(b) => b.synthesize(u)?,
            ProbeKind::Blocks { basis, partition } => {
                let mut c = vec![0.0; basis.len()];
                let mut pos = 0;
                for b in partition.blocks() {
                    for &i in b {
                        c[i] = u[pos];
                        pos += 1;
                    }
                }
                basis.synthesize(&c)?
            }
            ProbeKind::Intervals(sys) => {
                let mut delta = vec![0.0; self.n + 1];
                for (probe, &ua) in sys.intervals().zip(u) {
                    delta[probe.start] += ua;
                    delta[probe.end + 1] -= ua;
                }
                let mut acc = 0.0;
                delta[..self.n]
                    .iter()
                    .map(|d| {
                        acc += d;
                        acc
                    })
                    .collect()
            }
            ProbeKind::Dense { rows, .. } => {
                let mut out = vec![0.0; self.n];
                for (r, &ua) in rows.chunks_exact(self.n).zip(u) {
                    for (o, x) in out.iter_mut().zip(r) {
                        *o += x * ua;
                    }
                }
                out
            }
        })
    }

    /// `max_a { ||T_a r||_2 / w_a - s_a }`.
    pub fn statistic(&self, r: &[f64]) -> Result<f64> {
        check_len("residual", self.n, r.len())?;
        if self.num_probes() == 0 {
            return invalid("empty probe system");
        }
        if let ProbeKind::Intervals(sys) = &self.kind {
            let prefix = prefix_sums(r);
            let lengths: Vec<(usize, f64, f64)> = sys
                .lengths()
                .map(|l| (l, (l as f64).sqrt().recip(), sys.penalty_for_len(l)))
                .collect();
            let mut best = f64::NEG_INFINITY;
            for start in 0..self.n {
                for &(l, inv_w, s) in lengths.iter().take_while(|(l, _, _)| start + l <= self.n) {
                    let v = (prefix[start + l] - prefix[start]).abs() * inv_w - s;
                    if v > best {
                        best = v;
                    }
                }
            }
            return Ok(best);
        }
        let out = self.apply(r)?;
        let mut best = f64::NEG_INFINITY;
        let mut pos = 0;
        for (a, size) in self.group_sizes().into_iter().enumerate() {
            let norm = out[pos..pos + size]
                .iter()
                .map(|x| x * x)
                .sum::<f64>()
                .sqrt();
            pos += size;
            best = best.max(norm / self.weights[a] - self.penalties[a]);
        }
        Ok(best)
    }
}

/// Convenience: wrap a concrete basis in a shared handle.
pub fn handle<B: super::haar::OrthoBasis + 'static>(basis: B) -> BasisHandle {
    Arc::new(basis)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dictionaries::{BlockPartition, HaarBasis, IntervalSystem, StandardBasis};
    use crate::linalg::dot;
    use crate::model::gaussian_noise;

    fn adjoint_gap(p: &ProbeSystem, seed: u64) -> f64 {
        let v = gaussian_noise(p.n(), 1.0, seed);
        let u = gaussian_noise(p.output_dim(), 1.0, seed + 1);
        (dot(&p.apply(&v).unwrap(), &u) - dot(&v, &p.adjoint(&u).unwrap())).abs()
    }

    #[test]
    fn adjoints_are_consistent() {
        let haar = handle(HaarBasis::for_len(8).unwrap());
        let systems = vec![
            ProbeSystem::identity(8),
            ProbeSystem::coefficients(haar.clone(), vec![1.0; 8]).unwrap(),
            ProbeSystem::blocks(
                haar,
                BlockPartition::haar_levels(8, 2).unwrap(),
                vec![1.0; 5],
            )
            .unwrap(),
            ProbeSystem::intervals(IntervalSystem::all(8)),
            ProbeSystem::intervals(IntervalSystem::dyadic(8)),
            ProbeSystem::functionals(8, (0..3).map(|s| gaussian_noise(8, 1.0, s)).collect())
                .unwrap(),
        ];
        for p in &systems {
            assert!(adjoint_gap(p, 5) < 1e-10, "{:?}", p.kind());
        }
    }

    #[test]
    fn statistic_examples() {
        let id = ProbeSystem::identity(2);
        assert!((id.statistic(&[3.0, 4.0]).unwrap() - 5.0).abs() < 1e-12);
        let iv = ProbeSystem::intervals(IntervalSystem::all(4));
        assert!((iv.statistic(&[1.0, -1.0, 1.0, -1.0]).unwrap() - 1.0).abs() < 1e-12);
        let pens = ProbeSystem::coefficients_with(
            handle(StandardBasis { n: 3 }),
            vec![1.0; 3],
            vec![0.5, 0.2, 0.9],
        )
        .unwrap();
        assert!((pens.statistic(&[0.0; 3]).unwrap() + 0.2).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_scales() {
        let b = handle(StandardBasis { n: 2 });
        assert!(ProbeSystem::coefficients(b.clone(), vec![1.0, 0.0]).is_err());
        assert!(
            ProbeSystem::coefficients_with(b.clone(), vec![1.0, 1.0], vec![0.0, -1.0]).is_err()
        );
        assert!(ProbeSystem::coefficients(b, vec![1.0]).is_err());
    }
}
