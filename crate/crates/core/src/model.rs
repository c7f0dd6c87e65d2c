//! Linear observation models `Y = X beta + noise` and seeded simulation.
//!
//! Noise is drawn from a `ChaCha8Rng` seeded with `seed_from_u64(seed)`;
//! Gaussian variates come from `rand_distr::StandardNormal` (ziggurat). The
//! same seed therefore reproduces bit-identical observations on every
//! platform.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, invalid, Result};

/// The system matrix of a linear model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DesignOperator {
    /// Nonparametric regression, `X = I`.
    Identity { n: usize },
    /// Change-point parameterisation: lower-triangular ones, so `X beta`
    /// is the vector of prefix sums of the increments `beta`.
    CumulativeSum { n: usize },
    /// General dense design, stored row-major (`n` rows, `p` columns).
    Dense {
        n: usize,
        p: usize,
        entries: Vec<f64>,
    },
}

impl DesignOperator {
    pub fn identity(n: usize) -> Self {
        DesignOperator::Identity { n }
    }

    pub fn cumulative_sum(n: usize) -> Self {
        DesignOperator::CumulativeSum { n }
    }

    pub fn dense(n: usize, p: usize, entries: Vec<f64>) -> Result<Self> {
        check_len("dense design entries", n * p, entries.len())?;
        if entries.iter().any(|x| !x.is_finite()) {
            return invalid("dense design contains non-finite entries");
        }
        Ok(DesignOperator::Dense { n, p, entries })
    }

    /// Builds a dense design from rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != p) {
            return invalid("ragged design rows");
        }
        Self::dense(n, p, rows.concat())
    }

    /// Number of observations.
    pub fn rows(&self) -> usize {
        match *self {
            DesignOperator::Identity { n } | DesignOperator::CumulativeSum { n } => n,
            DesignOperator::Dense { n, .. } => n,
        }
    }

    /// Number of parameters.
    pub fn cols(&self) -> usize {
        match *self {
            DesignOperator::Identity { n } | DesignOperator::CumulativeSum { n } => n,
            DesignOperator::Dense { p, .. } => p,
        }
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, DesignOperator::Identity { .. })
    }

    /// `X beta`.
    pub fn apply(&self, beta: &[f64]) -> Result<Vec<f64>> {
        check_len("parameter vector", self.cols(), beta.len())?;
        Ok(self.apply_unchecked(beta))
    }

    /// `X^T v`.
    pub fn apply_adjoint(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len("observation vector", self.rows(), v.len())?;
        Ok(self.adjoint_unchecked(v))
    }

    pub(crate) fn apply_unchecked(&self, beta: &[f64]) -> Vec<f64> {
        match self {
            DesignOperator::Identity { .. } => beta.to_vec(),
            DesignOperator::CumulativeSum { .. } => {
                let mut acc = 0.0;
                beta.iter()
                    .map(|b| {
                        acc += b;
                        acc
                    })
                    .collect()
            }
            DesignOperator::Dense { p, entries, .. } => entries
                .chunks_exact(*p)
                .map(|row| crate::linalg::dot(row, beta))
                .collect(),
        }
    }

    pub(crate) fn adjoint_unchecked(&self, v: &[f64]) -> Vec<f64> {
        match self {
            DesignOperator::Identity { .. } => v.to_vec(),
            DesignOperator::CumulativeSum { .. } => {
                let mut out = vec![0.0; v.len()];
                let mut acc = 0.0;
                for j in (0..v.len()).rev() {
                    acc += v[j];
                    out[j] = acc;
                }
                out
            }
            DesignOperator::Dense { p, entries, .. } => {
                let mut out = vec![0.0; *p];
                for (row, &vi) in entries.chunks_exact(*p).zip(v) {
                    for (o, &x) in out.iter_mut().zip(row) {
                        *o += x * vi;
                    }
                }
                out
            }
        }
    }

    /// Spectral norm estimate (exact for identity).
    pub fn norm_estimate(&self) -> f64 {
        match self {
            DesignOperator::Identity { n } => {
                if *n == 0 {
                    0.0
                } else {
                    1.0
                }
            }
            _ => crate::linalg::power_norm(
                self.cols(),
                100,
                |v| self.apply_unchecked(v),
                |v| self.adjoint_unchecked(v),
            ),
        }
    }
}

/// Observed data together with the (known) noise level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub y: Vec<f64>,
    pub sigma: f64,
    pub seed: Option<u64>,
}

impl Observation {
    pub fn new(y: Vec<f64>, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return invalid(format!("noise level must be positive, got {sigma}"));
        }
        Ok(Observation {
            y,
            sigma,
            seed: None,
        })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }
}

/// Draws `len` i.i.d. `N(0, sigma^2)` variates from a generator seeded with `seed`.
pub fn gaussian_noise(len: usize, sigma: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            sigma * z
        })
        .collect()
}

/// Simulates `Y = X beta + eps` with `eps ~ N(0, sigma^2 I)`.
pub fn simulate(op: &DesignOperator, beta: &[f64], sigma: f64, seed: u64) -> Result<Observation> {
    let mean = op.apply(beta)?;
    if !(sigma > 0.0 && sigma.is_finite()) {
        return invalid(format!("noise level must be positive, got {sigma}"));
    }
    let noise = gaussian_noise(mean.len(), sigma, seed);
    let y = mean.iter().zip(&noise).map(|(m, e)| m + e).collect();
    Ok(Observation {
        y,
        sigma,
        seed: Some(seed),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dot;

    #[test]
    fn apply_examples() {
        let id = DesignOperator::identity(3);
        assert_eq!(id.apply(&[1.0, 2.0, 3.0]).unwrap(), vec![1.0, 2.0, 3.0]);
        let cs = DesignOperator::cumulative_sum(4);
        assert_eq!(cs.apply(&[1.0, 0.0, 0.0, 0.0]).unwrap(), vec![1.0; 4]);
        let d = DesignOperator::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(d.apply(&[1.0, 1.0]).unwrap(), vec![3.0, 7.0]);
    }

    #[test]
    fn adjoint_examples() {
        assert_eq!(
            DesignOperator::identity(2)
                .apply_adjoint(&[1.0, 2.0])
                .unwrap(),
            vec![1.0, 2.0]
        );
        assert_eq!(
            DesignOperator::cumulative_sum(3)
                .apply_adjoint(&[1.0, 1.0, 1.0])
                .unwrap(),
            vec![3.0, 2.0, 1.0]
        );
        let d = DesignOperator::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(d.apply_adjoint(&[1.0, 0.0]).unwrap(), vec![1.0, 2.0]);
    }

    #[test]
    fn dimension_errors() {
        let d = DesignOperator::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert!(d.apply(&[1.0]).is_err());
        assert!(d.apply_adjoint(&[1.0, 2.0, 3.0]).is_err());
        assert!(DesignOperator::dense(2, 2, vec![1.0; 3]).is_err());
        assert!(DesignOperator::from_rows(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn adjoint_identity_random_pairs() {
        let rows: Vec<Vec<f64>> = (0..5)
            .map(|i| gaussian_noise(3, 1.0, 100 + i as u64))
            .collect();
        let ops = [
            DesignOperator::identity(5),
            DesignOperator::cumulative_sum(5),
            DesignOperator::from_rows(&rows).unwrap(),
        ];
        for op in &ops {
            for k in 0..100u64 {
                let beta = gaussian_noise(op.cols(), 1.0, 2 * k);
                let v = gaussian_noise(op.rows(), 1.0, 2 * k + 1);
                let lhs = dot(&op.apply(&beta).unwrap(), &v);
                let rhs = dot(&beta, &op.apply_adjoint(&v).unwrap());
                assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1.0));
            }
        }
    }

    #[test]
    fn simulate_is_deterministic_and_noise_free_in_the_limit() {
        let op = DesignOperator::cumulative_sum(6);
        let beta = [1.0, 0.0, 2.0, 0.0, -1.0, 0.0];
        let a = simulate(&op, &beta, 0.5, 7).unwrap();
        let b = simulate(&op, &beta, 0.5, 7).unwrap();
        assert_eq!(a, b);
        let tiny = simulate(&op, &beta, 1e-30, 7).unwrap();
        let mean = op.apply(&beta).unwrap();
        assert!(crate::linalg::max_abs_diff(&tiny.y, &mean) < 1e-15);
        assert!(simulate(&op, &beta, 0.0, 1).is_err());
    }

    #[test]
    fn noise_moments() {
        let n = 100_000;
        let sigma = 2.0;
        let obs = simulate(&DesignOperator::identity(n), &vec![0.0; n], sigma, 11).unwrap();
        let mean = obs.y.iter().sum::<f64>() / n as f64;
        assert!(mean.abs() < 4.0 * sigma / (n as f64).sqrt());
        let var = obs.y.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((var / (sigma * sigma) - 1.0).abs() < 0.03);
    }
}
