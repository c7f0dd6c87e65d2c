use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt::Debug;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, invalid, Result};

/// An orthonormal basis of `R^n` with a fast analysis/synthesis pair.
///
/// Coefficient vectors are indexed `0..len()`; `analyze` returns the inner
/// products with the basis vectors and `synthesize` is its inverse (and
/// adjoint).
pub trait OrthoBasis: Debug + Send + Sync {
    fn len(&self) -> usize;

    fn analyze(&self, v: &[f64]) -> Result<Vec<f64>>;

    fn synthesize(&self, coeffs: &[f64]) -> Result<Vec<f64>>;

    fn name(&self) -> &'static str;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The `index`-th basis vector.
    fn vector(&self, index: usize) -> Vec<f64> {
        let mut e = vec![0.0; self.len()];
        e[index] = 1.0;
        self.synthesize(&e)
            .expect("unit coefficient vector has the basis length")
    }
}

pub type BasisHandle = Arc<dyn OrthoBasis>;

/// The canonical basis `e_1, .., e_n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StandardBasis {
    pub n: usize,
}

impl OrthoBasis for StandardBasis {
    fn len(&self) -> usize {
        self.n
    }

    fn analyze(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len("signal", self.n, v.len())?;
        Ok(v.to_vec())
    }

    fn synthesize(&self, coeffs: &[f64]) -> Result<Vec<f64>> {
        check_len("coefficients", self.n, coeffs.len())?;
        Ok(coeffs.to_vec())
    }

    fn name(&self) -> &'static str {
        "standard"
    }
}

/// Position of a Haar basis vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum HaarIndex {
    Scaling,
    /// Wavelet at scale `j` (`0 <= j < J`) and location `k` (`0 <= k < 2^j`).
    Wavelet {
        j: u32,
        k: usize,
    },
}

/// Discrete orthonormal Haar basis of `R^n`, `n = 2^J`.
///
/// Basis vectors are the sampled Haar scaling function and wavelets divided
/// by `sqrt(n)`, so each has unit Euclidean norm. Coefficients are laid out as
/// `[scaling, (0,0), (1,0), (1,1), (2,0), ..]`, i.e. wavelet `(j, k)` sits at
/// flat index `2^j + k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HaarBasis {
    levels: u32,
}

impl HaarBasis {
    pub fn new(levels: u32) -> Result<Self> {
        if levels > 40 {
            return invalid(format!("{levels} dyadic levels is beyond desk scale"));
        }
        Ok(HaarBasis { levels })
    }

    /// Basis for a signal of length `n`; fails unless `n` is a power of two.
    pub fn for_len(n: usize) -> Result<Self> {
        if n == 0 || !n.is_power_of_two() {
            return invalid(format!("Haar basis needs a power-of-two length, got {n}"));
        }
        Self::new(n.trailing_zeros())
    }

    pub fn levels(&self) -> u32 {
        self.levels
    }

    pub fn flat_index(&self, index: HaarIndex) -> usize {
        match index {
            HaarIndex::Scaling => 0,
            HaarIndex::Wavelet { j, k } => (1usize << j) + k,
        }
    }

    pub fn haar_index(&self, flat: usize) -> HaarIndex {
        if flat == 0 {
            HaarIndex::Scaling
        } else {
            let j = usize::BITS - 1 - flat.leading_zeros();
            HaarIndex::Wavelet {
                j,
                k: flat - (1usize << j),
            }
        }
    }

    /// Flat index range of all wavelets at scale `j`.
    pub fn level_range(&self, j: u32) -> std::ops::Range<usize> {
        (1usize << j)..(1usize << (j + 1))
    }
}

impl OrthoBasis for HaarBasis {
    fn len(&self) -> usize {
        1usize << self.levels
    }

    /// Pyramid algorithm, `O(n)`.
    fn analyze(&self, v: &[f64]) -> Result<Vec<f64>> {
        let n = self.len();
        check_len("signal", n, v.len())?;
        let mut coeffs = vec![0.0; n];
        let mut approx = v.to_vec();
        let mut len = n;
        while len > 1 {
            let half = len / 2;
            for k in 0..half {
                let (a, b) = (approx[2 * k], approx[2 * k + 1]);
                coeffs[half + k] = (a - b) * FRAC_1_SQRT_2;
                approx[k] = (a + b) * FRAC_1_SQRT_2;
            }
            len = half;
        }
        coeffs[0] = approx[0];
        Ok(coeffs)
    }

    fn synthesize(&self, coeffs: &[f64]) -> Result<Vec<f64>> {
        let n = self.len();
        check_len("coefficients", n, coeffs.len())?;
        let mut out = vec![0.0; n];
        out[0] = coeffs[0];
        let mut tmp = vec![0.0; n];
        let mut len = 1;
        while len < n {
            for k in 0..len {
                let (a, d) = (out[k], coeffs[len + k]);
                tmp[2 * k] = (a + d) * FRAC_1_SQRT_2;
                tmp[2 * k + 1] = (a - d) * FRAC_1_SQRT_2;
            }
            len *= 2;
            out[..len].copy_from_slice(&tmp[..len]);
        }
        Ok(out)
    }

    fn name(&self) -> &'static str {
        "haar"
    }

    fn vector(&self, index: usize) -> Vec<f64> {
        let n = self.len();
        let scale = 1.0 / (n as f64).sqrt();
        match self.haar_index(index) {
            HaarIndex::Scaling => vec![scale; n],
            HaarIndex::Wavelet { j, k } => {
                let support = n >> j;
                let height = (1u64 << j) as f64;
                let value = height.sqrt() * scale;
                let mut v = vec![0.0; n];
                let start = k * support;
                for (i, x) in v[start..start + support].iter_mut().enumerate() {
                    *x = if i < support / 2 { value } else { -value };
                }
                v
            }
        }
    }
}
