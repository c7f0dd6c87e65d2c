use serde::{Deserialize, Serialize};

use super::pdhg::{BlockFn, DualBlock, Quadratic};
use crate::dictionaries::{BasisHandle, BlockPartition};
use crate::error::{check_len, invalid, MindError, Result};
use crate::linalg::{diff_n, diff_n_adjoint, dot, norm1, norm2, norm_inf};
use crate::model::DesignOperator;

/// Exponent of the discrete Sobolev norm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SobolevExponent {
    One,
    Two,
    Inf,
}

/// `sum_a w_a ||B_a Phi beta||_2` for a partition of the coefficients of an
/// orthonormal basis `Phi`.
#[derive(Debug, Clone)]
pub struct GroupPenalty {
    pub basis: BasisHandle,
    pub partition: BlockPartition,
    pub weights: Vec<f64>,
}

impl GroupPenalty {
    pub fn new(basis: BasisHandle, partition: BlockPartition, weights: Vec<f64>) -> Result<Self> {
        if partition.size() != basis.len() {
            return invalid("partition size differs from basis length");
        }
        check_len("group weights", partition.num_blocks(), weights.len())?;
        if let Some(w) = weights.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
            return invalid(format!("group weights must be positive, got {w}"));
        }
        Ok(GroupPenalty {
            basis,
            partition,
            weights,
        })
    }

    pub fn len(&self) -> usize {
        self.basis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.len() == 0
    }

    pub fn value(&self, beta: &[f64]) -> Result<f64> {
        let c = self.basis.analyze(beta)?;
        Ok(self
            .partition
            .block_norms(&c)
            .iter()
            .zip(&self.weights)
            .map(|(n, w)| n * w)
            .sum())
    }

    /// Stacked block coefficients `(B_a Phi v)_a`.
    pub(crate) fn gather(&self, v: &[f64]) -> Vec<f64> {
        let c = self.basis.analyze(v).expect("length checked by caller");
        self.partition
            .blocks()
            .iter()
            .flat_map(|b| b.iter().map(|&i| c[i]).collect::<Vec<_>>())
            .collect()
    }

    pub(crate) fn scatter(&self, u: &[f64]) -> Vec<f64> {
        let mut c = vec![0.0; self.basis.len()];
        let mut pos = 0;
        for b in self.partition.blocks() {
            for &i in b {
                c[i] = u[pos];
                pos += 1;
            }
        }
        self.basis.synthesize(&c).expect("length checked by caller")
    }

    pub(crate) fn sizes(&self) -> Vec<usize> {
        self.partition.blocks().iter().map(Vec::len).collect()
    }

    /// `argmin_b 1/2 ||v - b||^2 + t R(b)`: block soft thresholding of the
    /// coefficients; coefficients outside the partition are left unchanged.
    pub(crate) fn prox(&self, v: &[f64], t: f64) -> Vec<f64> {
        let mut c = self.basis.analyze(v).expect("length checked by caller");
        for (b, &w) in self.partition.blocks().iter().zip(&self.weights) {
            let mut x: Vec<f64> = b.iter().map(|&i| c[i]).collect();
            super::prox::block_soft_in_place(&mut x, t * w);
            for (&i, v) in b.iter().zip(x) {
                c[i] = v;
            }
        }
        self.basis.synthesize(&c).expect("length checked by caller")
    }
}

/// The functional `R` minimised by an estimator.
#[derive(Debug, Clone)]
pub enum Regularizer {
    /// `1/2 ||D^k beta||_2^2` with `D` the forward difference.
    SqDiff { order: usize },
    /// `sum_i |beta_{i+1} - beta_i|`.
    Tv,
    /// `sum_l w_l |<phi_l, beta>|`.
    L1Coeff {
        basis: BasisHandle,
        weights: Vec<f64>,
    },
    /// `sum_a w_a ||B_a Phi beta||_2`.
    BlockL1(GroupPenalty),
    /// `sum_{l=0..k} ||D^l beta||_q`, no grid rescaling.
    SobolevKq { k: usize, q: SobolevExponent },
    /// `1/2 ||beta||_2^2`.
    L2Sq,
    /// `1/2 ||X beta||_2^2`.
    PredictionSq(DesignOperator),
    /// Number of jumps `#{i : beta_{i+1} != beta_i}`; not convex.
    JumpCount,
}

impl Regularizer {
    pub fn name(&self) -> &'static str {
        match self {
            Regularizer::SqDiff { .. } => "sq_diff",
            Regularizer::Tv => "tv",
            Regularizer::L1Coeff { .. } => "l1_coeff",
            Regularizer::BlockL1(_) => "block_l1",
            Regularizer::SobolevKq { .. } => "sobolev_kq",
            Regularizer::L2Sq => "l2_sq",
            Regularizer::PredictionSq(_) => "prediction_sq",
            Regularizer::JumpCount => "jump_count",
        }
    }

    pub fn is_convex(&self) -> bool {
        !matches!(self, Regularizer::JumpCount)
    }

    /// Checks parameters against the parameter dimension `p`.
    pub fn validate(&self, p: usize) -> Result<()> {
        match self {
            Regularizer::L1Coeff { basis, weights } => {
                check_len("regularizer basis", p, basis.len())?;
                check_len("coefficient weights", p, weights.len())?;
                if let Some(w) = weights.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
                    return invalid(format!("coefficient weights must be positive, got {w}"));
                }
            }
            Regularizer::BlockL1(g) => check_len("regularizer basis", p, g.len())?,
            Regularizer::PredictionSq(x) => check_len("prediction operator columns", p, x.cols())?,
            Regularizer::SqDiff { order } if *order == 0 => {
                return invalid("difference order must be at least 1");
            }
            _ => {}
        }
        Ok(())
    }

    pub fn evaluate(&self, beta: &[f64]) -> Result<f64> {
        self.validate(beta.len())?;
        Ok(match self {
            Regularizer::SqDiff { order } => {
                let d = diff_n(beta, *order);
                0.5 * dot(&d, &d)
            }
            Regularizer::Tv => norm1(&crate::linalg::diff(beta)),
            Regularizer::L1Coeff { basis, weights } => basis
                .analyze(beta)?
                .iter()
                .zip(weights)
                .map(|(c, w)| w * c.abs())
                .sum(),
            Regularizer::BlockL1(g) => g.value(beta)?,
            Regularizer::SobolevKq { k, q } => (0..=*k)
                .map(|l| {
                    let d = diff_n(beta, l);
                    match q {
                        SobolevExponent::One => norm1(&d),
                        SobolevExponent::Two => norm2(&d),
                        SobolevExponent::Inf => norm_inf(&d),
                    }
                })
                .sum(),
            Regularizer::L2Sq => 0.5 * dot(beta, beta),
            Regularizer::PredictionSq(x) => 0.5 * norm2(&x.apply(beta)?).powi(2),
            Regularizer::JumpCount => beta.windows(2).filter(|w| w[1] != w[0]).count() as f64,
        })
    }

    /// Splits `gamma R` into a quadratic part (added to `primal`) and dual
    /// blocks `h_b(K_b beta)`.
    pub(crate) fn split<'a>(
        &'a self,
        p: usize,
        gamma: f64,
        primal: &mut Quadratic,
    ) -> Result<Vec<DualBlock<'a>>> {
        self.validate(p)?;
        let diff_block = move |order: usize, func: BlockFn| {
            DualBlock::new(
                move |x: &[f64]| diff_n(x, order),
                move |u: &[f64]| diff_n_adjoint(u, order),
                func,
            )
        };
        Ok(match self {
            Regularizer::SqDiff { order } => {
                if p <= *order {
                    Vec::new()
                } else {
                    vec![diff_block(*order, BlockFn::HalfSq(gamma))]
                }
            }
            Regularizer::Tv => {
                if p < 2 {
                    Vec::new()
                } else {
                    vec![diff_block(1, BlockFn::WeightedL1(vec![gamma; p - 1]))]
                }
            }
            Regularizer::L1Coeff { basis, weights } => vec![DualBlock::new(
                move |x: &[f64]| basis.analyze(x).expect("validated"),
                move |u: &[f64]| basis.synthesize(u).expect("validated"),
                BlockFn::WeightedL1(weights.iter().map(|w| gamma * w).collect()),
            )],
            Regularizer::BlockL1(g) => vec![DualBlock::new(
                move |x: &[f64]| g.gather(x),
                move |u: &[f64]| g.scatter(u),
                BlockFn::GroupL2 {
                    sizes: g.sizes(),
                    weights: g.weights.iter().map(|w| gamma * w).collect(),
                },
            )],
            Regularizer::SobolevKq { k, q } => (0..=*k)
                .filter(|&l| l < p)
                .map(|l| {
                    let len = p - l;
                    let func = match q {
                        SobolevExponent::One => BlockFn::WeightedL1(vec![gamma; len]),
                        SobolevExponent::Two => BlockFn::GroupL2 {
                            sizes: vec![len],
                            weights: vec![gamma],
                        },
                        SobolevExponent::Inf => BlockFn::Linf(gamma),
                    };
                    diff_block(l, func)
                })
                .collect(),
            Regularizer::L2Sq => {
                primal.add(gamma, &vec![0.0; p]);
                Vec::new()
            }
            Regularizer::PredictionSq(x) => {
                if x.is_identity() {
                    primal.add(gamma, &vec![0.0; p]);
                    Vec::new()
                } else {
                    vec![DualBlock::new(
                        move |b: &[f64]| x.apply_unchecked(b),
                        move |u: &[f64]| x.adjoint_unchecked(u),
                        BlockFn::HalfSq(gamma),
                    )]
                }
            }
            Regularizer::JumpCount => {
                return Err(MindError::Unsupported(
                    "the jump count is not convex; use the change-point solvers".into(),
                ))
            }
        })
    }

    /// The constraint `R(beta) <= c` as a dual block, for the kinds whose
    /// sublevel sets have a cheap projection.
    pub(crate) fn sublevel_block<'a>(&'a self, p: usize, c: f64) -> Result<DualBlock<'a>> {
        self.validate(p)?;
        if !(c >= 0.0) {
            return invalid(format!("sublevel bound must be nonnegative, got {c}"));
        }
        let diff_block = move |order: usize, func: BlockFn| {
            DualBlock::new(
                move |x: &[f64]| diff_n(x, order),
                move |u: &[f64]| diff_n_adjoint(u, order),
                func,
            )
        };
        Ok(match self {
            Regularizer::Tv => diff_block(
                1,
                BlockFn::L1BallIndicator {
                    weights: vec![1.0; p.saturating_sub(1)],
                    radius: c,
                },
            ),
            Regularizer::SqDiff { order } => {
                diff_block(*order, BlockFn::L2BallIndicator((2.0 * c).sqrt()))
            }
            Regularizer::L2Sq => diff_block(0, BlockFn::L2BallIndicator((2.0 * c).sqrt())),
            Regularizer::L1Coeff { basis, weights } => DualBlock::new(
                move |x: &[f64]| basis.analyze(x).expect("validated"),
                move |u: &[f64]| basis.synthesize(u).expect("validated"),
                BlockFn::L1BallIndicator {
                    weights: weights.clone(),
                    radius: c,
                },
            ),
            other => {
                return Err(MindError::Unsupported(format!(
                    "sublevel constraint for {} is not implemented",
                    other.name()
                )))
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dictionaries::{handle, HaarBasis};

    #[test]
    fn evaluations() {
        let b = [0.0, 1.0, 3.0, 3.0];
        assert_eq!(Regularizer::Tv.evaluate(&b).unwrap(), 3.0);
        assert!((Regularizer::SqDiff { order: 1 }.evaluate(&b).unwrap() - 2.5).abs() < 1e-12);
        assert_eq!(
            Regularizer::SqDiff { order: 2 }.evaluate(&b).unwrap(),
            0.5 * (1.0 + 4.0)
        );
        assert_eq!(Regularizer::L2Sq.evaluate(&b).unwrap(), 9.5);
        assert_eq!(Regularizer::JumpCount.evaluate(&b).unwrap(), 2.0);
        let s = Regularizer::SobolevKq {
            k: 1,
            q: SobolevExponent::Inf,
        };
        assert_eq!(s.evaluate(&b).unwrap(), 3.0 + 2.0);
        let s = Regularizer::SobolevKq {
            k: 1,
            q: SobolevExponent::One,
        };
        assert_eq!(s.evaluate(&b).unwrap(), 7.0 + 3.0);
        let h = handle(HaarBasis::for_len(4).unwrap());
        let l1 = Regularizer::L1Coeff {
            basis: h.clone(),
            weights: vec![1.0; 4],
        };
        // constant vector: only the scaling coefficient, 2 * sqrt(4)
        assert!((l1.evaluate(&[2.0; 4]).unwrap() - 4.0).abs() < 1e-12);
        assert!(l1.evaluate(&[2.0; 3]).is_err());
        assert!(!Regularizer::JumpCount.is_convex());
        assert!(Regularizer::SqDiff { order: 0 }.evaluate(&b).is_err());
    }

    #[test]
    fn group_penalty_prox_is_block_soft() {
        let h = handle(HaarBasis::for_len(8).unwrap());
        let part = BlockPartition::haar_levels(8, 2).unwrap();
        let m = part.num_blocks();
        let g = GroupPenalty::new(h.clone(), part.clone(), vec![1.0; m]).unwrap();
        let v = crate::model::gaussian_noise(8, 2.0, 1);
        let p = g.prox(&v, 0.7);
        let c = h.analyze(&v).unwrap();
        let pc = h.analyze(&p).unwrap();
        for b in part.blocks() {
            let x: Vec<f64> = b.iter().map(|&i| c[i]).collect();
            let expect = crate::thresholding::eta_block(&x, 0.7, crate::thresholding::Theta::SOFT);
            for (&i, e) in b.iter().zip(expect) {
                assert!((pc[i] - e).abs() < 1e-12);
            }
        }
        assert!(GroupPenalty::new(h, part, vec![1.0; m + 1]).is_err());
    }
}
