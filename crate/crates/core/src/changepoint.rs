//! Piecewise-constant segmentation: the minimal-jump multiscale estimator
//! (every interval inside a segment must pass its local test), a brute-force
//! oracle for it, and jump-penalised least squares.
//!
//! Positions are 0-based internally. A breakpoint `tau` means a jump after
//! the `tau`-th observation (1-based), so `tau` is also the 0-based start of
//! the next segment and `1 <= tau < n`.

use serde::{Deserialize, Serialize};

use crate::dictionaries::IntervalSystem;
use crate::error::{check_len, invalid, MindError, Result};

/// Closed interval `[lo, hi]` of admissible constant levels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelBox {
    pub lo: f64,
    pub hi: f64,
}

impl LevelBox {
    const FULL: LevelBox = LevelBox {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
    };

    pub fn is_empty(&self) -> bool {
        !(self.lo <= self.hi)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    fn intersect(self, other: LevelBox) -> LevelBox {
        LevelBox {
            lo: self.lo.max(other.lo),
            hi: self.hi.min(other.hi),
        }
    }

    fn clip(&self, x: f64) -> f64 {
        x.clamp(self.lo, self.hi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segmentation {
    pub breakpoints: Vec<usize>,
    pub levels: Vec<f64>,
    /// Per-segment admissible levels; absent for estimators without
    /// multiscale constraints.
    pub feasibility_boxes: Option<Vec<LevelBox>>,
}

impl Segmentation {
    pub fn num_jumps(&self) -> usize {
        self.breakpoints.len()
    }

    /// Segments as 0-based inclusive `(start, end)` pairs.
    pub fn segments(&self, n: usize) -> Vec<(usize, usize)> {
        let mut starts = vec![0];
        starts.extend(&self.breakpoints);
        let mut ends: Vec<usize> = self.breakpoints.iter().map(|b| b - 1).collect();
        ends.push(n - 1);
        starts.into_iter().zip(ends).collect()
    }

    /// The piecewise-constant fit of length `n`.
    pub fn fitted(&self, n: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(n);
        for ((s, e), &l) in self.segments(n).into_iter().zip(&self.levels) {
            out.extend(std::iter::repeat_n(l, e + 1 - s));
        }
        out
    }
}

struct Sums {
    s1: Vec<f64>,
    s2: Vec<f64>,
}

impl Sums {
    fn new(y: &[f64]) -> Self {
        let mut s1 = vec![0.0; y.len() + 1];
        let mut s2 = vec![0.0; y.len() + 1];
        for (i, v) in y.iter().enumerate() {
            s1[i + 1] = s1[i] + v;
            s2[i + 1] = s2[i] + v * v;
        }
        Sums { s1, s2 }
    }

    fn sum(&self, a: usize, b: usize) -> f64 {
        self.s1[b + 1] - self.s1[a]
    }

    fn mean(&self, a: usize, b: usize) -> f64 {
        self.sum(a, b) / (b + 1 - a) as f64
    }

    /// `sum_{k=a..b} (y_k - m)^2`.
    fn sq_dev(&self, a: usize, b: usize, m: f64) -> f64 {
        let len = (b + 1 - a) as f64;
        let v = (self.s2[b + 1] - self.s2[a]) - 2.0 * m * self.sum(a, b) + len * m * m;
        v.max(0.0)
    }
}

fn local_box(sums: &Sums, sys: &IntervalSystem, q: f64, a: usize, b: usize) -> LevelBox {
    let len = b + 1 - a;
    if !sys.includes_length(len) {
        return LevelBox::FULL;
    }
    let half = (q + sys.penalty_for_len(len)) / (len as f64).sqrt();
    let m = sums.mean(a, b);
    LevelBox {
        lo: m - half,
        hi: m + half,
    }
}

fn check_inputs(y: &[f64], sys: &IntervalSystem, q: f64) -> Result<()> {
    check_len("interval system", y.len(), sys.n())?;
    if y.is_empty() {
        return invalid("empty signal");
    }
    if q.is_nan() {
        return invalid("threshold is NaN");
    }
    Ok(())
}

/// Intersection over every system interval `[a, b]` inside the 1-based
/// segment `[i, j]` of `{mu : |sum_{a..b} (Y_k - mu)| / sqrt(len) - s <= q}`;
/// `None` when empty.
pub fn segment_feasible_box(
    y: &[f64],
    i: usize,
    j: usize,
    sys: &IntervalSystem,
    q: f64,
) -> Result<Option<LevelBox>> {
    check_inputs(y, sys, q)?;
    if !(1 <= i && i <= j && j <= y.len()) {
        return invalid(format!("segment [{i}, {j}] is not inside 1..={}", y.len()));
    }
    let sums = Sums::new(y);
    let mut bx = LevelBox::FULL;
    for a in i - 1..j {
        for b in a..j {
            bx = bx.intersect(local_box(&sums, sys, q, a, b));
        }
    }
    Ok((!bx.is_empty()).then_some(bx))
}

fn build(
    sums: &Sums,
    n: usize,
    pred: &[usize],
    boxes: &[LevelBox],
    with_boxes: bool,
) -> Segmentation {
    let mut cuts = Vec::new();
    let mut j = n;
    while j > 0 {
        cuts.push(j);
        j = pred[j];
    }
    cuts.reverse();
    let mut breakpoints = Vec::new();
    let mut levels = Vec::new();
    let mut seg_boxes = Vec::new();
    let mut start = 0;
    for &end in &cuts {
        let m = sums.mean(start, end - 1);
        let bx = boxes[end];
        levels.push(if with_boxes { bx.clip(m) } else { m });
        seg_boxes.push(bx);
        if end < n {
            breakpoints.push(end);
        }
        start = end;
    }
    Segmentation {
        breakpoints,
        levels,
        feasibility_boxes: with_boxes.then_some(seg_boxes),
    }
}

/// Minimal number of jumps such that every segment has a nonempty
/// feasibility box, by dynamic programming over prefixes. Among minimal
/// segmentations the one with the smallest residual sum of squares (levels
/// are segment means clipped into their boxes) is returned.
///
/// The boxes for segments ending at `j` are built right to left,
/// `box(i, j) = box(i + 1, j) & box(i, j - 1) & C(i, j)`, and the scan stops
/// at the first empty box since all longer segments are then infeasible.
pub fn mcps_solve(y: &[f64], sys: &IntervalSystem, q: f64) -> Result<Segmentation> {
    check_inputs(y, sys, q)?;
    let n = y.len();
    let sums = Sums::new(y);
    // prefix DP over cut positions 0..=n
    let mut count = vec![usize::MAX; n + 1];
    let mut cost = vec![f64::INFINITY; n + 1];
    let mut pred = vec![0usize; n + 1];
    let mut chosen = vec![LevelBox::FULL; n + 1];
    count[0] = 0;
    cost[0] = 0.0;

    let mut prev: Vec<LevelBox> = Vec::with_capacity(n);
    let mut prev_first = 0usize;
    let mut cur: Vec<LevelBox> = vec![LevelBox::FULL; n];
    for j in 0..n {
        let mut right = LevelBox::FULL;
        let mut first = j + 1;
        for i in (0..=j).rev() {
            let above = if i < j {
                if i < prev_first {
                    break;
                }
                prev[i]
            } else {
                LevelBox::FULL
            };
            let bx = right
                .intersect(above)
                .intersect(local_box(&sums, sys, q, i, j));
            if bx.is_empty() {
                break;
            }
            cur[i] = bx;
            right = bx;
            first = i;
            if count[i] == usize::MAX {
                continue;
            }
            let m = bx.clip(sums.mean(i, j));
            let c = cost[i] + sums.sq_dev(i, j, m);
            let k = count[i] + 1;
            if k < count[j + 1] || (k == count[j + 1] && c < cost[j + 1]) {
                count[j + 1] = k;
                cost[j + 1] = c;
                pred[j + 1] = i;
                chosen[j + 1] = bx;
            }
        }
        std::mem::swap(&mut prev, &mut cur);
        if cur.len() < n {
            cur.resize(n, LevelBox::FULL);
        }
        prev_first = first;
    }
    if count[n] == usize::MAX {
        return Err(MindError::NoFeasibleSegmentation { q });
    }
    Ok(build(&sums, n, &pred, &chosen, true))
}

/// Exhaustive search over all `2^(n-1)` breakpoint patterns (`n <= 14`).
pub fn brute_force_mcps(y: &[f64], sys: &IntervalSystem, q: f64) -> Result<Segmentation> {
    check_inputs(y, sys, q)?;
    let n = y.len();
    if n > 14 {
        return invalid(format!("exhaustive search is limited to n <= 14, got {n}"));
    }
    let sums = Sums::new(y);
    let mut best: Option<(usize, f64, Vec<usize>, Vec<LevelBox>)> = None;
    for mask in 0u32..(1u32 << (n - 1)) {
        let cuts: Vec<usize> = (1..n).filter(|&t| mask & (1 << (t - 1)) != 0).collect();
        let mut bounds = vec![0];
        bounds.extend(&cuts);
        bounds.push(n);
        let mut boxes = Vec::new();
        let mut c = 0.0;
        let mut ok = true;
        for w in bounds.windows(2) {
            match segment_feasible_box(y, w[0] + 1, w[1], sys, q)? {
                Some(bx) => {
                    c += sums.sq_dev(w[0], w[1] - 1, bx.clip(sums.mean(w[0], w[1] - 1)));
                    boxes.push(bx);
                }
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            continue;
        }
        let better = match &best {
            None => true,
            Some((k, bc, _, _)) => cuts.len() < *k || (cuts.len() == *k && c < *bc),
        };
        if better {
            best = Some((cuts.len(), c, cuts, boxes));
        }
    }
    let (_, _, cuts, boxes) = best.ok_or(MindError::NoFeasibleSegmentation { q })?;
    let mut bounds = vec![0];
    bounds.extend(&cuts);
    bounds.push(n);
    let levels = bounds
        .windows(2)
        .zip(&boxes)
        .map(|(w, bx)| bx.clip(sums.mean(w[0], w[1] - 1)))
        .collect();
    Ok(Segmentation {
        breakpoints: cuts,
        levels,
        feasibility_boxes: Some(boxes),
    })
}

/// Exact minimiser of `1/2 ||Y - beta||^2 + gamma #jumps(beta)` by the
/// classical `O(n^2)` dynamic program.
pub fn jump_penalized_ls(y: &[f64], gamma: f64) -> Result<Segmentation> {
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return invalid(format!("jump penalty must be nonnegative, got {gamma}"));
    }
    if y.is_empty() {
        return invalid("empty signal");
    }
    let n = y.len();
    let sums = Sums::new(y);
    let mut f = vec![f64::INFINITY; n + 1];
    let mut pred = vec![0usize; n + 1];
    f[0] = -gamma;
    for j in 1..=n {
        for i in 0..j {
            let v = f[i] + gamma + 0.5 * sums.sq_dev(i, j - 1, sums.mean(i, j - 1));
            if v < f[j] {
                f[j] = v;
                pred[j] = i;
            }
        }
    }
    Ok(build(&sums, n, &pred, &vec![LevelBox::FULL; n + 1], false))
}

/// `1/2 ||Y - beta||^2 + gamma #jumps(beta)` for a segmentation.
pub fn potts_objective(y: &[f64], seg: &Segmentation, gamma: f64) -> f64 {
    let fit = seg.fitted(y.len());
    0.5 * y
        .iter()
        .zip(&fit)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        + gamma * seg.num_jumps() as f64
}

/// `2 sigma^2 log2(n)`.
pub fn bic_penalty(n: usize, sigma: f64) -> f64 {
    2.0 * sigma * sigma * (n as f64).log2()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dictionaries::default_scale_penalties;
    use crate::model::gaussian_noise;
    use proptest::prelude::*;

    fn all(n: usize) -> IntervalSystem {
        IntervalSystem::all(n)
    }

    #[test]
    fn box_examples() {
        let y = [1.0, 2.0, 3.0, 6.0];
        let bx = segment_feasible_box(&y, 1, 4, &all(4), 1e6)
            .unwrap()
            .unwrap();
        assert!(bx.contains(3.0));
        let sys = IntervalSystem::dyadic(4);
        let sums = Sums::new(&y);
        let whole = local_box(&sums, &sys, 1.0, 0, 3);
        assert!((whole.lo - (3.0 - 0.5)).abs() < 1e-12 && (whole.hi - 3.5).abs() < 1e-12);
        assert!(segment_feasible_box(&[0.0, 10.0], 1, 2, &all(2), 1.0)
            .unwrap()
            .is_none());
        assert!(segment_feasible_box(&[0.0, 10.0], 2, 1, &all(2), 1.0).is_err());
    }

    #[test]
    fn box_matches_enumeration() {
        for seed in 0..20 {
            let y = gaussian_noise(8, 1.0, seed);
            let sys = default_scale_penalties(8, all(8)).unwrap();
            let q = 0.8;
            for i in 1..=8 {
                for j in i..=8 {
                    let mut lo = f64::NEG_INFINITY;
                    let mut hi = f64::INFINITY;
                    for a in i..=j {
                        for b in a..=j {
                            let len = (b - a + 1) as f64;
                            let m: f64 = y[a - 1..b].iter().sum::<f64>() / len;
                            let h = (q + sys.penalty_for_len(b - a + 1)) / len.sqrt();
                            lo = lo.max(m - h);
                            hi = hi.min(m + h);
                        }
                    }
                    let got = segment_feasible_box(&y, i, j, &sys, q).unwrap();
                    match got {
                        Some(bx) => {
                            assert!((bx.lo - lo).abs() < 1e-12 && (bx.hi - hi).abs() < 1e-12)
                        }
                        None => assert!(lo > hi),
                    }
                }
            }
        }
    }

    #[test]
    fn mcps_examples() {
        let y = [0.0, 0.0, 10.0, 10.0];
        let s = mcps_solve(&y, &all(4), 1.0).unwrap();
        assert_eq!(s.breakpoints, vec![2]);
        assert_eq!(s.levels, vec![0.0, 10.0]);
        let b = brute_force_mcps(&y, &all(4), 1.0).unwrap();
        assert_eq!(b.breakpoints, vec![2]);
        let s = mcps_solve(&[3.0; 6], &all(6), 0.0).unwrap();
        assert_eq!(s.num_jumps(), 0);
        let y = gaussian_noise(30, 5.0, 1);
        assert_eq!(mcps_solve(&y, &all(30), 1e9).unwrap().num_jumps(), 0);
        let s = brute_force_mcps(&[0.0, 10.0], &all(2), 1.0).unwrap();
        assert_eq!(s.num_jumps(), 1);
    }

    #[test]
    fn infeasible_threshold() {
        let y = [0.0, 1.0, 0.5];
        assert!(matches!(
            mcps_solve(&y, &all(3), -0.1),
            Err(MindError::NoFeasibleSegmentation { .. })
        ));
        assert!(matches!(
            brute_force_mcps(&y, &all(3), -0.1),
            Err(MindError::NoFeasibleSegmentation { .. })
        ));
        assert!(brute_force_mcps(&[0.0; 15], &all(15), 1.0).is_err());
        assert!(mcps_solve(&y, &all(4), 1.0).is_err());
    }

    #[test]
    fn potts_examples() {
        let y = [0.0, 0.0, 10.0, 10.0];
        let s = jump_penalized_ls(&y, 1.0).unwrap();
        assert_eq!(s.breakpoints, vec![2]);
        assert_eq!(potts_objective(&y, &s, 1.0), 1.0);
        let flat = Segmentation {
            breakpoints: vec![],
            levels: vec![5.0],
            feasibility_boxes: None,
        };
        assert_eq!(potts_objective(&y, &flat, 1.0), 50.0);
        let noisy = gaussian_noise(12, 1.0, 3);
        assert_eq!(jump_penalized_ls(&noisy, 0.0).unwrap().num_jumps(), 11);
        let s = jump_penalized_ls(&noisy, 1e9).unwrap();
        assert_eq!(s.num_jumps(), 0);
        let mean = noisy.iter().sum::<f64>() / 12.0;
        assert!((s.levels[0] - mean).abs() < 1e-12);
        assert!(s.feasibility_boxes.is_none());
    }

    #[test]
    fn potts_matches_enumeration() {
        for seed in 0..30 {
            let y = gaussian_noise(9, 2.0, 70 + seed);
            let g = 1.5;
            let s = jump_penalized_ls(&y, g).unwrap();
            let sums = Sums::new(&y);
            let mut best = f64::INFINITY;
            for mask in 0u32..(1 << 8) {
                let mut bounds = vec![0];
                bounds.extend((1..9).filter(|t| mask & (1 << (t - 1)) != 0));
                bounds.push(9);
                let v: f64 = bounds
                    .windows(2)
                    .map(|w| 0.5 * sums.sq_dev(w[0], w[1] - 1, sums.mean(w[0], w[1] - 1)))
                    .sum::<f64>()
                    + g * (bounds.len() - 2) as f64;
                best = best.min(v);
            }
            assert!((potts_objective(&y, &s, g) - best).abs() < 1e-9);
        }
    }

    #[test]
    fn fitted_and_segments() {
        let s = Segmentation {
            breakpoints: vec![2, 3],
            levels: vec![1.0, 2.0, 3.0],
            feasibility_boxes: None,
        };
        assert_eq!(s.segments(5), vec![(0, 1), (2, 2), (3, 4)]);
        assert_eq!(s.fitted(5), vec![1.0, 1.0, 2.0, 3.0, 3.0]);
    }

    proptest! {
        #[test]
        fn mcps_matches_brute_force(
            y in prop::collection::vec(-3.0f64..3.0, 1..10),
            q in 0.2f64..2.5,
            pen in any::<bool>(),
        ) {
            let n = y.len();
            let sys = if pen { default_scale_penalties(n, all(n)).unwrap() } else { all(n) };
            let a = mcps_solve(&y, &sys, q).unwrap();
            let b = brute_force_mcps(&y, &sys, q).unwrap();
            prop_assert_eq!(a.num_jumps(), b.num_jumps());
            for (l, bx) in a.levels.iter().zip(a.feasibility_boxes.as_ref().unwrap()) {
                prop_assert!(bx.contains(*l));
            }
        }

        #[test]
        fn jump_count_nonincreasing_in_q(y in prop::collection::vec(-5.0f64..5.0, 2..40)) {
            let n = y.len();
            let sys = all(n);
            let counts: Vec<usize> = [0.1, 0.5, 1.0, 2.0, 4.0, 8.0]
                .iter()
                .map(|&q| mcps_solve(&y, &sys, q).unwrap().num_jumps())
                .collect();
            prop_assert!(counts.windows(2).all(|w| w[0] >= w[1]));
        }
    }
}
