//! Deterministic test signals on the uniform grid `t_i = i / n`, `i = 0..n`.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const BLOCK_POS: [f64; 11] = [
    0.1, 0.13, 0.15, 0.23, 0.25, 0.40, 0.44, 0.65, 0.76, 0.78, 0.81,
];
const BLOCK_HGT: [f64; 11] = [4.0, -5.0, 3.0, -4.0, 5.0, -4.2, 2.1, 4.3, -3.1, 2.1, -4.2];

fn grid(n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| i as f64 / n as f64)
}

/// Piecewise constant with eleven jumps of mixed sign.
pub fn blocks(n: usize) -> Vec<f64> {
    grid(n)
        .map(|t| {
            BLOCK_POS
                .iter()
                .zip(BLOCK_HGT)
                .filter(|(p, _)| t >= **p)
                .map(|(_, h)| h)
                .sum()
        })
        .collect()
}

/// Smooth sinusoid with two jumps, at `t = 0.3` and `t = 0.72`.
pub fn heavisine(n: usize) -> Vec<f64> {
    grid(n)
        .map(|t| {
            4.0 * (4.0 * std::f64::consts::PI * t).sin() - (t - 0.3).signum() - (0.72 - t).signum()
        })
        .collect()
}

/// Smooth background with a kink and two jumps; values stay in `[-1.5, 1.5]`.
pub fn piecewise_smooth(n: usize) -> Vec<f64> {
    grid(n)
        .map(|t| {
            let smooth = 0.5 * (2.0 * std::f64::consts::PI * t).sin();
            let kink = 1.5 * (t - 0.5).abs() - 0.4;
            let jump = if (0.25..0.4).contains(&t) {
                0.6
            } else if t >= 0.8 {
                -0.5
            } else {
                0.0
            };
            smooth + kink + jump
        })
        .collect()
}

/// Step signal with `jumps` jump locations at least `min_gap` apart and
/// jump heights of magnitude `height` with random sign.
///
/// Returns the signal and its 0-based segment starts (the breakpoints).
pub fn random_steps(
    n: usize,
    jumps: usize,
    min_gap: usize,
    height: f64,
    seed: u64,
) -> (Vec<f64>, Vec<usize>) {
    assert!(
        (jumps + 1) * min_gap <= n,
        "cannot place {jumps} jumps {min_gap} apart in {n} points"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // distribute the slack n - (jumps + 1) min_gap over jumps + 1 gaps
    let slack = n - (jumps + 1) * min_gap;
    let mut cuts: Vec<usize> = sample(&mut rng, slack + jumps, jumps).into_vec();
    cuts.sort_unstable();
    let breaks: Vec<usize> = cuts
        .iter()
        .enumerate()
        .map(|(k, &c)| c - k + (k + 1) * min_gap)
        .collect();
    let mut level = 0.0;
    let mut out = vec![0.0; n];
    let mut start = 0;
    for (k, &b) in breaks.iter().chain(std::iter::once(&n)).enumerate() {
        out[start..b].fill(level);
        if k < jumps {
            level += if rng.random::<bool>() {
                height
            } else {
                -height
            };
        }
        start = b;
    }
    (out, breaks)
}
