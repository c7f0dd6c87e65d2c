//! Projections and proximal maps used by the solvers.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Norm defining a ball.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BallNorm {
    L2,
    Linf,
}

/// Euclidean projection of `v` onto `{x : ||x|| <= r}`.
pub fn project_ball(v: &[f64], r: f64, norm: BallNorm) -> Result<Vec<f64>> {
    if !(r >= 0.0) {
        return invalid(format!("ball radius must be nonnegative, got {r}"));
    }
    let mut out = v.to_vec();
    match norm {
        BallNorm::L2 => project_l2_in_place(&mut out, r),
        BallNorm::Linf => out.iter_mut().for_each(|x| *x = x.clamp(-r, r)),
    }
    Ok(out)
}

pub(crate) fn project_l2_in_place(v: &mut [f64], r: f64) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > r {
        let f = if norm > 0.0 { r / norm } else { 0.0 };
        v.iter_mut().for_each(|x| *x *= f);
    }
}

/// Projection onto `{x : sum_i w_i |x_i| <= r}` with `w_i > 0`.
pub fn project_weighted_l1_ball(v: &[f64], w: &[f64], r: f64) -> Vec<f64> {
    debug_assert_eq!(v.len(), w.len());
    let total: f64 = v.iter().zip(w).map(|(x, w)| w * x.abs()).sum();
    if total <= r {
        return v.to_vec();
    }
    if r <= 0.0 {
        return vec![0.0; v.len()];
    }
    let mut order: Vec<usize> = (0..v.len()).collect();
    let ratio = |i: usize| v[i].abs() / w[i];
    order.sort_by(|&a, &b| ratio(b).total_cmp(&ratio(a)));
    let mut s1 = 0.0;
    let mut s2 = 0.0;
    let mut lambda = 0.0;
    for (k, &i) in order.iter().enumerate() {
        s1 += w[i] * v[i].abs();
        s2 += w[i] * w[i];
        let cand = (s1 - r) / s2;
        let next = order.get(k + 1).map_or(0.0, |&j| ratio(j));
        if cand >= next {
            lambda = cand;
            break;
        }
    }
    v.iter()
        .zip(w)
        .map(|(x, w)| x.signum() * (x.abs() - lambda * w).max(0.0))
        .collect()
}

/// Block soft threshold `x (1 - t / ||x||_2)_+`, in place.
pub(crate) fn block_soft_in_place(x: &mut [f64], t: f64) {
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let f = if norm > t { 1.0 - t / norm } else { 0.0 };
    x.iter_mut().for_each(|v| *v *= f);
}

/// Exact minimiser of `1/2 ||v - u||^2 + gamma sum_i |u_{i+1} - u_i|`.
///
/// The cumulative sum of the solution is the taut string through the tube
/// of half-width `gamma` around the cumulative sums of `v`, pinned at both
/// ends. The string is built greedily: from the current knot the admissible
/// slope interval is narrowed point by point until it closes, at which point
/// the binding tube vertex becomes the next knot.
pub fn prox_tv_1d(v: &[f64], gamma: f64) -> Result<Vec<f64>> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return invalid(format!("TV weight must be positive, got {gamma}"));
    }
    let n = v.len();
    if n <= 1 {
        return Ok(v.to_vec());
    }
    let mut cum = vec![0.0; n + 1];
    for i in 0..n {
        cum[i + 1] = cum[i] + v[i];
    }
    let lower = |t: usize| {
        if t == 0 || t == n {
            cum[t]
        } else {
            cum[t] - gamma
        }
    };
    let upper = |t: usize| {
        if t == 0 || t == n {
            cum[t]
        } else {
            cum[t] + gamma
        }
    };

    let mut out = vec![0.0; n];
    let (mut t0, mut v0) = (0usize, 0.0f64);
    while t0 < n {
        let mut lo = f64::NEG_INFINITY;
        let mut hi = f64::INFINITY;
        let (mut lo_at, mut hi_at) = (t0, t0);
        let mut knot = None;
        for t in t0 + 1..=n {
            let dt = (t - t0) as f64;
            let s_lo = (lower(t) - v0) / dt;
            let s_hi = (upper(t) - v0) / dt;
            if s_hi < lo {
                knot = Some((lo_at, lower(lo_at), lo));
                break;
            }
            if s_lo > hi {
                knot = Some((hi_at, upper(hi_at), hi));
                break;
            }
            if s_lo >= lo {
                lo = s_lo;
                lo_at = t;
            }
            if s_hi <= hi {
                hi = s_hi;
                hi_at = t;
            }
        }
        let (t1, v1, slope) = knot.unwrap_or((n, cum[n], (cum[n] - v0) / (n - t0) as f64));
        out[t0..t1].iter_mut().for_each(|x| *x = slope);
        t0 = t1;
        v0 = v1;
    }
    Ok(out)
}
