//! Primal-dual hybrid gradient iteration for
//! `min_x F(x) + sum_b h_b(K_b x)`
//! with `F(x) = a/2 ||x - c||^2` (possibly `a = 0`) and each `h_b` one of a
//! small set of closed convex functions with cheap conjugate proxes.
//!
//! Every block operator is rescaled to unit norm before the iteration starts;
//! `h_b(K_b x) = h~_b(K~_b x)` with `K~_b = K_b / c_b`, `h~_b(u) = h_b(c_b u)`,
//! and the resolvent of `h~_b*` is evaluated through that of `h_b*`.

use serde::{Deserialize, Serialize};

use super::prox::{project_l2_in_place, project_weighted_l1_ball};
use crate::linalg::{dot, norm2, power_norm};

pub(crate) type LinMap<'a> = Box<dyn Fn(&[f64]) -> Vec<f64> + 'a>;

/// Tunable parameters of the primal-dual iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PdhgOptions {
    pub max_iter: usize,
    /// Tolerance on the primal and dual fixed-point residuals and on the
    /// constraint violation.
    pub tol: f64,
    /// Step sizes are `tau = sigma = step_scale / L`.
    pub step_scale: f64,
    /// Over-relaxation factor in `(0, 2)`.
    pub relaxation: f64,
    /// Iterations between two entries of the residual trace.
    pub trace_every: usize,
    /// Rebalances `tau / sigma` (keeping `tau sigma` fixed) from the ratio of
    /// primal to dual residuals; adjustments shrink geometrically and stop
    /// once they fall below `1e-3`.
    pub adaptive: bool,
}

impl Default for PdhgOptions {
    fn default() -> Self {
        PdhgOptions {
            max_iter: 50_000,
            tol: 1e-8,
            step_scale: 0.95,
            relaxation: 1.0,
            trace_every: 100,
            adaptive: true,
        }
    }
}

/// Closed convex functions `h` acting on one dual block.
#[derive(Debug, Clone)]
pub(crate) enum BlockFn {
    /// `sum_i w_i |u_i|`.
    WeightedL1(Vec<f64>),
    /// `sum_g w_g ||u_g||_2` over consecutive groups.
    GroupL2 {
        sizes: Vec<usize>,
        weights: Vec<f64>,
    },
    /// `s ||u||_inf`.
    Linf(f64),
    /// `s/2 ||u||^2`.
    HalfSq(f64),
    /// `1/2 ||u - c||^2`.
    HalfSqDist(Vec<f64>),
    /// Indicator of `{u : ||u_g - c_g||_2 <= r_g for every group g}`.
    Balls {
        sizes: Vec<usize>,
        centers: Vec<f64>,
        radii: Vec<f64>,
    },
    /// Indicator of `{u : sum_i w_i |u_i| <= r}`.
    L1BallIndicator { weights: Vec<f64>, radius: f64 },
    /// Indicator of `{u : ||u||_2 <= r}`.
    L2BallIndicator(f64),
}

impl BlockFn {
    /// `prox_{s h*}(v)` via Moreau: `v - s prox_{h/s}(v/s)` for indicators.
    fn prox_conj(&self, v: &mut [f64], s: f64) {
        match self {
            BlockFn::WeightedL1(w) => {
                for (x, w) in v.iter_mut().zip(w) {
                    *x = x.clamp(-w, *w);
                }
            }
            BlockFn::GroupL2 { sizes, weights } => {
                let mut pos = 0;
                for (&g, &w) in sizes.iter().zip(weights) {
                    project_l2_in_place(&mut v[pos..pos + g], w);
                    pos += g;
                }
            }
            BlockFn::Linf(scale) => {
                let p = project_weighted_l1_ball(v, &vec![1.0; v.len()], *scale);
                v.copy_from_slice(&p);
            }
            BlockFn::HalfSq(scale) => {
                let f = scale / (scale + s);
                v.iter_mut().for_each(|x| *x *= f);
            }
            BlockFn::HalfSqDist(c) => {
                let f = 1.0 / (1.0 + s);
                for (x, c) in v.iter_mut().zip(c) {
                    *x = (*x - s * c) * f;
                }
            }
            BlockFn::Balls {
                sizes,
                centers,
                radii,
            } => {
                let mut pos = 0;
                for (&g, &r) in sizes.iter().zip(radii) {
                    let blk = &mut v[pos..pos + g];
                    let ctr = &centers[pos..pos + g];
                    let mut p: Vec<f64> = blk.iter().zip(ctr).map(|(x, c)| x / s - c).collect();
                    project_l2_in_place(&mut p, r);
                    for ((x, c), p) in blk.iter_mut().zip(ctr).zip(&p) {
                        *x -= s * (c + p);
                    }
                    pos += g;
                }
            }
            BlockFn::L1BallIndicator { weights, radius } => {
                let scaled: Vec<f64> = v.iter().map(|x| x / s).collect();
                let p = project_weighted_l1_ball(&scaled, weights, *radius);
                for (x, p) in v.iter_mut().zip(&p) {
                    *x -= s * p;
                }
            }
            BlockFn::L2BallIndicator(r) => {
                let mut p: Vec<f64> = v.iter().map(|x| x / s).collect();
                project_l2_in_place(&mut p, *r);
                for (x, p) in v.iter_mut().zip(&p) {
                    *x -= s * p;
                }
            }
        }
    }

    /// `h(u)`, with indicators read as zero (feasibility is reported
    /// separately).
    fn value(&self, u: &[f64]) -> f64 {
        match self {
            BlockFn::WeightedL1(w) => u.iter().zip(w).map(|(x, w)| w * x.abs()).sum(),
            BlockFn::GroupL2 { sizes, weights } => {
                let mut pos = 0;
                let mut acc = 0.0;
                for (&g, &w) in sizes.iter().zip(weights) {
                    acc += w * norm2(&u[pos..pos + g]);
                    pos += g;
                }
                acc
            }
            BlockFn::Linf(s) => s * crate::linalg::norm_inf(u),
            BlockFn::HalfSq(s) => 0.5 * s * dot(u, u),
            BlockFn::HalfSqDist(c) => 0.5 * crate::linalg::dist2(u, c).powi(2),
            _ => 0.0,
        }
    }

    /// `h*(p)`, with norm-ball conjugates read as zero (the dual iterate lies
    /// in the ball by construction).
    fn conj_value(&self, p: &[f64]) -> f64 {
        match self {
            BlockFn::HalfSq(s) => 0.5 * dot(p, p) / s,
            BlockFn::HalfSqDist(c) => 0.5 * dot(p, p) + dot(p, c),
            BlockFn::Balls {
                sizes,
                centers,
                radii,
            } => {
                let mut pos = 0;
                let mut acc = 0.0;
                for (&g, &r) in sizes.iter().zip(radii) {
                    acc +=
                        dot(&p[pos..pos + g], &centers[pos..pos + g]) + r * norm2(&p[pos..pos + g]);
                    pos += g;
                }
                acc
            }
            BlockFn::L1BallIndicator { weights, radius } => {
                radius
                    * p.iter()
                        .zip(weights)
                        .map(|(x, w)| x.abs() / w)
                        .fold(0.0, f64::max)
            }
            BlockFn::L2BallIndicator(r) => r * norm2(p),
            _ => 0.0,
        }
    }
}

pub(crate) struct DualBlock<'a> {
    pub apply: LinMap<'a>,
    pub adjoint: LinMap<'a>,
    pub func: BlockFn,
}

impl<'a> DualBlock<'a> {
    pub fn new(
        apply: impl Fn(&[f64]) -> Vec<f64> + 'a,
        adjoint: impl Fn(&[f64]) -> Vec<f64> + 'a,
        func: BlockFn,
    ) -> Self {
        DualBlock {
            apply: Box::new(apply),
            adjoint: Box::new(adjoint),
            func,
        }
    }
}

/// `F(x) = weight/2 ||x - center||^2`; `weight = 0` means `F = 0`.
#[derive(Debug, Clone)]
pub(crate) struct Quadratic {
    pub weight: f64,
    pub center: Vec<f64>,
}

impl Quadratic {
    pub fn zero(dim: usize) -> Self {
        Quadratic {
            weight: 0.0,
            center: vec![0.0; dim],
        }
    }

    /// Adds `a/2 ||x - c||^2` up to a constant.
    pub fn add(&mut self, a: f64, c: &[f64]) {
        let total = self.weight + a;
        if total > 0.0 {
            for (m, c) in self.center.iter_mut().zip(c) {
                *m = (self.weight * *m + a * c) / total;
            }
        }
        self.weight = total;
    }

    fn prox(&self, v: &mut [f64], tau: f64) {
        if self.weight > 0.0 {
            let ta = tau * self.weight;
            for (x, c) in v.iter_mut().zip(&self.center) {
                *x = (*x + ta * c) / (1.0 + ta);
            }
        }
    }

    fn value(&self, x: &[f64]) -> f64 {
        0.5 * self.weight * crate::linalg::dist2(x, &self.center).powi(2)
    }

    fn conj_value(&self, z: &[f64]) -> f64 {
        0.5 * dot(z, z) / self.weight + dot(z, &self.center)
    }
}

pub(crate) struct Engine<'a> {
    pub dim: usize,
    pub primal: Quadratic,
    pub blocks: Vec<DualBlock<'a>>,
}

pub(crate) struct EngineRun {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    /// Fixed-point residual in the metric of the iteration, every
    /// `trace_every` iterations since the last step-size change.
    pub trace: Vec<f64>,
    pub converged: bool,
    /// Dual norm at half and at full run length.
    pub dual_growth: f64,
    /// `P(x) - D(y)` when all indicator blocks are constraints and `F` is
    /// strongly convex; `None` otherwise.
    pub gap: Option<f64>,
}

struct Scaled {
    /// Block operator norms `c_b` (blocks with `c_b = 0` are dropped).
    norms: Vec<f64>,
    dims: Vec<usize>,
    offsets: Vec<usize>,
}

impl<'a> Engine<'a> {
    fn scaling(&self) -> Scaled {
        let mut norms = Vec::new();
        let mut dims = Vec::new();
        let mut offsets = vec![0];
        for b in &self.blocks {
            let c = power_norm(self.dim, 50, &b.apply, &b.adjoint);
            let m = (b.apply)(&vec![0.0; self.dim]).len();
            norms.push(c);
            dims.push(m);
            offsets.push(offsets.last().unwrap() + m);
        }
        Scaled {
            norms,
            dims,
            offsets,
        }
    }

    fn apply_k(&self, s: &Scaled, x: &[f64], out: &mut [f64]) {
        for (b, blk) in self.blocks.iter().enumerate() {
            let c = s.norms[b];
            let dst = &mut out[s.offsets[b]..s.offsets[b + 1]];
            if c == 0.0 {
                dst.fill(0.0);
                continue;
            }
            let y = (blk.apply)(x);
            for (d, v) in dst.iter_mut().zip(&y) {
                *d = v / c;
            }
        }
    }

    fn apply_kt(&self, s: &Scaled, y: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for (b, blk) in self.blocks.iter().enumerate() {
            let c = s.norms[b];
            if c == 0.0 {
                continue;
            }
            let v = (blk.adjoint)(&y[s.offsets[b]..s.offsets[b + 1]]);
            for (o, v) in out.iter_mut().zip(&v) {
                *o += v / c;
            }
        }
    }

    /// Runs the iteration. `accept(x)` is an additional stopping test (for
    /// example a constraint-slack check) evaluated only once the residuals
    /// are below tolerance.
    pub fn run(&self, opts: &PdhgOptions, mut accept: impl FnMut(&[f64]) -> bool) -> EngineRun {
        let s = self.scaling();
        let m = *s.offsets.last().unwrap();
        let n = self.dim;
        let l = 1.05
            * power_norm(
                n,
                50,
                |x| {
                    let mut o = vec![0.0; m];
                    self.apply_k(&s, x, &mut o);
                    o
                },
                |y| {
                    let mut o = vec![0.0; n];
                    self.apply_kt(&s, y, &mut o);
                    o
                },
            );
        let l = if l > 0.0 { l } else { 1.0 };
        let mut tau = opts.step_scale / l;
        let mut sigma = opts.step_scale / l;
        let mut adapt = if opts.adaptive { 0.5 } else { 0.0 };
        let rho = opts.relaxation;

        let mut x = vec![0.0; n];
        self.primal.prox(&mut x, 0.0);
        let mut y = vec![0.0; m];
        let mut kx = vec![0.0; m];
        self.apply_k(&s, &x, &mut kx);
        let mut kty = vec![0.0; n];

        let mut xh = vec![0.0; n];
        let mut yh = vec![0.0; m];
        let mut kxh = vec![0.0; m];
        let mut ktyh = vec![0.0; n];

        let mut trace = Vec::new();
        let mut iterations = 0;
        let mut pres = f64::INFINITY;
        let mut dres = f64::INFINITY;
        let mut converged = false;
        let mut half_norm = 0.0;
        let check_every = 10;

        for k in 1..=opts.max_iter {
            iterations = k;
            for i in 0..n {
                xh[i] = x[i] - tau * kty[i];
            }
            self.primal.prox(&mut xh, tau);
            self.apply_k(&s, &xh, &mut kxh);
            for i in 0..m {
                yh[i] = y[i] + sigma * (2.0 * kxh[i] - kx[i]);
            }
            for (b, blk) in self.blocks.iter().enumerate() {
                let c = s.norms[b];
                let seg = &mut yh[s.offsets[b]..s.offsets[b + 1]];
                if c == 0.0 {
                    seg.fill(0.0);
                    continue;
                }
                seg.iter_mut().for_each(|v| *v /= c);
                blk.func.prox_conj(seg, sigma / (c * c));
                seg.iter_mut().for_each(|v| *v *= c);
            }
            self.apply_kt(&s, &yh, &mut ktyh);

            let check = k % check_every == 0 || k % opts.trace_every == 0 || k == opts.max_iter;
            if check {
                let mut p2 = 0.0;
                let mut dx2 = 0.0;
                for i in 0..n {
                    let dx = xh[i] - x[i];
                    let p = dx / tau - (ktyh[i] - kty[i]);
                    p2 += p * p;
                    dx2 += dx * dx;
                }
                let mut d2 = 0.0;
                let mut dy2 = 0.0;
                let mut cross = 0.0;
                for i in 0..m {
                    let dy = yh[i] - y[i];
                    let dkx = kxh[i] - kx[i];
                    let d = dy / sigma - dkx;
                    d2 += d * d;
                    dy2 += dy * dy;
                    cross += dkx * dy;
                }
                pres = p2.sqrt();
                dres = d2.sqrt();
                if adapt >= 1e-3 && k % check_every == 0 {
                    let pr = pres / (1.0 + norm2(&kty));
                    let dr = dres / (1.0 + norm2(&kx));
                    if pr > 1.5 * dr || dr > 1.5 * pr {
                        let f = if pr > dr {
                            1.0 / (1.0 - adapt)
                        } else {
                            1.0 - adapt
                        };
                        tau *= f;
                        sigma /= f;
                        adapt *= 0.95;
                        // the iteration metric changed
                        trace.clear();
                    }
                }
                if k % opts.trace_every == 0 {
                    let mnorm = (dx2 / tau + dy2 / sigma - 2.0 * cross).max(0.0).sqrt();
                    trace.push(mnorm);
                }
            }

            for i in 0..n {
                x[i] += rho * (xh[i] - x[i]);
                kty[i] += rho * (ktyh[i] - kty[i]);
            }
            for i in 0..m {
                y[i] += rho * (yh[i] - y[i]);
                kx[i] += rho * (kxh[i] - kx[i]);
            }
            if k == opts.max_iter / 2 {
                half_norm = norm2(&y);
            }

            if check
                && pres <= opts.tol * (1.0 + norm2(&kty))
                && dres <= opts.tol * (1.0 + norm2(&kx))
                && accept(&x)
            {
                converged = true;
                break;
            }
        }

        let end_norm = norm2(&y);
        let dual_growth = if half_norm > 0.0 {
            end_norm / half_norm
        } else {
            1.0
        };
        let gap = self.gap(&s, &x, &y, &kty);
        EngineRun {
            x,
            iterations,
            primal_residual: pres,
            dual_residual: dres,
            trace,
            converged,
            dual_growth,
            gap,
        }
    }

    fn gap(&self, s: &Scaled, x: &[f64], y: &[f64], kty: &[f64]) -> Option<f64> {
        if self.primal.weight <= 0.0 {
            return None;
        }
        let mut primal = self.primal.value(x);
        let neg: Vec<f64> = kty.iter().map(|v| -v).collect();
        let mut dual = -self.primal.conj_value(&neg);
        for (b, blk) in self.blocks.iter().enumerate() {
            let c = s.norms[b];
            if c == 0.0 {
                continue;
            }
            primal += blk.func.value(&(blk.apply)(x));
            let yb: Vec<f64> = y[s.offsets[b]..s.offsets[b + 1]]
                .iter()
                .map(|v| v / c)
                .collect();
            debug_assert_eq!(yb.len(), s.dims[b]);
            dual -= blk.func.conj_value(&yb);
        }
        Some(primal - dual)
    }
}
