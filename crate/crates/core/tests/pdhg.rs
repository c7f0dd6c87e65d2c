use mindkit::dictionaries::{
    default_scale_penalties, handle, HaarBasis, IntervalSystem, ProbeSystem, StandardBasis,
};
use mindkit::model::{gaussian_noise, DesignOperator, Observation};
use mindkit::multiscale::{is_feasible, MultiscaleConstraint};
use mindkit::solvers::{pdhg_solve, MindProblem, PdhgOptions, Regularizer};
use mindkit::thresholding::soft;
use mindkit::MindError;

fn problem(
    op: DesignOperator,
    y: Vec<f64>,
    probes: ProbeSystem,
    q: f64,
    reg: Regularizer,
) -> MindProblem {
    MindProblem::new(
        op,
        Observation::new(y, 1.0).unwrap(),
        MultiscaleConstraint::new(probes, q).unwrap(),
        reg,
    )
    .unwrap()
}

/// Polyhedral constraints with a non-smooth objective converge slowly.
fn long_run() -> PdhgOptions {
    PdhgOptions {
        max_iter: 400_000,
        ..PdhgOptions::default()
    }
}

#[test]
fn ridge_projection_onto_a_ball() {
    let p = problem(
        DesignOperator::identity(2),
        vec![3.0, 4.0],
        ProbeSystem::identity(2),
        1.0,
        Regularizer::L2Sq,
    );
    let r = pdhg_solve(&p, &PdhgOptions::default()).unwrap();
    assert!((r.beta_hat[0] - 2.4).abs() < 1e-6 && (r.beta_hat[1] - 3.2).abs() < 1e-6);
    assert!(r.constraint_slack.abs() < 1e-6);
    assert!(r.dual_gap.unwrap().abs() < 1e-5);
}

#[test]
fn coefficient_l1_gives_soft_thresholding() {
    let n = 64;
    let basis = handle(HaarBasis::for_len(n).unwrap());
    let y = gaussian_noise(n, 1.0, 11)
        .iter()
        .enumerate()
        .map(|(i, e)| e + if i < 20 { 3.0 } else { 0.0 })
        .collect::<Vec<_>>();
    let q = 1.3;
    let probes = ProbeSystem::coefficients(basis.clone(), vec![1.0; n]).unwrap();
    let reg = Regularizer::L1Coeff {
        basis: basis.clone(),
        weights: vec![1.0; n],
    };
    let p = problem(DesignOperator::identity(n), y.clone(), probes, q, reg);
    let r = pdhg_solve(&p, &PdhgOptions::default()).unwrap();
    let c = basis.analyze(&y).unwrap();
    let expect = basis
        .synthesize(&c.iter().map(|&v| soft(v, q)).collect::<Vec<_>>())
        .unwrap();
    let err = r
        .beta_hat
        .iter()
        .zip(&expect)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(err < 1e-6, "max deviation {err}");
}

fn solve3(a: [[f64; 3]; 3], b: [f64; 3]) -> Option<[f64; 3]> {
    let det = |m: [[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(a);
    if d.abs() < 1e-10 {
        return None;
    }
    let mut x = [0.0; 3];
    for (k, xk) in x.iter_mut().enumerate() {
        let mut m = a;
        for r in 0..3 {
            m[r][k] = b[r];
        }
        *xk = det(m) / d;
    }
    Some(x)
}

#[test]
fn dantzig_selector_matches_vertex_enumeration() {
    let (n, p) = (8, 3);
    for seed in 0..5u64 {
        let entries = gaussian_noise(n * p, 1.0, 100 + seed);
        let rows: Vec<Vec<f64>> = entries.chunks(p).map(|r| r.to_vec()).collect();
        let x = DesignOperator::from_rows(&rows).unwrap();
        let truth = [2.0, 0.0, -1.0];
        let y: Vec<f64> = x
            .apply(&truth)
            .unwrap()
            .iter()
            .zip(gaussian_noise(n, 0.5, 200 + seed))
            .map(|(a, e)| a + e)
            .collect();
        let q = 0.8;
        // probes X_j^T v for each column j
        let cols: Vec<Vec<f64>> = (0..p)
            .map(|j| rows.iter().map(|r| r[j]).collect())
            .collect();
        let probes = ProbeSystem::functionals(n, cols.clone()).unwrap();
        let reg = Regularizer::L1Coeff {
            basis: handle(StandardBasis { n: p }),
            weights: vec![1.0; p],
        };
        let prob = problem(x.clone(), y.clone(), probes, q, reg);
        let r = pdhg_solve(&prob, &PdhgOptions::default()).unwrap();

        // hyperplanes a . beta = b: the 2p Dantzig faces and the p coordinate planes
        let gram: Vec<[f64; 3]> = (0..p)
            .map(|j| {
                let mut g = [0.0; 3];
                for (k, gk) in g.iter_mut().enumerate() {
                    *gk = cols[j].iter().zip(&cols[k]).map(|(a, b)| a * b).sum();
                }
                g
            })
            .collect();
        let xty: Vec<f64> = cols
            .iter()
            .map(|c| c.iter().zip(&y).map(|(a, b)| a * b).sum())
            .collect();
        let mut planes: Vec<([f64; 3], f64)> = Vec::new();
        for j in 0..p {
            planes.push((gram[j], xty[j] - q));
            planes.push((gram[j], xty[j] + q));
            let mut e = [0.0; 3];
            e[j] = 1.0;
            planes.push((e, 0.0));
        }
        let feasible = |b: &[f64; 3]| {
            (0..p).all(|j| {
                let v: f64 = xty[j] - (0..3).map(|k| gram[j][k] * b[k]).sum::<f64>();
                v.abs() <= q + 1e-9
            })
        };
        let mut best = f64::INFINITY;
        let m = planes.len();
        for i in 0..m {
            for j in i + 1..m {
                for k in j + 1..m {
                    let a = [planes[i].0, planes[j].0, planes[k].0];
                    let b = [planes[i].1, planes[j].1, planes[k].1];
                    if let Some(v) = solve3(a, b) {
                        if feasible(&v) {
                            best = best.min(v.iter().map(|t| t.abs()).sum());
                        }
                    }
                }
            }
        }
        assert!(
            (r.objective - best).abs() < 1e-5 * (1.0 + best),
            "seed {seed}: pdhg {} vs oracle {best}",
            r.objective
        );
        assert!(r.constraint_slack >= -1e-6);
    }
}

#[test]
fn contradictory_constraints_are_infeasible() {
    let x = DesignOperator::from_rows(&[vec![1.0], vec![1.0]]).unwrap();
    let probes = ProbeSystem::coefficients(handle(StandardBasis { n: 2 }), vec![1.0, 1.0]).unwrap();
    let p = problem(x, vec![0.0, 10.0], probes, 1.0, Regularizer::L2Sq);
    let err = pdhg_solve(&p, &PdhgOptions::default()).unwrap_err();
    assert!(matches!(err, MindError::Infeasible { .. }), "{err:?}");
}

#[test]
fn negative_threshold_without_penalties_is_infeasible() {
    let p = problem(
        DesignOperator::identity(3),
        vec![1.0, 2.0, 3.0],
        ProbeSystem::identity(3),
        -0.5,
        Regularizer::L2Sq,
    );
    assert!(matches!(
        pdhg_solve(&p, &PdhgOptions::default()),
        Err(MindError::Infeasible { iterations: 0, .. })
    ));
}

#[test]
fn jump_count_is_rejected() {
    let p = problem(
        DesignOperator::identity(4),
        vec![0.0; 4],
        ProbeSystem::identity(4),
        1.0,
        Regularizer::JumpCount,
    );
    assert!(matches!(
        pdhg_solve(&p, &PdhgOptions::default()),
        Err(MindError::Unsupported(_))
    ));
}

#[test]
fn fixed_point_residual_is_monotone() {
    let n = 64;
    let y: Vec<f64> = gaussian_noise(n, 0.3, 5)
        .iter()
        .enumerate()
        .map(|(i, e)| e + if (20..40).contains(&i) { 2.0 } else { 0.0 })
        .collect();
    let probes = ProbeSystem::intervals(IntervalSystem::all(n));
    let p = problem(DesignOperator::identity(n), y, probes, 1.0, Regularizer::Tv);
    let opts = PdhgOptions {
        tol: 1e-10,
        max_iter: 400_000,
        ..PdhgOptions::default()
    };
    let r = pdhg_solve(&p, &opts).unwrap();
    assert!(r.residual_trace.len() >= 2);
    for w in r.residual_trace.windows(2) {
        assert!(w[1] <= w[0] * (1.0 + 1e-9) + 1e-14, "{} -> {}", w[0], w[1]);
    }
}

#[test]
fn hybrid_tv_with_wavelet_constraint() {
    let n = 128;
    let truth: Vec<f64> = (0..n)
        .map(|i| if (40..90).contains(&i) { 1.5 } else { 0.0 })
        .collect();
    let y: Vec<f64> = truth
        .iter()
        .zip(gaussian_noise(n, 0.3, 9))
        .map(|(a, e)| a + e)
        .collect();
    let basis = handle(HaarBasis::for_len(n).unwrap());
    let probes = ProbeSystem::coefficients(basis, vec![1.0; n]).unwrap();
    let q = 0.3 * (2.0 * (n as f64).ln()).sqrt();
    let p = problem(
        DesignOperator::identity(n),
        y.clone(),
        probes,
        q,
        Regularizer::Tv,
    );
    let r = pdhg_solve(&p, &long_run()).unwrap();
    assert!(r.constraint_slack >= -1e-6);
    let tv = |v: &[f64]| v.windows(2).map(|w| (w[1] - w[0]).abs()).sum::<f64>();
    // the truth is feasible here, so the minimiser cannot have larger variation
    let feas = is_feasible(&truth, &p.obs, &p.op, &p.constraint).unwrap();
    assert!(feas.feasible);
    assert!(r.objective <= tv(&truth) + 1e-6);
    assert!(r.objective < tv(&y));
}

#[test]
fn nemirovskii_sobolev_estimate_is_feasible_and_smooth() {
    let n = 48;
    let truth: Vec<f64> = (0..n).map(|i| (i as f64 / 8.0).sin()).collect();
    let y: Vec<f64> = truth
        .iter()
        .zip(gaussian_noise(n, 0.2, 21))
        .map(|(a, e)| a + e)
        .collect();
    let sys = default_scale_penalties(n, IntervalSystem::all(n)).unwrap();
    let probes = ProbeSystem::intervals(sys);
    let q = 0.2 * 1.5;
    for reg in [
        Regularizer::SqDiff { order: 2 },
        Regularizer::SqDiff { order: 1 },
    ] {
        let p = problem(
            DesignOperator::identity(n),
            y.clone(),
            probes.clone(),
            q,
            reg.clone(),
        );
        let r = pdhg_solve(&p, &long_run()).unwrap();
        assert!(r.constraint_slack >= -1e-6);
        let feas = is_feasible(&truth, &p.obs, &p.op, &p.constraint).unwrap();
        if feas.feasible {
            assert!(r.objective <= reg.evaluate(&truth).unwrap() + 1e-6);
        }
        assert!(r.objective < reg.evaluate(&y).unwrap());
    }
}
