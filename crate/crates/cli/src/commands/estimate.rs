use std::time::Instant;

use mindkit::dictionaries::{
    handle, BasisHandle, BlockPartition, HaarBasis, IntervalSystem, IntervalVariant, ProbeSystem,
    StandardBasis,
};
use mindkit::model::{DesignOperator, Observation};
use mindkit::multiscale::MultiscaleConstraint;
use mindkit::solvers::{
    dual_constrained_problem, group_lasso_solve, pdhg_solve, FistaOptions, GroupPenalty,
    MindProblem, PdhgOptions, Regularizer, SobolevExponent,
};
use mindkit::thresholding::{block_threshold, wavelet_threshold, ShrinkageRule, Theta};
use serde_json::{json, Value};

use super::{
    coefficient_threshold, extend, format_or, interval_variant, mc_threshold, report,
    resolve_sigma, variant_name, Threshold,
};
use crate::config::{Format, Opts};
use crate::io::{emit, read_matrix, read_series, Table};
use crate::Failure;

const METHODS: [&str; 10] = [
    "soft",
    "hard",
    "garrote",
    "block-soft",
    "block-js",
    "tv",
    "hybrid-tv-wavelet",
    "dantzig",
    "nemirovskii",
    "group-lasso",
];

/// Everything an estimator hands back to the report.
struct Fit {
    estimate: Vec<f64>,
    threshold: Option<Threshold>,
    gamma: Option<f64>,
    slack: f64,
    iterations: usize,
    converged: bool,
    objective: Option<f64>,
    extra: Value,
}

impl Fit {
    fn closed_form(estimate: Vec<f64>, threshold: Threshold, slack: f64) -> Self {
        Fit {
            estimate,
            threshold: Some(threshold),
            gamma: None,
            slack,
            iterations: 0,
            converged: true,
            objective: None,
            extra: json!({}),
        }
    }
}

fn residual(y: &[f64], fit: &[f64]) -> Vec<f64> {
    y.iter().zip(fit).map(|(a, b)| a - b).collect()
}

fn haar(n: usize) -> Result<BasisHandle, Failure> {
    Ok(handle(HaarBasis::for_len(n)?))
}

fn default_block_len(opts: &Opts, n: usize) -> usize {
    opts.block_len
        .unwrap_or_else(|| ((n.max(2) as f64).log2().round() as usize).max(1))
}

fn pdhg(
    opts: &Opts,
    op: DesignOperator,
    y: &[f64],
    sigma: f64,
    probes: ProbeSystem,
    th: Threshold,
    reg: Regularizer,
) -> Result<Fit, Failure> {
    let problem = MindProblem::new(
        op,
        Observation::new(y.to_vec(), sigma)?,
        MultiscaleConstraint::new(probes, th.q)?,
        reg,
    )?;
    let options = PdhgOptions {
        max_iter: opts.max_iter,
        ..PdhgOptions::default()
    };
    let r = pdhg_solve(&problem, &options)?;
    Ok(Fit {
        estimate: r.beta_hat,
        threshold: Some(th),
        gamma: None,
        slack: r.constraint_slack,
        iterations: r.iterations,
        converged: r.converged,
        objective: Some(r.objective),
        extra: json!({
            "primal_residual": r.primal_residual,
            "dual_residual": r.dual_residual,
            "dual_gap": r.dual_gap,
        }),
    })
}

fn thresholding(opts: &Opts, y: &[f64], sigma: f64, theta: Theta) -> Result<Fit, Failure> {
    let n = y.len();
    let basis = haar(n)?;
    let th = coefficient_threshold(opts, n, sigma)?;
    let obs = Observation::new(y.to_vec(), sigma)?;
    let est = wavelet_threshold(
        &obs,
        basis.as_ref(),
        &ShrinkageRule::uniform(theta, th.q, n)?,
    )?;
    let probes = ProbeSystem::coefficients(basis, vec![1.0; n])?;
    let slack = th.q - probes.statistic(&residual(y, &est))?;
    Ok(Fit::closed_form(est, th, slack))
}

fn blockwise(opts: &Opts, y: &[f64], sigma: f64, theta: Theta) -> Result<Fit, Failure> {
    let n = y.len();
    let basis = haar(n)?;
    let len = default_block_len(opts, n);
    let partition = BlockPartition::haar_levels(n, len)?;
    let m = partition.num_blocks();
    let probes = ProbeSystem::blocks(basis.clone(), partition.clone(), vec![1.0; m])?;
    let th = mc_threshold(opts, &probes, sigma)?;
    let obs = Observation::new(y.to_vec(), sigma)?;
    let est = block_threshold(&obs, basis.as_ref(), &partition, &vec![th.q; m], theta)?;
    let slack = th.q - probes.statistic(&residual(y, &est))?;
    let mut fit = Fit::closed_form(est, th, slack);
    fit.extra = json!({ "block_len": len, "blocks": m });
    Ok(fit)
}

fn load_design(opts: &Opts, n: usize) -> Result<Option<DesignOperator>, Failure> {
    let Some(path) = &opts.design else {
        return Ok(None);
    };
    let rows = read_matrix(path)?;
    if rows.len() != n {
        return Err(Failure::runtime(
            "dimension",
            format!("design has {} rows but the observation has {n}", rows.len()),
        ));
    }
    Ok(Some(DesignOperator::from_rows(&rows)?))
}

fn column_norms(x: &DesignOperator) -> Result<Vec<f64>, Failure> {
    let n = x.rows();
    let mut e = vec![0.0; n];
    let mut sq = vec![0.0; x.cols()];
    for i in 0..n {
        e[i] = 1.0;
        for (s, v) in sq.iter_mut().zip(x.apply_adjoint(&e)?) {
            *s += v * v;
        }
        e[i] = 0.0;
    }
    Ok(sq.into_iter().map(f64::sqrt).collect())
}

fn dantzig(
    opts: &Opts,
    y: &[f64],
    sigma: f64,
    design: Option<DesignOperator>,
) -> Result<Fit, Failure> {
    let n = y.len();
    let (op, probes, scale) = match design {
        None => (
            DesignOperator::identity(n),
            ProbeSystem::coefficients(handle(StandardBasis { n }), vec![1.0; n])?,
            1.0,
        ),
        Some(x) => {
            let p = x.cols();
            let mut cols = vec![vec![0.0; n]; p];
            let mut e = vec![0.0; n];
            for i in 0..n {
                e[i] = 1.0;
                for (j, v) in x.apply_adjoint(&e)?.into_iter().enumerate() {
                    cols[j][i] = v;
                }
                e[i] = 0.0;
            }
            let scale = column_norms(&x)?.into_iter().fold(0.0, f64::max);
            (x, ProbeSystem::functionals(n, cols)?, scale)
        }
    };
    let p = op.cols();
    // X_j^T eps ~ N(0, sigma^2 ||X_j||^2); the largest column norm bounds all
    let th = coefficient_threshold(opts, p, sigma * scale)?;
    let reg = Regularizer::L1Coeff {
        basis: handle(StandardBasis { n: p }),
        weights: vec![1.0; p],
    };
    pdhg(opts, op, y, sigma, probes, th, reg)
}

fn group_lasso(
    opts: &Opts,
    y: &[f64],
    sigma: f64,
    design: Option<DesignOperator>,
) -> Result<Fit, Failure> {
    let n = y.len();
    let (x, basis, partition) = match design {
        None => {
            let len = default_block_len(opts, n);
            (
                DesignOperator::identity(n),
                haar(n)?,
                BlockPartition::haar_levels(n, len)?,
            )
        }
        Some(x) => {
            let p = x.cols();
            let len = default_block_len(opts, p);
            (
                x,
                handle(StandardBasis { n: p }),
                BlockPartition::contiguous(p, len)?,
            )
        }
    };
    let m = partition.num_blocks();
    let pen = GroupPenalty::new(basis, partition, vec![1.0; m])?;
    // the dual constraint carries the probes max_a ||B_a Phi X^T r||_2
    let dual = dual_constrained_problem(&x, y, &pen, 0.0)?;
    let probes = dual.constraint.probes;
    let th = match opts.gamma {
        Some(g) => Threshold {
            q: g,
            source: "override",
            alpha: None,
            reps: None,
            stderr: None,
        },
        None => mc_threshold(opts, &probes, sigma)?,
    };
    let r = group_lasso_solve(&x, y, &pen, th.q, &FistaOptions::default())?;
    let fitted = x.apply(&r.beta_hat)?;
    let slack = th.q - probes.statistic(&residual(y, &fitted))?;
    Ok(Fit {
        estimate: r.beta_hat,
        gamma: Some(th.q),
        threshold: Some(th),
        slack,
        iterations: r.iterations,
        converged: r.converged,
        objective: Some(r.objective),
        extra: json!({ "blocks": m }),
    })
}

pub fn estimate(opts: &Opts) -> Result<u8, Failure> {
    let t0 = Instant::now();
    let method = opts.method.as_deref().unwrap_or("soft");
    if !METHODS.contains(&method) {
        return Err(Failure::usage(format!(
            "unknown method {method:?}; expected one of {}",
            METHODS.join(", ")
        )));
    }
    if opts.design.is_some() && !matches!(method, "dantzig" | "group-lasso") {
        return Err(Failure::usage(
            "--design applies to dantzig and group-lasso only",
        ));
    }
    if opts.gamma.is_some() && method != "group-lasso" {
        return Err(Failure::usage("--gamma applies to group-lasso only"));
    }
    if method == "group-lasso" && opts.q.is_some() {
        return Err(Failure::usage(
            "group-lasso takes its penalty weight from --gamma",
        ));
    }
    let series = read_series(opts.input.as_deref())?;
    let y = &series.y;
    let n = y.len();
    let (sigma, sigma_source) = resolve_sigma(opts, y)?;
    let design = load_design(opts, n)?;
    let mut variant = None;
    let fit = match method {
        "soft" => thresholding(opts, y, sigma, Theta::SOFT)?,
        "hard" => thresholding(opts, y, sigma, Theta::Hard)?,
        "garrote" => thresholding(opts, y, sigma, Theta::GARROTE)?,
        "block-soft" => blockwise(opts, y, sigma, Theta::SOFT)?,
        "block-js" => blockwise(opts, y, sigma, Theta::GARROTE)?,
        "tv" => {
            let probes = ProbeSystem::identity(n);
            let th = mc_threshold(opts, &probes, sigma)?;
            pdhg(
                opts,
                DesignOperator::identity(n),
                y,
                sigma,
                probes,
                th,
                Regularizer::Tv,
            )?
        }
        "hybrid-tv-wavelet" => {
            let probes = ProbeSystem::coefficients(haar(n)?, vec![1.0; n])?;
            let th = coefficient_threshold(opts, n, sigma)?;
            pdhg(
                opts,
                DesignOperator::identity(n),
                y,
                sigma,
                probes,
                th,
                Regularizer::Tv,
            )?
        }
        "dantzig" => dantzig(opts, y, sigma, design)?,
        "nemirovskii" => {
            let v = interval_variant(opts, IntervalVariant::DyadicLengths);
            variant = Some(variant_name(v));
            let probes = ProbeSystem::intervals(IntervalSystem::new(n, v));
            let th = mc_threshold(opts, &probes, sigma)?;
            let reg = Regularizer::SobolevKq {
                k: 1,
                q: SobolevExponent::Two,
            };
            pdhg(opts, DesignOperator::identity(n), y, sigma, probes, th, reg)?
        }
        "group-lasso" => group_lasso(opts, y, sigma, design)?,
        _ => unreachable!("method list checked above"),
    };

    let mut table = Table::default();
    table.push_usize("index", 0..fit.estimate.len());
    table.push_f64("estimate", &fit.estimate);
    let mse = series
        .truth
        .as_ref()
        .filter(|t| t.len() == fit.estimate.len())
        .map(|t| {
            t.iter()
                .zip(&fit.estimate)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                / t.len() as f64
        });
    let mut rep = report("estimate", opts);
    extend(
        &mut rep,
        json!({
            "method": method,
            "n": n,
            "sigma": sigma,
            "sigma_source": sigma_source,
            "intervals": variant,
            "seed": opts.seed,
        }),
    );
    if let Some(th) = &fit.threshold {
        extend(&mut rep, th.fields());
    }
    extend(
        &mut rep,
        json!({
            "gamma": fit.gamma,
            "constraint_slack": fit.slack,
            "iterations": fit.iterations,
            "converged": fit.converged,
            "objective": fit.objective,
            "mse_vs_truth": mse,
            "solver": fit.extra,
            "wall_time_s": t0.elapsed().as_secs_f64(),
        }),
    );
    emit(opts, format_or(opts, Format::Csv), &table, rep)?;
    Ok(0)
}
