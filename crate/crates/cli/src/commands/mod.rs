use std::time::Instant;

use mindkit::dictionaries::{
    default_scale_penalties, handle, HaarBasis, IntervalSystem, IntervalVariant, ProbeSystem,
};
use mindkit::model::gaussian_noise;
use mindkit::multiscale::{
    estimate_sigma, gumbel_threshold, monte_carlo_quantile, universal_threshold,
};
use mindkit::signals;
use mindkit::verify::{self as suites, Suite};
use serde_json::{json, Value};

use crate::config::{Format, Intervals, Opts};
use crate::io::{emit, read_series, read_truth, Table};
use crate::Failure;

mod estimate;
mod segment;

pub use estimate::estimate;
pub use segment::segment;

pub(crate) const DEFAULT_REPS: usize = 1000;

/// Report skeleton embedding the full command line configuration.
pub(crate) fn report(command: &str, opts: &Opts) -> Value {
    json!({
        "command": command,
        "config": {
            "command": command,
            "options": opts,
        },
    })
}

pub(crate) fn extend(report: &mut Value, fields: Value) {
    if let (Value::Object(r), Value::Object(f)) = (report, fields) {
        r.extend(f);
    }
}

/// Noise level and where it came from (`given` or `estimated`).
pub(crate) fn resolve_sigma(opts: &Opts, y: &[f64]) -> Result<(f64, &'static str), Failure> {
    match opts.sigma_value()? {
        Some(s) => Ok((s, "given")),
        None => Ok((estimate_sigma(y)?, "estimated")),
    }
}

pub(crate) fn interval_variant(opts: &Opts, fallback: IntervalVariant) -> IntervalVariant {
    match opts.intervals {
        Some(Intervals::All) => IntervalVariant::All,
        Some(Intervals::Dyadic) => IntervalVariant::DyadicLengths,
        None => fallback,
    }
}

pub(crate) fn variant_name(v: IntervalVariant) -> &'static str {
    match v {
        IntervalVariant::All => "all",
        IntervalVariant::DyadicLengths => "dyadic",
    }
}

/// Resolved threshold with its provenance.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Threshold {
    pub q: f64,
    pub source: &'static str,
    pub alpha: Option<f64>,
    pub reps: Option<usize>,
    pub stderr: Option<f64>,
}

impl Threshold {
    pub fn fields(&self) -> Value {
        json!({
            "q": self.q,
            "q_source": self.source,
            "alpha": self.alpha,
            "reps": self.reps,
            "q_stderr": self.stderr,
        })
    }
}

/// Coefficient-wise threshold over `m` probes of noise level `sigma`:
/// `--q`, else Gumbel at `--alpha`, else universal.
pub(crate) fn coefficient_threshold(
    opts: &Opts,
    m: usize,
    sigma: f64,
) -> Result<Threshold, Failure> {
    let (q, source) = match (opts.q, opts.alpha) {
        (Some(q), _) => (q, "override"),
        (None, Some(a)) => (gumbel_threshold(m, sigma, a)?, "gumbel"),
        (None, None) => (universal_threshold(m, sigma)?, "universal"),
    };
    Ok(Threshold {
        q,
        source,
        alpha: opts.alpha,
        reps: None,
        stderr: None,
    })
}

/// `--q`, else the Monte Carlo quantile at `--alpha` (default 0.1).
pub(crate) fn mc_threshold(
    opts: &Opts,
    probes: &ProbeSystem,
    sigma: f64,
) -> Result<Threshold, Failure> {
    if let Some(q) = opts.q {
        return Ok(Threshold {
            q,
            source: "override",
            alpha: None,
            reps: None,
            stderr: None,
        });
    }
    let alpha = opts.alpha_or_default();
    let reps = opts.reps.unwrap_or(DEFAULT_REPS);
    let est = monte_carlo_quantile(probes, probes.n(), sigma, alpha, reps, opts.seed)?;
    Ok(Threshold {
        q: est.q_alpha,
        source: "monte_carlo",
        alpha: Some(alpha),
        reps: Some(reps),
        stderr: Some(est.stderr),
    })
}

pub(crate) fn format_or(opts: &Opts, fallback: Format) -> Format {
    opts.format.unwrap_or(fallback)
}

pub fn simulate(opts: &Opts) -> Result<u8, Failure> {
    let t0 = Instant::now();
    let sigma = match opts.sigma.as_deref() {
        None => 0.1,
        Some("estimate") => {
            return Err(Failure::usage("simulate needs a numeric --sigma"));
        }
        Some(_) => opts.sigma_value()?.expect("numeric"),
    };
    let n = opts.n.unwrap_or(1024);
    let signal = opts.method.as_deref().unwrap_or(if opts.input.is_some() {
        "custom"
    } else {
        "piecewise-smooth"
    });
    if signal != "custom" && opts.input.is_some() {
        return Err(Failure::usage("--input is only used by the custom signal"));
    }
    if n == 0 {
        return Err(Failure::usage("--n must be positive"));
    }
    let mut breaks: Option<Vec<usize>> = None;
    let truth = match signal {
        "blocks" => signals::blocks(n),
        "piecewise-smooth" => signals::piecewise_smooth(n),
        "heavisine" => signals::heavisine(n),
        "steps" => {
            let min_gap = (n / 12).max(1);
            let jumps = 5.min(n / min_gap - 1);
            let (v, b) = signals::random_steps(n, jumps, min_gap, 2.0, opts.seed);
            breaks = Some(b);
            v
        }
        "custom" => match &opts.input {
            Some(p) => read_truth(p)?,
            None => return Err(Failure::usage("the custom signal needs --input")),
        },
        other => {
            return Err(Failure::usage(format!(
                "unknown signal {other:?}; expected blocks, piecewise-smooth, heavisine, steps or custom"
            )))
        }
    };
    let n = truth.len();
    let obs: Vec<f64> = if sigma == 0.0 {
        truth.clone()
    } else {
        truth
            .iter()
            .zip(gaussian_noise(n, sigma, opts.seed))
            .map(|(t, e)| t + e)
            .collect()
    };
    let mut table = Table::default();
    table.push_usize("index", 0..n);
    table.push_f64("truth", &truth);
    table.push_f64("observation", &obs);
    let mut rep = report("simulate", opts);
    extend(
        &mut rep,
        json!({
            "signal": signal,
            "n": n,
            "sigma": sigma,
            "seed": opts.seed,
            "breakpoints": breaks,
            "wall_time_s": t0.elapsed().as_secs_f64(),
        }),
    );
    emit(opts, format_or(opts, Format::Csv), &table, rep)?;
    Ok(0)
}

pub fn quantile(opts: &Opts) -> Result<u8, Failure> {
    let t0 = Instant::now();
    let mode = opts.method.as_deref().unwrap_or("mc");
    if !matches!(mode, "mc" | "gumbel" | "universal") {
        return Err(Failure::usage(format!(
            "unknown quantile mode {mode:?}; expected mc, gumbel or universal"
        )));
    }
    if opts.q.is_some() {
        return Err(Failure::usage("quantile computes q; --q is not accepted"));
    }
    let probes_name = opts.probes.as_str();
    if !matches!(probes_name, "haar" | "intervals" | "nemirovskii") {
        return Err(Failure::usage(format!(
            "unknown probe family {probes_name:?}; expected haar, intervals or nemirovskii"
        )));
    }
    if mode != "mc" && probes_name != "haar" {
        return Err(Failure::usage(format!(
            "{mode} thresholds approximate the maximum of independent Gaussian coefficients \
             and only apply to orthonormal basis probes (haar); use --method mc for {probes_name}"
        )));
    }
    let series = match &opts.input {
        Some(p) => Some(read_series(Some(p))?),
        None => None,
    };
    let n = match (&series, opts.n) {
        (Some(s), _) => s.y.len(),
        (None, Some(n)) => n,
        (None, None) => 1024,
    };
    let (sigma, sigma_source) = match (opts.sigma_value()?, &series) {
        (Some(s), _) => (s, "given"),
        (None, Some(s)) if opts.sigma.is_some() => (estimate_sigma(&s.y)?, "estimated"),
        (None, None) if opts.sigma.is_some() => {
            return Err(Failure::usage("--sigma estimate needs --input"));
        }
        (None, _) => (1.0, "default"),
    };
    let alpha = opts.alpha_or_default();
    let mut variant = None;
    let th = match mode {
        "universal" => Threshold {
            q: universal_threshold(n, sigma)?,
            source: "universal",
            alpha: None,
            reps: None,
            stderr: None,
        },
        "gumbel" => Threshold {
            q: gumbel_threshold(n, sigma, alpha)?,
            source: "gumbel",
            alpha: Some(alpha),
            reps: None,
            stderr: None,
        },
        _ => {
            let probes = match probes_name {
                "haar" => ProbeSystem::coefficients(handle(HaarBasis::for_len(n)?), vec![1.0; n])?,
                _ => {
                    let v = interval_variant(opts, IntervalVariant::default_for(n));
                    variant = Some(variant_name(v));
                    let sys = IntervalSystem::new(n, v);
                    if probes_name == "intervals" {
                        ProbeSystem::intervals(default_scale_penalties(n, sys)?)
                    } else {
                        ProbeSystem::intervals(sys)
                    }
                }
            };
            let o = Opts {
                alpha: Some(alpha),
                ..opts.clone()
            };
            mc_threshold(&o, &probes, sigma)?
        }
    };
    let mut table = Table::default();
    table.push("method", vec![json!(mode)]);
    table.push("probes", vec![json!(probes_name)]);
    table.push("n", vec![json!(n)]);
    table.push("sigma", vec![json!(sigma)]);
    table.push("alpha", vec![json!(th.alpha)]);
    table.push("q", vec![json!(th.q)]);
    table.push("reps", vec![json!(th.reps)]);
    table.push("stderr", vec![json!(th.stderr)]);
    let mut rep = report("quantile", opts);
    extend(
        &mut rep,
        json!({
            "method": mode,
            "probes": probes_name,
            "intervals": variant,
            "n": n,
            "sigma": sigma,
            "sigma_source": sigma_source,
            "seed": opts.seed,
            "wall_time_s": t0.elapsed().as_secs_f64(),
        }),
    );
    extend(&mut rep, th.fields());
    emit(opts, format_or(opts, Format::Json), &table, rep)?;
    Ok(0)
}

pub fn verify(opts: &Opts) -> Result<u8, Failure> {
    let selected =
        Suite::parse_selection(&opts.suite).map_err(|e| Failure::usage(e.to_string()))?;
    let result = suites::run(&selected, opts.reps, opts.seed)?;
    let mut table = Table::default();
    let rows: Vec<(&Suite, &suites::Check)> = result
        .suites
        .iter()
        .flat_map(|s| s.checks.iter().map(move |c| (&s.suite, c)))
        .collect();
    table.push("suite", rows.iter().map(|(s, _)| json!(s.name())).collect());
    table.push("check", rows.iter().map(|(_, c)| json!(c.name)).collect());
    table.push("value", rows.iter().map(|(_, c)| json!(c.value)).collect());
    table.push("limit", rows.iter().map(|(_, c)| json!(c.limit)).collect());
    table.push(
        "passed",
        rows.iter().map(|(_, c)| json!(c.passed)).collect(),
    );
    let mut rep = report("verify", opts);
    extend(
        &mut rep,
        serde_json::to_value(&result).expect("serialisable report"),
    );
    emit(opts, format_or(opts, Format::Json), &table, rep)?;
    Ok(if result.passed { 0 } else { 1 })
}
