use std::time::Instant;

use mindkit::changepoint::{bic_penalty, jump_penalized_ls, mcps_solve, potts_objective};
use mindkit::dictionaries::{
    default_scale_penalties, IntervalSystem, IntervalVariant, ProbeSystem,
};
use serde_json::{json, Value};

use super::{
    extend, format_or, interval_variant, mc_threshold, report, resolve_sigma, variant_name,
};
use crate::config::{Format, Opts};
use crate::io::{emit, read_series, Table};
use crate::Failure;

pub fn segment(opts: &Opts) -> Result<u8, Failure> {
    let t0 = Instant::now();
    let method = opts.method.as_deref().unwrap_or("mcps");
    match method {
        "mcps" if opts.gamma.is_some() => {
            return Err(Failure::usage("--gamma applies to potts only"));
        }
        "potts" if opts.q.is_some() || opts.alpha.is_some() => {
            return Err(Failure::usage("--q and --alpha apply to mcps only"));
        }
        "mcps" | "potts" => {}
        other => {
            return Err(Failure::usage(format!(
                "unknown segmentation method {other:?}; expected mcps or potts"
            )))
        }
    }
    let series = read_series(opts.input.as_deref())?;
    let y = &series.y;
    let n = y.len();
    let (sigma, sigma_source) = resolve_sigma(opts, y)?;
    let mut rep = report("segment", opts);
    extend(
        &mut rep,
        json!({
            "method": method,
            "n": n,
            "sigma": sigma,
            "sigma_source": sigma_source,
            "seed": opts.seed,
        }),
    );

    let seg = if method == "mcps" {
        if sigma <= 0.0 {
            return Err(Failure::runtime(
                "invalid_input",
                "mcps needs a positive noise level",
            ));
        }
        let variant = interval_variant(opts, IntervalVariant::default_for(n));
        let sys = default_scale_penalties(n, IntervalSystem::new(n, variant))?;
        // threshold and boxes live on the unit-noise scale
        let th = mc_threshold(opts, &ProbeSystem::intervals(sys), 1.0)?;
        let z: Vec<f64> = y.iter().map(|v| v / sigma).collect();
        let mut seg = mcps_solve(&z, &sys, th.q)?;
        for l in seg.levels.iter_mut() {
            *l *= sigma;
        }
        for b in seg.feasibility_boxes.iter_mut().flatten() {
            b.lo *= sigma;
            b.hi *= sigma;
        }
        extend(
            &mut rep,
            json!({ "intervals": variant_name(variant), "gamma": Value::Null }),
        );
        extend(&mut rep, th.fields());
        seg
    } else {
        let (gamma, source) = match opts.gamma {
            Some(g) => (g, "override"),
            None => (bic_penalty(n, sigma), "bic"),
        };
        let seg = jump_penalized_ls(y, gamma)?;
        extend(
            &mut rep,
            json!({
                "gamma": gamma,
                "gamma_source": source,
                "q": Value::Null,
                "objective": potts_objective(y, &seg, gamma),
            }),
        );
        seg
    };

    let segments = seg.segments(n);
    let mut table = Table::default();
    table.push_usize("segment", 0..segments.len());
    table.push_usize("start", segments.iter().map(|s| s.0));
    table.push_usize("end", segments.iter().map(|s| s.1));
    table.push_f64("level", &seg.levels);
    let (lo, hi): (Vec<Value>, Vec<Value>) = match &seg.feasibility_boxes {
        Some(boxes) => boxes.iter().map(|b| (json!(b.lo), json!(b.hi))).unzip(),
        None => (
            vec![Value::Null; segments.len()],
            vec![Value::Null; segments.len()],
        ),
    };
    table.push("box_lo", lo);
    table.push("box_hi", hi);
    extend(
        &mut rep,
        json!({
            "num_jumps": seg.num_jumps(),
            "breakpoints": seg.breakpoints,
            "wall_time_s": t0.elapsed().as_secs_f64(),
        }),
    );
    emit(opts, format_or(opts, Format::Csv), &table, rep)?;
    Ok(0)
}
