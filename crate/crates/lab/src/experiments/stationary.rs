use blpp::distlib::TestReport;
use blpp::envgen::sample_field;
use blpp::stationary::{build_stationary, burke_blocks, burke_check, burke_distance_check, sandwich_check, BlockLayout};

use super::{fraction, grid, index, median, Ctx, Experiment, Outcome, Param, Table};
use crate::error::{usage, Result};

pub const BURKE: Experiment = Experiment {
    name: "burke",
    about: "stationary queues in series: staircase blocks are uncorrelated",
    params: &[
        Param::new("lambda", "1", "drift of the stationary boundary"),
        Param::new("levels", "3", "queues in series"),
        Param::new("t-min", "-30", "window start"),
        Param::new("t-max", "3", "window end"),
        Param::new("step", "0.01", "grid step"),
        Param::new("times", "0,-1,-2", "staircase times, nonincreasing"),
        Param::new("control-times", "-2,-1,0", "block times of the negative control"),
        Param::new("span", "1", "block length"),
        Param::new("replicas", "10000", "independent systems"),
        Param::new("dcor-subsample", "2000", "replicas used for distance correlation"),
        Param::new("dcor-max", "0.08", "largest allowed distance correlation"),
    ],
    run: burke,
};

fn burke(ctx: &Ctx) -> Result<Outcome> {
    let cfg = ctx.cfg;
    let lambda = cfg.positive("lambda")?;
    let levels = cfg.count("levels")?;
    let spec = grid(cfg.f64("t-min")?, cfg.f64("t-max")?, cfg.positive("step")?)?;
    let to_idx = |key: &str| -> Result<Vec<usize>> {
        let ts = cfg.list_f64(key)?;
        if ts.len() != levels {
            return Err(usage(format!("--{key} needs {levels} times")));
        }
        ts.iter().map(|&t| index(&spec, t)).collect()
    };
    let span_t = cfg.positive("span")?;
    let span = (span_t / spec.step()).round() as usize;
    if span == 0 || ((span as f64) * spec.step() - span_t).abs() > 1e-9 {
        return Err(usage("--span must be a positive multiple of the step"));
    }
    let times = to_idx("times")?;
    let control_times = to_idx("control-times")?;
    let layout = BlockLayout::staircase(times.clone(), span).map_err(usage)?;
    let control = BlockLayout::unchecked(control_times.clone(), span).map_err(usage)?;
    let earliest = |l: &[usize]| l.iter().min().copied().unwrap_or(0);
    let first_used = earliest(&times).min(earliest(&control_times));
    if first_used < span || times.iter().chain(&control_times).any(|&j| j + span > spec.last_index()) {
        return Err(usage("blocks reach outside the window"));
    }
    let first_used = first_used - span;
    let subsample = cfg.count("dcor-subsample")?;
    let dcor_max = cfg.positive("dcor-max")?;

    let rows = ctx.replicate(cfg.replicas()?, |_, st| {
        let field = sample_field(&spec, 0..=levels as i64, &st)?;
        let stack = build_stationary(&field, lambda, levels)?;
        let clean = stack.clean_from.iter().all(|&c| c <= first_used);
        Ok((burke_blocks(&stack, &field, &layout)?, burke_blocks(&stack, &field, &control)?, clean))
    })?;

    let excluded = rows.iter().filter(|r| !r.2).count();
    let kept: Vec<_> = rows.iter().filter(|r| r.2).collect();
    let stair: Vec<Vec<(String, f64)>> = kept.iter().map(|r| r.0.clone()).collect();
    let ctrl: Vec<Vec<(String, f64)>> = kept.iter().map(|r| r.1.clone()).collect();
    let (report, pair) = burke_check(&stair)?;
    let (control_report, control_pair) = burke_check(&ctrl)?;
    let dcor = burke_distance_check(&stair, &pair.0, &pair.1, subsample, dcor_max)?;

    let mut header = vec!["replica".to_string()];
    header.extend(rows[0].0.iter().map(|(name, _)| name.replace(' ', "_")));
    let table_rows = rows
        .iter()
        .enumerate()
        .filter(|(_, r)| r.2)
        .map(|(i, r)| std::iter::once(i as f64).chain(r.0.iter().map(|b| b.1)).collect())
        .collect();
    let mut out = Outcome::new(Table { header, rows: table_rows });
    out.check("correlation", TestReport { excluded, ..report.clone() });
    out.check(
        "negative-control",
        TestReport::new(
            "negative control margin below threshold",
            control_report.threshold - control_report.value,
            0.0,
            control_report.sample_size,
            excluded,
        ),
    );
    out.check("distance-correlation", dcor);
    out.notes.push(format!("largest staircase correlation between {} and {}", pair.0, pair.1));
    out.notes.push(format!("largest control correlation between {} and {}", control_pair.0, control_pair.1));
    out.stat("largest staircase |correlation|", report.value);
    out.stat("largest control |correlation|", control_report.value);
    Ok(out)
}

pub const SANDWICH: Experiment = Experiment {
    name: "sandwich",
    about: "stationary increments bracketed by finite-n increments in nearby directions",
    params: &[
        Param::new("lambda", "1", "drift of the stationary boundary"),
        Param::new("low", "0.5", "direction below lambda^-2"),
        Param::new("high", "2", "direction above lambda^-2"),
        Param::new("s", "0", "left end of the horizontal increment"),
        Param::new("t", "1", "right end of the horizontal increment"),
        Param::new("n-values", "15,30", "terminal levels, increasing"),
        Param::new("t-min", "-30", "window start"),
        Param::new("t-max", "61", "window end"),
        Param::new("step", "0.05", "grid step"),
        Param::new("seeds", "5", "independent seed families"),
        Param::new("replicas", "200", "systems per seed family"),
        Param::new("min-fraction", "0.8", "required bracketing fraction at the largest n"),
    ],
    run: sandwich,
};

fn sandwich(ctx: &Ctx) -> Result<Outcome> {
    let cfg = ctx.cfg;
    let lambda = cfg.positive("lambda")?;
    let (low, high) = (cfg.positive("low")?, cfg.positive("high")?);
    if !(low < lambda.powi(-2) && lambda.powi(-2) < high) {
        return Err(usage("need --low < lambda^-2 < --high"));
    }
    let spec = grid(cfg.f64("t-min")?, cfg.f64("t-max")?, cfg.positive("step")?)?;
    let s = index(&spec, cfg.f64("s")?)?;
    let t = index(&spec, cfg.f64("t")?)?;
    if s >= t {
        return Err(usage("need s < t"));
    }
    let ns = cfg.list_i64("n-values")?;
    if ns.is_empty() || ns[0] < 1 || ns.windows(2).any(|w| w[0] >= w[1]) {
        return Err(usage("--n-values must be positive and increasing"));
    }
    let nmax = *ns.last().expect("nonempty");
    for &n in &ns {
        let (a, b) = (n as f64 * low, n as f64 * high);
        if b > spec.t_max() || a < spec.time(t) {
            return Err(usage(format!("ray ends [{a}, {b}] at n = {n} outside [t, t_max]")));
        }
    }
    let min_fraction = cfg.f64("min-fraction")?;
    let seeds = cfg.count("seeds")?;
    let replicas = cfg.replicas()?;

    let mut rows = Vec::new();
    let mut curves = Vec::new();
    for k in 0..seeds as u64 {
        let hits = ctx.replicate_from(ctx.family(k), replicas, |i, st| {
            let field = sample_field(&spec, 0..=nmax + 1, &st)?;
            let mut row = vec![k as f64, i as f64];
            for &n in &ns {
                row.push(f64::from(u8::from(sandwich_check(&field, lambda, low, high, s, t, n)?.bracketed())));
            }
            Ok(row)
        })?;
        curves.push((0..ns.len()).map(|j| fraction(hits.iter().map(|r| r[j + 2] == 1.0))).collect::<Vec<f64>>());
        rows.extend(hits);
    }
    let medians: Vec<f64> = (0..ns.len()).map(|j| median(&curves.iter().map(|c| c[j]).collect::<Vec<_>>())).collect();
    let mut header = vec!["family".to_string(), "replica".to_string()];
    header.extend(ns.iter().map(|n| format!("bracketed_n{n}")));
    let mut out = Outcome::new(Table { header, rows });
    let last = *medians.last().expect("nonempty");
    out.check(
        "bracketing",
        TestReport::new("bracketing fraction shortfall", min_fraction - last, 0.0, seeds * replicas, 0),
    );
    let drops = medians.windows(2).filter(|w| w[1] < w[0]).count();
    out.check("trend", TestReport::new("median fraction decreases with n", drops as f64, 0.0, ns.len(), 0));
    for (n, m) in ns.iter().zip(&medians) {
        out.stat(format!("median bracketing fraction n = {n}"), *m);
    }
    Ok(out)
}
