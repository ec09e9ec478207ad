use blpp::busemann::{default_top, dual_field, sample_busemann_recursion};
use blpp::distlib::TestReport;
use blpp::envgen::{sample_brownian, sample_field};
use blpp::geodesics::{
    busemann_geodesic, coalescence_level, crossing_check, dual_geodesic, geodesic_direction, midpoint_passes,
    near_tie_scan, start_monotonicity_check,
};
use blpp::lpp::{energy, point_to_line, LppTable};
use blpp::rng::{Lane, RIGHT};
use blpp::{Side, Site};
use rand::Rng;

use super::{fraction, grid, index, median, Ctx, Experiment, Outcome, Param, Table};
use crate::error::{usage, Result};

pub const DIRECTION: Experiment = Experiment {
    name: "geodesic-direction",
    about: "Busemann geodesics: slope near theta, energy and point-to-line identities",
    params: &[
        Param::new("theta", "1", "direction"),
        Param::new("levels", "50", "levels followed"),
        Param::new("t-min", "-5", "window start"),
        Param::new("t-max", "120", "window end"),
        Param::new("step", "0.01", "grid step"),
        Param::new("replicas", "200", "independent geodesics"),
        Param::new("tolerance", "0.3", "allowed relative slope error"),
        Param::new("min-fraction", "0.9", "required fraction within tolerance"),
        Param::new("line-level", "10", "top level of the point-to-line comparison"),
        Param::new("starts", "0,0.5,1,2", "start times for the ordering check"),
    ],
    run: direction,
};

struct DirectionRow {
    slope: f64,
    energy_dev: f64,
    lpp_dev: f64,
    v_max: f64,
    line_dev: f64,
    line_path_mismatch: bool,
    levels_checked: usize,
    truncated_levels: usize,
    ordering: TestReport,
}

fn direction(ctx: &Ctx) -> Result<Outcome> {
    let cfg = ctx.cfg;
    let theta = cfg.positive("theta")?;
    let levels = cfg.count("levels")? as i64;
    let spec = grid(cfg.f64("t-min")?, cfg.f64("t-max")?, cfg.positive("step")?)?;
    let tol = cfg.positive("tolerance")?;
    let min_fraction = cfg.f64("min-fraction")?;
    let line_level = cfg.i64("line-level")?;
    if !(0..levels).contains(&line_level) {
        return Err(usage("--line-level must lie in 0..levels"));
    }
    let starts =
        cfg.list_f64("starts")?.into_iter().map(|t| index(&spec, t)).collect::<Result<Vec<usize>>>()?;
    let z = spec.zero_index();
    let top = default_top(levels, theta);

    let rows = ctx.replicate(cfg.replicas()?, |_, st| {
        let field = sample_field(&spec, -1..=top - 1, &st)?;
        let stack = sample_busemann_recursion(&field, theta, top, 0..=levels, &st)?;
        let start = Site::new(0, z);
        let g = busemann_geodesic(&field, &stack, start, Side::Right)?;
        let slope = geodesic_direction(&g, &spec)?;
        let table = LppTable::build(&field, start, levels - 1, spec.last_index())?;
        let mut row = DirectionRow {
            slope,
            energy_dev: 0.0,
            lpp_dev: 0.0,
            v_max: 0.0,
            line_dev: 0.0,
            line_path_mismatch: false,
            levels_checked: 0,
            truncated_levels: 0,
            ordering: start_monotonicity_check(&field, &stack, 0, &starts)?,
        };
        for n in 0..levels {
            let k = (n + 1) as usize;
            if g.truncated[k] {
                row.truncated_levels += 1;
                continue;
            }
            let exit = g.jumps[k];
            let e = energy(&field, &g.path_to(n)?)?;
            let b = stack.increment(start, Site::new(n, exit))?;
            let l = table.value(Site::new(n, exit)).expect("inside table");
            row.energy_dev = row.energy_dev.max((e - b).abs());
            row.lpp_dev = row.lpp_dev.max((e - l).abs());
            row.v_max = row.v_max.max(stack.slice(n + 1).expect("slice").v.get(exit).abs());
            row.levels_checked += 1;
        }
        if !g.truncated[(line_level + 1) as usize] {
            let boundary = &stack.slice(line_level + 1).expect("slice").h;
            let ptl = point_to_line(&field, start, boundary, line_level, Side::Right)?;
            let path = g.path_to(line_level)?;
            let val = energy(&field, &path)? - boundary.get(g.exit(line_level).expect("exit"));
            row.line_dev = (ptl.value - val).abs();
            row.line_path_mismatch = ptl.path != path;
        }
        Ok(row)
    })?;

    let n = rows.len();
    let within = fraction(rows.iter().map(|r| (r.slope - theta).abs() <= tol * theta));
    let max = |f: fn(&DirectionRow) -> f64| rows.iter().map(f).fold(0.0, f64::max);
    let checked: usize = rows.iter().map(|r| r.levels_checked).sum();
    let truncated: usize = rows.iter().map(|r| r.truncated_levels).sum();
    let mut table = Table::new(&[
        "replica",
        "slope",
        "energy_deviation",
        "lpp_deviation",
        "max_v_at_exit",
        "line_deviation",
        "truncated_levels",
    ]);
    table.rows = rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            vec![i as f64, r.slope, r.energy_dev, r.lpp_dev, r.v_max, r.line_dev, r.truncated_levels as f64]
        })
        .collect();
    let mut out = Outcome::new(table);
    out.check("direction", TestReport::new("slope fraction shortfall", min_fraction - within, 0.0, n, 0));
    out.check("energy", TestReport::new("energy vs busemann max deviation", max(|r| r.energy_dev), 1e-9, checked, truncated));
    out.check("lpp", TestReport::new("energy vs last passage max deviation", max(|r| r.lpp_dev), 1e-9, checked, truncated));
    out.check("v-vanishes", TestReport::new("max |v| at exit points", max(|r| r.v_max), 1e-9, checked, truncated));
    out.check("point-to-line", TestReport::new("point-to-line max deviation", max(|r| r.line_dev), 1e-9, n, 0));
    let mism = rows.iter().filter(|r| r.line_path_mismatch).count();
    out.check("point-to-line-path", TestReport::new("point-to-line path mismatches", mism as f64, 0.0, n, 0));
    let ord: f64 = rows.iter().map(|r| r.ordering.value).sum();
    let ord_n: usize = rows.iter().map(|r| r.ordering.sample_size).sum();
    out.check("start-ordering", TestReport::new("start monotonicity violations", ord, 0.0, ord_n, 0));
    out.stat("fraction within tolerance", within);
    out.stat("median slope", median(&rows.iter().map(|r| r.slope).collect::<Vec<_>>()));
    Ok(out)
}

pub const CROSSING: Experiment = Experiment {
    name: "geodesic-crossing",
    about: "Busemann geodesics and dual geodesics do not cross",
    params: &[
        Param::new("theta", "1", "direction"),
        Param::new("max-level", "4", "largest start level"),
        Param::new("t-min", "-20", "window start"),
        Param::new("t-max", "20", "window end"),
        Param::new("step", "0.001", "grid step"),
        Param::new("start-range", "5", "start times drawn from [-range, range]"),
        Param::new("max-gap", "3", "largest dual start offset"),
        Param::new("replicas", "1000", "randomized configurations"),
    ],
    run: crossing,
};

fn crossing(ctx: &Ctx) -> Result<Outcome> {
    let cfg = ctx.cfg;
    let theta = cfg.positive("theta")?;
    let max_level = cfg.count("max-level")? as i64;
    let spec = grid(cfg.f64("t-min")?, cfg.f64("t-max")?, cfg.positive("step")?)?;
    let range = cfg.f64("start-range")?;
    let gap = cfg.f64("max-gap")?;
    if range < 0.0 || gap < 0.0 {
        return Err(usage("--start-range and --max-gap must be nonnegative"));
    }
    let lo = index(&spec, -range)?;
    let hi = spec.floor_index(range);
    let gap_steps = (gap / spec.step()).floor() as usize;
    if hi + gap_steps > spec.last_index() {
        return Err(usage("start range plus gap leaves the window"));
    }
    let top = default_top(max_level + 1, theta);

    let rows = ctx.replicate(cfg.replicas()?, |i, st| {
        let mut rng = st.lane(Lane::AUX, 0).rng(RIGHT);
        let m = rng.random_range(1..=max_level);
        let s = rng.random_range(lo..=hi);
        let t = s + rng.random_range(0..=gap_steps);
        let field = sample_field(&spec, -1..=top - 1, &st)?;
        let stack = sample_busemann_recursion(&field, theta, top, 0..=max_level + 1, &st)?;
        let dual = dual_field(&stack)?;
        let mut violations = 0.0;
        let mut excluded = 0;
        for (gs, ds) in [(Side::Right, Side::Left), (Side::Left, Side::Right)] {
            let g = busemann_geodesic(&field, &stack, Site::new(m, s), gs)?;
            let d = dual_geodesic(&dual, &stack, Site::new(m + 1, t), ds)?;
            let r = crossing_check(&g, &d)?;
            violations += r.value;
            excluded += r.excluded;
        }
        Ok(vec![i as f64, m as f64, spec.time(s), spec.time(t), violations, excluded as f64])
    })?;
    let violations: f64 = rows.iter().map(|r| r[4]).sum();
    let excluded: usize = rows.iter().map(|r| r[5] as usize).sum();
    let n = rows.len();
    let mut table = Table::new(&["replica", "level", "s", "t", "violations", "excluded"]);
    table.rows = rows;
    let mut out = Outcome::new(table);
    out.check("crossing", TestReport::new("geodesic crossing violations", violations, 0.0, 2 * n - excluded, excluded));
    Ok(out)
}

pub const COALESCENCE: Experiment = Experiment {
    name: "coalescence",
    about: "frequency with which geodesics from nearby starts merge within a height",
    params: &[
        Param::new("theta", "1", "direction"),
        Param::new("heights", "30,60", "window heights, increasing"),
        Param::new("gap", "2", "distance between the two start times"),
        Param::new("t-min", "-5", "window start"),
        Param::new("t-max", "140", "window end"),
        Param::new("step", "0.05", "grid step"),
        Param::new("replicas", "200", "independent pairs"),
        Param::new("min-frequency", "0.9", "required frequency at the largest height"),
    ],
    run: coalescence,
};

fn coalescence(ctx: &Ctx) -> Result<Outcome> {
    let cfg = ctx.cfg;
    let theta = cfg.positive("theta")?;
    let heights = cfg.list_i64("heights")?;
    if heights.is_empty() || heights[0] < 1 || heights.windows(2).any(|w| w[0] >= w[1]) {
        return Err(usage("--heights must be positive and increasing"));
    }
    let spec = grid(cfg.f64("t-min")?, cfg.f64("t-max")?, cfg.positive("step")?)?;
    let gap = cfg.positive("gap")?;
    let a = index(&spec, -gap / 2.0)?;
    let b = index(&spec, gap / 2.0)?;
    let min_freq = cfg.f64("min-frequency")?;
    let levels = *heights.last().expect("nonempty");
    let top = default_top(levels, theta);

    let rows = ctx.replicate(cfg.replicas()?, |i, st| {
        let field = sample_field(&spec, -1..=top - 1, &st)?;
        let stack = sample_busemann_recursion(&field, theta, top, 0..=levels, &st)?;
        let ga = busemann_geodesic(&field, &stack, Site::new(0, a), Side::Right)?;
        let gb = busemann_geodesic(&field, &stack, Site::new(0, b), Side::Right)?;
        let mut row = vec![i as f64];
        for &h in &heights {
            row.push(f64::from(u8::from(coalescence_level(&ga, &gb, Some(h)).is_some())));
        }
        Ok(row)
    })?;

    let n = rows.len();
    let freqs: Vec<f64> = (0..heights.len()).map(|k| fraction(rows.iter().map(|r| r[k + 1] == 1.0))).collect();
    let mut header = vec!["replica".to_string()];
    header.extend(heights.iter().map(|h| format!("merged_by_{h}")));
    let mut out = Outcome::new(Table { header, rows });
    let last = *freqs.last().expect("nonempty");
    out.check("frequency", TestReport::new("coalescence frequency shortfall", min_freq - last, 0.0, n, 0));
    let drops = freqs.windows(2).filter(|w| w[1] < w[0]).count();
    out.check("height-trend", TestReport::new("frequency decreases with height", drops as f64, 0.0, freqs.len(), 0));
    for (h, f) in heights.iter().zip(&freqs) {
        out.stat(format!("frequency at height {h}"), *f);
    }
    Ok(out)
}

pub const NEAR_TIES: Experiment = Experiment {
    name: "near-ties",
    about: "near-tied right records of a drifting path grow with the window",
    params: &[
        Param::new("t-min", "-1", "window start"),
        Param::new("windows", "20,80,320", "window ends, increasing"),
        Param::new("step", "0.01", "grid step"),
        Param::new("drift", "-1", "drift of the path"),
        Param::new("epsilon", "0.1", "tie tolerance"),
        Param::new("replicas", "200", "independent paths"),
        Param::new("max-empty", "0", "largest allowed fraction of empty scans at the longest window"),
    ],
    run: near_ties,
};

fn near_ties(ctx: &Ctx) -> Result<Outcome> {
    let cfg = ctx.cfg;
    let t_min = cfg.f64("t-min")?;
    let windows = cfg.list_f64("windows")?;
    if windows.is_empty() || windows.windows(2).any(|w| w[0] >= w[1]) {
        return Err(usage("--windows must be increasing"));
    }
    let step = cfg.positive("step")?;
    let specs = windows.iter().map(|&w| grid(t_min, w, step)).collect::<Result<Vec<_>>>()?;
    let drift = cfg.f64("drift")?;
    let eps = cfg.f64("epsilon")?;
    if eps < 0.0 {
        return Err(usage("--epsilon must be nonnegative"));
    }
    let max_empty = cfg.f64("max-empty")?;

    let rows = ctx.replicate(cfg.replicas()?, |i, st| {
        let mut row = vec![i as f64];
        for spec in &specs {
            let f = sample_brownian(spec, drift, &st.lane(Lane::AUX, 0));
            row.push(near_tie_scan(&f, eps).len() as f64);
        }
        Ok(row)
    })?;
    let n = rows.len();
    let medians: Vec<f64> =
        (0..windows.len()).map(|k| median(&rows.iter().map(|r| r[k + 1]).collect::<Vec<_>>())).collect();
    let empty = fraction(rows.iter().map(|r| *r.last().expect("row") == 0.0));
    let mut header = vec!["replica".to_string()];
    header.extend(windows.iter().map(|w| format!("count_to_{}", crate::output::fmt_g(*w))));
    let mut out = Outcome::new(Table { header, rows });
    let drops = medians.windows(2).filter(|w| w[1] < w[0]).count();
    out.check("growth", TestReport::new("median count decreases with window", drops as f64, 0.0, medians.len(), 0));
    out.check("nonempty", TestReport::new("empty fraction at longest window", empty, max_empty, n, 0));
    for (w, m) in windows.iter().zip(&medians) {
        out.stat(format!("median count to {}", crate::output::fmt_g(*w)), *m);
    }
    Ok(out)
}

pub const MIDPOINT: Experiment = Experiment {
    name: "midpoint",
    about: "probability that a long geodesic passes a fixed point, against n",
    params: &[
        Param::new("theta", "1", "direction of the upper ray"),
        Param::new("eta", "1", "direction of the lower ray"),
        Param::new("n-values", "5,10,15,20,25", "half-lengths, increasing"),
        Param::new("point-level", "0", "level of the fixed point"),
        Param::new("point-time", "0", "time of the fixed point"),
        Param::new("t-min", "-26", "window start"),
        Param::new("t-max", "26", "window end"),
        Param::new("step", "0.05", "grid step"),
        Param::new("seeds", "1", "independent seed families; the curve is their median"),
        Param::new("replicas", "500", "fields per seed family"),
    ],
    run: midpoint,
};

fn midpoint(ctx: &Ctx) -> Result<Outcome> {
    let cfg = ctx.cfg;
    let theta = cfg.positive("theta")?;
    let eta = cfg.positive("eta")?;
    let ns = cfg.list_i64("n-values")?;
    if ns.is_empty() || ns[0] < 1 || ns.windows(2).any(|w| w[0] >= w[1]) {
        return Err(usage("--n-values must be positive and increasing"));
    }
    let nmax = *ns.last().expect("nonempty");
    let spec = grid(cfg.f64("t-min")?, cfg.f64("t-max")?, cfg.positive("step")?)?;
    if -(nmax as f64) * eta < spec.t_min() || nmax as f64 * theta > spec.t_max() {
        return Err(usage("the window does not contain the longest rays"));
    }
    let point = Site::new(cfg.i64("point-level")?, index(&spec, cfg.f64("point-time")?)?);
    let seeds = cfg.count("seeds")?;
    let replicas = cfg.replicas()?;

    let mut rows = Vec::new();
    let mut curves = Vec::new();
    for k in 0..seeds as u64 {
        let hits = ctx.replicate_from(ctx.family(k), replicas, |i, st| {
            let field = sample_field(&spec, -nmax..=nmax, &st)?;
            let mut row = vec![k as f64, i as f64];
            for &n in &ns {
                row.push(f64::from(u8::from(midpoint_passes(&field, theta, eta, point, n)?)));
            }
            Ok(row)
        })?;
        curves.push((0..ns.len()).map(|j| fraction(hits.iter().map(|r| r[j + 2] == 1.0))).collect::<Vec<f64>>());
        rows.extend(hits);
    }
    let medians: Vec<f64> = (0..ns.len()).map(|j| median(&curves.iter().map(|c| c[j]).collect::<Vec<_>>())).collect();
    let mut header = vec!["family".to_string(), "replica".to_string()];
    header.extend(ns.iter().map(|n| format!("passes_n{n}")));
    let mut out = Outcome::new(Table { header, rows });
    let xs: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    out.check("trend", TestReport::new("least-squares slope of probability in n", ls_slope(&xs, &medians), 0.0, ns.len(), 0));
    let (first, last) = (medians[0], medians[medians.len() - 1]);
    out.check("endpoints", TestReport::new("final probability not below initial", f64::from(u8::from(last >= first)), 0.0, ns.len(), 0));
    out.stat("pairwise rises", medians.windows(2).filter(|w| w[1] > w[0]).count() as f64);
    for (n, m) in ns.iter().zip(&medians) {
        out.stat(format!("probability n = {n}"), *m);
    }
    Ok(out)
}

fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx > 0.0 { sxy / sxx } else { 0.0 }
}
