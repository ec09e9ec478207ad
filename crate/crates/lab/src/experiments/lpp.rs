use blpp::distlib::TestReport;
use blpp::envgen::sample_field;
use blpp::lpp::{crossing_inequalities, energy, last_passage, LppTable};
use blpp::rng::{Lane, RIGHT};
use blpp::{BrownianField, GridSpec, PassagePath, Side, Site};
use rand::Rng;

use super::{grid, index, mean_se, Ctx, Experiment, Outcome, Param, Table};
use crate::error::{usage, Result};

pub const SHAPE: Experiment = Experiment {
    name: "shape",
    about: "n^-1 L from (0,0) to (n, nt) against 2 sqrt(t)",
    params: &[
        Param::new("n", "100", "top level"),
        Param::new("t", "1", "terminal time per level"),
        Param::new("step", "0.05", "grid step"),
        Param::new("replicas", "200", "independent fields"),
        Param::new("tolerance", "0.15", "allowed |mean - 2 sqrt(t)| per unit sqrt(t)"),
    ],
    run: shape,
};

fn shape(ctx: &Ctx) -> Result<Outcome> {
    let cfg = ctx.cfg;
    let n = cfg.count("n")? as i64;
    let t = cfg.positive("t")?;
    let step = cfg.positive("step")?;
    let tol = cfg.positive("tolerance")?;
    let spec = grid(-step, n as f64 * t, step)?;
    let end = index(&spec, n as f64 * t)?;
    let z = spec.zero_index();

    let values = ctx.replicate(cfg.replicas()?, |_, st| {
        let field = sample_field(&spec, 0..=n, &st)?;
        let table = LppTable::build(&field, Site::new(0, z), n, end)?;
        Ok(table.value(Site::new(n, end)).expect("terminal point inside table") / n as f64)
    })?;

    let mut table = Table::new(&["replica", "scaled_lpp"]);
    table.rows = values.iter().enumerate().map(|(i, &v)| vec![i as f64, v]).collect();
    let target = 2.0 * t.sqrt();
    let (m, se) = mean_se(&values);
    let mut out = Outcome::new(table);
    out.check(
        "shape",
        TestReport::new("|mean scaled lpp - 2 sqrt(t)|", (m - target).abs(), tol * t.sqrt(), values.len(), 0),
    );
    out.stat("mean scaled lpp", m);
    out.stat("standard error", se);
    out.stat("target", target);
    Ok(out)
}

pub const BRUTEFORCE: Experiment = Experiment {
    name: "lpp-bruteforce",
    about: "dynamic programme against exhaustive enumeration; crossing inequalities",
    params: &[
        Param::new("replicas", "100", "random small fields"),
        Param::new("max-levels", "4", "largest number of levels"),
        Param::new("max-points", "8", "largest number of grid points"),
        Param::new("step", "0.1", "grid step"),
        Param::new("sweeps", "1000", "randomized crossing-inequality sweeps"),
        Param::new("sweep-levels", "3", "levels per sweep field"),
        Param::new("sweep-points", "16", "grid points per sweep field"),
    ],
    run: bruteforce,
};

/// Every nondecreasing jump sequence from `(0, a)` to `(levels - 1, b)`.
fn enumerate_max(field: &BrownianField, levels: usize, a: usize, b: usize) -> blpp::Result<f64> {
    fn rec(field: &BrownianField, jumps: &mut Vec<usize>, left: usize, b: usize, best: &mut f64) -> blpp::Result<()> {
        if left == 0 {
            jumps.push(b);
            let e = energy(field, &PassagePath::new(0, jumps.clone())?)?;
            *best = best.max(e);
            jumps.pop();
            return Ok(());
        }
        let from = *jumps.last().expect("start time");
        for j in from..=b {
            jumps.push(j);
            rec(field, jumps, left - 1, b, best)?;
            jumps.pop();
        }
        Ok(())
    }
    let mut best = f64::NEG_INFINITY;
    rec(field, &mut vec![a], levels - 1, b, &mut best)?;
    Ok(best)
}

/// `points` grid points with time 0 at index `zero` (strictly inside).
fn small_grid(points: usize, zero: usize, step: f64) -> blpp::Result<GridSpec> {
    GridSpec::new(-(zero as f64) * step, (points - 1 - zero) as f64 * step, step)
}

fn bruteforce(ctx: &Ctx) -> Result<Outcome> {
    let cfg = ctx.cfg;
    let max_levels = cfg.count("max-levels")?;
    let max_points = cfg.usize("max-points")?;
    let step = cfg.positive("step")?;
    let sweeps = cfg.usize("sweeps")?;
    let sweep_levels = cfg.count("sweep-levels")?;
    let sweep_points = cfg.usize("sweep-points")?;
    if max_points < 3 {
        return Err(usage("--max-points must be at least 3"));
    }
    if sweep_points < 4 {
        return Err(usage("--sweep-points must be at least 4"));
    }
    small_grid(max_points, 1, step).map_err(usage)?;

    let rows = ctx.replicate(cfg.replicas()?, |i, st| {
        let mut rng = st.lane(Lane::AUX, 0).rng(RIGHT);
        let levels = rng.random_range(1..=max_levels);
        let points = rng.random_range(3..=max_points);
        let zero = rng.random_range(1..points - 1);
        let spec = small_grid(points, zero, step)?;
        let field = sample_field(&spec, 0..=levels as i64 - 1, &st)?;
        let a = rng.random_range(0..points);
        let b = rng.random_range(a..points);
        let top = levels as i64 - 1;
        let (dp, table) = last_passage(&field, Site::new(0, a), Site::new(top, b))?;
        let brute = enumerate_max(&field, levels, a, b)?;
        let mut mismatch = usize::from(dp.to_bits() != brute.to_bits());
        for side in [Side::Left, Side::Right] {
            let path = table.backtrack(Site::new(top, b), side)?;
            mismatch += usize::from(energy(&field, &path)?.to_bits() != dp.to_bits());
        }
        Ok(vec![i as f64, levels as f64, points as f64, dp, brute, mismatch as f64])
    })?;

    // sweeps use their own seed family so they do not share fields with the above
    let sweep_rows = ctx.replicate_from(ctx.family(1), sweeps, |_, st| {
        let mut rng = st.lane(Lane::AUX, 0).rng(RIGHT);
        let zero = rng.random_range(1..sweep_points - 1);
        let spec = small_grid(sweep_points, zero, step)?;
        let field = sample_field(&spec, 0..=sweep_levels as i64 - 1, &st)?;
        let m = rng.random_range(0..sweep_levels as i64);
        let n = rng.random_range(m..sweep_levels as i64);
        let mut pts = rand::seq::index::sample(&mut rng, sweep_points, 4).into_vec();
        pts.sort_unstable();
        let r = crossing_inequalities(&field, m, n, pts[0], pts[1], pts[2], pts[3])?;
        Ok((r.value, r.sample_size))
    })?;

    let mut table = Table::new(&["replica", "levels", "points", "dp", "enumeration", "mismatches"]);
    table.rows = rows;
    let mismatches: f64 = table.rows.iter().map(|r| r[5]).sum();
    let n = table.rows.len();
    let violations: f64 = sweep_rows.iter().map(|r| r.0).sum();
    let checked: usize = sweep_rows.iter().map(|r| r.1).sum();
    let mut out = Outcome::new(table);
    out.check("bruteforce", TestReport::new("dp vs enumeration mismatches", mismatches, 0.0, n, 0));
    out.check("crossing-inequalities", TestReport::new("crossing inequality violations", violations, 0.0, checked, 0));
    out.stat("crossing sweeps", sweeps as f64);
    Ok(out)
}
