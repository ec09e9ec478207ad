use blpp::busemann::{
    default_top, dual_field, estimate_busemann_limit, monotonicity_check, reversal_duality_check,
    sample_busemann_limit, sample_busemann_recursion,
};
use blpp::distlib::{
    correlation, exp_sup_cdf, gaussian_cdf, ks_distance, ks_two_sample, moment_check, variance_check, TestReport,
};
use blpp::envgen::sample_field;
use blpp::geodesics::direction_monotonicity_check;
use blpp::Site;

use super::{grid, index, Ctx, Experiment, Outcome, Param, Table};
use crate::error::{usage, Result};

fn top_for(cfg_top: i64, highest: i64, theta: f64) -> Result<i64> {
    if cfg_top == 0 {
        Ok(default_top(highest, theta))
    } else if cfg_top < highest + 10 {
        Err(usage(format!("--top {cfg_top} must be at least 10 above level {highest}")))
    } else {
        Ok(cfg_top)
    }
}

pub const MARGINALS: Experiment = Experiment {
    name: "busemann-marginals",
    about: "recursion sampler: v(0) against Exp(theta^-1/2), h(0,1) mean and variance",
    params: &[
        Param::new("theta", "1", "direction"),
        Param::new("level", "1", "level whose increments are recorded"),
        Param::new("top", "0", "seed level (0: level + max(10, ceil(4/theta)))"),
        Param::new("t-min", "-0.00125", "window start"),
        Param::new("t-max", "40", "window end (about 40 theta is needed)"),
        Param::new("step", "0.000125", "grid step"),
        Param::new("h-time", "1", "right end of the horizontal increment"),
        Param::new("replicas", "10000", "independent stacks"),
        Param::new("ks-max", "0.02", "largest allowed KS distance"),
        Param::new("k-sigma", "4", "moment tolerance in standard errors"),
    ],
    run: marginals,
};

fn marginals(ctx: &Ctx) -> Result<Outcome> {
    let cfg = ctx.cfg;
    let theta = cfg.positive("theta")?;
    let level = cfg.i64("level")?;
    let top = top_for(cfg.i64("top")?, level, theta)?;
    let spec = grid(cfg.f64("t-min")?, cfg.f64("t-max")?, cfg.positive("step")?)?;
    let h_time = cfg.positive("h-time")?;
    let one = index(&spec, h_time)?;
    let ks_max = cfg.positive("ks-max")?;
    let k_sigma = cfg.positive("k-sigma")?;
    let z = spec.zero_index();

    let rows = ctx.replicate(cfg.replicas()?, |i, st| {
        let field = sample_field(&spec, level - 1..=top - 1, &st)?;
        let stack = sample_busemann_recursion(&field, theta, top, level..=level, &st)?;
        let s = stack.slice(level).expect("target level");
        Ok(vec![i as f64, s.v.get(z), s.h.increment_idx(z, one)])
    })?;

    let mut table = Table::new(&["replica", "v0", "h"]);
    table.rows = rows;
    let v = table.column("v0").expect("column");
    let h = table.column("h").expect("column");
    let rate = 1.0 / theta.sqrt();
    let ks = ks_distance(&v, |x| exp_sup_cdf(rate, x).unwrap_or(0.0))?;
    let m = moment_check(&h, rate * h_time, h_time, k_sigma)?;
    let var = variance_check(&h, h_time, k_sigma)?;
    let n = v.len();
    let mut out = Outcome::new(table);
    out.check("v-ks", TestReport::new("KS v(0) vs exponential", ks, ks_max, n, 0));
    out.check("h-mean", TestReport { statistic: "|mean h - drift * t|".into(), ..m });
    out.check("h-variance", TestReport { statistic: "|variance h - t|".into(), ..var });
    out.stat("mean v(0)", blpp::distlib::mean(&v));
    out.stat("expected mean v(0)", 1.0 / rate);
    out.stat("mean h", blpp::distlib::mean(&h));
    out.stat("variance h", blpp::distlib::variance(&h));
    Ok(out)
}

pub const CROSSCHECK: Experiment = Experiment {
    name: "busemann-crosscheck",
    about: "recursion sampler against the finite-n limit estimate; coupled monotonicity",
    params: &[
        Param::new("theta", "1", "direction"),
        Param::new("n", "40", "terminal level of the limit estimate"),
        Param::new("t-min", "-2", "window start"),
        Param::new("t-max", "60", "window end"),
        Param::new("step", "0.005", "grid step"),
        Param::new("h-time", "1", "right end of the horizontal increment"),
        Param::new("replicas", "2000", "replicas per sampler"),
        Param::new("ks-max", "0.05", "largest allowed two-sample KS distance"),
        Param::new("coupled-replicas", "100", "fields for the coupled checks"),
        Param::new("coupled-n", "25", "terminal level of the coupled estimates"),
        Param::new("gamma", "0.5", "smaller direction of the coupled pair"),
        Param::new("theta-high", "2", "larger direction of the coupled pair"),
    ],
    run: crosscheck,
};

fn crosscheck(ctx: &Ctx) -> Result<Outcome> {
    let cfg = ctx.cfg;
    let theta = cfg.positive("theta")?;
    let n = cfg.count("n")? as i64;
    let spec = grid(cfg.f64("t-min")?, cfg.f64("t-max")?, cfg.positive("step")?)?;
    let one = index(&spec, cfg.positive("h-time")?)?;
    let ks_max = cfg.positive("ks-max")?;
    let coupled = cfg.usize("coupled-replicas")?;
    let coupled_n = cfg.count("coupled-n")? as i64;
    let gamma = cfg.positive("gamma")?;
    let theta_high = cfg.positive("theta-high")?;
    if !(gamma < theta_high) {
        return Err(usage("need --gamma < --theta-high"));
    }
    for (lvl, dir) in [(n, theta), (coupled_n, theta_high)] {
        if lvl as f64 * dir > spec.t_max() {
            return Err(usage(format!("terminal time {} lies beyond --t-max", lvl as f64 * dir)));
        }
    }
    if coupled_n < 3 {
        return Err(usage("--coupled-n must be at least 3"));
    }
    let z = spec.zero_index();
    let top = default_top(2, theta);
    let replicas = cfg.replicas()?;

    let recursion = ctx.replicate(replicas, |_, st| {
        let field = sample_field(&spec, -1..=top - 1, &st)?;
        let stack = sample_busemann_recursion(&field, theta, top, 0..=2, &st)?;
        let h = stack.slice(0).expect("level 0").h.increment_idx(z, one);
        let reversal = reversal_duality_check(&stack, &field)?;
        Ok((h, reversal))
    })?;
    let estimate = ctx.replicate_from(ctx.family(1), replicas, |_, st| {
        let field = sample_field(&spec, 0..=n, &st)?;
        estimate_busemann_limit(&field, theta, Site::new(0, z), Site::new(0, one), n)
    })?;
    let coupled_rows = ctx.replicate_from(ctx.family(2), coupled, |_, st| {
        let field = sample_field(&spec, -1..=coupled_n, &st)?;
        let busemann = monotonicity_check(&field, gamma, theta_high, coupled_n, 0..=2)?;
        let low = sample_busemann_limit(&field, gamma, coupled_n, 0..=coupled_n - 1)?;
        let high = sample_busemann_limit(&field, theta_high, coupled_n, 0..=coupled_n - 1)?;
        let fl = field.truncate(low.spec().last_index())?;
        let fh = field.truncate(high.spec().last_index())?;
        let starts: Vec<usize> = (0..5).map(|k| z + k * (one - z)).collect();
        let direction = direction_monotonicity_check(&fl, &low, &fh, &high, 0, &starts)?;
        Ok((busemann, direction))
    })?;

    let h_rec: Vec<f64> = recursion.iter().map(|r| r.0).collect();
    let mut table = Table::new(&["replica", "h_recursion", "h_estimate"]);
    table.rows = h_rec.iter().zip(&estimate).enumerate().map(|(i, (&a, &b))| vec![i as f64, a, b]).collect();
    let ks = ks_two_sample(&h_rec, &estimate)?;
    let mut out = Outcome::new(table);
    out.check("two-sampler-ks", TestReport::new("two-sample KS h recursion vs estimate", ks, ks_max, replicas, 0));
    if coupled > 0 {
        let sum = |pick: fn(&(TestReport, TestReport)) -> &TestReport, name: &str| {
            let v: f64 = coupled_rows.iter().map(|r| pick(r).value).sum();
            let c: usize = coupled_rows.iter().map(|r| pick(r).sample_size).sum();
            TestReport::new(name, v, 0.0, c, 0)
        };
        out.check("busemann-monotonicity", sum(|r| &r.0, "coupled busemann monotonicity violations"));
        out.check("direction-monotonicity", sum(|r| &r.1, "coupled geodesic direction violations"));
    }
    let dev = recursion.iter().map(|r| r.1.value).fold(0.0, f64::max);
    let kept: usize = recursion.iter().map(|r| r.1.sample_size).sum();
    let dropped: usize = recursion.iter().map(|r| r.1.excluded).sum();
    out.advisory("reversal-duality", TestReport::new("reversal duality max deviation", dev, 1e-9, kept, dropped));
    out.stat("mean h recursion", blpp::distlib::mean(&h_rec));
    out.stat("mean h estimate", blpp::distlib::mean(&estimate));
    Ok(out)
}

pub const DUAL_FIELD: Experiment = Experiment {
    name: "dual-field",
    about: "dual lines: Gaussian increments, uncorrelated across levels",
    params: &[
        Param::new("theta", "1", "direction"),
        Param::new("level", "1", "lower of the two dual levels"),
        Param::new("t-min", "-1", "window start"),
        Param::new("t-max", "20", "window end"),
        Param::new("step", "0.001", "grid step"),
        Param::new("steps", "1", "increment length in grid steps"),
        Param::new("replicas", "10000", "independent stacks"),
        Param::new("ks-max", "0.01", "largest allowed KS distance"),
    ],
    run: dual,
};

fn dual(ctx: &Ctx) -> Result<Outcome> {
    let cfg = ctx.cfg;
    let theta = cfg.positive("theta")?;
    let level = cfg.i64("level")?;
    let spec = grid(cfg.f64("t-min")?, cfg.f64("t-max")?, cfg.positive("step")?)?;
    let steps = cfg.count("steps")?;
    let ks_max = cfg.positive("ks-max")?;
    let z = spec.zero_index();
    let end = z + steps;
    if end > spec.last_index() {
        return Err(usage("--steps reaches past t-max"));
    }
    let top = default_top(level + 1, theta);

    let rows = ctx.replicate(cfg.replicas()?, |i, st| {
        let field = sample_field(&spec, level - 1..=top - 1, &st)?;
        let stack = sample_busemann_recursion(&field, theta, top, level..=level + 1, &st)?;
        let x = dual_field(&stack)?;
        let inc = |r: i64| x.line(r).expect("dual level").increment_idx(z, end);
        Ok(vec![i as f64, inc(level), inc(level + 1)])
    })?;
    let mut table = Table::new(&["replica", "x_low", "x_high"]);
    table.rows = rows;
    let a = table.column("x_low").expect("column");
    let b = table.column("x_high").expect("column");
    let n = a.len();
    let cdf = gaussian_cdf(0.0, steps as f64 * spec.step());
    let mut out = Outcome::new(table);
    out.check("ks-low", TestReport::new("KS lower dual increment vs normal", ks_distance(&a, &cdf)?, ks_max, n, 0));
    out.check("ks-high", TestReport::new("KS upper dual increment vs normal", ks_distance(&b, &cdf)?, ks_max, n, 0));
    out.check(
        "correlation",
        TestReport::new("|correlation| across levels", correlation(&a, &b).abs(), 4.0 / (n as f64).sqrt(), n, 0),
    );
    Ok(out)
}
