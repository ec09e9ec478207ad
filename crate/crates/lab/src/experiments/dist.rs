//! Monte Carlo checks of the closed-form laws for `f(s) = sqrt2 W(s) - lambda s`
//! on `s >= 0`: the supremum, its location, and `M(0) - M(t)` with
//! `M(t) = max_{s >= t} f(s)`.

use blpp::distlib::{argmax_tail, exp_sup_cdf, increment_cdf_d, ks_distance, TestReport, NOISE_SCALE};
use blpp::envgen::sample_brownian;
use blpp::rng::Lane;
use blpp::{GridSpec, Stream};

use super::{grid, index, Ctx, Experiment, Outcome, Param, Table};
use crate::error::{usage, Result};

/// Path values at grid indices `zero..`.
fn drifted_path(spec: &GridSpec, lambda: f64, st: &Stream) -> Vec<f64> {
    let w = sample_brownian(spec, -lambda / NOISE_SCALE, &st.lane(Lane::AUX, 0));
    w.values()[spec.zero_index()..].iter().map(|x| NOISE_SCALE * x).collect()
}

/// Leftmost argmax and the maximum.
fn sup(v: &[f64]) -> (usize, f64) {
    let mut best = (0, v[0]);
    for (j, &x) in v.iter().enumerate().skip(1) {
        if x > best.1 {
            best = (j, x);
        }
    }
    best
}

fn setup(ctx: &Ctx) -> Result<(f64, GridSpec)> {
    let cfg = ctx.cfg;
    let lambda = cfg.positive("lambda")?;
    let step = cfg.positive("step")?;
    let spec = grid(-step, cfg.positive("t-max")?, step)?;
    Ok((lambda, spec))
}

/// KS distance for a law with atoms: `cdf` is right-continuous and
/// `cdf_left(x)` its left limit.
pub(crate) fn ks_with_atoms(samples: &[f64], cdf: impl Fn(f64) -> f64, cdf_left: impl Fn(f64) -> f64) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    let mut i = 0;
    while i < xs.len() {
        let x = xs[i];
        let mut k = i;
        while k < xs.len() && xs[k] == x {
            k += 1;
        }
        d = d.max((cdf_left(x) - i as f64 / n).abs()).max((k as f64 / n - cdf(x)).abs());
        i = k;
    }
    d
}

fn ks_outcome(name: &str, table: Table, ks: f64, ks_max: f64) -> Outcome {
    let n = table.rows.len();
    let mut out = Outcome::new(table);
    out.check("ks", TestReport::new(name, ks, ks_max, n, 0));
    out
}

pub const ARGMAX: Experiment = Experiment {
    name: "dist-argmax",
    about: "location of the supremum against its closed-form tail",
    params: &[
        Param::new("lambda", "1", "drift"),
        Param::new("t-max", "30", "window end"),
        Param::new("step", "0.0001", "grid step"),
        Param::new("replicas", "10000", "independent paths"),
        Param::new("ks-max", "0.02", "largest allowed KS distance"),
    ],
    run: dist_argmax,
};

fn dist_argmax(ctx: &Ctx) -> Result<Outcome> {
    let (lambda, spec) = setup(ctx)?;
    let step = spec.step();
    let rows = ctx.replicate(ctx.cfg.replicas()?, |i, st| {
        let (j, m) = sup(&drifted_path(&spec, lambda, &st));
        Ok(vec![i as f64, j as f64 * step, m, f64::from(u8::from(j + spec.zero_index() == spec.last_index()))])
    })?;
    let mut table = Table::new(&["replica", "argmax", "max", "at_window_end"]);
    table.rows = rows;
    let xs = table.column("argmax").expect("column");
    let ks = ks_distance(&xs, |t| 1.0 - argmax_tail(lambda, t.max(0.0)).unwrap_or(1.0))?;
    Ok(ks_outcome("KS argmax vs closed form", table, ks, ctx.cfg.positive("ks-max")?))
}

pub const EXP_SUP: Experiment = Experiment {
    name: "exp-sup",
    about: "supremum against the exponential law",
    params: &[
        Param::new("lambda", "1", "drift"),
        Param::new("t-max", "20", "window end"),
        Param::new("step", "0.00005", "grid step"),
        Param::new("replicas", "10000", "independent paths"),
        Param::new("ks-max", "0.02", "largest allowed KS distance"),
    ],
    run: exp_sup,
};

fn exp_sup(ctx: &Ctx) -> Result<Outcome> {
    let (lambda, spec) = setup(ctx)?;
    let rows = ctx.replicate(ctx.cfg.replicas()?, |i, st| {
        let (_, m) = sup(&drifted_path(&spec, lambda, &st));
        Ok(vec![i as f64, m])
    })?;
    let mut table = Table::new(&["replica", "max"]);
    table.rows = rows;
    let xs = table.column("max").expect("column");
    let ks = ks_with_atoms(
        &xs,
        |x| exp_sup_cdf(lambda, x).unwrap_or(0.0),
        |x| if x <= 0.0 { 0.0 } else { exp_sup_cdf(lambda, x).unwrap_or(0.0) },
    );
    Ok(ks_outcome("KS supremum vs exponential", table, ks, ctx.cfg.positive("ks-max")?))
}

pub const INCREMENT_CDF: Experiment = Experiment {
    name: "dist-increment-cdf",
    about: "M(0) - M(t) against its closed-form CDF; consistency with the argmax tail",
    params: &[
        Param::new("lambda", "1", "drift"),
        Param::new("t", "1", "time of the increment"),
        Param::new("t-max", "20", "window end"),
        Param::new("step", "0.001", "grid step"),
        Param::new("replicas", "100000", "independent paths"),
        Param::new("ks-max", "0.02", "largest allowed KS distance"),
        Param::new("sweep-lambdas", "0.25,0.5,1,2,4", "drifts of the consistency sweep"),
        Param::new("sweep-times", "0.01,0.1,0.5,1,2,5,10", "times of the consistency sweep"),
    ],
    run: increment,
};

fn increment(ctx: &Ctx) -> Result<Outcome> {
    let cfg = ctx.cfg;
    let (lambda, spec) = setup(ctx)?;
    let t = cfg.positive("t")?;
    let tj = index(&spec, t)? - spec.zero_index();
    let lambdas = cfg.list_f64("sweep-lambdas")?;
    let times = cfg.list_f64("sweep-times")?;
    if lambdas.iter().chain(&times).any(|&x| x <= 0.0) {
        return Err(usage("sweep values must be positive"));
    }
    let rows = ctx.replicate(cfg.replicas()?, |i, st| {
        let f = drifted_path(&spec, lambda, &st);
        let (_, m0) = sup(&f);
        let (_, mt) = sup(&f[tj..]);
        Ok(vec![i as f64, m0 - mt])
    })?;
    let mut table = Table::new(&["replica", "increment"]);
    table.rows = rows;
    let xs = table.column("increment").expect("column");
    let cdf = |z: f64| if z < 0.0 { 0.0 } else { increment_cdf_d(lambda, t, z).unwrap_or(0.0) };
    let ks = ks_with_atoms(&xs, cdf, |z| if z <= 0.0 { 0.0 } else { cdf(z) });
    let mut out = ks_outcome("KS increment vs closed form", table, ks, cfg.positive("ks-max")?);

    let mut worst: f64 = 0.0;
    for &l in &lambdas {
        for &s in &times {
            worst = worst.max((increment_cdf_d(l, s, 0.0)? - argmax_tail(l, s)?).abs());
        }
    }
    out.check(
        "consistency",
        TestReport::new("|increment cdf at 0 - argmax tail|", worst, 1e-12, lambdas.len() * times.len(), 0),
    );
    out.stat("atom at zero", xs.iter().filter(|&&x| x == 0.0).count() as f64 / xs.len() as f64);
    out.stat("closed-form atom", argmax_tail(lambda, t)?);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ks_with_atoms_handles_point_mass() {
        // half the mass at 0, the rest uniform on (0, 1]
        let cdf = |x: f64| if x < 0.0 { 0.0 } else { (0.5 + 0.5 * x).min(1.0) };
        let left = |x: f64| if x <= 0.0 { 0.0 } else { cdf(x) };
        let mut xs = vec![0.0; 100];
        xs.extend((1..=100).map(|k| k as f64 / 100.0));
        assert!(ks_with_atoms(&xs, cdf, left) <= 0.005 + 1e-12);
        let shifted: Vec<f64> = (1..=200).map(|k| k as f64 / 200.0).collect();
        assert!((ks_with_atoms(&shifted, cdf, left) - 0.5025).abs() < 1e-12);
    }

    #[test]
    fn sup_takes_leftmost_argmax() {
        assert_eq!(sup(&[0.0, 2.0, 1.0, 2.0]), (1, 2.0));
        assert_eq!(sup(&[0.0, -1.0]), (0, 0.0));
    }
}
