use blpp::distlib::TestReport;
use blpp::envgen::sample_brownian;
use blpp::queueops::{invert_check, pitman_check, QueuePair};
use blpp::rng::Lane;

use super::{grid, Ctx, Experiment, Outcome, Param, Table};
use crate::error::Result;

pub const INVERT: Experiment = Experiment {
    name: "queue-invert",
    about: "reverse maps reconstruct arrivals, service and queue",
    params: &[
        Param::new("t-min", "-20", "window start"),
        Param::new("t-max", "20", "window end"),
        Param::new("step", "0.01", "grid step"),
        Param::new("lambda", "1", "drift of the arrival process over the service process"),
        Param::new("replicas", "100", "independent pairs"),
        Param::new("max-truncated", "0.05", "largest allowed truncated fraction"),
    ],
    run: invert,
};

fn invert(ctx: &Ctx) -> Result<Outcome> {
    let cfg = ctx.cfg;
    let spec = grid(cfg.f64("t-min")?, cfg.f64("t-max")?, cfg.positive("step")?)?;
    let lambda = cfg.positive("lambda")?;
    let max_truncated = cfg.f64("max-truncated")?;

    let rows = ctx.replicate(cfg.replicas()?, |i, st| {
        let z = sample_brownian(&spec, lambda, &st.lane(Lane::AUX, 0));
        let b = sample_brownian(&spec, 0.0, &st.lane(Lane::AUX, 1));
        let pair = QueuePair::new(z, b)?;
        let warned = pair.drift_warning().is_some();
        let inv = invert_check(&pair, None)?;
        Ok(vec![i as f64, inv.max_deviation, f64::from(u8::from(inv.truncated)), f64::from(u8::from(warned))])
    })?;

    let n = rows.len();
    let kept = rows.iter().filter(|r| r[2] == 0.0).count();
    let truncated = n - kept;
    let worst = rows.iter().filter(|r| r[2] == 0.0).map(|r| r[1]).fold(0.0, f64::max);
    let warnings = rows.iter().filter(|r| r[3] == 1.0).count();
    let mut table = Table::new(&["replica", "max_deviation", "truncated", "drift_warning"]);
    table.rows = rows;
    let mut out = Outcome::new(table);
    out.check("inversion", TestReport::new("inversion max deviation", worst, 1e-9, kept, truncated));
    out.check(
        "truncated-fraction",
        TestReport::new("truncated fraction", truncated as f64 / n as f64, max_truncated, n, 0),
    );
    out.stat("drift warnings", warnings as f64);
    Ok(out)
}

pub const PITMAN: Experiment = Experiment {
    name: "pitman",
    about: "2 max - f reconstructs the running maximum",
    params: &[
        Param::new("t-min", "-5", "window start"),
        Param::new("t-max", "5", "window end"),
        Param::new("step", "0.01", "grid step"),
        Param::new("drift", "-1", "drift of the path"),
        Param::new("replicas", "1000", "randomized sweeps"),
    ],
    run: pitman,
};

fn pitman(ctx: &Ctx) -> Result<Outcome> {
    let cfg = ctx.cfg;
    let spec = grid(cfg.f64("t-min")?, cfg.f64("t-max")?, cfg.positive("step")?)?;
    let drift = cfg.f64("drift")?;
    let rows = ctx.replicate(cfg.replicas()?, |i, st| {
        let f = sample_brownian(&spec, drift, &st.lane(Lane::AUX, 0));
        let r = pitman_check(&f);
        Ok(vec![i as f64, r.value, r.sample_size as f64, r.excluded as f64])
    })?;
    let violations: f64 = rows.iter().map(|r| r[1]).sum();
    let checked: f64 = rows.iter().map(|r| r[2]).sum();
    let flagged: f64 = rows.iter().map(|r| r[3]).sum();
    let mut table = Table::new(&["replica", "violations", "points", "flagged"]);
    table.rows = rows;
    let mut out = Outcome::new(table);
    out.check("pitman", TestReport::new("pitman violations", violations, 0.0, checked as usize, flagged as usize));
    Ok(out)
}
