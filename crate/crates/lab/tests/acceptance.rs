//! Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
//! fails. Pass criterion numbers as arguments to run a subset, e.g.
//! `cargo test --release --test acceptance -- 1 5 13`.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use blpp_lab::{execute, Config, Outcome};

const SEED: u64 = 20_261_016;

const SHAPE_LOW: f64 = 1.85;
const SHAPE_HIGH: f64 = 2.15;
const MARGINAL_THETAS: [f64; 3] = [0.5, 1.0, 4.0];
/// Grid step per unit of theta and window length in units of theta for the
/// recursion sampler.
const MARGINAL_STEP_PER_THETA: f64 = 1.0 / 8000.0;
const MARGINAL_WINDOW_PER_THETA: f64 = 40.0;

struct Verdict {
    pass: bool,
    detail: String,
}

fn config(name: &str, overrides: &[(&str, String)]) -> Config {
    let mut cfg = Config::new(name).expect("registered experiment").with("seed", SEED).expect("seed key");
    for (k, v) in overrides {
        cfg.set(k, v).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
    cfg
}

fn run(name: &str, overrides: &[(&str, String)]) -> (Outcome, Duration) {
    execute(&config(name, overrides)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

/// Named checks all pass; detail lists their values.
fn checks(out: &Outcome, ids: &[&str]) -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    for id in ids {
        let c = out.get_check(id).unwrap_or_else(|| panic!("no check {id}"));
        pass &= c.report.passed;
        parts.push(format!("{} = {:.4e} (<= {:.4e})", c.report.statistic, c.report.value, c.report.threshold));
    }
    Verdict { pass, detail: parts.join("; ") }
}

fn within(v: Verdict, elapsed: Duration, limit_s: f64) -> Verdict {
    let secs = elapsed.as_secs_f64();
    let ok = secs < limit_s;
    Verdict { pass: v.pass && ok, detail: format!("{}; runtime {secs:.1} s (< {limit_s} s){}", v.detail, if ok { "" } else { " EXCEEDED" }) }
}

fn c1() -> Verdict {
    let (out, t) = run("lpp-bruteforce", &[("sweeps", "0".into())]);
    within(checks(&out, &["bruteforce"]), t, 10.0)
}

fn c2() -> Verdict {
    let (out, t) = run("shape", &[("n", "100".into()), ("t", "1".into()), ("step", "0.05".into()), ("replicas", "200".into())]);
    let mean = out.get_stat("mean scaled lpp").expect("mean");
    let ok = (SHAPE_LOW..=SHAPE_HIGH).contains(&mean);
    within(Verdict { pass: ok, detail: format!("mean n^-1 L = {mean:.4} (in [{SHAPE_LOW}, {SHAPE_HIGH}])") }, t, 300.0)
}

fn c3() -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    let mut total = Duration::ZERO;
    for theta in MARGINAL_THETAS {
        let step = theta * MARGINAL_STEP_PER_THETA;
        let (out, t) = run(
            "busemann-marginals",
            &[
                ("theta", theta.to_string()),
                ("step", step.to_string()),
                ("t-min", (-10.0 * step).to_string()),
                ("t-max", (MARGINAL_WINDOW_PER_THETA * theta).to_string()),
                ("replicas", "10000".into()),
                ("ks-max", "0.02".into()),
                ("k-sigma", "4".into()),
            ],
        );
        total += t;
        let v = checks(&out, &["v-ks", "h-mean", "h-variance"]);
        pass &= v.pass;
        parts.push(format!("theta {theta}: {}", v.detail));
    }
    within(Verdict { pass, detail: parts.join(" | ") }, total, 600.0)
}

fn c4() -> Verdict {
    let (out, t) = run(
        "queue-invert",
        &[
            ("t-min", "-20".into()),
            ("t-max", "20".into()),
            ("step", "0.01".into()),
            ("lambda", "1".into()),
            ("replicas", "100".into()),
            ("max-truncated", "0.05".into()),
        ],
    );
    within(checks(&out, &["inversion", "truncated-fraction"]), t, 120.0)
}

fn c5() -> Verdict {
    let (pitman, t1) = run("pitman", &[("replicas", "1000".into())]);
    let (sweeps, t2) = run("lpp-bruteforce", &[("replicas", "1".into()), ("sweeps", "1000".into())]);
    let a = checks(&pitman, &["pitman"]);
    let b = checks(&sweeps, &["crossing-inequalities"]);
    within(Verdict { pass: a.pass && b.pass, detail: format!("{}; {}", a.detail, b.detail) }, t1 + t2, 60.0)
}

fn direction_run() -> &'static (Outcome, Duration) {
    static CELL: std::sync::OnceLock<(Outcome, Duration)> = std::sync::OnceLock::new();
    CELL.get_or_init(|| {
        run("geodesic-direction", &[("theta", "1".into()), ("levels", "50".into()), ("replicas", "200".into())])
    })
}

fn c6() -> Verdict {
    let (out, t) = direction_run();
    within(checks(out, &["energy", "lpp", "v-vanishes", "point-to-line", "point-to-line-path", "start-ordering"]), *t, 120.0)
}

fn c7() -> Verdict {
    let (out, _) = direction_run();
    let v = checks(out, &["direction"]);
    let frac = out.get_stat("fraction within tolerance").expect("fraction");
    Verdict { pass: v.pass, detail: format!("fraction within 30% = {frac:.3} (>= 0.9)") }
}

fn c8() -> Verdict {
    let (out, _) = run("geodesic-crossing", &[("theta", "1".into()), ("replicas", "1000".into())]);
    checks(&out, &["crossing"])
}

fn c9() -> Verdict {
    let (out, _) = run(
        "coalescence",
        &[("heights", "30,60".into()), ("gap", "2".into()), ("replicas", "200".into()), ("min-frequency", "0.9".into())],
    );
    let v = checks(&out, &["frequency", "height-trend"]);
    let f30 = out.get_stat("frequency at height 30").expect("30");
    let f60 = out.get_stat("frequency at height 60").expect("60");
    Verdict { pass: v.pass, detail: format!("frequency 30 levels = {f30:.3}, 60 levels = {f60:.3}; {}", v.detail) }
}

fn c10() -> Verdict {
    let (out, _) = run("burke", &[("lambda", "1".into()), ("levels", "3".into()), ("replicas", "10000".into())]);
    checks(&out, &["correlation", "negative-control"])
}

fn c11() -> Verdict {
    let (sup, _) = run("exp-sup", &[("replicas", "10000".into()), ("ks-max", "0.02".into())]);
    let (arg, _) = run("dist-argmax", &[("replicas", "10000".into()), ("ks-max", "0.02".into())]);
    let (inc, _) = run(
        "dist-increment-cdf",
        &[("lambda", "1".into()), ("t", "1".into()), ("replicas", "100000".into()), ("ks-max", "0.02".into())],
    );
    let parts = [checks(&sup, &["ks"]), checks(&arg, &["ks"]), checks(&inc, &["ks", "consistency"])];
    Verdict {
        pass: parts.iter().all(|v| v.pass),
        detail: parts.iter().map(|v| v.detail.as_str()).collect::<Vec<_>>().join("; "),
    }
}

fn c12() -> Verdict {
    let (out, _) = run(
        "midpoint",
        &[("theta", "1".into()), ("eta", "1".into()), ("n-values", "5,10,15,20,25".into()), ("replicas", "500".into())],
    );
    let v = checks(&out, &["trend", "endpoints"]);
    let curve: Vec<String> =
        [5, 10, 15, 20, 25].iter().map(|n| format!("{:.3}", out.get_stat(&format!("probability n = {n}")).unwrap())).collect();
    Verdict { pass: v.pass, detail: format!("curve [{}]; {}", curve.join(", "), v.detail) }
}

fn c13() -> Verdict {
    let dir = tempfile::tempdir().expect("tempdir");
    let mut summaries = Vec::new();
    for parallel in [1, 3] {
        let out = dir.path().join(format!("p{parallel}"));
        let cfg = Config::new("burke")
            .and_then(|c| c.with("lambda", 1))
            .and_then(|c| c.with("levels", 3))
            .and_then(|c| c.with("replicas", 10000))
            .and_then(|c| c.with("seed", 7))
            .and_then(|c| c.with("parallel", parallel))
            .and_then(|c| c.with("out", out.display()))
            .expect("config");
        blpp_lab::run(&cfg).expect("run");
        let read = |f: &str| std::fs::read(out.join(f)).expect("artifact");
        summaries.push((read("summary.csv"), read("replicas.csv")));
    }
    let same_summary = summaries[0].0 == summaries[1].0;
    let same_rows = summaries[0].1 == summaries[1].1;
    Verdict {
        pass: same_summary && same_rows,
        detail: format!("burke seed 7, parallel 1 vs 3: summary.csv identical = {same_summary}, replicas.csv identical = {same_rows}"),
    }
}

fn main() {
    let criteria: [(u32, &str, fn() -> Verdict); 13] = [
        (1, "brute-force LPP equivalence", c1),
        (2, "shape", c2),
        (3, "Busemann marginals", c3),
        (4, "queue inversion", c4),
        (5, "Pitman and crossing inequalities", c5),
        (6, "geodesic identities", c6),
        (7, "directedness", c7),
        (8, "non-crossing", c8),
        (9, "coalescence", c9),
        (10, "Burke property", c10),
        (11, "closed-form laws", c11),
        (12, "midpoint decay", c12),
        (13, "determinism", c13),
    ];
    let wanted: BTreeSet<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = Vec::new();
    for (id, name, f) in criteria {
        if !wanted.is_empty() && !wanted.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let v = f();
        let verdict = if v.pass { "PASS" } else { "FAIL" };
        println!("criterion {id:2} {verdict} {name}: {} [{:.1} s]", v.detail, start.elapsed().as_secs_f64());
        if !v.pass {
            failed.push(id);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all criteria passed");
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
