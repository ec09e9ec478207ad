//! `blpp-lab [run] <experiment> [--flag value]...`, `blpp-lab list`,
//! `blpp-lab lpp [--flag value]...`.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use blpp::envgen::sample_field;
use blpp::lpp::{last_passage, PassagePath};
use blpp::{GridSpec, Side, Site, Stream};
use clap::parser::ValueSource;
use clap::{Arg, ArgMatches, Command};

use crate::config::{Config, GLOBAL, SEED_VAR};
use crate::error::{io, usage, LabError, Result};
use crate::experiments::{list_experiments, Experiment, REGISTRY};
use crate::output::fmt_g;

fn flag(key: &'static str, help: impl Into<String>) -> Arg {
    Arg::new(key).long(key).value_name("VALUE").num_args(1).help(help.into()).allow_hyphen_values(true)
}

fn experiment_command(e: &'static Experiment) -> Command {
    let mut cmd = Command::new(e.name).about(e.about);
    for p in e.params.iter().chain(GLOBAL) {
        let help = if p.default.is_empty() {
            p.help.to_string()
        } else {
            format!("{} [default: {}]", p.help, p.default)
        };
        cmd = cmd.arg(flag(p.key, help));
    }
    cmd.arg(flag("config", "key = value file applied before the flags"))
}

const LPP_PARAMS: &[(&str, &str, &str)] = &[
    ("levels", "4", "number of levels"),
    ("t-min", "-1", "window start"),
    ("t-max", "2", "end time on the top level"),
    ("step", "0.1", "grid step"),
    ("seed", "", "master seed (default: $BLPP_SEED, else 0)"),
    ("out", "path.csv", "where to write the path"),
];

fn lpp_command() -> Command {
    let mut cmd = Command::new("lpp").about("last passage from (0, 0) to the top level at t-max, with its path");
    for &(key, default, help) in LPP_PARAMS {
        cmd = cmd.arg(flag(key, help).default_value(if default.is_empty() { None } else { Some(default) }));
    }
    cmd
}

pub fn command() -> Command {
    let experiments: Vec<Command> = REGISTRY.iter().map(experiment_command).collect();
    Command::new("blpp-lab")
        .about("Experiments on grid Brownian last-passage percolation")
        .subcommand_required(true)
        .subcommand(Command::new("list").about("list the experiments"))
        .subcommand(
            Command::new("run").about("run an experiment").subcommand_required(true).subcommands(experiments.clone()),
        )
        .subcommand(lpp_command())
        .subcommands(experiments)
}

/// Config for an experiment subcommand: defaults, then `--config`, then flags.
pub fn config_from(name: &str, m: &ArgMatches) -> Result<Config> {
    let mut cfg = Config::new(name)?;
    if let Some(path) = m.get_one::<String>("config") {
        cfg.load_file(&PathBuf::from(path))?;
    }
    let e = cfg.experiment();
    for p in e.params.iter().chain(GLOBAL) {
        if m.value_source(p.key) == Some(ValueSource::CommandLine) {
            let v = m.get_one::<String>(p.key).expect("flag value");
            cfg.set(p.key, v)?;
        }
    }
    Ok(cfg)
}

fn run_experiment(name: &str, m: &ArgMatches, out: &mut dyn Write) -> Result<u8> {
    let cfg = config_from(name, m)?;
    let summary = crate::run(&cfg)?;
    for c in &summary.outcome.checks {
        let r = &c.report;
        let verdict = match (r.passed, c.advisory) {
            (true, _) => "PASS",
            (false, true) => "WARN",
            (false, false) => "FAIL",
        };
        let _ = writeln!(out, "{verdict} {}: {} (threshold {})", r.statistic, fmt_g(r.value), fmt_g(r.threshold));
    }
    let _ = writeln!(out, "wrote {} in {:.1} s", summary.dir.display(), summary.elapsed.as_secs_f64());
    Ok(summary.exit_code())
}

fn path_csv(path: &PassagePath, spec: &GridSpec) -> String {
    let mut s = String::from("level,jump_time\n");
    for (k, t) in path.times(spec).iter().enumerate().skip(1) {
        s.push_str(&format!("{},{}\n", path.start_level + k as i64 - 1, fmt_g(*t)));
    }
    s
}

fn run_lpp(m: &ArgMatches, out: &mut dyn Write) -> Result<u8> {
    let get = |k: &str| m.get_one::<String>(k).map(String::as_str);
    let num = |k: &str| -> Result<f64> {
        let raw = get(k).expect("default");
        raw.parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(|| usage(format!("--{k} {raw}: expected a number")))
    };
    let levels: i64 = get("levels").expect("default").parse().map_err(|_| usage("--levels: expected an integer"))?;
    if levels < 1 {
        return Err(usage("--levels must be at least 1"));
    }
    let seed: u64 = match get("seed").map(str::to_string).or_else(|| std::env::var(SEED_VAR).ok()) {
        Some(s) => s.trim().parse().map_err(|_| usage(format!("seed `{s}` is not an unsigned integer")))?,
        None => 0,
    };
    let spec = GridSpec::new(num("t-min")?, num("t-max")?, num("step")?).map_err(usage)?;
    let end = spec.index_of(spec.t_max()).map_err(usage)?;
    let field = sample_field(&spec, 0..=levels - 1, &Stream::new(seed, 0))?;
    let from = Site::new(0, spec.zero_index());
    let to = Site::new(levels - 1, end);
    let (value, table) = last_passage(&field, from, to)?;
    let path = table.backtrack(to, Side::Right)?;
    let file = PathBuf::from(get("out").expect("default"));
    std::fs::write(&file, path_csv(&path, &spec)).map_err(io(&file))?;
    let _ = writeln!(out, "last passage {} (path in {})", fmt_g(value), file.display());
    Ok(0)
}

/// Parses `args` (program name first), runs, and returns the exit code.
pub fn main_with(args: impl IntoIterator<Item = impl Into<OsString> + Clone>, out: &mut dyn Write) -> u8 {
    let matches = match command().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return e.exit_code() as u8;
        }
    };
    let result = match matches.subcommand() {
        Some(("list", _)) => {
            let _ = write!(out, "{}", list_experiments());
            Ok(0)
        }
        Some(("lpp", m)) => run_lpp(m, out),
        Some(("run", m)) => {
            let (name, sub) = m.subcommand().expect("subcommand required");
            run_experiment(name, sub, out)
        }
        Some((name, m)) => run_experiment(name, m, out),
        None => unreachable!("subcommand required"),
    };
    result.unwrap_or_else(|e: LabError| {
        eprintln!("blpp-lab: {e}");
        e.exit_code()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(args: &[&str]) -> (u8, String) {
        let mut buf = Vec::new();
        let code = main_with(std::iter::once("blpp-lab").chain(args.iter().copied()), &mut buf);
        (code, String::from_utf8(buf).unwrap())
    }

    #[test]
    fn command_is_well_formed() {
        command().debug_assert();
    }

    #[test]
    fn list_prints_seventeen() {
        let (code, text) = run(&["list"]);
        assert_eq!(code, 0);
        assert_eq!(text.lines().count(), 17);
    }

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(run(&["shap"]).0, 2);
        assert_eq!(run(&["run", "shap"]).0, 2);
        assert_eq!(run(&["shape", "--theta", "1"]).0, 2);
        assert_eq!(run(&["shape", "--n", "abc", "--out", "/nonexistent/never"]).0, 2);
        assert_eq!(run(&[]).0, 2);
    }

    #[test]
    fn flags_override_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("cfg");
        std::fs::write(&file, "n = 7\nt = 3\n").unwrap();
        let m = command()
            .try_get_matches_from(["blpp-lab", "shape", "--config", file.to_str().unwrap(), "--n", "9"])
            .unwrap();
        let cfg = config_from("shape", m.subcommand_matches("shape").unwrap()).unwrap();
        assert_eq!(cfg.get("n"), "9");
        assert_eq!(cfg.get("t"), "3");
        assert_eq!(cfg.get("step"), "0.05");
    }

    #[test]
    fn small_run_writes_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("shape");
        let (code, text) = run(&[
            "run", "shape", "--n", "5", "--replicas", "4", "--step", "0.1", "--seed", "3", "--parallel", "2",
            "--tolerance", "100", "--out", out.to_str().unwrap(),
        ]);
        assert_eq!(code, 0, "{text}");
        for f in ["config.echo", "replicas.csv", "summary.csv", "report.txt"] {
            assert!(out.join(f).exists(), "{f}");
        }
        let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
        assert!(summary.starts_with("check,statistic,value,threshold,sample_size,excluded,advisory,pass\n"));
        assert!(!summary.contains('\r'));
        let echo = std::fs::read_to_string(out.join("config.echo")).unwrap();
        assert!(echo.contains("n = 5\n") && echo.contains("seed = 3\n"));
    }

    #[test]
    fn failing_check_exits_one() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("shape");
        let (code, _) = run(&[
            "shape", "--n", "3", "--replicas", "2", "--step", "0.1", "--tolerance", "1e-12", "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code, 1);
    }

    #[test]
    fn lpp_writes_path() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("p.csv");
        let (code, text) = run(&["lpp", "--levels", "3", "--t-max", "1", "--seed", "1", "--out", out.to_str().unwrap()]);
        assert_eq!(code, 0);
        assert!(text.starts_with("last passage "));
        let csv = std::fs::read_to_string(out).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "level,jump_time");
        assert_eq!(lines.len(), 4);
        assert!(lines[3].starts_with("2,1"));
    }
}
