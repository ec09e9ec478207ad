//! Resolved experiment configuration.
//!
//! Values are kept as strings keyed by flag name (`t-min`, `theta`, ...).
//! Precedence is built-in defaults, then a `key = value` file, then flags.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{io, usage, LabError, Result};
use crate::experiments::{self, Experiment, Param};

/// Keys every experiment accepts.
pub const GLOBAL: &[Param] = &[
    Param::new("seed", "", "master seed (default: $BLPP_SEED, else 0)"),
    Param::new("parallel", "", "worker threads (default: available cores)"),
    Param::new("out", "", "output directory (default: runs/<experiment>)"),
];

pub const SEED_VAR: &str = "BLPP_SEED";

#[derive(Debug, Clone)]
pub struct Config {
    experiment: &'static Experiment,
    values: BTreeMap<String, String>,
}

impl Config {
    /// Built-in defaults for `name`.
    pub fn new(name: &str) -> Result<Self> {
        let experiment = experiments::find(name)?;
        let mut values = BTreeMap::new();
        for p in experiment.params {
            values.insert(p.key.to_string(), p.default.to_string());
        }
        let seed = match std::env::var(SEED_VAR) {
            Ok(s) => {
                s.trim().parse::<u64>().map_err(|_| usage(format!("{SEED_VAR}={s} is not a seed")))?;
                s.trim().to_string()
            }
            Err(_) => "0".to_string(),
        };
        values.insert("seed".into(), seed);
        let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
        values.insert("parallel".into(), cores.to_string());
        values.insert("out".into(), format!("runs/{name}"));
        Ok(Config { experiment, values })
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match self.values.get_mut(key) {
            Some(v) => {
                *v = value.trim().to_string();
                Ok(())
            }
            None => Err(usage(format!("unknown parameter `{key}` for experiment `{}`", self.experiment.name))),
        }
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Result<Self> {
        self.set(key, &value.to_string())?;
        Ok(self)
    }

    /// Applies a `key = value` file. Blank lines and `#` comments are skipped;
    /// an `experiment` line must name this experiment.
    pub fn load_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| usage(format!("{}:{}: expected key = value", path.display(), n + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            if key == "experiment" {
                if value != self.experiment.name {
                    return Err(usage(format!(
                        "{} is for experiment `{value}`, not `{}`",
                        path.display(),
                        self.experiment.name
                    )));
                }
                continue;
            }
            self.set(key, value)?;
        }
        Ok(())
    }

    pub fn experiment(&self) -> &'static Experiment {
        self.experiment
    }

    pub fn get(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).unwrap_or_else(|| panic!("parameter {key} is not declared"))
    }

    fn parse<T: FromStr>(&self, key: &str, what: &str) -> Result<T> {
        let raw = self.get(key);
        raw.parse().map_err(|_| usage(format!("--{key} {raw}: expected {what}")))
    }

    /// Finite float.
    pub fn f64(&self, key: &str) -> Result<f64> {
        let x: f64 = self.parse(key, "a number")?;
        if x.is_finite() {
            Ok(x)
        } else {
            Err(usage(format!("--{key} must be finite")))
        }
    }

    pub fn positive(&self, key: &str) -> Result<f64> {
        let x = self.f64(key)?;
        if x > 0.0 {
            Ok(x)
        } else {
            Err(usage(format!("--{key} must be positive, got {x}")))
        }
    }

    pub fn usize(&self, key: &str) -> Result<usize> {
        self.parse(key, "a nonnegative integer")
    }

    pub fn count(&self, key: &str) -> Result<usize> {
        let n = self.usize(key)?;
        if n == 0 {
            return Err(usage(format!("--{key} must be at least 1")));
        }
        Ok(n)
    }

    pub fn i64(&self, key: &str) -> Result<i64> {
        self.parse(key, "an integer")
    }

    pub fn list_f64(&self, key: &str) -> Result<Vec<f64>> {
        self.get(key)
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| usage(format!("--{key}: `{s}` is not a number")))
            })
            .collect()
    }

    pub fn list_i64(&self, key: &str) -> Result<Vec<i64>> {
        self.get(key)
            .split(',')
            .map(|s| s.trim().parse::<i64>().map_err(|_| usage(format!("--{key}: `{s}` is not an integer"))))
            .collect()
    }

    pub fn seed(&self) -> Result<u64> {
        self.parse("seed", "an unsigned 64-bit seed")
    }

    pub fn replicas(&self) -> Result<usize> {
        self.count("replicas")
    }

    pub fn parallel(&self) -> Result<usize> {
        self.count("parallel")
    }

    pub fn out(&self) -> PathBuf {
        PathBuf::from(self.get("out"))
    }

    /// `key = value` lines, experiment first, then keys in sorted order.
    pub fn echo(&self) -> String {
        let mut s = format!("experiment = {}\n", self.experiment.name);
        for (k, v) in &self.values {
            s.push_str(&format!("{k} = {v}\n"));
        }
        s
    }

    pub fn write_echo(&self, dir: &Path) -> std::result::Result<(), LabError> {
        let path = dir.join("config.echo");
        std::fs::write(&path, self.echo()).map_err(io(path))
    }
}
