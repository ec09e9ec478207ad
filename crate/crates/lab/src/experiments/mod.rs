//! Experiment registry. Each experiment validates its parameters, fans out
//! replicas over per-replica streams and reduces them to checks.

use blpp::distlib::TestReport;
use blpp::Stream;
use rayon::prelude::*;

use crate::config::Config;
use crate::error::{usage, Result};

mod busemann;
mod dist;
mod geodesic;
mod lpp;
mod queue;
mod stationary;

#[derive(Debug, Clone, Copy)]
pub struct Param {
    pub key: &'static str,
    pub default: &'static str,
    pub help: &'static str,
}

impl Param {
    pub const fn new(key: &'static str, default: &'static str, help: &'static str) -> Self {
        Param { key, default, help }
    }
}

pub struct Experiment {
    pub name: &'static str,
    pub about: &'static str,
    pub params: &'static [Param],
    pub run: fn(&Ctx) -> Result<Outcome>,
}

impl std::fmt::Debug for Experiment {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Experiment").field("name", &self.name).finish()
    }
}

#[derive(Debug, Clone)]
pub struct Check {
    pub id: &'static str,
    pub report: TestReport,
    /// Reported but does not decide the exit status.
    pub advisory: bool,
}

/// Per-replica rows.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }
}

#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub checks: Vec<Check>,
    pub table: Table,
    pub stats: Vec<(String, f64)>,
    pub notes: Vec<String>,
}

impl Outcome {
    pub fn new(table: Table) -> Self {
        Outcome { table, ..Default::default() }
    }

    pub fn check(&mut self, id: &'static str, report: TestReport) {
        self.checks.push(Check { id, report, advisory: false });
    }

    pub fn advisory(&mut self, id: &'static str, report: TestReport) {
        self.checks.push(Check { id, report, advisory: true });
    }

    pub fn stat(&mut self, name: impl Into<String>, value: f64) {
        self.stats.push((name.into(), value));
    }

    pub fn get_check(&self, id: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.id == id)
    }

    pub fn get_stat(&self, name: &str) -> Option<f64> {
        self.stats.iter().find(|(k, _)| k == name).map(|&(_, v)| v)
    }

    /// All non-advisory checks pass.
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.advisory || c.report.passed)
    }
}

/// What an experiment sees while running.
pub struct Ctx<'a> {
    pub cfg: &'a Config,
    pub pool: &'a rayon::ThreadPool,
    pub seed: u64,
}

impl Ctx<'_> {
    /// Runs `f` on replicas `0..n` of the master seed; results come back in
    /// replica order whatever the thread count.
    pub fn replicate<T, F>(&self, n: usize, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(u64, Stream) -> blpp::Result<T> + Sync,
    {
        self.replicate_from(self.seed, n, f)
    }

    /// Same, with another master seed (independent seed families).
    pub fn replicate_from<T, F>(&self, seed: u64, n: usize, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(u64, Stream) -> blpp::Result<T> + Sync,
    {
        let out: blpp::Result<Vec<T>> =
            self.pool.install(|| (0..n as u64).into_par_iter().map(|i| f(i, Stream::new(seed, i))).collect());
        Ok(out?)
    }

    /// Master seed of the `k`-th independent seed family.
    pub fn family(&self, k: u64) -> u64 {
        self.seed.wrapping_add(k.wrapping_mul(0x9E37_79B9_7F4A_7C15))
    }
}

pub static REGISTRY: &[Experiment] = &[
    lpp::SHAPE,
    lpp::BRUTEFORCE,
    queue::INVERT,
    queue::PITMAN,
    busemann::MARGINALS,
    busemann::CROSSCHECK,
    busemann::DUAL_FIELD,
    geodesic::DIRECTION,
    geodesic::CROSSING,
    geodesic::COALESCENCE,
    geodesic::NEAR_TIES,
    geodesic::MIDPOINT,
    stationary::BURKE,
    stationary::SANDWICH,
    dist::ARGMAX,
    dist::INCREMENT_CDF,
    dist::EXP_SUP,
];

pub fn find(name: &str) -> Result<&'static Experiment> {
    REGISTRY.iter().find(|e| e.name == name).ok_or_else(|| {
        let hint = suggest(name).map(|s| format!("; did you mean `{s}`?")).unwrap_or_default();
        usage(format!("unknown experiment `{name}`{hint}"))
    })
}

/// Closest registered name by edit distance, if reasonably close.
pub fn suggest(name: &str) -> Option<&'static str> {
    REGISTRY
        .iter()
        .map(|e| (strsim::levenshtein(name, e.name), e.name))
        .filter(|&(d, n)| d <= 3.max(n.len() / 3))
        .min()
        .map(|(_, n)| n)
}

pub fn list_experiments() -> String {
    let width = REGISTRY.iter().map(|e| e.name.len()).max().unwrap_or(0);
    REGISTRY.iter().map(|e| format!("{:width$}  {}\n", e.name, e.about)).collect()
}

/// Mean and sample standard error.
pub(crate) fn mean_se(xs: &[f64]) -> (f64, f64) {
    let m = blpp::distlib::mean(xs);
    let se = (blpp::distlib::variance(xs) / xs.len() as f64).sqrt();
    (m, se)
}

pub(crate) fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub(crate) fn fraction(flags: impl IntoIterator<Item = bool>) -> f64 {
    let (hit, n) = flags.into_iter().fold((0usize, 0usize), |(h, n), f| (h + usize::from(f), n + 1));
    hit as f64 / n.max(1) as f64
}

pub(crate) fn grid(t_min: f64, t_max: f64, step: f64) -> Result<blpp::GridSpec> {
    blpp::GridSpec::new(t_min, t_max, step).map_err(usage)
}

pub(crate) fn index(spec: &blpp::GridSpec, t: f64) -> Result<usize> {
    spec.index_of(t).map_err(usage)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_has_seventeen_unique_names() {
        assert_eq!(REGISTRY.len(), 17);
        let mut names: Vec<_> = REGISTRY.iter().map(|e| e.name).collect();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), 17);
        assert_eq!(list_experiments().lines().count(), 17);
    }

    #[test]
    fn every_experiment_declares_replicas_and_no_global_keys() {
        for e in REGISTRY {
            assert!(e.params.iter().any(|p| p.key == "replicas"), "{}", e.name);
            for g in crate::config::GLOBAL {
                assert!(e.params.iter().all(|p| p.key != g.key), "{} redeclares {}", e.name, g.key);
            }
        }
    }

    #[test]
    fn unknown_names_get_suggestions() {
        assert_eq!(suggest("shap"), Some("shape"));
        assert_eq!(suggest("burk"), Some("burke"));
        assert_eq!(suggest("dist-argmx"), Some("dist-argmax"));
        assert_eq!(suggest("zzzzzzzzzzzzzzzzzzzz"), None);
        let err = find("pittman").unwrap_err().to_string();
        assert!(err.contains("pitman"), "{err}");
    }

    #[test]
    fn median_and_fraction() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert_eq!(fraction([true, false, true, true]), 0.75);
    }
}
