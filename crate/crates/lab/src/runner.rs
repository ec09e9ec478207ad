use std::path::PathBuf;
use std::time::{Duration, Instant};

use crate::config::Config;
use crate::error::{io, usage, Result};
use crate::experiments::{Ctx, Outcome};
use crate::output::{report_text, write_summary, write_table};

#[derive(Debug)]
pub struct RunSummary {
    pub outcome: Outcome,
    pub dir: PathBuf,
    pub elapsed: Duration,
}

impl RunSummary {
    /// 0 when every non-advisory check passes, 1 otherwise.
    pub fn exit_code(&self) -> u8 {
        u8::from(!self.outcome.passed())
    }
}

/// Runs the experiment in memory without touching the filesystem.
pub fn execute(cfg: &Config) -> Result<(Outcome, Duration)> {
    let seed = cfg.seed()?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cfg.parallel()?).build().map_err(usage)?;
    let ctx = Ctx { cfg, pool: &pool, seed };
    let start = Instant::now();
    let outcome = (cfg.experiment().run)(&ctx)?;
    Ok((outcome, start.elapsed()))
}

/// Runs the experiment and writes `config.echo`, `replicas.csv`,
/// `summary.csv` and `report.txt` under the output directory.
pub fn run(cfg: &Config) -> Result<RunSummary> {
    let (outcome, elapsed) = execute(cfg)?;
    let dir = cfg.out();
    std::fs::create_dir_all(&dir).map_err(io(&dir))?;
    cfg.write_echo(&dir)?;
    write_table(&dir.join("replicas.csv"), &outcome.table)?;
    write_summary(&dir.join("summary.csv"), &outcome)?;
    let report = dir.join("report.txt");
    std::fs::write(&report, report_text(cfg.experiment().name, &outcome)).map_err(io(&report))?;
    Ok(RunSummary { outcome, dir, elapsed })
}
