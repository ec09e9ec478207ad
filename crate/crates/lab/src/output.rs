//! CSV and report writing. Numbers are printed like C's `%.12g`.

use std::path::Path;

use crate::error::{io, LabError, Result};
use crate::experiments::{Outcome, Table};

/// `%.12g`: 12 significant digits, trailing zeros dropped, exponent form
/// outside `1e-4 <= |x| < 1e12`.
pub fn fmt_g(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{:.11e}", x);
    let (mant, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("exponent digits");
    if !(-4..12).contains(&exp) {
        let mant = trim_zeros(mant);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{mant}e{sign}{:02}", exp.abs());
    }
    let decimals = (11 - exp).max(0) as usize;
    trim_zeros(&format!("{:.*}", decimals, x)).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    let file = std::fs::File::create(path).map_err(io(path))?;
    Ok(csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(file))
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> LabError + '_ {
    move |e| LabError::Io { path: path.to_path_buf(), source: e.into() }
}

pub fn write_table(path: &Path, table: &Table) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(&table.header).map_err(csv_err(path))?;
    for row in &table.rows {
        w.write_record(row.iter().map(|&x| fmt_g(x))).map_err(csv_err(path))?;
    }
    w.flush().map_err(io(path))
}

pub const SUMMARY_HEADER: [&str; 8] =
    ["check", "statistic", "value", "threshold", "sample_size", "excluded", "advisory", "pass"];

pub fn write_summary(path: &Path, outcome: &Outcome) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(SUMMARY_HEADER).map_err(csv_err(path))?;
    for c in &outcome.checks {
        let r = &c.report;
        w.write_record([
            c.id.to_string(),
            r.statistic.clone(),
            fmt_g(r.value),
            fmt_g(r.threshold),
            r.sample_size.to_string(),
            r.excluded.to_string(),
            c.advisory.to_string(),
            r.passed.to_string(),
        ])
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(io(path))
}

pub fn report_text(name: &str, outcome: &Outcome) -> String {
    let mut s = format!("experiment {name}\n\n");
    for c in &outcome.checks {
        let r = &c.report;
        let verdict = match (r.passed, c.advisory) {
            (true, _) => "PASS",
            (false, true) => "WARN",
            (false, false) => "FAIL",
        };
        s.push_str(&format!(
            "{verdict} {}: {} (threshold {}, n = {}, excluded = {}){}\n",
            r.statistic,
            fmt_g(r.value),
            fmt_g(r.threshold),
            r.sample_size,
            r.excluded,
            if c.advisory { " [advisory]" } else { "" },
        ));
    }
    if !outcome.stats.is_empty() {
        s.push('\n');
        for (k, v) in &outcome.stats {
            s.push_str(&format!("{k} = {}\n", fmt_g(*v)));
        }
    }
    if !outcome.notes.is_empty() {
        s.push('\n');
        for n in &outcome.notes {
            s.push_str(&format!("note: {n}\n"));
        }
    }
    s.push_str(&format!("\nresult: {}\n", if outcome.passed() { "pass" } else { "fail" }));
    s
}
