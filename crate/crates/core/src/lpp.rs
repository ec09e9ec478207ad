//! Last-passage values, path energies and geodesic extraction on the grid.
//!
//! Energies are accumulated one grid step at a time in path order, starting
//! from 0. The dynamic programme builds every candidate value in that same
//! order, and rounding is monotone, so the table value at a point is exactly
//! the largest path energy and equals the energy of the backtracked path.

use crate::distlib::TestReport;
use crate::envgen::{BrownianField, GridFunction, GridSpec};
use crate::error::{domain, Result};

/// A point `(level, grid index)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Site {
    pub level: i64,
    pub index: usize,
}

impl Site {
    pub fn new(level: i64, index: usize) -> Self {
        Site { level, index }
    }

    /// Site at a grid time.
    pub fn at(spec: &GridSpec, level: i64, time: f64) -> Result<Self> {
        Ok(Site { level, index: spec.index_of(time)? })
    }
}

/// Tie-breaking rule for argmaxima: `Left` picks the smallest time, `Right`
/// the largest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Left,
    Right,
}

/// Up-right path from `(m, s)`: `jumps[0] = s` and `jumps[k]` is the time at
/// which the path leaves level `m + k - 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PassagePath {
    pub start_level: i64,
    pub jumps: Vec<usize>,
}

impl PassagePath {
    pub fn new(start_level: i64, jumps: Vec<usize>) -> Result<Self> {
        if jumps.len() < 2 {
            return Err(domain("a path needs a start time and at least one exit time"));
        }
        if jumps.windows(2).any(|w| w[0] > w[1]) {
            return Err(domain("jump times must be nondecreasing"));
        }
        Ok(PassagePath { start_level, jumps })
    }

    pub fn end_level(&self) -> i64 {
        self.start_level + self.jumps.len() as i64 - 2
    }

    /// Horizontal segment `[enter, exit]` on `level`, if the path visits it.
    pub fn segment(&self, level: i64) -> Option<(usize, usize)> {
        if level < self.start_level || level > self.end_level() {
            return None;
        }
        let k = (level - self.start_level) as usize;
        Some((self.jumps[k], self.jumps[k + 1]))
    }

    pub fn times(&self, spec: &GridSpec) -> Vec<f64> {
        self.jumps.iter().map(|&j| spec.time(j)).collect()
    }
}

fn line_energy(line: &GridFunction, from: usize, to: usize, mut acc: f64) -> f64 {
    let v = line.values();
    for j in from + 1..=to {
        acc += v[j] - v[j - 1];
    }
    acc
}

/// Sum of the path's level increments.
pub fn energy(field: &BrownianField, path: &PassagePath) -> Result<f64> {
    let n = field.spec().len();
    if path.jumps.iter().any(|&j| j >= n) {
        return Err(domain("path leaves the time window"));
    }
    let mut acc = 0.0;
    for (k, w) in path.jumps.windows(2).enumerate() {
        let line = field.require(path.start_level + k as i64)?;
        acc = line_energy(line, w[0], w[1], acc);
    }
    Ok(acc)
}

/// Last-passage values from `from` to every `(r, j)` with `r` in
/// `from.level..=top` and `j` in `from.index..=end`.
#[derive(Debug, Clone)]
pub struct LppTable<'a> {
    field: &'a BrownianField,
    from: Site,
    end: usize,
    rows: Vec<Vec<f64>>,
}

impl<'a> LppTable<'a> {
    pub fn build(field: &'a BrownianField, from: Site, top: i64, end: usize) -> Result<Self> {
        if top < from.level || end < from.index || end >= field.spec().len() {
            return Err(domain(format!("target (level {top}, index {end}) is not above/right of the start")));
        }
        let width = end - from.index + 1;
        let mut rows: Vec<Vec<f64>> = Vec::with_capacity((top - from.level + 1) as usize);
        for r in from.level..=top {
            let v = field.require(r)?.values();
            let mut row = vec![0.0; width];
            match rows.last() {
                None => {
                    for k in 1..width {
                        let j = from.index + k;
                        row[k] = row[k - 1] + (v[j] - v[j - 1]);
                    }
                }
                Some(below) => {
                    row[0] = below[0];
                    for k in 1..width {
                        let j = from.index + k;
                        row[k] = (row[k - 1] + (v[j] - v[j - 1])).max(below[k]);
                    }
                }
            }
            rows.push(row);
        }
        Ok(LppTable { field, from, end, rows })
    }

    pub fn from(&self) -> Site {
        self.from
    }

    pub fn top(&self) -> i64 {
        self.from.level + self.rows.len() as i64 - 1
    }

    pub fn end(&self) -> usize {
        self.end
    }

    pub fn value(&self, to: Site) -> Option<f64> {
        if to.level < self.from.level || to.level > self.top() || to.index < self.from.index || to.index > self.end {
            return None;
        }
        Some(self.rows[(to.level - self.from.level) as usize][to.index - self.from.index])
    }

    /// Row of values on `level`, indexed from the start index.
    pub fn row(&self, level: i64) -> &[f64] {
        &self.rows[(level - self.from.level) as usize]
    }

    /// A maximizing path to `to`. On exact ties `Right` leaves each level as
    /// late as possible and `Left` as early as possible.
    pub fn backtrack(&self, to: Site, side: Side) -> Result<PassagePath> {
        if self.value(to).is_none() {
            return Err(domain("backtrack target outside the table"));
        }
        let m = self.from.level;
        let mut jumps = vec![to.index];
        let (mut r, mut k) = ((to.level - m) as usize, to.index - self.from.index);
        while r > 0 {
            let here = self.rows[r][k];
            let up = self.rows[r - 1][k] == here;
            let along = k > 0 && {
                let v = self.field.require(m + r as i64)?.values();
                let j = self.from.index + k;
                self.rows[r][k - 1] + (v[j] - v[j - 1]) == here
            };
            let go_up = match side {
                Side::Right => up,
                Side::Left => up && !along,
            };
            if go_up {
                jumps.push(self.from.index + k);
                r -= 1;
            } else {
                debug_assert!(along);
                k -= 1;
            }
        }
        jumps.push(self.from.index);
        jumps.reverse();
        PassagePath::new(m, jumps)
    }
}

/// `L_{from, to}` and the table behind it.
pub fn last_passage<'a>(field: &'a BrownianField, from: Site, to: Site) -> Result<(f64, LppTable<'a>)> {
    if to.level < from.level || to.index < from.index {
        return Err(domain("start point is not below and left of the end point"));
    }
    let table = LppTable::build(field, from, to.level, to.index)?;
    let v = table.value(to).expect("target inside table");
    Ok((v, table))
}

pub fn backtrack(table: &LppTable<'_>, to: Site, side: Side) -> Result<PassagePath> {
    table.backtrack(to, side)
}

/// Last-passage values from every `(r, j)` with `r` in `bottom..=to.level`,
/// `j <= to.index`, into the fixed end point `to`.
#[derive(Debug, Clone)]
pub struct ToPointTable {
    to: Site,
    bottom: i64,
    rows: Vec<Vec<f64>>,
}

impl ToPointTable {
    pub fn build(field: &BrownianField, to: Site, bottom: i64) -> Result<Self> {
        if bottom > to.level || to.index >= field.spec().len() {
            return Err(domain("end point outside the field"));
        }
        let width = to.index + 1;
        let mut rows: Vec<Vec<f64>> = Vec::with_capacity((to.level - bottom + 1) as usize);
        for r in (bottom..=to.level).rev() {
            let v = field.require(r)?.values();
            let mut row = vec![0.0; width];
            match rows.last() {
                None => {
                    for j in (0..to.index).rev() {
                        row[j] = row[j + 1] + (v[j + 1] - v[j]);
                    }
                }
                Some(above) => {
                    row[to.index] = above[to.index];
                    for j in (0..to.index).rev() {
                        row[j] = (row[j + 1] + (v[j + 1] - v[j])).max(above[j]);
                    }
                }
            }
            rows.push(row);
        }
        rows.reverse();
        Ok(ToPointTable { to, bottom, rows })
    }

    pub fn to(&self) -> Site {
        self.to
    }

    pub fn value(&self, from: Site) -> Option<f64> {
        if from.level < self.bottom || from.level > self.to.level || from.index > self.to.index {
            return None;
        }
        Some(self.rows[(from.level - self.bottom) as usize][from.index])
    }

    pub fn row(&self, level: i64) -> &[f64] {
        &self.rows[(level - self.bottom) as usize]
    }
}

/// Result of a point-to-line problem.
#[derive(Debug, Clone)]
pub struct PointToLine {
    pub value: f64,
    pub path: PassagePath,
    /// The optimal terminal time sits on `t_max`.
    pub truncated: bool,
}

/// `max over s = s_{m-1} <= ... <= s_n` of `sum_r B_r(s_{r-1}, s_r) - boundary(s_n)`.
pub fn point_to_line(
    field: &BrownianField,
    from: Site,
    boundary: &GridFunction,
    n: i64,
    side: Side,
) -> Result<PointToLine> {
    if n < from.level {
        return Err(domain(format!("top level {n} below start level {}", from.level)));
    }
    if boundary.spec() != field.spec() {
        return Err(domain("boundary lives on a different grid"));
    }
    let end = field.spec().last_index();
    let table = LppTable::build(field, from, n, end)?;
    let row = table.row(n);
    let h = boundary.values();
    let mut best = f64::NEG_INFINITY;
    let mut arg = from.index;
    for (k, &l) in row.iter().enumerate() {
        let j = from.index + k;
        let val = l - h[j];
        if val > best || (val == best && side == Side::Right) {
            best = val;
            arg = j;
        }
    }
    let path = table.backtrack(Site::new(n, arg), side)?;
    Ok(PointToLine { value: best, path, truncated: arg == end })
}

/// Checks, for `s < t < big_t < u` on levels `m <= n`,
/// `B_m(s,t) <= L_{(m,s),(n,u)} - L_{(m,t),(n,u)} <= L_{(m,s),(n,T)} - L_{(m,t),(n,T)}`,
/// and for `m < n`,
/// `0 <= L_{(m,s),(n,t)} - L_{(m+1,s),(n,t)} <= L_{(m,s),(n,u)} - L_{(m+1,s),(n,u)}`.
/// Violations beyond `1e-9` are counted.
pub fn crossing_inequalities(
    field: &BrownianField,
    m: i64,
    n: i64,
    s: usize,
    t: usize,
    big_t: usize,
    u: usize,
) -> Result<TestReport> {
    if !(s < t && t < big_t && big_t < u) || m > n {
        return Err(domain("need s < t < T < u and m <= n"));
    }
    const TOL: f64 = 1e-9;
    let from_s = LppTable::build(field, Site::new(m, s), n, u)?;
    let from_t = LppTable::build(field, Site::new(m, t), n, u)?;
    let l = |tab: &LppTable<'_>, r: i64, j: usize| tab.value(Site::new(r, j)).expect("inside table");
    let line = field.require(m)?;
    let mut violations = 0;
    let mut checks = 0;

    let low = line.increment_idx(s, t);
    let mid = l(&from_s, n, u) - l(&from_t, n, u);
    let high = l(&from_s, n, big_t) - l(&from_t, n, big_t);
    violations += usize::from(low > mid + TOL) + usize::from(mid > high + TOL);
    checks += 2;

    if m < n {
        let from_s_up = LppTable::build(field, Site::new(m + 1, s), n, u)?;
        let a = l(&from_s, n, t) - l(&from_s_up, n, t);
        let b = l(&from_s, n, u) - l(&from_s_up, n, u);
        violations += usize::from(a < -TOL) + usize::from(a > b + TOL);
        checks += 2;
    }
    Ok(TestReport::new("crossing inequality violations", violations as f64, 0.0, checks, 0))
}
