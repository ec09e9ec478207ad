//! Semi-infinite geodesics built from a Busemann stack.
//!
//! A northeast geodesic from `(m, t)` picks, level by level, a grid argmax of
//! `B_r(s) - h_{r+1}(s)` over `s >= tau_{r-1}`. A dual (southwest) geodesic in
//! the `x_dual` field picks an argmax of `h_{r-1}(s) - x_r(s)` over
//! `s <= tau*_r`. Left takes the smallest maximizing index, Right the largest.

use crate::busemann::{BusemannStack, Sampler};
use crate::distlib::TestReport;
use crate::envgen::{BrownianField, GridFunction, GridSpec};
use crate::error::{config, domain, Error, Result};
use crate::lpp::{LppTable, PassagePath, Side, Site};

#[derive(Debug, Clone)]
pub struct SemiInfGeodesic {
    pub start: Site,
    pub theta: f64,
    pub side: Side,
    /// `jumps[0] = t`, `jumps[k]` is the exit time from level `start.level + k - 1`.
    pub jumps: Vec<usize>,
    /// `truncated[k]` flags `jumps[k]` (always false for `k = 0`).
    pub truncated: Vec<bool>,
}

impl SemiInfGeodesic {
    /// Highest level `r` whose exit time is known and not truncated.
    pub fn top_level(&self) -> Option<i64> {
        let k = self.truncated.iter().rposition(|&f| !f)?;
        (k > 0).then(|| self.start.level + k as i64 - 1)
    }

    /// Exit time from level `r`.
    pub fn exit(&self, r: i64) -> Option<usize> {
        let k = usize::try_from(r - self.start.level + 1).ok()?;
        self.jumps.get(k).copied()
    }

    /// The finite path from `(start.level, t)` to `(n, exit(n))`.
    pub fn path_to(&self, n: i64) -> Result<PassagePath> {
        let k = usize::try_from(n - self.start.level + 2)
            .ok()
            .filter(|&k| k >= 2 && k <= self.jumps.len())
            .ok_or_else(|| domain(format!("level {n} outside the geodesic")))?;
        PassagePath::new(self.start.level, self.jumps[..k].to_vec())
    }

    /// Rows `level,jump_time,truncated`, starting with the start point at level `m - 1`.
    pub fn rows(&self, spec: &GridSpec) -> Vec<(i64, f64, bool)> {
        self.jumps
            .iter()
            .zip(&self.truncated)
            .enumerate()
            .map(|(k, (&j, &f))| (self.start.level + k as i64 - 1, spec.time(j), f))
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct DualGeodesic {
    pub start: Site,
    pub theta: f64,
    pub side: Side,
    /// `jumps[0] = t = tau*_m`, `jumps[k] = tau*_{m-k}`.
    pub jumps: Vec<usize>,
    pub truncated: Vec<bool>,
}

impl DualGeodesic {
    /// `tau*_r`.
    pub fn descent(&self, r: i64) -> Option<usize> {
        let k = usize::try_from(self.start.level - r).ok()?;
        self.jumps.get(k).copied()
    }

    /// Lowest level `r` with an untruncated `tau*_r`.
    pub fn bottom_level(&self) -> Option<i64> {
        let k = self.truncated.iter().rposition(|&f| !f)?;
        Some(self.start.level - k as i64)
    }

    /// The up-right path in the dual field from `(r, tau*_{r-1})` to `(m, t)`.
    pub fn path_from(&self, r: i64) -> Result<PassagePath> {
        let k = usize::try_from(self.start.level - r + 1)
            .ok()
            .filter(|&k| k >= 1 && k < self.jumps.len())
            .ok_or_else(|| domain(format!("level {r} outside the dual geodesic")))?;
        let mut jumps = self.jumps[..=k].to_vec();
        jumps.reverse();
        PassagePath::new(r, jumps)
    }
}

fn aligned(field: &BrownianField, stack: &BusemannStack) -> Result<()> {
    if field.spec() != stack.spec() {
        return Err(domain("field and stack live on different grids"));
    }
    Ok(())
}

/// Argmax of `f` over `range` with side tie-breaking.
fn argmax(f: impl Fn(usize) -> f64, range: std::ops::RangeInclusive<usize>, side: Side) -> usize {
    let mut best = f64::NEG_INFINITY;
    let mut arg = *range.start();
    for j in range {
        let v = f(j);
        if v > best || (v == best && side == Side::Right) {
            best = v;
            arg = j;
        }
    }
    arg
}

/// Sequential argmax geodesic from `start` up to the highest level the stack
/// and field allow. Levels whose argmax sits on `t_max` are flagged.
pub fn busemann_geodesic(
    field: &BrownianField,
    stack: &BusemannStack,
    start: Site,
    side: Side,
) -> Result<SemiInfGeodesic> {
    aligned(field, stack)?;
    let spec = stack.spec();
    if start.index >= spec.len() {
        return Err(domain("start point outside the window"));
    }
    stack.require(start.level + 1)?;
    field.require(start.level)?;
    let last = spec.last_index();
    let mut jumps = vec![start.index];
    let mut truncated = vec![false];
    let mut r = start.level;
    while let (Some(b), Some(above)) = (field.line(r), stack.slice(r + 1)) {
        let (bv, hv) = (b.values(), above.h.values());
        let from = *jumps.last().unwrap();
        let tau = argmax(|j| bv[j] - hv[j], from..=last, side);
        jumps.push(tau);
        truncated.push(tau == last);
        r += 1;
    }
    Ok(SemiInfGeodesic { start, theta: stack.theta, side, jumps, truncated })
}

/// Least-squares slope of exit time against level over untruncated levels.
pub fn geodesic_direction(g: &SemiInfGeodesic, spec: &GridSpec) -> Result<f64> {
    let pts: Vec<(f64, f64)> = (1..g.jumps.len())
        .filter(|&k| !g.truncated[k])
        .map(|k| ((g.start.level + k as i64 - 1) as f64, spec.time(g.jumps[k])))
        .collect();
    if pts.len() < 20 {
        return Err(Error::InsufficientData(format!("{} untruncated levels, need 20", pts.len())));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    Ok(sxy / sxx)
}

fn count_order_violations(low: &SemiInfGeodesic, high: &SemiInfGeodesic, checked: &mut usize) -> usize {
    let mut bad = 0;
    for k in 1..low.jumps.len().min(high.jumps.len()) {
        if low.truncated[k] || high.truncated[k] {
            break;
        }
        *checked += 1;
        bad += usize::from(low.jumps[k] > high.jumps[k]);
    }
    bad
}

/// For starts `s < t` on one level: `tau_(m,s) <= tau_(m,t)` on each side,
/// and `tau^L <= tau^R` from every start.
pub fn start_monotonicity_check(
    field: &BrownianField,
    stack: &BusemannStack,
    level: i64,
    starts: &[usize],
) -> Result<TestReport> {
    let mut sorted = starts.to_vec();
    sorted.sort_unstable();
    let mut geos = Vec::with_capacity(sorted.len());
    for &s in &sorted {
        let l = busemann_geodesic(field, stack, Site::new(level, s), Side::Left)?;
        let r = busemann_geodesic(field, stack, Site::new(level, s), Side::Right)?;
        geos.push((l, r));
    }
    let mut checked = 0;
    let mut bad = 0;
    for (l, r) in &geos {
        bad += count_order_violations(l, r, &mut checked);
    }
    for w in geos.windows(2) {
        bad += count_order_violations(&w[0].0, &w[1].0, &mut checked);
        bad += count_order_violations(&w[0].1, &w[1].1, &mut checked);
    }
    Ok(TestReport::new("start monotonicity violations", bad as f64, 0.0, checked, 0))
}

/// Coupled comparison of Left geodesics for `gamma < theta`. Both stacks must
/// be finite-`n` estimates from one field; `field_low`/`field_high` are that
/// field cut to each stack's grid.
pub fn direction_monotonicity_check(
    field_low: &BrownianField,
    low: &BusemannStack,
    field_high: &BrownianField,
    high: &BusemannStack,
    level: i64,
    starts: &[usize],
) -> Result<TestReport> {
    if low.sampler != Sampler::LimitEstimate || high.sampler != Sampler::LimitEstimate {
        return Err(config("direction monotonicity needs coupled finite-n stacks"));
    }
    if low.seed != high.seed || low.top != high.top || low.spec().zero_index() != high.spec().zero_index() {
        return Err(config("stacks are not built from one field"));
    }
    if !(low.theta < high.theta) {
        return Err(config("first stack must have the smaller direction"));
    }
    let mut checked = 0;
    let mut bad = 0;
    for &s in starts {
        let a = busemann_geodesic(field_low, low, Site::new(level, s), Side::Left)?;
        let b = busemann_geodesic(field_high, high, Site::new(level, s), Side::Left)?;
        bad += count_order_violations(&a, &b, &mut checked);
    }
    Ok(TestReport::new("direction monotonicity violations", bad as f64, 0.0, checked, 0))
}

/// Southwest geodesic in the dual field `dual` (levels as in the stack).
///
/// A descent from level `r` to `r - 1` happens where the queue `v_r` empties.
/// Right takes the last empty point at or before the current time. On the
/// grid the descent falls inside the cell after that point, so Left takes the
/// cell's right end: the first `u` from which `x_r` and `h_r` increments up to
/// the current time agree. Left therefore sits one step right of Right unless
/// the current time is itself an empty point.
pub fn dual_geodesic(dual: &BrownianField, stack: &BusemannStack, start: Site, side: Side) -> Result<DualGeodesic> {
    if dual.spec() != stack.spec() {
        return Err(domain("dual field and stack live on different grids"));
    }
    if start.index >= stack.spec().len() {
        return Err(domain("start point outside the window"));
    }
    dual.require(start.level)?;
    stack.require(start.level - 1)?;
    let mut jumps = vec![start.index];
    let mut truncated = vec![false];
    let mut r = start.level;
    while let (Some(_), Some(here), Some(_)) = (dual.line(r), stack.slice(r), stack.slice(r - 1)) {
        let v = here.v.values();
        let upto = *jumps.last().unwrap();
        let empty = |hi: usize| (0..hi).rev().find(|&u| v[u] <= 0.0);
        let tau = match side {
            Side::Right => (v[upto] <= 0.0).then_some(upto).or_else(|| empty(upto)),
            Side::Left => empty(upto).map(|u| u + 1),
        };
        jumps.push(tau.unwrap_or(0));
        truncated.push(tau.map_or(true, |t| t == 0));
        r -= 1;
    }
    Ok(DualGeodesic { start, theta: stack.theta, side, jumps, truncated })
}

/// The four first-step implications between a northeast geodesic from
/// `(m, s)` and a dual geodesic from `(m + 1, t)`, `s <= t`. Right/Left-dual
/// pairs check the first two, Left/Right-dual pairs the last two.
pub fn crossing_check(g: &SemiInfGeodesic, d: &DualGeodesic) -> Result<TestReport> {
    if g.side == d.side {
        return Err(config("geodesic and dual geodesic must have opposite sides"));
    }
    if d.start.level != g.start.level + 1 || g.start.index > d.start.index {
        return Err(config("need starts (m, s) and (m + 1, t) with s <= t"));
    }
    let (s, t) = (g.start.index, d.start.index);
    let m = g.start.level;
    let (Some(tau), Some(star)) = (g.exit(m), d.descent(m)) else {
        return Ok(TestReport::new("crossing violations", 0.0, 0.0, 0, 1));
    };
    if g.truncated[1] || d.truncated[1] {
        return Ok(TestReport::new("crossing violations", 0.0, 0.0, 0, 1));
    }
    let ok = match g.side {
        Side::Right => {
            if tau < t {
                tau < star
            } else {
                star <= s
            }
        }
        Side::Left => {
            if tau <= t {
                tau <= star
            } else {
                star < s
            }
        }
    };
    if !ok {
        log::debug!("crossing violation at level {m}: s={s} t={t} tau={tau} tau*={star}");
    }
    Ok(TestReport::new("crossing violations", f64::from(u8::from(!ok)), 0.0, 1, 0))
}

/// First level `r` such that both geodesics pass through the same point
/// `(r, tau_{r-1})` and agree at every level up to the highest level that is
/// untruncated for both (capped at `max_level`). `None` if they never merge.
pub fn coalescence_level(a: &SemiInfGeodesic, b: &SemiInfGeodesic, max_level: Option<i64>) -> Option<i64> {
    if a.start.level != b.start.level {
        return None;
    }
    let m = a.start.level;
    let mut top = a.top_level()?.min(b.top_level()?);
    if let Some(cap) = max_level {
        top = top.min(cap);
    }
    if top < m {
        return (a.jumps[0] == b.jumps[0]).then_some(m);
    }
    let last = (top - m + 1) as usize;
    let mut k = last;
    while k > 0 && a.jumps[k - 1] == b.jumps[k - 1] {
        k -= 1;
    }
    if a.jumps[last] != b.jumps[last] {
        return None;
    }
    Some(m + k as i64)
}

/// Right records `j` (`f_j >= f_k` for all `k > j`) whose running maximum to
/// the right comes within `epsilon` of `f_j`.
pub fn near_tie_scan(f: &GridFunction, epsilon: f64) -> Vec<usize> {
    let v = f.values();
    let n = v.len();
    let mut out = Vec::new();
    let mut right_max = f64::NEG_INFINITY;
    for j in (0..n).rev() {
        if v[j] >= right_max && v[j] - right_max <= epsilon {
            out.push(j);
        }
        right_max = right_max.max(v[j]);
    }
    out.reverse();
    out
}

/// Whether the Right point-to-point geodesic from `(-n, -n eta)` to
/// `(n, n theta)` has its level-`point.level` segment within one grid step of
/// `point.index`.
pub fn midpoint_passes(field: &BrownianField, theta: f64, eta: f64, point: Site, n: i64) -> Result<bool> {
    let spec = field.spec();
    let t_lo = -(n as f64) * eta;
    let t_hi = n as f64 * theta;
    if t_lo < spec.t_min() - 1e-9 || t_hi > spec.t_max() + 1e-9 {
        return Err(config(format!("rays reach [{t_lo}, {t_hi}], outside the window")));
    }
    if point.level < -n || point.level > n {
        return Ok(false);
    }
    let z = spec.zero_index() as i64;
    let idx = |t: f64| (z + (t / spec.step()).round() as i64) as usize;
    let from = Site::new(-n, idx(t_lo));
    let to = Site::new(n, idx(t_hi));
    let table = LppTable::build(field, from, n, to.index)?;
    let path = table.backtrack(to, Side::Right)?;
    let (a, b) = path.segment(point.level).expect("level inside path");
    Ok(a <= point.index + 1 && point.index <= b + 1)
}
