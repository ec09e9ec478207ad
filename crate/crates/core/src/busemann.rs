//! Busemann profiles at a fixed direction `theta`.
//!
//! Slice `m` holds the horizontal profile `h_m` (drift `1/sqrt(theta)`), the
//! vertical profile `v_m(t)` (increment from `(m-1, t)` to `(m, t)`) and the
//! dual line `x_m = R(h_m, B_{m-1})`.
//!
//! Two samplers: the queueing recursion `v_{m+1} = Q(h_{m+1}, B_m)`,
//! `h_m = D(h_{m+1}, B_m)` started from an independent drifted line far above
//! the targets, and the finite-`n` estimator
//! `L_{x, (n, n theta)} - L_{y, (n, n theta)}`.

use std::ops::RangeInclusive;

use crate::distlib::TestReport;
use crate::envgen::{sample_brownian, BrownianField, GridFunction, GridSpec};
use crate::error::{config, domain, Error, Result};
use crate::lpp::{Site, ToPointTable};
use crate::queueops::{self, departures, queue_q, unused_service};
use crate::rng::{Lane, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sampler {
    Recursion,
    LimitEstimate,
}

#[derive(Debug, Clone)]
pub struct BusemannSlice {
    pub theta: f64,
    pub level: i64,
    pub h: GridFunction,
    pub v: GridFunction,
    pub x_dual: GridFunction,
}

#[derive(Debug, Clone)]
pub struct BusemannStack {
    pub theta: f64,
    /// Consecutive levels, lowest first.
    pub slices: Vec<BusemannSlice>,
    /// Seed level of the recursion, or the terminal level of the estimator.
    pub top: i64,
    pub sampler: Sampler,
    pub seed: u64,
}

impl BusemannStack {
    pub fn spec(&self) -> &GridSpec {
        self.slices[0].h.spec()
    }

    pub fn levels(&self) -> RangeInclusive<i64> {
        let lo = self.slices[0].level;
        lo..=lo + self.slices.len() as i64 - 1
    }

    pub fn slice(&self, level: i64) -> Option<&BusemannSlice> {
        let k = level.checked_sub(self.slices[0].level)?;
        usize::try_from(k).ok().and_then(|k| self.slices.get(k))
    }

    pub(crate) fn require(&self, level: i64) -> Result<&BusemannSlice> {
        self.slice(level)
            .ok_or_else(|| domain(format!("level {level} outside stack levels {:?}", self.levels())))
    }

    /// Busemann increment from `(m, s)` to `(n, t)`, `m <= n`, assembled along
    /// the horizontal run on level `m` followed by the vertical run at `t`.
    pub fn increment(&self, from: Site, to: Site) -> Result<f64> {
        if to.level < from.level {
            return Err(domain("increments are assembled upward only"));
        }
        let mut acc = self.require(from.level)?.h.increment_idx(from.index, to.index);
        for r in from.level + 1..=to.level {
            acc += self.require(r)?.v.get(to.index);
        }
        Ok(acc)
    }
}

/// Default seed level: `max(10, ceil(4/theta))` above the highest target.
pub fn default_top(highest_target: i64, theta: f64) -> i64 {
    highest_target + (4.0 / theta).ceil().max(10.0) as i64
}

fn check_theta(theta: f64) -> Result<()> {
    if theta > 0.0 && theta.is_finite() {
        Ok(())
    } else {
        Err(config(format!("theta must be positive, got {theta}")))
    }
}

/// The recursion's starting line: a two-sided Brownian motion with drift
/// `1/sqrt(theta)` on its own stream.
pub fn seed_line(spec: &GridSpec, theta: f64, stream: &Stream, level: i64) -> GridFunction {
    sample_brownian(spec, 1.0 / theta.sqrt(), &stream.lane(Lane::BUSEMANN_SEED, level))
}

/// Recursion sampler. `field` must cover levels `targets.start() - 1 ..= top - 1`.
pub fn sample_busemann_recursion(
    field: &BrownianField,
    theta: f64,
    top: i64,
    targets: RangeInclusive<i64>,
    stream: &Stream,
) -> Result<BusemannStack> {
    check_theta(theta)?;
    if targets.is_empty() {
        return Err(config("empty target range"));
    }
    let (lo, hi) = (*targets.start(), *targets.end());
    if top <= hi {
        return Err(config(format!("seed level {top} must lie above the highest target {hi}")));
    }
    if top < hi + 10 {
        return Err(config(format!("seed level {top} must be at least 10 levels above target {hi}")));
    }
    let mut h = seed_line(field.spec(), theta, stream, top);
    let mut slices = Vec::with_capacity((hi - lo + 1) as usize);
    for r in (lo - 1..top).rev() {
        let b = field.require(r)?;
        let q = queue_q(&h, b)?;
        let level = r + 1;
        let next = departures(&h, &q);
        if level <= hi {
            let x_dual = unused_service(b, &q);
            slices.push(BusemannSlice { theta, level, h, v: q.values, x_dual });
        }
        h = next;
    }
    slices.reverse();
    Ok(BusemannStack { theta, slices, top, sampler: Sampler::Recursion, seed: stream.seed() })
}

/// Grid index of `n * theta`, or a window error when it falls past `t_max`.
pub fn terminal_index(spec: &GridSpec, n: i64, theta: f64) -> Result<usize> {
    let t = n as f64 * theta;
    if t > spec.t_max() + 1e-9 * spec.step() {
        return Err(Error::Window(format!("terminal time {t} lies beyond t_max = {}", spec.t_max())));
    }
    let j = ((t / spec.step()).round() as i64 + spec.zero_index() as i64).max(0) as usize;
    Ok(j.min(spec.last_index()))
}

/// `L_{x, (n, n theta)} - L_{y, (n, n theta)}`.
pub fn estimate_busemann_limit(field: &BrownianField, theta: f64, x: Site, y: Site, n: i64) -> Result<f64> {
    check_theta(theta)?;
    let end = terminal_index(field.spec(), n, theta)?;
    let table = ToPointTable::build(field, Site::new(n, end), x.level.min(y.level))?;
    let get = |p: Site| {
        table
            .value(p)
            .ok_or_else(|| domain(format!("point {p:?} is not below-left of the terminal point")))
    };
    Ok(get(x)? - get(y)?)
}

/// Finite-`n` stack on the grid cut at `n theta`; `field` must cover levels
/// `targets.start() - 1 ..= n`.
pub fn sample_busemann_limit(
    field: &BrownianField,
    theta: f64,
    n: i64,
    targets: RangeInclusive<i64>,
) -> Result<BusemannStack> {
    check_theta(theta)?;
    let (lo, hi) = (*targets.start(), *targets.end());
    if targets.is_empty() || hi >= n {
        return Err(config("targets must lie below the terminal level"));
    }
    let end = terminal_index(field.spec(), n, theta)?;
    let cut = field.truncate(end)?;
    let spec = *cut.spec();
    let table = ToPointTable::build(&cut, Site::new(n, end), lo - 1)?;
    let z = spec.zero_index();
    let mut slices = Vec::new();
    for m in lo..=hi {
        let row = table.row(m);
        let below = table.row(m - 1);
        let h = GridFunction::new(spec, row.iter().map(|l| row[z] - l).collect())?;
        let v = GridFunction::new(spec, below.iter().zip(row).map(|(a, b)| a - b).collect())?;
        let x_dual = queueops::queue_r(&h, cut.require(m - 1)?)?;
        slices.push(BusemannSlice { theta, level: m, h, v, x_dual });
    }
    Ok(BusemannStack { theta, slices, top: n, sampler: Sampler::LimitEstimate, seed: field.seed() })
}

/// The dual lines `x_m` as a field on the stack's levels.
pub fn dual_field(stack: &BusemannStack) -> Result<BrownianField> {
    if stack.slices.windows(2).any(|w| w[1].level != w[0].level + 1) {
        return Err(domain("stack levels are not consecutive"));
    }
    let first = stack.slices[0].level;
    BrownianField::from_lines(first, stack.slices.iter().map(|s| s.x_dual.clone()).collect())
}

/// Coupled finite-`n` comparison of directions `gamma < theta` on one field:
/// counts points where `v^gamma > v^theta` or `h^theta(s,t) > h^gamma(s,t)`
/// beyond `1e-9`. Increments are checked on consecutive grid points and from 0.
pub fn monotonicity_check(
    field: &BrownianField,
    gamma: f64,
    theta: f64,
    n: i64,
    levels: RangeInclusive<i64>,
) -> Result<TestReport> {
    if !(gamma < theta) {
        return Err(config(format!("need gamma < theta, got {gamma} and {theta}")));
    }
    let low = sample_busemann_limit(field, gamma, n, levels.clone())?;
    let high = sample_busemann_limit(field, theta, n, levels.clone())?;
    Ok(compare_stacks(&low, &high))
}

fn compare_stacks(low: &BusemannStack, high: &BusemannStack) -> TestReport {
    const TOL: f64 = 1e-9;
    let len = low.spec().len().min(high.spec().len());
    let z = low.spec().zero_index();
    let mut checked = 0;
    let mut violations = 0;
    for (a, b) in low.slices.iter().zip(&high.slices) {
        for j in 0..len {
            checked += 2;
            violations += usize::from(a.v.get(j) > b.v.get(j) + TOL);
            let (s, t) = if j < z { (j, z) } else { (z, j) };
            violations += usize::from(b.h.increment_idx(s, t) > a.h.increment_idx(s, t) + TOL);
            if j + 1 < len {
                checked += 1;
                violations += usize::from(b.h.increment_idx(j, j + 1) > a.h.increment_idx(j, j + 1) + TOL);
            }
        }
    }
    TestReport::new("busemann monotonicity violations", violations as f64, 0.0, checked, 0)
}

/// Checks `h_m = D'(h_{m-1}, x_m)`, `B_{m-1} = R'(h_{m-1}, x_m)` and
/// `v_m = Q'(h_{m-1}, x_m)` on the middle half of the grid for each pair of
/// consecutive slices. A level pair whose reverse suprema touch `t_min`
/// inside the interior is left out and counted as excluded.
pub fn reversal_duality_check(stack: &BusemannStack, field: &BrownianField) -> Result<TestReport> {
    let n = stack.spec().len();
    let interior = queueops::middle_half(n);
    let mut dev: f64 = 0.0;
    let mut excluded = 0;
    let mut checked = 0;
    for w in stack.slices.windows(2) {
        let (below, here) = (&w[0], &w[1]);
        let b = field.require(below.level)?;
        if b.spec() != below.h.spec() {
            return Err(domain("field and stack live on different grids"));
        }
        let rq = queueops::rqueue_q(&below.h, &here.x_dual)?;
        if interior.clone().any(|j| rq.truncated(j)) {
            excluded += 1;
            continue;
        }
        let h2 = queueops::rdepartures(&below.h, &rq);
        let b2 = queueops::runused_service(&here.x_dual, &rq);
        for j in interior.clone() {
            dev = dev
                .max((h2.get(j) - here.h.get(j)).abs())
                .max((b2.get(j) - b.get(j)).abs())
                .max((rq.values.get(j) - here.v.get(j)).abs());
        }
        checked += 1;
    }
    Ok(TestReport::new("reversal max deviation", dev, 1e-9, checked, excluded))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envgen::sample_field;

    fn setup(theta: f64, seed: u64) -> (BrownianField, BusemannStack) {
        let spec = GridSpec::new(-5.0, 40.0, 0.05).unwrap();
        let st = Stream::new(seed, 0);
        let top = default_top(3, theta);
        let field = sample_field(&spec, -1..=top - 1, &st).unwrap();
        let stack = sample_busemann_recursion(&field, theta, top, 0..=3, &st).unwrap();
        (field, stack)
    }

    #[test]
    fn recursion_relations_hold_exactly() {
        let (field, stack) = setup(1.0, 3);
        assert_eq!(stack.levels(), 0..=3);
        for w in stack.slices.windows(2) {
            let (below, above) = (&w[0], &w[1]);
            let b = field.line(below.level).unwrap();
            let q = queue_q(&above.h, b).unwrap();
            assert_eq!(q.values, above.v);
            assert_eq!(departures(&above.h, &q), below.h);
        }
        for s in &stack.slices {
            let z = s.h.spec().zero_index();
            assert_eq!(s.h.get(z), 0.0);
            assert_eq!(s.x_dual.get(z), 0.0);
            assert!(s.v.values().iter().all(|&v| v >= 0.0));
            let b = field.line(s.level).unwrap();
            for j in 1..s.h.len() {
                assert!(s.h.increment_idx(j - 1, j) >= b.increment_idx(j - 1, j) - 1e-9 || s.level == 3);
            }
        }
    }

    #[test]
    fn additivity_around_unit_squares() {
        let (_, stack) = setup(2.0, 4);
        for m in 0..3 {
            for (s, t) in [(10, 300), (100, 101), (500, 120)] {
                let a = stack.slice(m).unwrap().h.increment_idx(s, t) + stack.slice(m + 1).unwrap().v.get(t);
                let b = stack.slice(m + 1).unwrap().v.get(s) + stack.slice(m + 1).unwrap().h.increment_idx(s, t);
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn configuration_errors() {
        let spec = GridSpec::new(-1.0, 5.0, 0.1).unwrap();
        let st = Stream::new(1, 0);
        let field = sample_field(&spec, -1..=20, &st).unwrap();
        assert!(sample_busemann_recursion(&field, 1.0, 3, 0..=3, &st).is_err());
        assert!(sample_busemann_recursion(&field, 1.0, 12, 0..=3, &st).is_err());
        assert!(sample_busemann_recursion(&field, -1.0, 20, 0..=3, &st).is_err());
        assert!(estimate_busemann_limit(&field, 1.0, Site::new(0, 10), Site::new(0, 20), 10).is_err());
        assert!(monotonicity_check(&field, 2.0, 1.0, 4, 0..=1).is_err());
        assert_eq!(default_top(3, 0.25), 19);
        assert_eq!(default_top(3, 1.0), 13);
    }

    #[test]
    fn seed_line_drift() {
        let spec = GridSpec::new(-1.0, 400.0, 0.1).unwrap();
        let h = seed_line(&spec, 4.0, &Stream::new(5, 0), 0);
        let slope = h.get(spec.last_index()) / spec.t_max();
        assert!((slope - 0.5).abs() < 4.0 / 400f64.sqrt());
    }

    #[test]
    fn limit_estimator_basics() {
        let spec = GridSpec::new(-2.0, 30.0, 0.05).unwrap();
        let field = sample_field(&spec, -1..=20, &Stream::new(6, 0)).unwrap();
        let x = Site::new(0, 40);
        assert_eq!(estimate_busemann_limit(&field, 1.0, x, x, 20).unwrap(), 0.0);
        let y = Site::new(0, 100);
        let est = estimate_busemann_limit(&field, 1.0, x, y, 20).unwrap();
        assert!(est >= field.line(0).unwrap().increment_idx(40, 100) - 1e-9);
    }

    #[test]
    fn coupled_monotonicity() {
        let spec = GridSpec::new(-2.0, 90.0, 0.05).unwrap();
        let field = sample_field(&spec, -1..=40, &Stream::new(7, 0)).unwrap();
        let r = monotonicity_check(&field, 0.5, 2.0, 40, 0..=2).unwrap();
        assert!(r.passed, "{r:?}");
        assert!(r.sample_size > 1000);
        let same = sample_busemann_limit(&field, 1.0, 40, 0..=1).unwrap();
        assert_eq!(compare_stacks(&same, &same).value, 0.0);
    }

    #[test]
    fn dual_field_levels() {
        let (_, stack) = setup(1.0, 8);
        let x = dual_field(&stack).unwrap();
        assert_eq!(x.levels(), 0..=3);
        for l in x.lines() {
            assert_eq!(l.get(l.spec().zero_index()), 0.0);
        }
    }

    #[test]
    fn increment_assembly() {
        let (_, stack) = setup(1.0, 9);
        let a = Site::new(0, 200);
        let b = Site::new(2, 300);
        let direct = stack.slice(0).unwrap().h.increment_idx(200, 300)
            + stack.slice(1).unwrap().v.get(300)
            + stack.slice(2).unwrap().v.get(300);
        assert_eq!(stack.increment(a, b).unwrap(), direct);
        assert!(stack.increment(b, a).is_err());
    }
}
