//! Grids, grid functions and seeded Brownian environments.

use std::ops::RangeInclusive;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{config, domain, Result};
use crate::rng::{Lane, Stream, LEFT, RIGHT};

/// Uniform time grid containing 0. Times are `(j - zero) * step`, computed from
/// the index so long windows do not accumulate rounding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    step: f64,
    n_points: usize,
    zero: usize,
}

impl GridSpec {
    pub fn new(t_min: f64, t_max: f64, step: f64) -> Result<Self> {
        if !(step > 0.0) || !step.is_finite() {
            return Err(config(format!("step must be positive, got {step}")));
        }
        if !(t_min < 0.0 && t_max > 0.0) {
            return Err(config(format!(
                "window [{t_min}, {t_max}] must contain 0 in its interior"
            )));
        }
        let z = -t_min / step;
        let zero = z.round();
        if (z - zero).abs() > 1e-6 {
            return Err(config(format!("0 is not on the grid of step {step} from {t_min}")));
        }
        let span = (t_max - t_min) / step;
        if (span - span.round()).abs() > 1e-6 {
            return Err(config(format!("t_max = {t_max} is not on the grid of step {step}")));
        }
        let n_points = span.round() as usize + 1;
        if n_points < 3 {
            return Err(config("grid needs at least 3 points"));
        }
        Ok(GridSpec { step, n_points, zero: zero as usize })
    }

    pub fn symmetric(half_width: f64, step: f64) -> Result<Self> {
        Self::new(-half_width, half_width, step)
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn len(&self) -> usize {
        self.n_points
    }

    pub fn is_empty(&self) -> bool {
        self.n_points == 0
    }

    pub fn zero_index(&self) -> usize {
        self.zero
    }

    pub fn last_index(&self) -> usize {
        self.n_points - 1
    }

    pub fn time(&self, j: usize) -> f64 {
        (j as i64 - self.zero as i64) as f64 * self.step
    }

    pub fn t_min(&self) -> f64 {
        self.time(0)
    }

    pub fn t_max(&self) -> f64 {
        self.time(self.n_points - 1)
    }

    pub fn is_symmetric(&self) -> bool {
        2 * self.zero + 1 == self.n_points
    }

    /// Grid index of `t`, which must be a grid time.
    pub fn index_of(&self, t: f64) -> Result<usize> {
        let k = (t / self.step).round();
        let j = k + self.zero as f64;
        if !t.is_finite() || j < 0.0 || j > (self.n_points - 1) as f64 {
            return Err(domain(format!("time {t} outside [{}, {}]", self.t_min(), self.t_max())));
        }
        let j = j as usize;
        if (self.time(j) - t).abs() > 1e-6 * self.step {
            return Err(domain(format!("time {t} is not a grid time (step {})", self.step)));
        }
        Ok(j)
    }

    /// Largest grid index whose time is at most `t`, clamped to the grid.
    pub fn floor_index(&self, t: f64) -> usize {
        let k = (t / self.step + 1e-9).floor() + self.zero as f64;
        k.clamp(0.0, (self.n_points - 1) as f64) as usize
    }

    /// Same grid cut at index `end` (inclusive). `end` must lie right of zero.
    pub fn truncate(&self, end: usize) -> Result<GridSpec> {
        if end <= self.zero || end >= self.n_points {
            return Err(domain(format!("cannot cut grid at index {end}")));
        }
        Ok(GridSpec { n_points: end + 1, ..*self })
    }
}

/// Real function sampled on every point of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    spec: GridSpec,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(spec: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.len() {
            return Err(domain(format!(
                "{} values for a grid of {} points",
                values.len(),
                spec.len()
            )));
        }
        if let Some(j) = values.iter().position(|v| !v.is_finite()) {
            return Err(domain(format!("non-finite value at index {j}")));
        }
        Ok(GridFunction { spec, values })
    }

    pub(crate) fn from_vec_unchecked(spec: GridSpec, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), spec.len());
        GridFunction { spec, values }
    }

    pub fn from_fn(spec: GridSpec, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(spec, (0..spec.len()).map(|j| f(spec.time(j))).collect())
    }

    pub fn zeros(spec: GridSpec) -> Self {
        GridFunction { spec, values: vec![0.0; spec.len()] }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, j: usize) -> f64 {
        self.values[j]
    }

    pub fn at(&self, t: f64) -> Result<f64> {
        Ok(self.values[self.spec.index_of(t)?])
    }

    /// `f(t) - f(s)` at grid times.
    pub fn increment(&self, s: f64, t: f64) -> Result<f64> {
        let (i, j) = (self.spec.index_of(s)?, self.spec.index_of(t)?);
        Ok(self.values[j] - self.values[i])
    }

    pub fn increment_idx(&self, i: usize, j: usize) -> f64 {
        self.values[j] - self.values[i]
    }

    /// `t -> -f(-t)`; needs a grid symmetric about 0.
    pub fn reflect(&self) -> Result<Self> {
        if !self.spec.is_symmetric() {
            return Err(domain("reflection needs a window symmetric about 0"));
        }
        let values = self.values.iter().rev().map(|v| -v).collect();
        Ok(GridFunction { spec: self.spec, values })
    }

    /// Restriction to the grid cut at index `end`.
    pub fn truncate(&self, end: usize) -> Result<Self> {
        let spec = self.spec.truncate(end)?;
        Ok(GridFunction { spec, values: self.values[..=end].to_vec() })
    }
}

/// Two-sided Brownian motion with drift, 0 at time 0. The right half uses the
/// `RIGHT` side of `stream`, the left half the `LEFT` side.
pub fn sample_brownian(spec: &GridSpec, drift: f64, stream: &Stream) -> GridFunction {
    let n = spec.len();
    let z = spec.zero_index();
    let mean = drift * spec.step();
    let sd = spec.step().sqrt();
    let mut values = vec![0.0; n];

    let mut rng = stream.rng(RIGHT);
    for j in z + 1..n {
        let x: f64 = rng.sample(StandardNormal);
        values[j] = values[j - 1] + (mean + sd * x);
    }
    let mut rng = stream.rng(LEFT);
    for j in (0..z).rev() {
        let x: f64 = rng.sample(StandardNormal);
        values[j] = values[j + 1] - (mean + sd * x);
    }
    GridFunction { spec: *spec, values }
}

/// Indexed family of grid lines on consecutive levels.
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianField {
    spec: GridSpec,
    first: i64,
    lines: Vec<GridFunction>,
    drift: f64,
    seed: u64,
}

impl BrownianField {
    /// Field from explicit lines; level `first + k` is `lines[k]`.
    pub fn from_lines(first: i64, lines: Vec<GridFunction>) -> Result<Self> {
        let spec = match lines.first() {
            Some(l) => *l.spec(),
            None => return Err(config("a field needs at least one line")),
        };
        if lines.iter().any(|l| *l.spec() != spec) {
            return Err(domain("field lines live on different grids"));
        }
        Ok(BrownianField { spec, first, lines, drift: 0.0, seed: 0 })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn levels(&self) -> RangeInclusive<i64> {
        self.first..=self.first + self.lines.len() as i64 - 1
    }

    pub fn line(&self, level: i64) -> Option<&GridFunction> {
        let k = level.checked_sub(self.first)?;
        usize::try_from(k).ok().and_then(|k| self.lines.get(k))
    }

    pub fn lines(&self) -> &[GridFunction] {
        &self.lines
    }

    pub fn drift(&self) -> f64 {
        self.drift
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub(crate) fn require(&self, level: i64) -> Result<&GridFunction> {
        self.line(level)
            .ok_or_else(|| domain(format!("level {level} outside field levels {:?}", self.levels())))
    }

    /// The same field cut at grid index `end`.
    pub fn truncate(&self, end: usize) -> Result<Self> {
        let lines = self.lines.iter().map(|l| l.truncate(end)).collect::<Result<Vec<_>>>()?;
        Ok(BrownianField { spec: *lines[0].spec(), lines, ..*self })
    }
}

/// Independent driftless lines on `levels`, one field stream per level.
pub fn sample_field(spec: &GridSpec, levels: RangeInclusive<i64>, stream: &Stream) -> Result<BrownianField> {
    sample_field_with_drift(spec, levels, 0.0, stream)
}

pub fn sample_field_with_drift(
    spec: &GridSpec,
    levels: RangeInclusive<i64>,
    drift: f64,
    stream: &Stream,
) -> Result<BrownianField> {
    if levels.is_empty() {
        return Err(config("empty level range"));
    }
    let first = *levels.start();
    let lines = levels
        .map(|r| sample_brownian(spec, drift, &stream.lane(Lane::FIELD, r)))
        .collect();
    Ok(BrownianField { spec: *spec, first, lines, drift, seed: stream.seed() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> GridSpec {
        GridSpec::new(-2.0, 3.0, 0.25).unwrap()
    }

    #[test]
    fn grid_arithmetic() {
        let s = spec();
        assert_eq!(s.len(), 21);
        assert_eq!(s.zero_index(), 8);
        assert_eq!(s.time(8), 0.0);
        assert_eq!(s.t_min(), -2.0);
        assert_eq!(s.t_max(), 3.0);
        assert_eq!(s.index_of(1.25).unwrap(), 13);
        assert!(s.index_of(1.3).is_err());
        assert!(s.index_of(3.25).is_err());
        assert_eq!(s.floor_index(1.3), 13);
    }

    #[test]
    fn invalid_grids() {
        assert!(GridSpec::new(-1.0, 1.0, 0.0).is_err());
        assert!(GridSpec::new(0.0, 1.0, 0.1).is_err());
        assert!(GridSpec::new(-1.05, 1.0, 0.1).is_err());
        assert!(GridSpec::new(-0.1, 0.05, 0.1).is_err());
    }

    #[test]
    fn long_window_times_are_exact_multiples() {
        let s = GridSpec::new(-1000.0, 1000.0, 0.001).unwrap();
        assert_eq!(s.time(s.zero_index() + 123_456), 123_456.0 * 0.001);
        assert_eq!(s.time(0), -(s.time(s.last_index())));
    }

    #[test]
    fn brownian_anchored_and_reproducible() {
        let s = spec();
        let st = Stream::new(11, 0).lane(Lane::FIELD, 3);
        let a = sample_brownian(&s, 0.5, &st);
        assert_eq!(a.get(s.zero_index()), 0.0);
        assert_eq!(a, sample_brownian(&s, 0.5, &st));
        let b = sample_brownian(&s, 0.5, &Stream::new(12, 0).lane(Lane::FIELD, 3));
        assert_ne!(a, b);
    }

    #[test]
    fn increments_telescope() {
        let s = spec();
        let f = sample_brownian(&s, 0.0, &Stream::new(3, 0));
        assert_eq!(f.increment(1.0, 1.0).unwrap(), 0.0);
        assert_eq!(f.increment(-1.0, 2.0).unwrap(), -f.increment(2.0, -1.0).unwrap());
        let sum = f.increment(-1.0, 0.5).unwrap() + f.increment(0.5, 2.0).unwrap();
        assert!((sum - f.increment(-1.0, 2.0).unwrap()).abs() < 1e-12);
        assert!(f.increment(0.1, 1.0).is_err());
    }

    #[test]
    fn reflection_is_an_involution() {
        let s = GridSpec::symmetric(2.0, 0.1).unwrap();
        let f = sample_brownian(&s, 1.0, &Stream::new(5, 1));
        let g = f.reflect().unwrap();
        assert_eq!(g.at(0.0).unwrap(), 0.0);
        assert_eq!(g.at(0.7).unwrap(), -f.at(-0.7).unwrap());
        assert_eq!(g.reflect().unwrap(), f);
        assert!(sample_brownian(&spec(), 0.0, &Stream::new(1, 0)).reflect().is_err());
    }

    #[test]
    fn field_levels() {
        let s = spec();
        let field = sample_field(&s, -1..=2, &Stream::new(9, 4)).unwrap();
        assert_eq!(field.levels(), -1..=2);
        assert!(field.line(3).is_none());
        assert!(field.line(-2).is_none());
        assert_ne!(field.line(0).unwrap(), field.line(1).unwrap());
        assert_eq!(field.line(0).unwrap().at(0.0).unwrap(), 0.0);
        #[allow(clippy::reversed_empty_ranges)]
        let empty = 1..=0;
        assert!(sample_field(&s, empty, &Stream::new(9, 4)).is_err());
        let single = sample_field(&s, 0..=0, &Stream::new(9, 4)).unwrap();
        assert_eq!(single.lines().len(), 1);
    }

    #[test]
    fn grid_function_validation() {
        let s = spec();
        assert!(GridFunction::new(s, vec![0.0; 3]).is_err());
        let mut v = vec![0.0; s.len()];
        v[2] = f64::NAN;
        assert!(GridFunction::new(s, v).is_err());
    }
}
