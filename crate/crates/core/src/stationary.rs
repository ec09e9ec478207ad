//! Increment-stationary LPP as reverse Brownian queues in series.
//!
//! `Y_0 = -B_0 + lambda t`; for `m >= 1`, `q_m = Q'(Y_{m-1}, B_m)`,
//! `Y_m = D'(Y_{m-1}, B_m)` and `W_{m-1} = R'(Y_{m-1}, B_m)`.

use crate::distlib::{correlation, distance_correlation, TestReport};
use crate::envgen::{BrownianField, GridFunction};
use crate::error::{config, Result};
use crate::lpp::{Site, ToPointTable};
use crate::queueops::{rdepartures, rqueue_q, runused_service};

#[derive(Debug, Clone)]
pub struct StationaryStack {
    pub lambda: f64,
    /// `Y_0..=Y_n`.
    pub y: Vec<GridFunction>,
    /// `q_1..=q_n` at positions `0..n`.
    pub q: Vec<GridFunction>,
    /// `W_0..W_{n-1}`.
    pub w: Vec<GridFunction>,
    /// Per queue `q_m`: first index from which the reverse supremum no longer
    /// sits on `t_min`.
    pub clean_from: Vec<usize>,
}

impl StationaryStack {
    pub fn levels(&self) -> usize {
        self.q.len()
    }

    pub fn q(&self, m: usize) -> &GridFunction {
        &self.q[m - 1]
    }

    /// `W_0..W_{n-1}` as an environment.
    pub fn w_field(&self) -> Result<BrownianField> {
        BrownianField::from_lines(0, self.w.clone())
    }
}

/// Runs the recursion through `n_levels` queues; `field` must cover `0..=n_levels`.
pub fn build_stationary(field: &BrownianField, lambda: f64, n_levels: usize) -> Result<StationaryStack> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(config(format!("lambda must be positive, got {lambda}")));
    }
    if n_levels == 0 {
        return Err(config("need at least one queue"));
    }
    let levels = field.levels();
    if *levels.start() > 0 || *levels.end() < n_levels as i64 {
        return Err(config(format!("field levels {levels:?} do not cover 0..={n_levels}")));
    }
    let spec = *field.spec();
    let b0 = field.require(0)?;
    let y0 = GridFunction::new(
        spec,
        b0.values().iter().enumerate().map(|(j, b)| -b + lambda * spec.time(j)).collect(),
    )?;
    let mut y = vec![y0];
    let mut q = Vec::with_capacity(n_levels);
    let mut w = Vec::with_capacity(n_levels);
    let mut clean_from = Vec::with_capacity(n_levels);
    for m in 1..=n_levels {
        let b = field.require(m as i64)?;
        let prev = y.last().unwrap();
        let queue = rqueue_q(prev, b)?;
        let next = rdepartures(prev, &queue);
        w.push(runused_service(b, &queue));
        clean_from.push(queue.argmax.iter().position(|&a| a > 0).unwrap_or(spec.len()));
        q.push(queue.values);
        y.push(next);
    }
    Ok(StationaryStack { lambda, y, q, w, clean_from })
}

/// Times `t_1 >= t_2 >= ... >= t_n` (grid indices) and the span of the
/// scalar increments taken around them.
#[derive(Debug, Clone)]
pub struct BlockLayout {
    times: Vec<usize>,
    span: usize,
}

impl BlockLayout {
    pub fn staircase(times: Vec<usize>, span: usize) -> Result<Self> {
        if times.windows(2).any(|w| w[0] < w[1]) {
            return Err(config("block times must be nonincreasing in the level index"));
        }
        Self::unchecked(times, span)
    }

    /// No ordering check; for negative controls.
    pub fn unchecked(times: Vec<usize>, span: usize) -> Result<Self> {
        if times.is_empty() || span == 0 {
            return Err(config("need at least one time and a positive span"));
        }
        Ok(BlockLayout { times, span })
    }

    pub fn levels(&self) -> usize {
        self.times.len()
    }
}

fn signed_increment(f: &GridFunction, a: usize, b: usize) -> f64 {
    f.get(b) - f.get(a)
}

/// One scalar per block, in a fixed order with names. Blocks: the W past and
/// q value at each `t_{r+1}`, the Y increment between `t_{r+1}` and `t_r`,
/// the B future after `t_r`, plus the top-level Y past and B future.
pub fn burke_blocks(stack: &StationaryStack, field: &BrownianField, layout: &BlockLayout) -> Result<Vec<(String, f64)>> {
    let n = layout.levels();
    if stack.levels() < n {
        return Err(config(format!("stack has {} queues, layout needs {n}", stack.levels())));
    }
    let len = stack.y[0].len();
    let k = layout.span;
    let t = |r: usize| layout.times[r - 1];
    if layout.times.iter().any(|&j| j < k || j + k >= len) {
        return Err(config("block times too close to the window edge"));
    }
    let mut out = Vec::new();
    out.push(("W_0 past".to_string(), signed_increment(&stack.w[0], t(1) - k, t(1))));
    out.push(("q_1".to_string(), stack.q(1).get(t(1))));
    out.push(("Y_0 future".to_string(), signed_increment(&stack.y[0], t(1), t(1) + k)));
    for r in 1..n {
        let (lo, hi) = (t(r + 1), t(r));
        out.push((format!("W_{r} past"), signed_increment(&stack.w[r], lo - k, lo)));
        out.push((format!("q_{}", r + 1), stack.q(r + 1).get(lo)));
        if lo != hi {
            out.push((format!("Y_{r} between"), signed_increment(&stack.y[r], lo, hi)));
        }
        out.push((format!("B_{r} future"), signed_increment(field.require(r as i64)?, hi, hi + k)));
    }
    out.push((format!("Y_{n} past"), signed_increment(&stack.y[n], t(n) - k, t(n))));
    out.push((format!("B_{n} future"), signed_increment(field.require(n as i64)?, t(n), t(n) + k)));
    Ok(out)
}

/// Largest pairwise |correlation| among blocks across replicas; passes when
/// below `4 / sqrt(replicas)`.
pub fn burke_check(samples: &[Vec<(String, f64)>]) -> Result<(TestReport, (String, String))> {
    let n = samples.len();
    if n < 100 {
        return Err(config("need at least 100 replicas"));
    }
    let width = samples[0].len();
    if samples.iter().any(|s| s.len() != width) {
        return Err(config("replicas have different block sets"));
    }
    let cols: Vec<Vec<f64>> = (0..width).map(|b| samples.iter().map(|s| s[b].1).collect()).collect();
    let mut worst = 0.0;
    let mut pair = (String::new(), String::new());
    for a in 0..width {
        for b in a + 1..width {
            let rho = correlation(&cols[a], &cols[b]).abs();
            if rho > worst {
                worst = rho;
                pair = (samples[0][a].0.clone(), samples[0][b].0.clone());
            }
        }
    }
    let threshold = 4.0 / (n as f64).sqrt();
    let report = TestReport::new("burke max |correlation|", worst, threshold, n, 0);
    Ok((report, pair))
}

/// Distance correlation between two named blocks on the first `subsample`
/// replicas.
pub fn burke_distance_check(
    samples: &[Vec<(String, f64)>],
    first: &str,
    second: &str,
    subsample: usize,
    threshold: f64,
) -> Result<TestReport> {
    let find = |name: &str| {
        samples[0]
            .iter()
            .position(|(n, _)| n == name)
            .ok_or_else(|| config(format!("no block named {name}")))
    };
    let (a, b) = (find(first)?, find(second)?);
    let take = samples.len().min(subsample);
    let xs: Vec<f64> = samples[..take].iter().map(|s| s[a].1).collect();
    let ys: Vec<f64> = samples[..take].iter().map(|s| s[b].1).collect();
    let d = distance_correlation(&xs, &ys);
    Ok(TestReport::new(format!("distance correlation {first} / {second}"), d, threshold, take, 0))
}

/// Finite-`n` LPP differences in the W environment against the stationary
/// quantities `-Y_0(s,t)` and `q_1(t)`.
#[derive(Debug, Clone, Copy)]
pub struct Sandwich {
    pub h_low: f64,
    pub h_mid: f64,
    pub h_high: f64,
    pub v_low: f64,
    pub v_mid: f64,
    pub v_high: f64,
}

impl Sandwich {
    pub fn bracketed(&self) -> bool {
        self.h_low <= self.h_mid && self.h_mid <= self.h_high && self.v_low <= self.v_mid && self.v_mid <= self.v_high
    }
}

/// `field` must cover levels `0..=n + 1`; `s < t` are grid indices.
pub fn sandwich_check(
    field: &BrownianField,
    lambda: f64,
    low: f64,
    high: f64,
    s: usize,
    t: usize,
    n: i64,
) -> Result<Sandwich> {
    let critical = lambda.powi(-2);
    if !(low < critical && critical < high) {
        return Err(config(format!("need {low} < lambda^-2 = {critical} < {high}")));
    }
    if !(s < t) || n < 1 {
        return Err(config("need s < t and n >= 1"));
    }
    let spec = *field.spec();
    let end = |slope: f64| -> Result<usize> {
        let x = n as f64 * slope;
        if x > spec.t_max() || x < spec.time(t) {
            return Err(config(format!("ray end {x} outside [t, t_max]")));
        }
        Ok(spec.zero_index() + (x / spec.step()).round() as usize)
    };
    let stack = build_stationary(field, lambda, n as usize + 1)?;
    let w = stack.w_field()?;
    let diffs = |slope: f64| -> Result<(f64, f64)> {
        let table = ToPointTable::build(&w, Site::new(n, end(slope)?), 0)?;
        let at = |r: i64, j: usize| table.value(Site::new(r, j)).expect("inside table");
        Ok((at(0, t) - at(0, s), at(0, t) - at(1, t)))
    };
    let (h_low, v_low) = diffs(low)?;
    let (h_high, v_high) = diffs(high)?;
    Ok(Sandwich {
        h_low,
        h_mid: -stack.y[0].increment_idx(s, t),
        h_high,
        v_low,
        v_mid: stack.q(1).get(t),
        v_high,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envgen::{sample_field, GridSpec};
    use crate::queueops::rqueue_q;
    use crate::rng::Stream;

    fn small(seed: u64, levels: i64) -> (BrownianField, StationaryStack) {
        let spec = GridSpec::new(-60.0, 10.0, 0.05).unwrap();
        let field = sample_field(&spec, 0..=levels, &Stream::new(seed, 0)).unwrap();
        let stack = build_stationary(&field, 1.0, levels as usize).unwrap();
        (field, stack)
    }

    #[test]
    fn recursion_identities_and_signs() {
        let (field, stack) = small(1, 4);
        let spec = *field.spec();
        for j in 0..spec.len() {
            assert_eq!(stack.y[0].get(j), -field.line(0).unwrap().get(j) + 1.0 * spec.time(j));
        }
        for m in 1..=4 {
            let b = field.line(m as i64).unwrap();
            let queue = rqueue_q(&stack.y[m - 1], b).unwrap();
            assert_eq!(&queue.values, stack.q(m));
            assert_eq!(rdepartures(&stack.y[m - 1], &queue), stack.y[m]);
            assert_eq!(runused_service(b, &queue), stack.w[m - 1]);
            assert!(stack.q(m).values().iter().all(|&v| v >= 0.0));
            assert!(stack.clean_from[m - 1] < spec.len() / 4);
        }
    }

    #[test]
    fn configuration_errors() {
        let spec = GridSpec::new(-5.0, 5.0, 0.1).unwrap();
        let field = sample_field(&spec, 0..=2, &Stream::new(2, 0)).unwrap();
        assert!(build_stationary(&field, 0.0, 2).is_err());
        assert!(build_stationary(&field, 1.0, 3).is_err());
        assert!(build_stationary(&field, 1.0, 0).is_err());
        assert!(BlockLayout::staircase(vec![10, 20], 5).is_err());
        assert!(BlockLayout::unchecked(vec![10, 20], 5).is_ok());
        assert!(sandwich_check(&field, 1.0, 1.0, 1.0, 10, 20, 1).is_err());
        assert!(sandwich_check(&field, 1.0, 0.5, 0.9, 10, 20, 1).is_err());
    }

    #[test]
    fn block_names_for_three_levels() {
        let (field, stack) = small(3, 3);
        let z = field.spec().zero_index();
        let layout = BlockLayout::staircase(vec![z, z - 20, z - 40], 20).unwrap();
        let blocks = burke_blocks(&stack, &field, &layout).unwrap();
        let names: Vec<&str> = blocks.iter().map(|(n, _)| n.as_str()).collect();
        assert_eq!(
            names,
            [
                "W_0 past", "q_1", "Y_0 future", "W_1 past", "q_2", "Y_1 between", "B_1 future", "W_2 past", "q_3",
                "Y_2 between", "B_2 future", "Y_3 past", "B_3 future"
            ]
        );
        let flat = BlockLayout::staircase(vec![z, z, z], 20).unwrap();
        assert_eq!(burke_blocks(&stack, &field, &flat).unwrap().len(), 11);
    }

    #[test]
    fn q_mean_near_inverse_rate() {
        let spec = GridSpec::new(-40.0, 2.0, 0.01).unwrap();
        let vals: Vec<f64> = (0..300)
            .map(|r| {
                let field = sample_field(&spec, 0..=2, &Stream::new(4, r)).unwrap();
                let stack = build_stationary(&field, 2.0, 2).unwrap();
                stack.q(2).get(spec.zero_index())
            })
            .collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        assert!((mean - 0.5).abs() < 4.0 * 0.5 / 300f64.sqrt(), "{mean}");
    }

    #[test]
    fn sandwich_values_are_consistent() {
        let spec = GridSpec::new(-60.0, 40.0, 0.05).unwrap();
        let field = sample_field(&spec, 0..=11, &Stream::new(5, 0)).unwrap();
        let z = spec.zero_index();
        let sw = sandwich_check(&field, 1.0, 0.5, 2.0, z, z + 20, 10).unwrap();
        assert!(sw.v_low >= 0.0 && sw.v_high >= 0.0);
        assert!(sw.h_low <= sw.h_high + 1e-9);
        assert!(sw.v_low <= sw.v_high + 1e-9);
    }
}
