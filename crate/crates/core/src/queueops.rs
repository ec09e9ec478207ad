//! Queueing maps on grid functions.
//!
//! Forward maps, with `Q(t) = max_{s >= t} {B(t,s) - Z(t,s)}`:
//! `D = Z(t) + (Q(0) - Q(t))` and `R = B(t) + (Q(t) - Q(0))`.
//! Reverse maps, with `Q'(t) = max_{s <= t} {C(s,t) - Y(s,t)}`:
//! `D' = Y(t) + (Q'(t) - Q'(0))` and `R' = C(t) + (Q'(0) - Q'(t))`.
//!
//! The grouping of the additions is fixed so that reflecting both inputs maps
//! forward outputs onto reverse outputs float for float.

use crate::distlib::TestReport;
use crate::envgen::GridFunction;
use crate::error::{domain, Result};

/// A queue-length profile together with the argmax index of each supremum.
#[derive(Debug, Clone)]
pub struct Queue {
    pub values: GridFunction,
    pub argmax: Vec<usize>,
    forward: bool,
}

impl Queue {
    /// True when the supremum at `j` was attained on the window edge
    /// (`t_max` for forward queues, `t_min` for reverse ones).
    pub fn truncated(&self, j: usize) -> bool {
        let edge = if self.forward { self.values.len() - 1 } else { 0 };
        self.argmax[j] == edge
    }

    pub fn at_zero(&self) -> f64 {
        self.values.get(self.values.spec().zero_index())
    }
}

fn same_grid(a: &GridFunction, b: &GridFunction) -> Result<()> {
    if a.spec() != b.spec() {
        return Err(domain("queue inputs live on different grids"));
    }
    Ok(())
}

/// Forward queue `Q(Z, B)`; the argmax is the leftmost maximizer.
pub fn queue_q(z: &GridFunction, b: &GridFunction) -> Result<Queue> {
    same_grid(z, b)?;
    let (zv, bv) = (z.values(), b.values());
    let n = zv.len();
    let mut q = vec![0.0; n];
    let mut argmax = vec![0; n];
    let mut best = f64::NEG_INFINITY;
    let mut arg = n - 1;
    for j in (0..n).rev() {
        let g = bv[j] - zv[j];
        if g >= best {
            best = g;
            arg = j;
        }
        q[j] = best - g;
        argmax[j] = arg;
    }
    Ok(Queue { values: GridFunction::from_vec_unchecked(*z.spec(), q), argmax, forward: true })
}

/// `D(Z, B)` from a precomputed `Q(Z, B)`.
pub fn departures(z: &GridFunction, q: &Queue) -> GridFunction {
    let q0 = q.at_zero();
    let values = z.values().iter().zip(q.values.values()).map(|(zj, qj)| zj + (q0 - qj)).collect();
    GridFunction::from_vec_unchecked(*z.spec(), values)
}

/// `R(Z, B)` from a precomputed `Q(Z, B)`.
pub fn unused_service(b: &GridFunction, q: &Queue) -> GridFunction {
    let q0 = q.at_zero();
    let values = b.values().iter().zip(q.values.values()).map(|(bj, qj)| bj + (qj - q0)).collect();
    GridFunction::from_vec_unchecked(*b.spec(), values)
}

pub fn queue_d(z: &GridFunction, b: &GridFunction) -> Result<GridFunction> {
    Ok(departures(z, &queue_q(z, b)?))
}

pub fn queue_r(z: &GridFunction, b: &GridFunction) -> Result<GridFunction> {
    Ok(unused_service(b, &queue_q(z, b)?))
}

/// Reverse queue `Q'(Y, C)`; the argmax is the rightmost maximizer.
pub fn rqueue_q(y: &GridFunction, c: &GridFunction) -> Result<Queue> {
    same_grid(y, c)?;
    let (yv, cv) = (y.values(), c.values());
    let n = yv.len();
    let mut q = vec![0.0; n];
    let mut argmax = vec![0; n];
    let mut best = f64::NEG_INFINITY;
    let mut arg = 0;
    for j in 0..n {
        let g = -cv[j] + yv[j];
        if g >= best {
            best = g;
            arg = j;
        }
        q[j] = best - g;
        argmax[j] = arg;
    }
    Ok(Queue { values: GridFunction::from_vec_unchecked(*y.spec(), q), argmax, forward: false })
}

/// `D'(Y, C)` from a precomputed `Q'(Y, C)`.
pub fn rdepartures(y: &GridFunction, q: &Queue) -> GridFunction {
    let q0 = q.at_zero();
    let values = y.values().iter().zip(q.values.values()).map(|(yj, qj)| yj + (qj - q0)).collect();
    GridFunction::from_vec_unchecked(*y.spec(), values)
}

/// `R'(Y, C)` from a precomputed `Q'(Y, C)`.
pub fn runused_service(c: &GridFunction, q: &Queue) -> GridFunction {
    let q0 = q.at_zero();
    let values = c.values().iter().zip(q.values.values()).map(|(cj, qj)| cj + (q0 - qj)).collect();
    GridFunction::from_vec_unchecked(*c.spec(), values)
}

pub fn rqueue_d(y: &GridFunction, c: &GridFunction) -> Result<GridFunction> {
    Ok(rdepartures(y, &rqueue_q(y, c)?))
}

pub fn rqueue_r(y: &GridFunction, c: &GridFunction) -> Result<GridFunction> {
    Ok(runused_service(c, &rqueue_q(y, c)?))
}

/// Service/arrival pair for the forward maps.
#[derive(Debug, Clone)]
pub struct QueuePair {
    pub z: GridFunction,
    pub b: GridFunction,
}

impl QueuePair {
    pub fn new(z: GridFunction, b: GridFunction) -> Result<Self> {
        same_grid(&z, &b)?;
        let j0 = z.spec().zero_index();
        if z.get(j0) != 0.0 || b.get(j0) != 0.0 {
            return Err(domain("queue inputs must vanish at 0"));
        }
        Ok(QueuePair { z, b })
    }

    /// Warning when `B - Z` fails to fall by 5 standard deviations between
    /// 0 and `t_max`, the sd being estimated from the per-step increments.
    pub fn drift_warning(&self) -> Option<String> {
        let spec = self.z.spec();
        let (j0, end) = (spec.zero_index(), spec.last_index());
        let g: Vec<f64> = (j0..=end).map(|j| self.b.get(j) - self.z.get(j)).collect();
        let steps = g.len() - 1;
        if steps < 2 {
            return Some("window too short to judge the drift".into());
        }
        let incs: Vec<f64> = g.windows(2).map(|w| w[1] - w[0]).collect();
        let mean = incs.iter().sum::<f64>() / steps as f64;
        let var = incs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (steps - 1) as f64;
        let sd = (var * steps as f64).sqrt();
        let fall = g[0] - g[steps];
        (fall < 5.0 * sd).then(|| {
            format!("B - Z falls by {fall:.3} over [0, t_max], less than 5 sd ({:.3})", 5.0 * sd)
        })
    }
}

/// Largest absolute difference over `range`.
fn max_dev(a: &GridFunction, b: &GridFunction, range: std::ops::Range<usize>) -> f64 {
    range.map(|j| (a.get(j) - b.get(j)).abs()).fold(0.0, f64::max)
}

/// Outcome of one inversion check.
#[derive(Debug, Clone)]
pub struct Inversion {
    pub max_deviation: f64,
    /// Some supremum on the interior touched the window edge, or the queue
    /// never emptied between `t_min` and the start of the interior.
    pub truncated: bool,
    pub report: TestReport,
}

/// Middle half of a grid of `n` points.
pub fn middle_half(n: usize) -> std::ops::Range<usize> {
    n / 4..n - n / 4
}

/// Runs `Y = D(Z,B)`, `C = R(Z,B)` and compares `D'(Y,C)`, `R'(Y,C)`,
/// `Q'(Y,C)` with `Z`, `B`, `Q(Z,B)` on `interior` (default: middle half).
pub fn invert_check(pair: &QueuePair, interior: Option<std::ops::Range<usize>>) -> Result<Inversion> {
    let n = pair.z.len();
    let interior = interior.unwrap_or_else(|| middle_half(n));
    if interior.is_empty() || interior.end > n {
        return Err(domain("interior window outside the grid"));
    }
    let q = queue_q(&pair.z, &pair.b)?;
    let y = departures(&pair.z, &q);
    let c = unused_service(&pair.b, &q);
    let rq = rqueue_q(&y, &c)?;
    let z2 = rdepartures(&y, &rq);
    let b2 = runused_service(&c, &rq);
    let emptied = q.values.values()[..=interior.start].iter().any(|&v| v == 0.0);
    let truncated = !emptied || interior.clone().any(|j| q.truncated(j) || rq.truncated(j));
    let dev = max_dev(&z2, &pair.z, interior.clone())
        .max(max_dev(&b2, &pair.b, interior.clone()))
        .max(max_dev(&rq.values, &q.values, interior.clone()));
    let excluded = usize::from(truncated);
    let report = TestReport::new("inversion max deviation", dev, 1e-9, interior.len(), excluded);
    Ok(Inversion { max_deviation: dev, truncated, report })
}

/// Checks `min_{s >= t} (2F(s) - f(s)) = F(t)` with `F` the running maximum
/// from `t_min`, at every grid point. Where `f` never returns to `F(t)` on
/// `[t, t_max]` the point is flagged and only `min >= F(t)` is required.
pub fn pitman_check(f: &GridFunction) -> TestReport {
    let v = f.values();
    let n = v.len();
    let mut run_max = Vec::with_capacity(n);
    let mut m = f64::NEG_INFINITY;
    for &x in v {
        m = m.max(x);
        run_max.push(m);
    }
    // inf over s >= t of 2F(s) - f(s), and whether f hits F(t) again on [t, end]
    let mut lhs = vec![0.0; n];
    let mut best = f64::INFINITY;
    for j in (0..n).rev() {
        best = best.min(2.0 * run_max[j] - v[j]);
        lhs[j] = best;
    }
    // f(s) == F(t) for some s >= t: F is constant from t until f first exceeds it,
    // so it suffices to look for an s with f(s) == F(s) == F(t).
    let mut returns = vec![false; n];
    let mut last_record_value = f64::NAN;
    for j in (0..n).rev() {
        if v[j] == run_max[j] {
            last_record_value = v[j];
        }
        returns[j] = last_record_value == run_max[j];
    }
    let mut violations = 0usize;
    let mut flagged = 0usize;
    for j in 0..n {
        if returns[j] {
            if lhs[j] != run_max[j] {
                violations += 1;
            }
        } else {
            flagged += 1;
            if lhs[j] < run_max[j] {
                violations += 1;
            }
        }
    }
    TestReport::new("pitman violations", violations as f64, 0.0, n, flagged)
}
