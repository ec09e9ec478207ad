//! Closed-form laws for sups of drifted Brownian motion and a small test kit.
//!
//! Throughout, `M(t) = max_{s >= t} (sqrt(2) W(s) - lambda s)` for a standard
//! Brownian motion `W`, `T` is the argmax of `M(0)` and `D(t) = M(0) - M(t)`.

use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};

use crate::error::{domain, Error, Result};

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// `ln Phi(-a)` for `a >= 0`, accurate far into the tail.
pub fn ln_normal_tail(a: f64) -> f64 {
    if a < 35.0 {
        return normal_cdf(-a).ln();
    }
    // Mills ratio expansion; at a >= 35 the truncation error is below 1e-15
    let a2 = a * a;
    let series = 1.0 - 1.0 / a2 + 3.0 / (a2 * a2) - 15.0 / (a2 * a2 * a2) + 105.0 / (a2 * a2 * a2 * a2);
    -0.5 * a2 - (a * (2.0 * PI).sqrt()).ln() + series.ln()
}

fn check_rate(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(domain(format!("rate must be positive, got {lambda}")))
    }
}

/// `P(M(0) <= x)`, which is the Exp(lambda) CDF.
pub fn exp_sup_cdf(lambda: f64, x: f64) -> Result<f64> {
    check_rate(lambda)?;
    Ok(if x <= 0.0 { 0.0 } else { -(-lambda * x).exp_m1() })
}

/// `P(D(t) <= z)` for `z >= 0`.
pub fn increment_cdf_d(lambda: f64, t: f64, z: f64) -> Result<f64> {
    check_rate(lambda)?;
    if !(t > 0.0) || !(z >= 0.0) || !t.is_finite() || z.is_nan() {
        return Err(domain(format!("need t > 0 and z >= 0, got t = {t}, z = {z}")));
    }
    if z.is_infinite() {
        return Ok(1.0);
    }
    let s = (2.0 * t).sqrt();
    let a = (z + lambda * t) / s;
    let head = normal_cdf((z - lambda * t) / s);
    // e^{lambda z} Phi(-a) and e^{lambda z} e^{-a^2/2}, both in log space
    let w1 = (lambda * z + ln_normal_tail(a)).exp();
    let w2 = (lambda * z - 0.5 * a * a).exp();
    let tail = (1.0 + lambda * z + lambda * lambda * t) * w1 - lambda * (t / PI).sqrt() * w2;
    Ok(clamp_probability(head + tail))
}

/// `P(T > t)` for `t >= 0`.
pub fn argmax_tail(lambda: f64, t: f64) -> Result<f64> {
    check_rate(lambda)?;
    if !(t >= 0.0) {
        return Err(domain(format!("need t >= 0, got {t}")));
    }
    if t == 0.0 {
        return Ok(1.0);
    }
    if t.is_infinite() {
        return Ok(0.0);
    }
    let a = lambda * (t / 2.0).sqrt();
    let v = (2.0 + lambda * lambda * t) * normal_cdf(-a) - lambda * (t / PI).sqrt() * (-0.25 * lambda * lambda * t).exp();
    Ok(clamp_probability(v))
}

fn clamp_probability(p: f64) -> f64 {
    if !(0.0..=1.0).contains(&p) {
        let excess = if p < 0.0 { -p } else { p - 1.0 };
        if excess >= 1e-12 {
            log::warn!("probability {p} leaves [0, 1] by {excess:e}");
        }
    }
    p.clamp(0.0, 1.0)
}

/// Summary of one statistical or deterministic check. `passed` is exactly
/// `value <= threshold`.
#[derive(Debug, Clone, PartialEq)]
pub struct TestReport {
    pub statistic: String,
    pub value: f64,
    pub threshold: f64,
    pub sample_size: usize,
    /// Samples left out because a supremum touched the window edge.
    pub excluded: usize,
    pub passed: bool,
}

impl TestReport {
    pub fn new(statistic: impl Into<String>, value: f64, threshold: f64, sample_size: usize, excluded: usize) -> Self {
        TestReport {
            statistic: statistic.into(),
            value,
            threshold,
            sample_size,
            excluded,
            passed: value <= threshold,
        }
    }
}

fn need_samples(n: usize, min: usize) -> Result<()> {
    if n < min {
        return Err(Error::InsufficientData(format!("{n} samples, need at least {min}")));
    }
    Ok(())
}

/// One-sample Kolmogorov-Smirnov distance. Ties are handled by comparing the
/// CDF with the empirical CDF on both sides of each sample.
pub fn ks_distance(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64> {
    need_samples(samples.len(), 100)?;
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    Ok(d)
}

/// Two-sample Kolmogorov-Smirnov distance `sup |F_a - F_b|`. Tied values
/// are consumed together from both samples before comparing.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64> {
    need_samples(a.len().min(b.len()), 100)?;
    let sorted = |v: &[f64]| {
        let mut v = v.to_vec();
        v.sort_by(f64::total_cmp);
        v
    };
    let (a, b) = (sorted(a), sorted(b));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] == x {
            i += 1;
        }
        while j < b.len() && b[j] == x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Passes when the sample mean is within `k_sigma` standard errors of `mean`.
pub fn moment_check(samples: &[f64], mean_: f64, var: f64, k_sigma: f64) -> Result<TestReport> {
    need_samples(samples.len(), 100)?;
    let n = samples.len();
    let se = (var / n as f64).sqrt();
    Ok(TestReport::new("mean deviation", (mean(samples) - mean_).abs(), k_sigma * se, n, 0))
}

/// Passes when the sample variance is within `k_sigma` standard errors of
/// `var`, using the Gaussian standard error `var * sqrt(2 / (n - 1))`.
pub fn variance_check(samples: &[f64], var: f64, k_sigma: f64) -> Result<TestReport> {
    need_samples(samples.len(), 100)?;
    let n = samples.len();
    let se = var * (2.0 / (n as f64 - 1.0)).sqrt();
    Ok(TestReport::new("variance deviation", (variance(samples) - var).abs(), k_sigma * se, n, 0))
}

/// Pearson correlation; 0 when either sample is constant.
pub fn correlation(xs: &[f64], ys: &[f64]) -> f64 {
    let (mx, my) = (mean(xs), mean(ys));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx).powi(2);
        syy += (y - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        0.0
    } else {
        sxy / (sxx * syy).sqrt()
    }
}

/// Sample distance correlation (V-statistic form). Quadratic in the sample size.
pub fn distance_correlation(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len();
    let centred = |v: &[f64]| -> Vec<f64> {
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                a[i * n + j] = (v[i] - v[j]).abs();
            }
        }
        let row: Vec<f64> = (0..n).map(|i| a[i * n..(i + 1) * n].iter().sum::<f64>() / n as f64).collect();
        let all = row.iter().sum::<f64>() / n as f64;
        for i in 0..n {
            for j in 0..n {
                a[i * n + j] += all - row[i] - row[j];
            }
        }
        a
    };
    let (a, b) = (centred(xs), centred(ys));
    let dot = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(p, q)| p * q).sum::<f64>();
    let (xy, xx, yy) = (dot(&a, &b), dot(&a, &a), dot(&b, &b));
    if xx == 0.0 || yy == 0.0 {
        0.0
    } else {
        (xy / (xx * yy).sqrt()).max(0.0).sqrt()
    }
}

/// CDF of `N(mean, var)`.
pub fn gaussian_cdf(mean_: f64, var: f64) -> impl Fn(f64) -> f64 {
    let sd = var.sqrt();
    move |x| normal_cdf((x - mean_) / sd)
}

/// The scale factor of the Brownian motion in the sup laws above.
pub const NOISE_SCALE: f64 = SQRT_2;

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Exp};

    #[test]
    fn normal_cdf_reference_values() {
        // reference values from a 30-digit evaluation
        let cases = [
            (0.0, 0.5),
            (1.0, 0.841_344_746_068_542_9),
            (-1.0, 0.158_655_253_931_457_05),
            (-3.0, 0.001_349_898_031_630_094_6),
            (-8.0, 6.220_960_574_271_784e-16),
            (2.5, 0.993_790_334_674_223_8),
        ];
        for (x, p) in cases {
            assert!(((normal_cdf(x) - p) / p).abs() < 1e-12, "Phi({x})");
        }
    }

    #[test]
    fn tail_log_joins_smoothly() {
        let below = ln_normal_tail(34.999_999);
        let above = ln_normal_tail(35.0);
        assert!((below - above).abs() < 1e-4);
        assert!((ln_normal_tail(40.0) - (-804.608_442_013_753_8)).abs() < 1e-9);
    }

    #[test]
    fn exp_sup_values() {
        assert_eq!(exp_sup_cdf(1.0, 0.0).unwrap(), 0.0);
        assert!((exp_sup_cdf(1.0, 2f64.ln()).unwrap() - 0.5).abs() < 1e-15);
        assert!(exp_sup_cdf(0.0, 1.0).is_err());
        assert_eq!(exp_sup_cdf(2.0, -1.0).unwrap(), 0.0);
    }

    #[test]
    fn argmax_tail_values() {
        assert_eq!(argmax_tail(1.0, 0.0).unwrap(), 1.0);
        assert!(argmax_tail(1.0, 100.0).unwrap() < 1e-6);
        assert!(argmax_tail(-1.0, 1.0).is_err());
        assert!(argmax_tail(1.0, -1.0).is_err());
        // frozen from the closed form
        assert!((argmax_tail(1.0, 1.0).unwrap() - 0.279_858_893_812_707_8).abs() < 1e-12);
    }

    #[test]
    fn increment_cdf_limits_and_consistency() {
        for &lambda in &[0.5, 1.0, 2.0] {
            for &t in &[0.5f64, 1.0, 4.0] {
                let far = lambda * t + 20.0 * t.sqrt();
                assert!(increment_cdf_d(lambda, t, far).unwrap() > 1.0 - 1e-6);
                let a = increment_cdf_d(lambda, t, 0.0).unwrap();
                let b = argmax_tail(lambda, t).unwrap();
                assert!((a - b).abs() < 1e-12);
            }
        }
        assert!(increment_cdf_d(1.0, 1.0, 1e6).unwrap() <= 1.0);
        assert!(increment_cdf_d(1.0, 0.0, 1.0).is_err());
        assert!(increment_cdf_d(1.0, 1.0, -0.1).is_err());
    }

    #[test]
    fn increment_cdf_is_a_cdf_on_dense_sweeps() {
        for &lambda in &[0.5, 1.0, 2.0] {
            for &t in &[0.5f64, 1.0, 4.0] {
                let top = lambda * t + 25.0 * t.sqrt();
                let mut prev = 0.0;
                for k in 0..10_000 {
                    let z = top * k as f64 / 9_999.0;
                    let p = increment_cdf_d(lambda, t, z).unwrap();
                    assert!((0.0..=1.0).contains(&p));
                    assert!(p >= prev - 1e-15, "lambda {lambda} t {t} z {z}");
                    prev = p;
                }
            }
        }
    }

    #[test]
    fn argmax_tail_monotone() {
        for &lambda in &[0.5, 1.0, 2.0] {
            let mut prev = 1.0;
            for k in 0..5_000 {
                let t = k as f64 * 0.02;
                let p = argmax_tail(lambda, t).unwrap();
                assert!(p <= prev + 1e-15);
                assert!(p <= argmax_tail(lambda * 0.9, t).unwrap() + 1e-15);
                prev = p;
            }
        }
    }

    #[test]
    fn ks_of_constant_sample() {
        let xs = vec![0.3; 200];
        let f = |x: f64| exp_sup_cdf(1.0, x).unwrap();
        let d = ks_distance(&xs, f).unwrap();
        let fc = f(0.3);
        assert!((d - fc.max(1.0 - fc)).abs() < 1e-12);
        assert!(ks_distance(&xs[..50], f).is_err());
    }

    #[test]
    fn ks_null_distribution() {
        // at the 1% level the scaled statistic exceeds 1.63 rarely
        let exp = Exp::new(1.0).unwrap();
        let mut exceed = 0;
        for seed in 0..100 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let xs: Vec<f64> = (0..1000).map(|_| exp.sample(&mut rng)).collect();
            let d = ks_distance(&xs, |x| exp_sup_cdf(1.0, x).unwrap()).unwrap();
            if d * (1000f64).sqrt() > 1.63 {
                exceed += 1;
            }
        }
        assert!(exceed <= 3, "{exceed} exceedances");
    }

    #[test]
    fn two_sample_ks() {
        let xs: Vec<f64> = (0..200).map(|i| i as f64).collect();
        assert_eq!(ks_two_sample(&xs, &xs).unwrap(), 0.0);
        let shifted: Vec<f64> = xs.iter().map(|x| x + 50.0).collect();
        assert!((ks_two_sample(&xs, &shifted).unwrap() - 0.25).abs() < 1e-12);
        let ties = vec![1.0; 150];
        let mixed: Vec<f64> = (0..300).map(|i| if i % 2 == 0 { 1.0 } else { 2.0 }).collect();
        assert!((ks_two_sample(&ties, &mixed).unwrap() - 0.5).abs() < 1e-12);
        let exp = Exp::new(1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a: Vec<f64> = (0..2000).map(|_| exp.sample(&mut rng)).collect();
        let b: Vec<f64> = (0..2000).map(|_| exp.sample(&mut rng)).collect();
        assert!(ks_two_sample(&a, &b).unwrap() < 0.05);
        assert!(ks_two_sample(&a[..10], &b).is_err());
    }

    #[test]
    fn exp_mean_check() {
        let exp = Exp::new(1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let xs: Vec<f64> = (0..10_000).map(|_| exp.sample(&mut rng)).collect();
        assert!(moment_check(&xs, 1.0, 1.0, 4.0).unwrap().passed);
        assert!(!moment_check(&xs, 1.2, 1.0, 4.0).unwrap().passed);
        assert!(moment_check(&xs[..10], 1.0, 1.0, 4.0).is_err());
    }

    #[test]
    fn correlation_basics() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let xs: Vec<f64> = (0..2000).map(|_| rng.random::<f64>()).collect();
        let ys: Vec<f64> = (0..2000).map(|_| rng.random::<f64>()).collect();
        let zs: Vec<f64> = xs.iter().map(|x| 2.0 * x + 1.0).collect();
        assert!(correlation(&xs, &ys).abs() < 4.0 / (2000f64).sqrt());
        assert!((correlation(&xs, &zs) - 1.0).abs() < 1e-12);
        let sq: Vec<f64> = xs.iter().map(|x| (x - 0.5).powi(2)).collect();
        assert!(correlation(&xs, &sq).abs() < 0.1);
        assert!(distance_correlation(&xs[..500], &sq[..500]) > 0.3);
        assert!(distance_correlation(&xs[..500], &ys[..500]) < 0.15);
    }
}
